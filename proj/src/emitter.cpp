#include "qkd/emitter.hpp"

#include <cmath>
#include <stdexcept>

namespace qkd {

namespace {
constexpr double kHbarUeVNs = 0.6582119;  // hbar in ueV * ns
}

void EmitterConfig::validate() const {
    if (rep_rate_hz <= 0) throw std::domain_error("EmitterConfig: rep_rate must be > 0");
    if (pair_prob < 0 || pair_prob > 1) throw std::domain_error("EmitterConfig: pair_prob outside [0,1]");
    if (g2_x < 0 || g2_x > 1 || g2_xx < 0 || g2_xx > 1)
        throw std::domain_error("EmitterConfig: g2 outside [0,1]");
    if (fss_ueV < 0) throw std::domain_error("EmitterConfig: fss must be >= 0");
    if (exciton_lifetime_ns <= 0) throw std::domain_error("EmitterConfig: exciton lifetime must be > 0");
}

PulseTrainEmitter::PulseTrainEmitter(const EmitterConfig& cfg, uint64_t seed, double keep_prob)
    : cfg_(cfg), rng_(seed) {
    cfg_.validate();
    if (keep_prob < 0 || keep_prob > 1)
        throw std::domain_error("PulseTrainEmitter: keep_prob outside [0,1]");
    p_main_ = cfg_.pair_prob * keep_prob;
    p_bg_ = cfg_.g2_x * cfg_.pair_prob * keep_prob;
    p_any_ = 1.0 - (1.0 - p_main_) * (1.0 - p_bg_);
    cursor_ = 0;
}

int64_t PulseTrainEmitter::skip_to_next(int64_t from) {
    if (p_any_ <= 0) return INT64_MAX;
    if (p_any_ >= 1.0) return from;
    // geometric gap: number of empty pulses before the next emitting one
    double u = rng_.uniform();
    while (u <= 0) u = rng_.uniform();
    double gap = std::floor(std::log(u) / std::log1p(-p_any_));
    if (gap > 9.0e18) return INT64_MAX;
    return from + static_cast<int64_t>(gap);
}

bool PulseTrainEmitter::next_emission(int64_t last_pulse, std::vector<PhotonEvent>& out) {
    int64_t pulse = skip_to_next(cursor_);
    if (pulse >= last_pulse) {
        cursor_ = last_pulse;
        return false;
    }
    cursor_ = pulse + 1;

    // Conditioned on "at least one of the two independent events fired".
    const double p_main_given_any = p_main_ / p_any_;
    const double p_both = p_main_ * p_bg_ / p_any_;
    bool main_pair, bg_pair;
    const double u = rng_.uniform();
    if (u < p_both) {
        main_pair = bg_pair = true;
    } else if (u < p_main_given_any) {
        main_pair = true;
        bg_pair = false;
    } else {
        main_pair = false;
        bg_pair = true;
    }

    const double period = cfg_.pulse_period_ps();
    const double pulse_time = static_cast<double>(pulse) * period;
    auto emit_pair = [&](bool background) {
        const int64_t id = next_pair_id_++;
        const int64_t t_xx = static_cast<int64_t>(std::llround(pulse_time));
        const double delay = rng_.exponential(cfg_.exciton_lifetime_ns * 1e3);  // ps
        const int64_t t_x = t_xx + static_cast<int64_t>(std::llround(delay));
        out.push_back({pulse, Arm::XX, t_xx, id, background});
        out.push_back({pulse, Arm::X, t_x, id, background});
    };
    if (main_pair) emit_pair(false);
    if (bg_pair) emit_pair(true);
    return true;
}

std::vector<PhotonEvent> emit_pulse_train(const EmitterConfig& cfg, int64_t n_pulses, uint64_t seed) {
    if (n_pulses < 1) throw std::domain_error("emit_pulse_train: n_pulses must be >= 1");
    PulseTrainEmitter emitter(cfg, seed);
    std::vector<PhotonEvent> out;
    while (emitter.next_emission(n_pulses, out)) {
    }
    return out;
}

double fss_visibility(double fss_ueV, double exciton_lifetime_ns) {
    if (fss_ueV < 0) throw std::domain_error("fss_visibility: fss must be >= 0");
    if (exciton_lifetime_ns <= 0) throw std::domain_error("fss_visibility: lifetime must be > 0");
    const double x = fss_ueV * exciton_lifetime_ns / kHbarUeVNs;
    return 1.0 / std::sqrt(1.0 + x * x);
}

PairState effective_pair_state(const EmitterConfig& cfg) {
    cfg.validate();
    if (cfg.visibility_override) return PairState(*cfg.visibility_override);
    if (cfg.target_fidelity) return PairState(visibility_from_fidelity(*cfg.target_fidelity));
    return PairState(fss_visibility(cfg.fss_ueV, cfg.exciton_lifetime_ns));
}

}  // namespace qkd
