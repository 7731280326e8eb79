#include "qkd/session.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace qkd {

namespace {
constexpr double kPi = 3.14159265358979323846;

// Probability that a pair leaves at least one detection candidate once the
// per-photon survival bounds (static channel transmission and detector
// efficiency) are folded into the source. Only the time-varying coupling is
// left for per-photon sampling.
double pair_keep_prob(const SessionConfig& cfg) {
    const double pa = cfg.channel.static_transmission * cfg.detector_alice.efficiency;
    const double pb = cfg.detector_bob.efficiency;
    return pa + pb - pa * pb;
}
}

BasisScheme BasisScheme::standard() {
    BasisScheme s;
    s.alice_angles_rad = {0.0, kPi / 8.0, -kPi / 8.0 + kPi};  // A_k, A_0 (+22.5), A_1 (-22.5)
    s.alice_probs = {0.5, 0.25, 0.25};
    s.bob_angles_rad = {0.0, kPi / 4.0};  // B_0, B_1 (45)
    s.bob_probs = {0.5, 0.5};
    return s;
}

void BasisScheme::validate() const {
    auto sum3 = alice_probs[0] + alice_probs[1] + alice_probs[2];
    auto sum2 = bob_probs[0] + bob_probs[1];
    if (std::abs(sum3 - 1.0) > 1e-12 || std::abs(sum2 - 1.0) > 1e-12)
        throw std::domain_error("BasisScheme: probabilities must sum to 1 per party");
    for (double p : alice_probs)
        if (p < 0) throw std::domain_error("BasisScheme: negative probability");
    for (double p : bob_probs)
        if (p < 0) throw std::domain_error("BasisScheme: negative probability");
}

uint64_t BasisScheme::hash() const {
    uint64_t h = 0x9d3f8c1a2b4e5f60ULL;
    auto mix = [&h](double x) {
        uint64_t u;
        static_assert(sizeof(u) == sizeof(x));
        std::memcpy(&u, &x, 8);
        h = hash_combine(h, u);
    };
    for (double a : alice_angles_rad) mix(a);
    for (double p : alice_probs) mix(p);
    for (double a : bob_angles_rad) mix(a);
    for (double p : bob_probs) mix(p);
    return h;
}

uint8_t assign_basis(Party party, const BasisScheme& scheme, Rng& rng) {
    const double u = rng.uniform();
    if (party == Party::Alice) {
        if (u < scheme.alice_probs[0]) return 0;
        if (u < scheme.alice_probs[0] + scheme.alice_probs[1]) return 1;
        return 2;
    }
    return u < scheme.bob_probs[0] ? 0 : 1;
}

void CorrelatorCounts::add(int sa, int sb) {
    if (sa > 0 && sb > 0) ++n_pp;
    else if (sa < 0 && sb < 0) ++n_mm;
    else if (sa > 0) ++n_pm;
    else ++n_mp;
}

Estimate correlation_from_counts(const CorrelatorCounts& c) {
    const double n = static_cast<double>(c.total());
    if (n <= 0) throw InsufficientStats("correlation_from_counts: no counts");
    const double same = static_cast<double>(c.n_pp + c.n_mm);
    const double diff = static_cast<double>(c.n_pm + c.n_mp);
    const double e = (same - diff) / n;
    // Poisson propagation of E = (P - M)/(P + M): sigma^2 = 4 P M / N^3
    const double sigma = n > 0 ? std::sqrt(std::max(4.0 * same * diff, 1.0)) / (n * std::sqrt(n))
                               : 0.0;
    return {e, sigma};
}

Estimate estimate_qber(const CorrelatorCounts& key_counts) {
    const Estimate e = correlation_from_counts(key_counts);
    return {(1.0 - e.value) / 2.0, e.sigma / 2.0};
}

Estimate estimate_chsh(const CorrelatorCounts& e00, const CorrelatorCounts& e01,
                       const CorrelatorCounts& e10, const CorrelatorCounts& e11) {
    const Estimate a = correlation_from_counts(e00);
    const Estimate b = correlation_from_counts(e01);
    const Estimate c = correlation_from_counts(e10);
    const Estimate d = correlation_from_counts(e11);
    const double s = a.value + b.value + c.value - d.value;
    const double sigma = std::sqrt(a.sigma * a.sigma + b.sigma * b.sigma + c.sigma * c.sigma +
                                   d.sigma * d.sigma);
    return {s, sigma};
}

AbortReason security_gate(double qber, double s_value, double qber_max, double s_min) {
    if (s_value <= s_min) return AbortReason::Bell;
    if (qber >= qber_max) return AbortReason::QBER;
    return AbortReason::None;
}

std::string abort_reason_name(AbortReason r) {
    switch (r) {
        case AbortReason::None: return "none";
        case AbortReason::Bell: return "Bell";
        case AbortReason::QBER: return "QBER";
    }
    return "unknown";
}

int64_t SessionConfig::n_packets() const {
    return static_cast<int64_t>(std::floor(total_duration_s / packet_duration_s + 1e-9));
}

void SessionConfig::validate() const {
    emitter.validate();
    channel.validate();
    detector_alice.validate();
    detector_bob.validate();
    clock_alice.validate();
    clock_bob.validate();
    scheme.validate();
    if (packet_duration_s <= 0) throw std::domain_error("SessionConfig: packet duration must be > 0");
    if (total_duration_s < packet_duration_s)
        throw std::domain_error("SessionConfig: total duration shorter than one packet");
    if (qber_sample_fraction < 0 || qber_sample_fraction > 1)
        throw std::domain_error("SessionConfig: qber_sample_fraction outside [0,1]");
    if (sync.window_ps <= 0) throw std::domain_error("SessionConfig: coincidence window must be > 0");
}

PacketSimulator::PacketSimulator(const SessionConfig& cfg)
    : cfg_(cfg),
      pair_state_(effective_pair_state(cfg.emitter)),
      emitter_(cfg.emitter, derive_seed(cfg.seed, "emitter"), pair_keep_prob(cfg)),
      channel_(cfg.channel, derive_seed(cfg.seed, "channel")),
      physics_rng_(derive_seed(cfg.seed, "physics")),
      thin_rng_(derive_seed(cfg.seed, "thin")),
      alice_det_rng_(derive_seed(cfg.seed, "det-alice")),
      bob_det_rng_(derive_seed(cfg.seed, "det-bob")),
      dark_rng_(derive_seed(cfg.seed, "dark")),
      map_(ChannelMap::standard()),
      last_click_ps_(map_.size(), INT64_MIN) {
    cfg_.validate();
    pulses_per_packet_ = static_cast<int64_t>(
        std::llround(cfg_.packet_duration_s * cfg_.emitter.rep_rate_hz));
    prop_delay_ps_ = cfg_.channel.propagation_delay_ps();
    const double pa = cfg_.channel.static_transmission * cfg_.detector_alice.efficiency;
    const double pb = cfg_.detector_bob.efficiency;
    const double keep = pair_keep_prob(cfg_);
    if (keep > 0) {
        thin_a_only_ = pa * (1.0 - pb) / keep;
        thin_b_only_ = thin_a_only_ + (1.0 - pa) * pb / keep;
    }
}

SimPacket PacketSimulator::next_packet() {
    const int64_t p = packet_index_++;
    const int64_t last_pulse = (p + 1) * pulses_per_packet_;
    const double period_ps = cfg_.emitter.pulse_period_ps();
    const int64_t t_begin = static_cast<int64_t>(std::llround(static_cast<double>(p) *
                                                              pulses_per_packet_ * period_ps));
    const int64_t t_end = static_cast<int64_t>(std::llround(static_cast<double>(last_pulse) *
                                                            period_ps));

    struct Click {
        int64_t true_time_ps;
        uint8_t channel;
    };
    std::vector<Click> clicks;
    std::vector<PhotonEvent> photons;

    while (emitter_.next_emission(last_pulse, photons)) {
        // photons holds one or two (XX, X) pairs for this pulse
        for (size_t i = 0; i + 1 < photons.size(); i += 2) {
            const PhotonEvent& xx = photons[i];      // Bob's photon
            const PhotonEvent& x = photons[i + 1];   // Alice's photon, through the channel

            // the emitter already thinned to pairs with at least one
            // detection candidate; classify which side that is
            const double u = thin_rng_.uniform();
            const bool b_clicks = u >= thin_a_only_;
            TransmitResult tr;
            bool a_clicks = false;
            if (u < thin_a_only_ || u >= thin_b_only_) {
                tr = channel_.transmit_thinned(x);
                a_clicks = tr.survives;
            }
            if (!a_clicks && !b_clicks) continue;

            int sa = 0, sb = 0;
            uint8_t basis_a = 0, basis_b = 0;
            if (a_clicks) basis_a = assign_basis(Party::Alice, cfg_.scheme, physics_rng_);
            if (b_clicks) basis_b = assign_basis(Party::Bob, cfg_.scheme, physics_rng_);

            if (a_clicks && b_clicks && !xx.background) {
                PairState state = pair_state_;
                state.rotation_offset = std::fmod(state.rotation_offset + tr.rotation_rad, kPi);
                const auto [oa, ob] = sample_outcomes(
                    state, BasisAngle(cfg_.scheme.alice_angles_rad[basis_a]),
                    BasisAngle(cfg_.scheme.bob_angles_rad[basis_b]), physics_rng_);
                sa = oa;
                sb = ob;
            } else {
                // single-sided detections and background pairs carry no correlations
                if (a_clicks) sa = physics_rng_.bernoulli(0.5) ? 1 : -1;
                if (b_clicks) sb = physics_rng_.bernoulli(0.5) ? 1 : -1;
            }

            if (a_clicks) {
                int64_t t = x.true_time_ps + prop_delay_ps_;
                if (cfg_.detector_alice.jitter_sigma_ps > 0)
                    t += static_cast<int64_t>(
                        std::llround(alice_det_rng_.gaussian(0.0, cfg_.detector_alice.jitter_sigma_ps)));
                clicks.push_back({std::max<int64_t>(t, 0),
                                  map_.id_of(Party::Alice, basis_a, sa)});
            }
            if (b_clicks) {
                int64_t t = xx.true_time_ps;
                if (cfg_.detector_bob.jitter_sigma_ps > 0)
                    t += static_cast<int64_t>(
                        std::llround(bob_det_rng_.gaussian(0.0, cfg_.detector_bob.jitter_sigma_ps)));
                clicks.push_back({std::max<int64_t>(t, 0),
                                  map_.id_of(Party::Bob, basis_b, sb)});
            }
        }
        photons.clear();
    }

    // dark counts, uniform over the packet on every detector channel
    for (uint8_t ch = 0; ch < map_.size(); ++ch) {
        const auto& det = map_.lookup(ch).party == Party::Alice ? cfg_.detector_alice
                                                                : cfg_.detector_bob;
        for (int64_t t : dark_count_times(det, t_begin, t_end, dark_rng_))
            clicks.push_back({t, ch});
    }

    // dead-time filtering per detector, in physical arrival order
    std::stable_sort(clicks.begin(), clicks.end(), [](const Click& a, const Click& b) {
        return a.true_time_ps < b.true_time_ps;
    });
    SimPacket packet;
    for (const Click& c : clicks) {
        const auto& det = map_.lookup(c.channel).party == Party::Alice ? cfg_.detector_alice
                                                                       : cfg_.detector_bob;
        int64_t& last = last_click_ps_[c.channel];
        if (last != INT64_MIN && c.true_time_ps - last < static_cast<int64_t>(det.dead_time_ps))
            continue;
        last = c.true_time_ps;
        if (map_.lookup(c.channel).party == Party::Alice)
            packet.alice_tags.push_back({cfg_.clock_alice.localize(c.true_time_ps), c.channel});
        else
            packet.bob_tags.push_back({cfg_.clock_bob.localize(c.true_time_ps), c.channel});
    }
    auto by_time = [](const TimeTag& a, const TimeTag& b) {
        return a.timestamp_ps < b.timestamp_ps;
    };
    std::sort(packet.alice_tags.begin(), packet.alice_tags.end(), by_time);
    std::sort(packet.bob_tags.begin(), packet.bob_tags.end(), by_time);
    return packet;
}

std::string metrics_to_csv(const std::vector<SessionMetrics>& metrics, double packet_duration_s) {
    std::ostringstream s;
    s << "t,qber,S,S_err,raw_rate,key_rate\n";
    for (const auto& m : metrics) {
        const double t = (static_cast<double>(m.packet_index) + 1.0) * packet_duration_s;
        s << t << ',' << m.qber << ',' << m.s_value << ',' << m.s_sigma << ','
          << static_cast<double>(m.raw_coincidences) / packet_duration_s << ','
          << static_cast<double>(m.sifted_bits) / packet_duration_s << '\n';
    }
    return s.str();
}

}  // namespace qkd
