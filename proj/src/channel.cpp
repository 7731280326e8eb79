#include "qkd/channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qkd {

namespace {
constexpr double kPi = 3.14159265358979323846;
// Group delay per meter: single-mode fiber (n ~ 1.47) and air.
constexpr double kFiberPsPerM = 4903.0;
constexpr double kAirPsPerM = 3336.0;
}  // namespace

void ChannelModel::validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(static_transmission)) throw std::domain_error("ChannelModel: static_transmission outside [0,1]");
    if (!prob(coupling_mean)) throw std::domain_error("ChannelModel: coupling_mean outside [0,1]");
    if (coupling_sigma < 0) throw std::domain_error("ChannelModel: coupling_sigma must be >= 0");
    if (coupling_tau_s <= 0) throw std::domain_error("ChannelModel: coupling_tau must be > 0");
    if (length_m < 0) throw std::domain_error("ChannelModel: length must be >= 0");
}

int64_t ChannelModel::propagation_delay_ps() const {
    const double per_m = kind == ChannelKind::Fiber ? kFiberPsPerM : kAirPsPerM;
    return static_cast<int64_t>(std::llround(length_m * per_m));
}

ChannelModel ChannelModel::preset(const std::string& name) {
    ChannelModel m;
    if (name == "ideal") {
        m.kind = ChannelKind::Ideal;
    } else if (name == "fiber-250m") {
        m.kind = ChannelKind::Fiber;
        m.static_transmission = 0.80;
        m.coupling_mean = 1.0;
        m.coupling_sigma = 0.0;
        m.length_m = 250.0;
    } else if (name == "freespace-270m") {
        m.kind = ChannelKind::FreeSpace;
        m.static_transmission = 0.90;  // atmospheric attenuation
        m.coupling_mean = 0.40;        // receiver fiber coupling
        m.coupling_sigma = 0.10;
        m.coupling_tau_s = 0.1;
        m.length_m = 270.0;
    } else {
        throw std::invalid_argument("unknown channel preset: " + name);
    }
    return m;
}

ChannelState::ChannelState(const ChannelModel& model, uint64_t seed)
    : model_(model), rng_(seed) {
    model_.validate();
    x_ = model_.coupling_mean;
}

double ChannelState::instantaneous_coupling(double t_s) {
    if (model_.coupling_sigma <= 0) return model_.coupling_mean;
    if (!started_) {
        // start from the stationary distribution
        x_ = model_.coupling_mean + model_.coupling_sigma * rng_.gaussian();
        last_t_s_ = t_s;
        started_ = true;
    } else if (t_s > last_t_s_) {
        const double rho = std::exp(-(t_s - last_t_s_) / model_.coupling_tau_s);
        x_ = model_.coupling_mean + rho * (x_ - model_.coupling_mean) +
             model_.coupling_sigma * std::sqrt(1.0 - rho * rho) * rng_.gaussian();
        last_t_s_ = t_s;
    }
    return std::clamp(x_, 0.0, 1.0);
}

TransmitResult ChannelState::transmit(const PhotonEvent& event) {
    const double t_s = static_cast<double>(event.true_time_ps) * 1e-12;
    const double p = model_.static_transmission * instantaneous_coupling(t_s);
    TransmitResult r;
    r.survives = rng_.bernoulli(p);
    r.rotation_rad = std::fmod(model_.drift_rate_rad_s * t_s, kPi);
    if (r.rotation_rad < 0) r.rotation_rad += kPi;
    return r;
}

TransmitResult ChannelState::transmit_thinned(const PhotonEvent& event) {
    const double t_s = static_cast<double>(event.true_time_ps) * 1e-12;
    TransmitResult r;
    r.survives = rng_.bernoulli(instantaneous_coupling(t_s));
    r.rotation_rad = std::fmod(model_.drift_rate_rad_s * t_s, kPi);
    if (r.rotation_rad < 0) r.rotation_rad += kPi;
    return r;
}

}  // namespace qkd
