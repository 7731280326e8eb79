#pragma once

#include <cstdint>
#include <string>

#include "qkd/emitter.hpp"
#include "qkd/rng.hpp"

namespace qkd {

enum class ChannelKind : uint8_t { Ideal, Fiber, FreeSpace };

// Quantum channel on Alice's arm: static transmission, a slowly fluctuating
// coupling efficiency, and an optional residual polarization drift.
struct ChannelModel {
    ChannelKind kind = ChannelKind::Ideal;
    double static_transmission = 1.0;
    double coupling_mean = 1.0;
    double coupling_sigma = 0.0;
    double coupling_tau_s = 0.1;    // correlation time of the coupling process
    double drift_rate_rad_s = 0.0;  // residual polarization rotation
    double length_m = 0.0;

    void validate() const;
    // Constant signal propagation delay through the channel.
    int64_t propagation_delay_ps() const;

    static ChannelModel preset(const std::string& name);  // "fiber-250m", "freespace-270m", "ideal"
};

struct TransmitResult {
    bool survives = false;
    double rotation_rad = 0.0;  // polarization rotation at the photon's time, mod pi
};

// Carries the AR(1) memory of the coupling fluctuation; one instance per
// photon stream, queried with non-decreasing times.
class ChannelState {
public:
    ChannelState(const ChannelModel& model, uint64_t seed);

    // Stationary clipped AR(1): mean coupling_mean, std coupling_sigma,
    // autocorrelation time coupling_tau.
    double instantaneous_coupling(double t_s);

    TransmitResult transmit(const PhotonEvent& event);

    // Survival conditioned on the static transmission having been applied
    // upstream (for example folded into source-side thinning): only the
    // time-varying coupling fluctuation is sampled here.
    TransmitResult transmit_thinned(const PhotonEvent& event);

    const ChannelModel& model() const { return model_; }

private:
    ChannelModel model_;
    Rng rng_;
    double x_;           // unclipped process value
    double last_t_s_ = 0.0;
    bool started_ = false;
};

}  // namespace qkd
