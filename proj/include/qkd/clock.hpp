#pragma once

#include <cstdint>

#include "qkd/rng.hpp"

namespace qkd {

// Disciplined local oscillator: constant offset, fractional frequency error,
// and a periodic re-anchoring that bounds the accumulated drift. The drift
// error is a zero-centered sawtooth of amplitude drift * interval / 2, plus
// Gaussian anchoring jitter drawn deterministically per interval.
struct ClockModel {
    double offset_ps = 0.0;
    double drift = 0.0;  // |drift| < 1e-6
    double discipline_interval_s = 1.0;
    double discipline_jitter_ps = 0.0;
    uint64_t noise_seed = 0;

    void validate() const;
    int64_t localize(int64_t true_time_ps) const;
};

}  // namespace qkd
