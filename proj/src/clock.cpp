#include "qkd/clock.hpp"

#include <cmath>
#include <stdexcept>

namespace qkd {

void ClockModel::validate() const {
    if (std::abs(drift) >= 1e-6) throw std::domain_error("ClockModel: |drift| must be < 1e-6");
    if (discipline_interval_s <= 0) throw std::domain_error("ClockModel: discipline interval must be > 0");
    if (discipline_jitter_ps < 0) throw std::domain_error("ClockModel: discipline jitter must be >= 0");
}

int64_t ClockModel::localize(int64_t true_time_ps) const {
    if (true_time_ps < 0) throw std::domain_error("ClockModel::localize: true_time must be >= 0");
    const double interval_ps = discipline_interval_s * 1e12;
    const double t = static_cast<double>(true_time_ps);
    const int64_t k = static_cast<int64_t>(std::floor(t / interval_ps));
    const double phase = t - static_cast<double>(k) * interval_ps;
    double err = drift * (phase - 0.5 * interval_ps);
    if (discipline_jitter_ps > 0) {
        // deterministic per-interval anchor jitter: Box-Muller on hashed bits
        const uint64_t h1 = hash_combine(noise_seed, static_cast<uint64_t>(k));
        const uint64_t h2 = splitmix64(h1);
        const double u1 = ((h1 >> 11) * 0x1.0p-53) + 0x1.0p-54;
        const double u2 = (h2 >> 11) * 0x1.0p-53;
        const double g = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
        err += discipline_jitter_ps * g;
    }
    return true_time_ps + static_cast<int64_t>(std::llround(offset_ps + err));
}

}  // namespace qkd
