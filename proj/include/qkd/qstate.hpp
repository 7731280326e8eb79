#pragma once

#include <optional>
#include <utility>

#include "qkd/rng.hpp"

namespace qkd {

// Linear polarization analyzer angle, stored in [0, pi).
class BasisAngle {
public:
    BasisAngle() = default;
    explicit BasisAngle(double radians);
    double radians() const { return radians_; }

private:
    double radians_ = 0.0;
};

// Two-photon polarization state of the phi+ pair under isotropic noise,
// summarized by the correlation visibility V. The optional anisotropic mode
// carries a separate visibility for the diagonal basis.
struct PairState {
    double visibility = 1.0;        // V in [0,1]; in anisotropic mode, V for the H/V basis
    double rotation_offset = 0.0;   // rad, slow shared-frame rotation, wraps mod pi
    std::optional<double> visibility_diag;  // anisotropic mode: V for the 45-degree basis

    PairState() = default;
    explicit PairState(double v, double rot = 0.0, std::optional<double> v_diag = std::nullopt);
};

// Correlation coefficient E(a, b) = <s_a * s_b> for analyzer angles a, b.
double correlation(const PairState& state, BasisAngle a, BasisAngle b);

// P(s_a, s_b | a, b) = (1 + s_a * s_b * E(a, b)) / 4.
double joint_probability(const PairState& state, BasisAngle a, BasisAngle b, int sa, int sb);

// Draws one (+/-1, +/-1) outcome pair from the joint distribution.
std::pair<int, int> sample_outcomes(const PairState& state, BasisAngle a, BasisAngle b, Rng& rng);

// Werner-state map from entanglement fidelity F in [0.25, 1] to visibility:
// V = (4F - 1) / 3. Throws std::domain_error outside the range.
double visibility_from_fidelity(double fidelity);

// Inverse map, F = (1 + 3V) / 4.
double fidelity_from_visibility(double visibility);

}  // namespace qkd
