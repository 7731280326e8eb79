#include "qkd/qstate.hpp"

#include <cmath>
#include <stdexcept>

namespace qkd {

namespace {
constexpr double kPi = 3.14159265358979323846;

double wrap_pi(double x) {
    double r = std::fmod(x, kPi);
    if (r < 0) r += kPi;
    return r;
}
}  // namespace

BasisAngle::BasisAngle(double radians) : radians_(wrap_pi(radians)) {}

PairState::PairState(double v, double rot, std::optional<double> v_diag)
    : visibility(v), rotation_offset(wrap_pi(rot)), visibility_diag(v_diag) {
    if (v < 0.0 || v > 1.0) throw std::domain_error("PairState: visibility outside [0,1]");
    if (v_diag && (*v_diag < 0.0 || *v_diag > 1.0))
        throw std::domain_error("PairState: diagonal visibility outside [0,1]");
}

double correlation(const PairState& state, BasisAngle a, BasisAngle b) {
    const double ap = a.radians() - state.rotation_offset;
    const double bp = b.radians();
    if (state.visibility_diag) {
        // Per-basis contrast: V_z in the rectilinear basis, V_x in the diagonal one.
        return state.visibility * std::cos(2 * ap) * std::cos(2 * bp) +
               *state.visibility_diag * std::sin(2 * ap) * std::sin(2 * bp);
    }
    return state.visibility * std::cos(2 * (ap - bp));
}

double joint_probability(const PairState& state, BasisAngle a, BasisAngle b, int sa, int sb) {
    if ((sa != 1 && sa != -1) || (sb != 1 && sb != -1))
        throw std::invalid_argument("joint_probability: outcomes must be +/-1");
    return 0.25 * (1.0 + sa * sb * correlation(state, a, b));
}

std::pair<int, int> sample_outcomes(const PairState& state, BasisAngle a, BasisAngle b, Rng& rng) {
    const double e = correlation(state, a, b);
    const int sa = rng.bernoulli(0.5) ? 1 : -1;          // marginal is 1/2 regardless of angles
    const double p_same = 0.5 * (1.0 + e);               // P(sb == sa | sa)
    const int sb = rng.bernoulli(p_same) ? sa : -sa;
    return {sa, sb};
}

double visibility_from_fidelity(double fidelity) {
    if (fidelity < 0.25 || fidelity > 1.0)
        throw std::domain_error("visibility_from_fidelity: F outside [0.25, 1]");
    return (4.0 * fidelity - 1.0) / 3.0;
}

double fidelity_from_visibility(double visibility) {
    if (visibility < 0.0 || visibility > 1.0)
        throw std::domain_error("fidelity_from_visibility: V outside [0, 1]");
    return (1.0 + 3.0 * visibility) / 4.0;
}

}  // namespace qkd
