#pragma once

// Kinematics of the hyperboloidal slicing t = tau - sqrt(1+|x|^2):
// hat maps, the conjugate energy p0, the auxiliary characteristic maps
// g+/g- that straighten the field transport operators, the four regions
// of the (tau,x) half-plane, the vacuum region, and the surface families
// Sigma_delta(tau).

#include <cmath>
#include <stdexcept>

#include "hvm/util.hpp"

namespace hvm {

/// hat(z) = z / sqrt(1+z^2); |hat(z)| < 1 for all finite z.
inline double hat(double z) { return z / std::sqrt(1.0 + z * z); }

inline Vec3 hat3(const Vec3& v) {
    return v * (1.0 / std::sqrt(1.0 + dot(v, v)));
}

/// Conjugate energy p0 = sqrt(1+|p|^2) + p1*hat(x), 1.5D form. Strictly
/// positive: sqrt(1+|p|^2) > |p1|.
inline double p0_of(double x, double p1, double p2) {
    return std::sqrt(1.0 + p1 * p1 + p2 * p2) + p1 * hat(x);
}

/// 3D form, p0 = sqrt(1+|p|^2) + p.hat(x).
inline double p0_of(const Vec3& x, const Vec3& p) {
    return std::sqrt(1.0 + dot(p, p)) + dot(p, hat3(x));
}

// Characteristic maps of the transport operators d_tau +- (1 +- hat(x))^-1 d_x.
// In z = g_plus_inv(x) the phi transport moves at unit speed; in
// zeta = g_minus_inv(x) the psi transport does.

inline double g_plus(double z) {
    if (!(z > 0.0)) throw std::domain_error("g_plus: argument must be positive");
    // z -> 0+ overflows toward -inf; callers in this library keep z bounded
    // away from 0 by construction (grids start at z_min > 0).
    z = std::max(z, 1e-300);
    return (z * z - 1.0) / (2.0 * z);
}

inline double g_minus(double z) { return -g_plus(z); }

/// g_plus_inv(x) = sqrt(1+x^2) + x, computed without cancellation for x < 0
/// via g_plus_inv(x) * g_minus_inv(x) = 1.
inline double g_plus_inv(double x) {
    double s = std::sqrt(1.0 + x * x);
    return x >= 0.0 ? s + x : 1.0 / (s - x);
}

/// g_minus_inv(x) = sqrt(1+x^2) - x.
inline double g_minus_inv(double x) { return g_plus_inv(-x); }

/// g_plus'(z) = (1+z^2)/(2z^2) = 1/(1 + hat(g_plus(z))).
inline double g_plus_prime(double z) {
    return (1.0 + z * z) / (2.0 * z * z);
}

enum class RegionLabel { Omega1, Omega2, Omega3, Omega4 };

struct RegionInfo {
    RegionLabel label;
    bool in_vacuum;
};

/// Vacuum region V: sqrt(1+x^2) >= R0 + tau/2 (x-support bound of the
/// matter for data supported in sqrt(1+x^2) < R0).
inline bool in_vacuum(double tau, double x, double R0) {
    return std::sqrt(1.0 + x * x) >= R0 + 0.5 * tau;
}

/// Region of the half-plane tau >= 0 cut by the curves tau = g_plus_inv(x)
/// and tau = g_minus_inv(x). Ties follow the half-open conventions
/// (Omega2: g_minus_inv(x) <= tau < g_plus_inv(x), etc.).
inline RegionInfo classify_region(double tau, double x, double R0) {
    if (tau < 0.0) throw std::domain_error("classify_region: tau must be nonnegative");
    const double a = g_minus_inv(x);
    const double b = g_plus_inv(x);
    RegionLabel label;
    if (tau < std::min(a, b))
        label = RegionLabel::Omega1;
    else if (tau >= std::max(a, b))
        label = RegionLabel::Omega3;
    else if (a <= tau && tau < b)
        label = RegionLabel::Omega2;
    else
        label = RegionLabel::Omega4;
    return {label, in_vacuum(tau, x, R0)};
}

/// Surface family Sigma_delta(tau): t + (1-delta)*sqrt(1+|x|^2) = tau.
/// delta = 0 backward hyperboloid, 1 constant proper time, 2 forward
/// hyperboloid. A hyperboloidal-time function evaluated on Sigma_delta(tau)
/// at radius r uses hyperboloidal time tau + delta*sqrt(1+r^2).
struct SurfaceFamily {
    int delta = 0;

    explicit SurfaceFamily(int d) : delta(d) {
        if (d < 0 || d > 2) throw std::domain_error("SurfaceFamily: delta in {0,1,2}");
    }
    double eval_time(double tau, double r) const {
        return tau + delta * std::sqrt(1.0 + r * r);
    }
};

inline double sigma_time(int delta, double tau, double r) {
    return tau + delta * std::sqrt(1.0 + r * r);
}

}  // namespace hvm
