#pragma once

// Weighted-marker representation of the particle density and exact
// characteristic pushing. Marker weights carry the conserved measure
// (1 + hat(p).hat(x)) f d(phase volume), so the total weight is an exact
// invariant of the push and f-moments are recovered by dividing by the
// current (1 + hat(p).hat(x)).

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hvm/geometry.hpp"
#include "hvm/util.hpp"

namespace hvm {

struct Marker1D {
    double x = 0;
    double p1 = 0, p2 = 0;
    double w = 0;
};

struct Marker3D {
    Vec3 x;
    Vec3 p;
    double w = 0;
};

struct FieldSample1D {
    double U = 0, phi = 0, psi = 0;
};

struct PhaseBox1D {
    double x_min, x_max;
    double p1_min, p1_max;
    double p2_min, p2_max;
    int nx, np1, np2;
};

/// Midpoint tensor sampling of a nonnegative C^1 density with compact
/// support inside the box. w = (1 + hat(p1) hat(x)) f dx dp; zero-weight
/// markers are dropped.
template <class F>
std::vector<Marker1D> sample_initial_markers(F&& f_in, const PhaseBox1D& b) {
    const double dx = (b.x_max - b.x_min) / b.nx;
    const double dp1 = (b.p1_max - b.p1_min) / b.np1;
    const double dp2 = (b.p2_max - b.p2_min) / b.np2;
    const double vol = dx * dp1 * dp2;
    std::vector<Marker1D> out;
    out.reserve(static_cast<size_t>(b.nx) * b.np1 * b.np2 / 2);
    for (int i = 0; i < b.nx; ++i) {
        const double x = b.x_min + (i + 0.5) * dx;
        for (int j = 0; j < b.np1; ++j) {
            const double p1 = b.p1_min + (j + 0.5) * dp1;
            for (int k = 0; k < b.np2; ++k) {
                const double p2 = b.p2_min + (k + 0.5) * dp2;
                const double f = f_in(x, p1, p2);
                const double gam = std::sqrt(1.0 + p1 * p1 + p2 * p2);
                if (f < 0.0)
                    throw std::runtime_error(
                        "sample_initial_markers: negative density at (x,p1,p2)=(" +
                        std::to_string(x) + "," + std::to_string(p1) + "," +
                        std::to_string(p2) + ")");
                if (f == 0.0) continue;
                const double w = (1.0 + (p1 / gam) * hat(x)) * f * vol;
                out.push_back({x, p1, p2, w});
            }
        }
    }
    return out;
}

/// Support radius of a sampled cloud: max over markers of sqrt(1+x^2).
inline double sampled_support_radius(const std::vector<Marker1D>& m) {
    double r = 1.0;
    for (const auto& mk : m) r = std::max(r, std::sqrt(1.0 + mk.x * mk.x));
    return r;
}

inline double sampled_support_radius(const std::vector<Marker3D>& m) {
    double r = 1.0;
    for (const auto& mk : m) r = std::max(r, std::sqrt(1.0 + dot(mk.x, mk.x)));
    return r;
}

namespace detail {

struct Deriv1D {
    double dx, dp1, dp2;
};

// Characteristic system of the 1.5D transport:
//   x'  = p1/p0
//   p1' = [sqrt(1+|p|^2) U + (phi - psi) p2] / p0
//   p2' = [phi (sqrt(1+|p|^2) - p1) + psi (sqrt(1+|p|^2) + p1)] / p0
template <class FieldFn>
Deriv1D rhs1d(FieldFn& field, double tau, double x, double p1, double p2, size_t idx) {
    const double gam = std::sqrt(1.0 + p1 * p1 + p2 * p2);
    const double p0 = gam + p1 * hat(x);
    const FieldSample1D s = field(tau, x);
    if (!std::isfinite(s.U) || !std::isfinite(s.phi) || !std::isfinite(s.psi))
        throw std::runtime_error("push_markers: non-finite field at marker " +
                                 std::to_string(idx));
    return {p1 / p0,
            (gam * s.U + (s.phi - s.psi) * p2) / p0,
            (s.phi * (gam - p1) + s.psi * (gam + p1)) / p0};
}

}  // namespace detail

/// Classical RK4 step of every marker; weights unchanged. The field
/// sampler is called at the sub-stage times (tau, tau+dt/2, tau+dt).
template <class FieldFn>
void push_markers(std::vector<Marker1D>& markers, FieldFn&& field, double tau,
                  double dtau, int threads = 1) {
    parallel_chunks(markers.size(), threads, [&](size_t lo, size_t hi, size_t) {
        for (size_t i = lo; i < hi; ++i) {
            Marker1D& m = markers[i];
            const auto k1 = detail::rhs1d(field, tau, m.x, m.p1, m.p2, i);
            const auto k2 = detail::rhs1d(field, tau + 0.5 * dtau, m.x + 0.5 * dtau * k1.dx,
                                          m.p1 + 0.5 * dtau * k1.dp1, m.p2 + 0.5 * dtau * k1.dp2, i);
            const auto k3 = detail::rhs1d(field, tau + 0.5 * dtau, m.x + 0.5 * dtau * k2.dx,
                                          m.p1 + 0.5 * dtau * k2.dp1, m.p2 + 0.5 * dtau * k2.dp2, i);
            const auto k4 = detail::rhs1d(field, tau + dtau, m.x + dtau * k3.dx,
                                          m.p1 + dtau * k3.dp1, m.p2 + dtau * k3.dp2, i);
            m.x += dtau / 6.0 * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
            m.p1 += dtau / 6.0 * (k1.dp1 + 2.0 * k2.dp1 + 2.0 * k3.dp1 + k4.dp1);
            m.p2 += dtau / 6.0 * (k1.dp2 + 2.0 * k2.dp2 + 2.0 * k3.dp2 + k4.dp2);
        }
    });
}

namespace detail {

struct Deriv3D {
    Vec3 dx, dp;
};

// Spherically symmetric characteristics: x' = p/p0, p' = sqrt(1+|p|^2)/p0 E(x).
template <class EFn>
Deriv3D rhs3d(EFn& efield, double tau, const Vec3& x, const Vec3& p, size_t idx) {
    const double gam = std::sqrt(1.0 + dot(p, p));
    const double p0 = gam + dot(p, hat3(x));
    const Vec3 E = efield(tau, x);
    if (!std::isfinite(E.x) || !std::isfinite(E.y) || !std::isfinite(E.z))
        throw std::runtime_error("push_markers_spherical: non-finite field at marker " +
                                 std::to_string(idx));
    return {p * (1.0 / p0), E * (gam / p0)};
}

}  // namespace detail

template <class EFn>
void push_markers_spherical(std::vector<Marker3D>& markers, EFn&& efield, double tau,
                            double dtau, int threads = 1) {
    parallel_chunks(markers.size(), threads, [&](size_t lo, size_t hi, size_t) {
        for (size_t i = lo; i < hi; ++i) {
            Marker3D& m = markers[i];
            const auto k1 = detail::rhs3d(efield, tau, m.x, m.p, i);
            const auto k2 = detail::rhs3d(efield, tau + 0.5 * dtau, m.x + 0.5 * dtau * k1.dx,
                                          m.p + 0.5 * dtau * k1.dp, i);
            const auto k3 = detail::rhs3d(efield, tau + 0.5 * dtau, m.x + 0.5 * dtau * k2.dx,
                                          m.p + 0.5 * dtau * k2.dp, i);
            const auto k4 = detail::rhs3d(efield, tau + dtau, m.x + dtau * k3.dx,
                                          m.p + dtau * k3.dp, i);
            m.x += (dtau / 6.0) * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
            m.p += (dtau / 6.0) * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
        }
    });
}

struct SphericalBox {
    double r_min, r_max;   // radial support of the sampling
    double q_max;          // |p| <= q_max
    int nr, nq, nmu;       // radius, momentum magnitude, pitch cosine
    double ell_floor = 0;  // optional minimum angular momentum (off by default)
};

/// Spherically symmetric sampling: tensor nodes in (r, q, mu) with
/// mu = cos(angle between x and p). Azimuthal symmetry is built in: the
/// weight of a node is orientation-independent, w = (1 + hat(p).hat(x)) F
/// 4 pi r^2 dr 2 pi q^2 dq dmu. Each node is realized as four markers on a
/// rotated tetrahedral direction set (a spherical 2-design: the quadrupole
/// of every quadruple vanishes identically), with the rotation taken from
/// a deterministic R2 low-discrepancy sequence. Cloud isotropy is then a
/// testable property rather than an assumption.
template <class F>
std::vector<Marker3D> sample_spherical_markers(F&& f_rqm, const SphericalBox& b) {
    const double dr = (b.r_max - b.r_min) / b.nr;
    const double dq = b.q_max / b.nq;
    const double dmu = 2.0 / b.nmu;
    const double pi = 3.14159265358979323846;
    const double s3 = 1.0 / std::sqrt(3.0);
    const Vec3 tetra[4] = {{s3, s3, s3}, {s3, -s3, -s3}, {-s3, s3, -s3}, {-s3, -s3, s3}};
    std::vector<Marker3D> out;
    size_t node = 0;
    auto frac = [](double v) { return v - std::floor(v); };
    for (int i = 0; i < b.nr; ++i) {
        const double r = b.r_min + (i + 0.5) * dr;
        for (int j = 0; j < b.nq; ++j) {
            const double q = (j + 0.5) * dq;
            for (int k = 0; k < b.nmu; ++k, ++node) {
                const double mu = -1.0 + (k + 0.5) * dmu;
                const double f = f_rqm(r, q, mu);
                if (f < 0.0)
                    throw std::runtime_error("sample_spherical_markers: negative density");
                if (f == 0.0) continue;
                const double smu = std::sqrt(std::max(0.0, 1.0 - mu * mu));
                if (b.ell_floor > 0.0 && r * q * smu < b.ell_floor) continue;
                const double w_node = (1.0 + (q * mu / std::sqrt(1.0 + q * q)) *
                                                 (r / std::sqrt(1.0 + r * r))) *
                                      f * (4.0 * pi * r * r * dr) *
                                      (2.0 * pi * q * q * dq * dmu);
                // per-node rotation from the R2 sequence
                const double ca = std::cos(2.0 * pi * frac(0.7548776662466927 * (node + 0.5)));
                const double sa = std::sin(2.0 * pi * frac(0.7548776662466927 * (node + 0.5)));
                const double cb = 1.0 - 2.0 * frac(0.5698402909980532 * (node + 0.5));
                const double sb = std::sqrt(std::max(0.0, 1.0 - cb * cb));
                for (int t = 0; t < 4; ++t) {
                    // rotate about z by alpha, then tilt about y
                    Vec3 v = tetra[t];
                    Vec3 v1{ca * v.x - sa * v.y, sa * v.x + ca * v.y, v.z};
                    Vec3 er{cb * v1.x + sb * v1.z, v1.y, -sb * v1.x + cb * v1.z};
                    Vec3 seed = std::abs(er.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
                    Vec3 et = cross(er, seed);
                    et = et * (1.0 / norm(et));
                    const Vec3 x = er * r;
                    const Vec3 p = er * (q * mu) + et * (q * smu);
                    out.push_back({x, p, 0.25 * w_node});
                }
            }
        }
    }
    return out;
}

inline double total_weight(const std::vector<Marker1D>& m) {
    double s = 0.0;
    for (const auto& mk : m) s += mk.w;
    return s;
}

inline double total_weight(const std::vector<Marker3D>& m) {
    double s = 0.0;
    for (const auto& mk : m) s += mk.w;
    return s;
}

}  // namespace hvm
