#pragma once

// Spherically symmetric 3D solver pieces: shell deposition of the radial
// moments and the radial electric field by cumulative quadrature,
// E(r) = (1/r^2) int_0^r (rho + j.hat(x)) r'^2 dr'. The magnetic field
// vanishes identically in spherical symmetry, so there is no radiation and
// the Poynting flux diagnostic is exactly zero.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "hvm/geometry.hpp"
#include "hvm/markers.hpp"
#include "hvm/util.hpp"

namespace hvm {

struct RadialFieldState {
    double tau = 0.0;
    UniformGrid rg;                  // uniform radial nodes on [0, r_max]
    std::vector<double> shell_hyp;   // rho + j.hat(x): carried by the weights directly
    std::vector<double> shell_rho;   // rho
    std::vector<double> shell_jx;    // j.hat(x)
    std::vector<double> shell_kin_e; // int sqrt(1+|p|^2) f dp
    std::vector<double> shell_kin_p; // int p.hat(x)... radial momentum density
    std::vector<double> E_mag;       // |E|(r); E(0) = 0

    explicit RadialFieldState(const UniformGrid& grid = {}) { reset(grid); }

    void reset(const UniformGrid& grid) {
        rg = grid;
        shell_hyp.assign(grid.n, 0.0);
        shell_rho.assign(grid.n, 0.0);
        shell_jx.assign(grid.n, 0.0);
        shell_kin_e.assign(grid.n, 0.0);
        shell_kin_p.assign(grid.n, 0.0);
        E_mag.assign(grid.n, 0.0);
    }

    /// Radial field vector at a point; odd in the radial coordinate, with
    /// E(0) = 0 forced by the r^2 prefactor limit.
    Vec3 efield_at(const Vec3& x) const {
        const double r = norm(x);
        if (r < 1e-14) return {};
        return x * (interp(rg, E_mag, r) / r);
    }
};

/// Tent deposition onto spherical shells. The nominal shell volume
/// 4 pi r_i^2 dr is used, so the cumulative charge integral
/// int s r'^2 dr' reproduces each marker's weight exactly once the
/// integration passes its stencil (shell theorem at machine precision).
inline void deposit_shells(RadialFieldState& st, const std::vector<Marker3D>& markers,
                           int threads = 1) {
    const UniformGrid& g = st.rg;
    struct Buf {
        std::vector<double> hyp, rho, jx, ke, kp;
    };
    const size_t nchunks = chunk_count(markers.size());
    std::vector<Buf> bufs(nchunks);
    const double pi = 3.14159265358979323846;

    parallel_chunks(markers.size(), threads, [&](size_t lo, size_t hi, size_t c) {
        Buf& b = bufs[c];
        b.hyp.assign(g.n, 0.0);
        b.rho.assign(g.n, 0.0);
        b.jx.assign(g.n, 0.0);
        b.ke.assign(g.n, 0.0);
        b.kp.assign(g.n, 0.0);
        for (size_t m = lo; m < hi; ++m) {
            const Marker3D& mk = markers[m];
            const double r = norm(mk.x);
            if (r > g.back())
                throw std::runtime_error("deposit_shells: marker " + std::to_string(m) +
                                         " at r=" + std::to_string(r) + " beyond r_max");
            const auto cell = g.locate(r);
            const double gam = std::sqrt(1.0 + dot(mk.p, mk.p));
            const Vec3 xh = hat3(mk.x);              // x / sqrt(1+|x|^2)
            const double p_dot_xh = dot(mk.p, xh);   // p . hat(x)
            const double hp_dot_hx = p_dot_xh / gam; // hat(p) . hat(x)
            const double cc = mk.w / (1.0 + hp_dot_hx);
            for (int k = 0; k < 2; ++k) {
                const int i = cell.i + k;
                const double tw = k == 0 ? 1.0 - cell.frac : cell.frac;
                const double ri = g.node(i);
                // nominal shell volume; the origin node gets its half-cell ball
                const double vol = i == 0
                                       ? (4.0 * pi / 3.0) * 0.125 * g.dx * g.dx * g.dx
                                       : 4.0 * pi * ri * ri * g.dx;
                const double q = tw / vol;
                b.hyp[i] += q * mk.w;
                b.rho[i] += q * cc;
                b.jx[i] += q * cc * hp_dot_hx;
                b.ke[i] += q * cc * gam;
                b.kp[i] += q * cc * p_dot_xh;
            }
        }
    });

    st.shell_hyp.assign(g.n, 0.0);
    st.shell_rho.assign(g.n, 0.0);
    st.shell_jx.assign(g.n, 0.0);
    st.shell_kin_e.assign(g.n, 0.0);
    st.shell_kin_p.assign(g.n, 0.0);
    for (size_t c = 0; c < nchunks; ++c) {
        if (bufs[c].hyp.empty()) continue;
        for (int i = 0; i < g.n; ++i) {
            st.shell_hyp[i] += bufs[c].hyp[i];
            st.shell_rho[i] += bufs[c].rho[i];
            st.shell_jx[i] += bufs[c].jx[i];
            st.shell_kin_e[i] += bufs[c].ke[i];
            st.shell_kin_p[i] += bufs[c].kp[i];
        }
    }
}

/// Cumulative trapezoid of r'^2 shell_hyp from the origin, divided by r^2.
inline void solve_radial_field(RadialFieldState& st) {
    const UniformGrid& g = st.rg;
    std::vector<double> f(g.n);
    for (int i = 0; i < g.n; ++i) {
        const double r = g.node(i);
        f[i] = st.shell_hyp[i] * r * r;
        require_finite(f[i], "solve_radial_field");
    }
    std::vector<double> q;
    cumulative_trapezoid(g, f, q);
    st.E_mag[0] = 0.0;
    for (int i = 1; i < g.n; ++i) {
        const double r = g.node(i);
        st.E_mag[i] = q[i] / (r * r);
    }
}

/// Total hyperboloidal charge as seen by the cumulative field integral.
inline double shell_total_charge(const RadialFieldState& st) {
    const double pi = 3.14159265358979323846;
    std::vector<double> f(st.rg.n);
    for (int i = 0; i < st.rg.n; ++i) {
        const double r = st.rg.node(i);
        f[i] = st.shell_hyp[i] * r * r;
    }
    double q = 0.0;
    for (int i = 0; i + 1 < st.rg.n; ++i) q += 0.5 * st.rg.dx * (f[i] + f[i + 1]);
    return 4.0 * pi * q;
}

/// Traceless quadrupole anisotropy of a marker cloud, normalized by the
/// total weight; a spherical ensemble keeps it near zero.
inline double cloud_anisotropy(const std::vector<Marker3D>& markers) {
    double Q[3][3] = {};
    double W = 0.0;
    for (const auto& m : markers) {
        const double r2 = dot(m.x, m.x);
        if (r2 == 0.0) continue;
        const Vec3 u = m.x * (1.0 / std::sqrt(r2));
        const double c[3] = {u.x, u.y, u.z};
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                Q[a][b] += m.w * (3.0 * c[a] * c[b] - (a == b ? 1.0 : 0.0));
        W += m.w;
    }
    if (W == 0.0) return 0.0;
    double n2 = 0.0;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) n2 += Q[a][b] * Q[a][b];
    return std::sqrt(n2) / W;
}

}  // namespace hvm
