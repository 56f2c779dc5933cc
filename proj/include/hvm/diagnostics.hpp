#pragma once

// Conservation-law and radiation functionals: the mass/energy functionals
// N_delta, M_delta on the three surface families, the no-incoming-radiation
// flux, the energy balance against the boundary-data integral, the matter
// support radius, the discrete Gauss residual, and the pointwise energy
// inequality e +- p >= |j2|.

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hvm/deposition.hpp"
#include "hvm/fields1d.hpp"
#include "hvm/geometry.hpp"
#include "hvm/spherical.hpp"
#include "hvm/util.hpp"

namespace hvm {

struct EnergyDensity {
    double e, p;
};

/// Local energy and momentum density at one node in the (U, phi, psi)
/// variables: e = U^2/2 + phi^2 + psi^2 + int sqrt(1+|p|^2) f dp,
/// p = phi^2 - psi^2 + int p1 f dp.
inline EnergyDensity energy_density_1d(double U, double phi, double psi, double kin_e,
                                       double kin_p) {
    return {0.5 * U * U + phi * phi + psi * psi + kin_e, phi * phi - psi * psi + kin_p};
}

/// Scalars extracted from a marker cloud at one instant. kinetic_M0 is
/// sum of w * p0/(1 + hat(p).hat(x)), the matter part of the hyperboloidal
/// energy (equal to sum w sqrt(1+|p|^2)).
struct MarkerScalars {
    double sum_w = 0, kinetic_M0 = 0, support_radius = 1, p_sup = 1;
};

inline MarkerScalars marker_scalars(const std::vector<Marker1D>& ms) {
    MarkerScalars out;
    for (const auto& m : ms) {
        const double gam = std::sqrt(1.0 + m.p1 * m.p1 + m.p2 * m.p2);
        out.sum_w += m.w;
        out.kinetic_M0 += m.w * p0_of(m.x, m.p1, m.p2) / (1.0 + (m.p1 / gam) * hat(m.x));
        out.support_radius = std::max(out.support_radius, std::sqrt(1.0 + m.x * m.x));
        out.p_sup = std::max(out.p_sup, gam);
    }
    return out;
}

inline MarkerScalars marker_scalars(const std::vector<Marker3D>& ms) {
    MarkerScalars out;
    for (const auto& m : ms) {
        const double gam = std::sqrt(1.0 + dot(m.p, m.p));
        out.sum_w += m.w;
        out.kinetic_M0 += m.w * p0_of(m.x, m.p) / (1.0 + dot(hat3(m.p), hat3(m.x)));
        out.support_radius = std::max(out.support_radius, std::sqrt(1.0 + dot(m.x, m.x)));
        out.p_sup = std::max(out.p_sup, gam);
    }
    return out;
}

// ---------------------------------------------------------------------------
// 1.5D solution history

struct Snapshot1D {
    double tau = 0;
    long step = 0;
    MomentGrid1D moments;
    std::vector<double> phi, psi, U;
    MarkerScalars scalars;
};

struct History1D {
    UniformGrid zg, zetag, xg;
    std::vector<double> background;
    BoundaryData phi_minus = BoundaryData::zero();
    BoundaryData psi_plus = BoundaryData::zero();
    double R0 = 1.0;
    double dtau = 0;
    double phi_in_limit_minus = 0, psi_in_limit_plus = 0;
    std::vector<Snapshot1D> snaps;

    double tau_end() const { return snaps.empty() ? 0.0 : snaps.back().tau; }

    struct Bracket {
        size_t k;
        double theta;
    };
    Bracket bracket(double tau) const {
        if (snaps.empty()) throw std::runtime_error("History1D: empty history");
        if (tau > tau_end() + 1e-9)
            throw std::runtime_error("History1D: history too short, need final time >= " +
                                     std::to_string(tau) + " but have " +
                                     std::to_string(tau_end()));
        if (tau <= snaps.front().tau) return {0, 0.0};
        for (size_t k = snaps.size() - 1;; --k) {
            if (snaps[k].tau <= tau + 1e-12) {
                if (k + 1 >= snaps.size()) return {k - (snaps.size() > 1 ? 1 : 0),
                                                   snaps.size() > 1 ? 1.0 : 0.0};
                double dt = snaps[k + 1].tau - snaps[k].tau;
                return {k, dt > 0 ? (tau - snaps[k].tau) / dt : 0.0};
            }
            if (k == 0) return {0, 0.0};
        }
    }

    template <class Get>
    double lerp_snap(double tau, Get&& get) const {
        auto b = bracket(tau);
        double v0 = get(snaps[b.k]);
        if (b.theta == 0.0) return v0;
        return lerp(v0, get(snaps[b.k + 1]), b.theta);
    }

    double phi_at(double tau, double x) const {
        const double z = g_plus_inv(x);
        return lerp_snap(tau, [&](const Snapshot1D& s) { return interp(zg, s.phi, z); });
    }
    double psi_at(double tau, double x) const {
        const double zeta = g_minus_inv(x);
        return lerp_snap(tau, [&](const Snapshot1D& s) { return interp(zetag, s.psi, zeta); });
    }
    double U_at(double tau, double x) const {
        return lerp_snap(tau, [&](const Snapshot1D& s) { return interp(xg, s.U, x); });
    }
    double rho_at(double tau, double x) const {
        return lerp_snap(tau, [&](const Snapshot1D& s) { return interp(xg, s.moments.rho, x); });
    }
    double j1_at(double tau, double x) const {
        return lerp_snap(tau, [&](const Snapshot1D& s) { return interp(xg, s.moments.j1, x); });
    }
    double j2_at(double tau, double x) const {
        return lerp_snap(tau, [&](const Snapshot1D& s) { return interp(xg, s.moments.j2, x); });
    }
    double kin_e_at(double tau, double x) const {
        return lerp_snap(tau,
                         [&](const Snapshot1D& s) { return interp(xg, s.moments.kin_e, x); });
    }
    double kin_p_at(double tau, double x) const {
        return lerp_snap(tau,
                         [&](const Snapshot1D& s) { return interp(xg, s.moments.kin_p, x); });
    }
};

// ---------------------------------------------------------------------------
// Field energy in the straightened coordinate

/// Integral of h(tau, .)^2 over (0, infinity) for a transported field given
/// on a grid starting at z0 > 0 with z0 = dz. The unsimulated tail (0, z0]
/// carries the boundary data (exactly, by the representation formula in the
/// far vacuum) and is accounted from its closed-form squared integral. When
/// the inflow corner characteristic z = tau lies on a node, the cell above
/// it is integrated with a one-sided extrapolation from the initial-data
/// side, so a corner-incompatible jump costs nothing.
inline double straightened_field_energy(const UniformGrid& g, const std::vector<double>& h,
                                        double tau, const BoundaryData& bd,
                                        double init_limit) {
    const double z0 = g.x0;
    double tail;
    if (tau >= z0)
        tail = bd.sq_integral(tau) - bd.sq_integral(tau - z0);
    else
        tail = bd.sq_integral(tau) + (z0 - tau) * init_limit * init_limit;

    long kseam = -2;
    const double steps = tau / g.dx;
    if (std::abs(steps - std::llround(steps)) < 1e-9) kseam = std::llround(steps) - 1;

    double grid_part = 0.0;
    if (kseam >= 0 && kseam + 2 < g.n) {
        for (long j = 0; j < kseam; ++j)
            grid_part += 0.5 * g.dx * (h[j] * h[j] + h[j + 1] * h[j + 1]);
        const double v_ext = 2.0 * h[kseam + 1] - h[kseam + 2];
        grid_part += 0.5 * g.dx * (v_ext * v_ext + h[kseam + 1] * h[kseam + 1]);
        for (long j = kseam + 1; j + 1 < g.n; ++j)
            grid_part += 0.5 * g.dx * (h[j] * h[j] + h[j + 1] * h[j + 1]);
    } else {
        for (long j = 0; j + 1 < g.n; ++j)
            grid_part += 0.5 * g.dx * (h[j] * h[j] + h[j + 1] * h[j + 1]);
    }
    return tail + grid_part;
}

struct M0Breakdown {
    double N0 = 0;
    double M0 = 0;
    double kinetic = 0, e_U = 0, e_phi = 0, e_psi = 0;
    double truncation = 0;  // field magnitude near the outflow ends
};

inline M0Breakdown compute_N0_M0(const History1D& H, const Snapshot1D& s) {
    M0Breakdown out;
    out.N0 = s.scalars.sum_w;
    out.kinetic = s.scalars.kinetic_M0;
    std::vector<double> U2(s.U.size());
    for (size_t i = 0; i < s.U.size(); ++i) U2[i] = s.U[i] * s.U[i];
    out.e_U = 0.5 * trapezoid(H.xg, U2);
    out.e_phi = straightened_field_energy(H.zg, s.phi, s.tau, H.phi_minus,
                                          H.phi_in_limit_minus);
    out.e_psi = straightened_field_energy(H.zetag, s.psi, s.tau, H.psi_plus,
                                          H.psi_in_limit_plus);
    for (int j = std::max(0, H.zg.n - 3); j < H.zg.n; ++j)
        out.truncation = std::max(out.truncation, std::abs(s.phi[j]));
    for (int j = std::max(0, H.zetag.n - 3); j < H.zetag.n; ++j)
        out.truncation = std::max(out.truncation, std::abs(s.psi[j]));
    out.M0 = out.kinetic + out.e_U + out.e_phi + out.e_psi;
    return out;
}

// ---------------------------------------------------------------------------
// Surface-family functionals

struct SurfaceFunctional {
    double value = 0;       // read off at the cap radius
    double saturation = 0;  // change of the cumulative integral over the last 15%
    double r_cap = 0;
};

namespace detail {

template <class Integrand>
SurfaceFunctional surface_integral_1d(const History1D& H, double r_cap, Integrand&& f) {
    const UniformGrid& g = H.xg;
    SurfaceFunctional out;
    std::vector<double> vals(g.n, 0.0);
    for (int i = 0; i < g.n; ++i) {
        const double x = g.node(i);
        if (std::abs(x) <= r_cap) vals[i] = f(x);
    }
    // cumulative symmetric integral n(r) over [-r, r], sampled on the grid
    double total = 0.0, at85 = 0.0;
    const double r85 = 0.85 * r_cap;
    for (int i = 0; i + 1 < g.n; ++i) {
        const double xm = 0.5 * (g.node(i) + g.node(i + 1));
        if (std::abs(xm) > r_cap) continue;
        const double seg = 0.5 * g.dx * (vals[i] + vals[i + 1]);
        total += seg;
        if (std::abs(xm) <= r85) at85 += seg;
    }
    out.value = total;
    out.saturation = std::abs(total - at85);
    out.r_cap = r_cap;
    return out;
}

}  // namespace detail

/// n_delta / N_delta: integrand [rho + (1-delta) j1 hat(x)] evaluated at
/// hyperboloidal time tau + delta sqrt(1+x^2), integrated over |x| <= r_cap.
inline SurfaceFunctional surface_mass(const History1D& H, double tau, int delta,
                                      double r_cap) {
    return detail::surface_integral_1d(H, r_cap, [&](double x) {
        const double tp = sigma_time(delta, tau, x);
        return H.rho_at(tp, x) + (1 - delta) * H.j1_at(tp, x) * hat(x);
    });
}

/// m_delta / M_delta: integrand [e + (1-delta) p hat(x)] on Sigma_delta(tau).
inline SurfaceFunctional surface_energy(const History1D& H, double tau, int delta,
                                        double r_cap) {
    return detail::surface_integral_1d(H, r_cap, [&](double x) {
        const double tp = sigma_time(delta, tau, x);
        const auto ep = energy_density_1d(H.U_at(tp, x), H.phi_at(tp, x), H.psi_at(tp, x),
                                          H.kin_e_at(tp, x), H.kin_p_at(tp, x));
        return ep.e + (1 - delta) * ep.p * hat(x);
    });
}

// ---------------------------------------------------------------------------
// Radiation flux and energy balance

/// Time integral over [tau1, tau2] of the boundary bracket
/// (phi^2 - psi^2)(tau, -r) - (phi^2 - psi^2)(tau, r): the energy entering
/// through past null infinity. Vanishing in the r -> infinity limit is the
/// no-incoming-radiation condition.
inline double nirc_flux(const History1D& H, double tau1, double tau2, double probe_r) {
    if (std::sqrt(1.0 + probe_r * probe_r) < H.R0 + 0.5 * tau2)
        throw std::invalid_argument("nirc_flux: probe radius " + std::to_string(probe_r) +
                                    " inside the matter support at tau = " +
                                    std::to_string(tau2));
    auto bracket_at = [&](const Snapshot1D& s) {
        const double pl = interp(H.zg, s.phi, g_plus_inv(-probe_r));
        const double pr = interp(H.zg, s.phi, g_plus_inv(probe_r));
        const double sl = interp(H.zetag, s.psi, g_minus_inv(-probe_r));
        const double sr = interp(H.zetag, s.psi, g_minus_inv(probe_r));
        return (pl * pl - sl * sl) - (pr * pr - sr * sr);
    };
    double acc = 0.0;
    for (size_t k = 0; k + 1 < H.snaps.size(); ++k) {
        const double ta = H.snaps[k].tau, tb = H.snaps[k + 1].tau;
        if (tb <= tau1 || ta >= tau2) continue;
        acc += 0.5 * (tb - ta) * (bracket_at(H.snaps[k]) + bracket_at(H.snaps[k + 1]));
    }
    return acc;
}

/// Exact incoming-energy integral from the boundary data.
inline double boundary_energy_integral(const History1D& H, double tau) {
    return H.phi_minus.sq_integral(tau) + H.psi_plus.sq_integral(tau);
}

struct BalanceReport {
    double max_rel_violation = 0;
    double M0_in = 0;
};

/// Max over snapshots of |M0(tau) - M0_in - int ((phi-)^2 + (psi+)^2)|,
/// relative to max(M0_in, boundary integral, eps).
inline BalanceReport energy_balance_check(const History1D& H) {
    BalanceReport rep;
    if (H.snaps.empty()) return rep;
    rep.M0_in = compute_N0_M0(H, H.snaps.front()).M0;
    const double total_in = boundary_energy_integral(H, H.tau_end());
    const double scale = std::max({rep.M0_in, total_in, 1e-30});
    for (const auto& s : H.snaps) {
        const double M0 = compute_N0_M0(H, s).M0;
        const double expect = rep.M0_in + boundary_energy_integral(H, s.tau);
        rep.max_rel_violation = std::max(rep.max_rel_violation,
                                         std::abs(M0 - expect) / scale);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Constraint and inequality checks

/// Discrete Gauss residual at cell interfaces:
/// max_i |(U_{i+1}-U_i)/dx - (s_i+s_{i+1})/2| with s = hyp - n. Structurally
/// round-off for a U built by cumulative trapezoid of the same source.
inline double gauss_residual(const UniformGrid& xg, const std::vector<double>& U,
                             const std::vector<double>& hyp,
                             const std::vector<double>& background) {
    double worst = 0.0;
    for (int i = 0; i + 1 < xg.n; ++i) {
        const double si = hyp[i] - (background.empty() ? 0.0 : background[i]);
        const double sj = hyp[i + 1] - (background.empty() ? 0.0 : background[i + 1]);
        const double d = (U[i + 1] - U[i]) / xg.dx - 0.5 * (si + sj);
        worst = std::max(worst, std::abs(d));
    }
    return worst;
}

/// Pointwise inequality (e +- p) >= |j2|: returns the minimum margin over
/// all nodes (negative = violation).
inline double lemma6_min_margin(const History1D& H, const Snapshot1D& s) {
    double margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < H.xg.n; ++i) {
        const double x = H.xg.node(i);
        const auto ep = energy_density_1d(interp(H.xg, s.U, x),
                                          interp(H.zg, s.phi, g_plus_inv(x)),
                                          interp(H.zetag, s.psi, g_minus_inv(x)),
                                          s.moments.kin_e[i], s.moments.kin_p[i]);
        const double aj = std::abs(s.moments.j2[i]);
        margin = std::min(margin, std::min(ep.e + ep.p - aj, ep.e - ep.p - aj));
    }
    return margin;
}

// ---------------------------------------------------------------------------
// Spherical history and functionals

struct SnapshotSph {
    double tau = 0;
    long step = 0;
    std::vector<double> shell_rho, shell_jx, shell_kin_e, shell_kin_p, E_mag;
    MarkerScalars scalars;
    double max_ell_drift = 0;  // relative, against the initial per-marker values
    double anisotropy = 0;
};

struct HistorySph {
    UniformGrid rg;
    double dtau = 0;
    double R0 = 1.0;
    double Q_tot = 0;
    std::vector<SnapshotSph> snaps;

    double tau_end() const { return snaps.empty() ? 0.0 : snaps.back().tau; }

    History1D::Bracket bracket(double tau) const {
        if (snaps.empty()) throw std::runtime_error("HistorySph: empty history");
        if (tau > tau_end() + 1e-9)
            throw std::runtime_error("HistorySph: history too short, need final time >= " +
                                     std::to_string(tau));
        if (tau <= snaps.front().tau) return {0, 0.0};
        for (size_t k = snaps.size() - 1;; --k) {
            if (snaps[k].tau <= tau + 1e-12) {
                if (k + 1 >= snaps.size())
                    return {k - (snaps.size() > 1 ? 1 : 0), snaps.size() > 1 ? 1.0 : 0.0};
                double dt = snaps[k + 1].tau - snaps[k].tau;
                return {k, dt > 0 ? (tau - snaps[k].tau) / dt : 0.0};
            }
            if (k == 0) return {0, 0.0};
        }
    }

    template <class Get>
    double lerp_snap(double tau, Get&& get) const {
        auto b = bracket(tau);
        double v0 = get(snaps[b.k]);
        if (b.theta == 0.0) return v0;
        return lerp(v0, get(snaps[b.k + 1]), b.theta);
    }
};

inline constexpr double kFourPi = 4.0 * 3.14159265358979323846;

/// Hyperboloidal energy of a spherical snapshot: marker kinetic part plus
/// the field energy on the grid plus the closed-form Coulomb tail
/// Q^2/(8 pi r_max) beyond it.
inline double sph_M0(const HistorySph& H, const SnapshotSph& s) {
    std::vector<double> e(H.rg.n);
    for (int i = 0; i < H.rg.n; ++i) {
        const double r = H.rg.node(i);
        e[i] = 0.5 * s.E_mag[i] * s.E_mag[i] * kFourPi * r * r;
    }
    const double tail = H.Q_tot * H.Q_tot / (2.0 * kFourPi * H.rg.back());
    return s.scalars.kinetic_M0 + trapezoid(H.rg, e) + tail;
}

namespace detail {

template <class Integrand>
SurfaceFunctional surface_integral_sph(const HistorySph& H, double r_cap, Integrand&& f) {
    SurfaceFunctional out;
    double total = 0.0, at85 = 0.0;
    const double r85 = 0.85 * r_cap;
    for (int i = 0; i + 1 < H.rg.n; ++i) {
        const double rm = 0.5 * (H.rg.node(i) + H.rg.node(i + 1));
        if (rm > r_cap) break;
        const double seg = 0.5 * H.rg.dx * (f(H.rg.node(i), i) + f(H.rg.node(i + 1), i + 1));
        total += seg;
        if (rm <= r85) at85 += seg;
    }
    out.value = total;
    out.saturation = std::abs(total - at85);
    out.r_cap = r_cap;
    return out;
}

}  // namespace detail

inline SurfaceFunctional sph_surface_mass(const HistorySph& H, double tau, int delta,
                                          double r_cap) {
    return detail::surface_integral_sph(H, r_cap, [&](double r, int i) {
        const double tp = sigma_time(delta, tau, r);
        const double rho = H.lerp_snap(tp, [&](const SnapshotSph& s) { return s.shell_rho[i]; });
        const double jx = H.lerp_snap(tp, [&](const SnapshotSph& s) { return s.shell_jx[i]; });
        return (rho + (1 - delta) * jx) * kFourPi * r * r;
    });
}

inline SurfaceFunctional sph_surface_energy(const HistorySph& H, double tau, int delta,
                                            double r_cap) {
    auto out = detail::surface_integral_sph(H, r_cap, [&](double r, int i) {
        const double tp = sigma_time(delta, tau, r);
        const double ke = H.lerp_snap(tp, [&](const SnapshotSph& s) { return s.shell_kin_e[i]; });
        const double kp = H.lerp_snap(tp, [&](const SnapshotSph& s) { return s.shell_kin_p[i]; });
        const double E = H.lerp_snap(tp, [&](const SnapshotSph& s) { return s.E_mag[i]; });
        const double e = ke + 0.5 * E * E;
        return (e + (1 - delta) * kp * (r / std::sqrt(1.0 + r * r))) * kFourPi * r * r;
    });
    // static Coulomb tail beyond the cap (exact outside the matter support)
    out.value += H.Q_tot * H.Q_tot / (2.0 * kFourPi * out.r_cap);
    return out;
}

}  // namespace hvm
