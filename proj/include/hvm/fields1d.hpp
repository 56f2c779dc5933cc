#pragma once

// The three field components of the 1.5D system. U is rebuilt each step by
// spatial quadrature of its x-equation, which enforces the discrete Gauss
// law exactly. phi and psi are transported in the straightened coordinates
// z = g_plus_inv(x), zeta = g_minus_inv(x), where the transport operators
// become d_tau + d_z (resp. d_tau + d_zeta) at unit speed: with the grid
// spacing tied to dtau the advection is an exact one-node shift and the
// only discretization is the midpoint source quadrature along the
// characteristic. The x-space speeds 1/(1 +- hat(x)) are unbounded toward
// the null ends, which is why no x-grid upwinding appears here.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hvm/deposition.hpp"
#include "hvm/geometry.hpp"
#include "hvm/util.hpp"

namespace hvm {

/// Data prescribed at past null infinity, one side: a C^1, L^2 function of
/// tau >= 0 together with the exact integral of its square (used by the
/// energy bookkeeping for the unsimulated tail beyond the grid).
struct BoundaryData {
    std::function<double(double)> value;        // 0 for t < 0
    std::function<double(double)> sq_integral;  // int_0^max(t,0) value^2
    double deriv0 = 0.0;                        // one-sided derivative at t = 0

    static BoundaryData zero() {
        return {[](double) { return 0.0; }, [](double) { return 0.0; }, 0.0};
    }
    /// Constant value a on [0, T], zero after. C^1 on [0, T); runs are
    /// expected to end at or before T.
    static BoundaryData const_pulse(double a, double T) {
        return {[a, T](double t) { return (t >= 0.0 && t <= T) ? a : 0.0; },
                [a, T](double t) { return a * a * std::clamp(t, 0.0, T); },
                0.0};
    }
};

/// Initial field profile, C^1 and bounded, with the limits toward the two
/// null ends recorded (they enter the corner-compatibility checks and the
/// energy bookkeeping).
struct InitialField {
    std::function<double(double)> value;
    std::function<double(double)> deriv;
    double limit_minus = 0.0;  // x -> -inf
    double limit_plus = 0.0;   // x -> +inf

    static InitialField zero() {
        return {[](double) { return 0.0; }, [](double) { return 0.0; }, 0.0, 0.0};
    }
    static InitialField gaussian(double A, double sigma, double center = 0.0) {
        return {[=](double x) {
                    double u = (x - center) / sigma;
                    return A * std::exp(-u * u);
                },
                [=](double x) {
                    double u = (x - center) / sigma;
                    return -2.0 * A * u / sigma * std::exp(-u * u);
                },
                0.0, 0.0};
    }
    /// Constant a for x <= x0, quintic smoothstep down to 0 at x >= x1.
    static InitialField left_plateau(double a, double x0, double x1) {
        if (!(x0 < x1)) throw std::invalid_argument("left_plateau: need x0 < x1");
        auto s = [=](double x) {
            double t = std::clamp((x - x0) / (x1 - x0), 0.0, 1.0);
            return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
        };
        return {[=](double x) { return a * (1.0 - s(x)); },
                [=](double x) {
                    double t = (x - x0) / (x1 - x0);
                    if (t <= 0.0 || t >= 1.0) return 0.0;
                    return -a * 30.0 * t * t * (1.0 - t) * (1.0 - t) / (x1 - x0);
                },
                a, 0.0};
    }
};

struct InitialDataSet1D {
    std::function<double(double, double, double)> f_in;  // may be null: pure field runs
    InitialField phi_in = InitialField::zero();
    InitialField psi_in = InitialField::zero();
    BoundaryData phi_minus = BoundaryData::zero();
    BoundaryData psi_plus = BoundaryData::zero();
    double R0 = 1.0;  // support radius of the sampled matter (>= 1)
};

/// phi lives on the z grid, psi on the zeta grid, U on the x grid.
/// Grid spacings of z and zeta equal the time step.
struct FieldState1D {
    double tau = 0.0;
    long step = 0;
    UniformGrid zg, zetag, xg;
    std::vector<double> phi, psi, U;
    BoundaryData phi_minus = BoundaryData::zero();
    BoundaryData psi_plus = BoundaryData::zero();

    double phi_at(double x) const { return interp(zg, phi, g_plus_inv(x)); }
    double psi_at(double x) const { return interp(zetag, psi, g_minus_inv(x)); }
    double U_at(double x) const {
        if (x < xg.x0 || x > xg.back()) return 0.0;  // U is compactly supported
        return interp(xg, U, x);
    }
    FieldSample1D sample(double x) const { return {U_at(x), phi_at(x), psi_at(x)}; }
};

inline FieldState1D make_field_state(const InitialDataSet1D& data, const UniformGrid& zg,
                                     const UniformGrid& zetag, const UniformGrid& xg) {
    FieldState1D st;
    st.zg = zg;
    st.zetag = zetag;
    st.xg = xg;
    st.phi.resize(zg.n);
    st.psi.resize(zetag.n);
    st.U.assign(xg.n, 0.0);
    for (int j = 0; j < zg.n; ++j) st.phi[j] = data.phi_in.value(g_plus(zg.node(j)));
    for (int j = 0; j < zetag.n; ++j) st.psi[j] = data.psi_in.value(g_minus(zetag.node(j)));
    st.phi_minus = data.phi_minus;
    st.psi_plus = data.psi_plus;
    return st;
}

/// Raised-cosine background on [center-halfwidth, center+halfwidth],
/// normalized so that its trapezoid integral on the grid equals the
/// deposited hyperboloidal charge exactly (the two integrals then cancel
/// structurally in the U solve).
inline std::vector<double> build_neutralizing_background(const MomentGrid1D& mom0,
                                                         double center, double halfwidth) {
    const UniformGrid& g = mom0.g;
    if (halfwidth < 4.0 * g.dx)
        throw std::invalid_argument(
            "build_neutralizing_background: support interval too small for a smooth "
            "profile at this grid spacing");
    if (center - halfwidth < g.x0 || center + halfwidth > g.back())
        throw std::invalid_argument(
            "build_neutralizing_background: interval not contained in the grid window");
    const double Q = trapezoid(g, mom0.hyp);
    std::vector<double> n(g.n, 0.0);
    if (Q == 0.0) return n;  // zero plasma: n = 0
    const double pi = 3.14159265358979323846;
    for (int i = 0; i < g.n; ++i) {
        double u = (g.node(i) - center) / halfwidth;
        if (std::abs(u) < 1.0) n[i] = 0.5 * (1.0 + std::cos(pi * u));
    }
    const double T = trapezoid(g, n);
    for (double& v : n) v *= Q / T;
    return n;
}

/// U(x) = int_{left edge}^x (hyp - n), cumulative trapezoid with U = 0 at
/// the left edge. Neutrality makes U vanish again at the right edge and be
/// compactly supported; a residual there above tol is an error.
inline void solve_U(FieldState1D& st, const MomentGrid1D& mom,
                    const std::vector<double>& background, double edge_tol = 1e-8) {
    if (mom.g.n != st.xg.n)
        throw std::invalid_argument("solve_U: moment grid does not match the x grid");
    std::vector<double> src(mom.g.n);
    double scale = 1.0;
    for (int i = 0; i < mom.g.n; ++i) {
        src[i] = mom.hyp[i] - (background.empty() ? 0.0 : background[i]);
        scale = std::max(scale, std::abs(src[i]));
    }
    cumulative_trapezoid(st.xg, src, st.U);
    if (std::abs(st.U.back()) > edge_tol * scale * (st.xg.back() - st.xg.x0))
        throw std::runtime_error(
            "solve_U: U does not return to zero at the right edge (neutrality violated), "
            "|U(right)| = " + std::to_string(std::abs(st.U.back())));
}

/// One exact shift of phi (rightward in z) and psi (rightward in zeta,
/// leftward in x), plus the midpoint source along the shifted
/// characteristic and the inflow fill from the past-null-infinity data.
template <class J2Fn>
void advance_phi_psi(FieldState1D& st, J2Fn&& j2, double dtau) {
    if (std::abs(dtau - st.zg.dx) > 1e-12 * std::abs(dtau) ||
        std::abs(dtau - st.zetag.dx) > 1e-12 * std::abs(dtau))
        throw std::invalid_argument(
            "advance_phi_psi: dtau must equal the characteristic grid spacing");
    const double tau_mid = st.tau + 0.5 * dtau;
    for (int j = st.zg.n - 1; j >= 1; --j) {
        const double z_mid = st.zg.node(j) - 0.5 * dtau;
        const double src = j2(tau_mid, g_plus(z_mid));
        if (!std::isfinite(src))
            throw std::runtime_error("advance_phi_psi: non-finite j2 on the phi grid");
        st.phi[j] = st.phi[j - 1] - 0.5 * dtau * g_plus_prime(z_mid) * src;
    }
    for (int j = st.zetag.n - 1; j >= 1; --j) {
        const double zeta_mid = st.zetag.node(j) - 0.5 * dtau;
        const double src = j2(tau_mid, g_minus(zeta_mid));
        if (!std::isfinite(src))
            throw std::runtime_error("advance_phi_psi: non-finite j2 on the psi grid");
        st.psi[j] = st.psi[j - 1] - 0.5 * dtau * g_plus_prime(zeta_mid) * src;
    }
    st.step += 1;
    st.tau = st.step * dtau;
    st.phi[0] = st.phi_minus.value(st.tau - st.zg.x0);
    st.psi[0] = st.psi_plus.value(st.tau - st.zetag.x0);
}

enum class FieldSelect { Phi, Psi };

/// Integral representation of the unique C^1 solution of the transport
/// equations with the given initial and past-null-infinity data, evaluated
/// at one point by quadrature along the backward characteristic in the
/// straightened coordinate. The branch switches on the curve tau = z
/// (initial-data branch for tau < z, boundary-data branch for tau >= z);
/// the nominal integral from past null infinity truncates to the compact
/// source support. j2 may throw for times it cannot cover (history gaps).
template <class J2Fn>
double evaluate_representation(FieldSelect which, double tau, double x,
                               const InitialDataSet1D& data, J2Fn&& j2,
                               int panels_per_unit_time = 256) {
    const bool is_phi = which == FieldSelect::Phi;
    const double z = is_phi ? g_plus_inv(x) : g_minus_inv(x);
    auto x_of = [is_phi](double s) { return is_phi ? g_plus(s) : g_minus(s); };

    double head, s_lo;
    if (tau < z) {
        head = is_phi ? data.phi_in.value(x_of(z - tau)) : data.psi_in.value(x_of(z - tau));
        s_lo = 0.0;
    } else {
        head = is_phi ? data.phi_minus.value(tau - z) : data.psi_plus.value(tau - z);
        s_lo = tau - z;
    }
    // The source vanishes outside sqrt(1+x^2) < R0 + s/2; clip the
    // characteristic integral to that compact window (this is what makes
    // the nominal lower limit at past null infinity finite).
    const double c = data.R0 + 0.5 * tau;
    const double x_sup = std::sqrt(std::max(c * c - 1.0, 0.0)) + 0.5;
    const double a = std::max(s_lo, tau - z + g_plus_inv(-x_sup));
    const double b = std::min(tau, tau - z + g_plus_inv(x_sup));
    if (b <= a) return head;
    auto integrand = [&](double s) {
        const double xi = z - tau + s;
        return g_plus_prime(xi) * j2(s, x_of(xi));
    };
    const int panels = std::max(64, static_cast<int>((b - a) * panels_per_unit_time));
    return head - 0.5 * simpson(integrand, a, b, panels);
}

struct AdmissibilityReport {
    bool ok = true;                      // hard conditions (I), (V) etc.
    std::vector<std::string> warnings;   // compatibility (VI)-(VII) violations
    double corner_phi = 0.0;             // |lim phi_in - phi_minus(0)|
    double corner_psi = 0.0;
    double corner_slope_phi = 0.0;       // |lim phi_in'/(1+hat x) + phi_minus'(0)|
    double corner_slope_psi = 0.0;
    double neutrality_residual = 0.0;
};

/// Numerical admissibility checks of a data set. Decay (III) and the corner
/// compatibilities (VI)-(VII) are verified to tol; violations degrade the
/// C^1 seam continuity but the solver still runs, so they only warn.
inline AdmissibilityReport check_admissibility(const InitialDataSet1D& data,
                                               const MomentGrid1D* mom0,
                                               const std::vector<double>* background,
                                               double tol = 1e-6) {
    AdmissibilityReport rep;
    auto warn = [&](const std::string& s) {
        rep.warnings.push_back(s);
    };
    if (std::abs(data.phi_in.limit_plus) > tol)
        warn("decay (III): phi_in does not vanish toward x -> +inf");
    if (std::abs(data.psi_in.limit_minus) > tol)
        warn("decay (III): psi_in does not vanish toward x -> -inf");

    rep.corner_phi = std::abs(data.phi_in.limit_minus - data.phi_minus.value(0.0));
    if (rep.corner_phi > tol)
        warn("compatibility (VI): lim phi_in(-inf) != phi_minus(0), mismatch " +
             std::to_string(rep.corner_phi));
    rep.corner_psi = std::abs(data.psi_in.limit_plus - data.psi_plus.value(0.0));
    if (rep.corner_psi > tol)
        warn("compatibility (VI): lim psi_in(+inf) != psi_plus(0), mismatch " +
             std::to_string(rep.corner_psi));

    const double xf = 1e8;  // far probe for the slope limits
    double slope_phi = data.phi_in.deriv(-xf) / (1.0 + hat(-xf));
    double slope_psi = data.psi_in.deriv(xf) / (1.0 - hat(xf));
    rep.corner_slope_phi = std::abs(slope_phi + data.phi_minus.deriv0);
    rep.corner_slope_psi = std::abs(slope_psi - data.psi_plus.deriv0);
    if (rep.corner_slope_phi > tol)
        warn("compatibility (VII): phi corner slope mismatch " +
             std::to_string(rep.corner_slope_phi));
    if (rep.corner_slope_psi > tol)
        warn("compatibility (VII): psi corner slope mismatch " +
             std::to_string(rep.corner_slope_psi));

    if (mom0 && background) {
        std::vector<double> diff(mom0->g.n);
        for (int i = 0; i < mom0->g.n; ++i)
            diff[i] = mom0->hyp[i] - (background->empty() ? 0.0 : (*background)[i]);
        rep.neutrality_residual = std::abs(trapezoid(mom0->g, diff));
        if (rep.neutrality_residual > 1e-10 * std::max(1.0, trapezoid(mom0->g, mom0->hyp)))
            warn("neutrality residual " + std::to_string(rep.neutrality_residual));
    }
    return rep;
}

}  // namespace hvm
