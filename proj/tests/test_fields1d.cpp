#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "hvm/fields1d.hpp"

using namespace hvm;
using Catch::Approx;

namespace {

double bump(double u) {
    double s = 1.0 - u * u;
    return s > 0.0 ? s * s * s : 0.0;
}

UniformGrid straightened_grid(double dtau, double x_cover, double tau_end) {
    double z_max = g_plus_inv(x_cover) + tau_end + 0.5;
    int n = static_cast<int>(std::ceil((z_max - dtau) / dtau)) + 1;
    return {dtau, dtau, n};
}

template <class J2>
FieldState1D march(const InitialDataSet1D& data, J2&& j2, double dtau, double tau_end,
                   double x_cover) {
    auto zg = straightened_grid(dtau, x_cover, tau_end);
    FieldState1D st = make_field_state(data, zg, zg, UniformGrid{-1, 1, 2});
    long n = std::lround(tau_end / dtau);
    for (long s = 0; s < n; ++s) advance_phi_psi(st, j2, dtau);
    return st;
}

double j2_zero(double, double) { return 0.0; }

}  // namespace

TEST_CASE("transport: gaussian initial data shifts exactly along characteristics") {
    InitialDataSet1D data;
    data.phi_in = InitialField::gaussian(1.0, 1.0);
    const double dtau = 0.05, tau_end = 1.0;
    auto st = march(data, j2_zero, dtau, tau_end, 8.0);

    // every node equals the transported initial datum exactly (pure shift)
    for (int j = 0; j < st.zg.n; ++j) {
        double z = st.zg.node(j);
        double expect = z > tau_end ? data.phi_in.value(g_plus(z - tau_end))
                                    : 0.0;  // inflow of zero boundary data
        REQUIRE(st.phi[j] == Approx(expect).margin(1e-14));
    }

    // the closed form at (tau,x) = (1,2): exp(-g_plus(g_plus_inv(2)-1)^2) ~ 0.11747
    double closed = data.phi_in.value(g_plus(g_plus_inv(2.0) - 1.0));
    CHECK(closed == Approx(0.11747).margin(5e-5));
    CHECK(st.phi_at(2.0) == Approx(closed).margin(2e-4));  // tent interp between nodes
}

TEST_CASE("transport: constant inflow fills the boundary-data branch exactly") {
    const double a = 0.7, dtau = 0.05, tau_end = 1.5;
    InitialDataSet1D data;
    data.phi_minus = BoundaryData::const_pulse(a, 10.0);
    auto st = march(data, j2_zero, dtau, tau_end, 6.0);
    const long nsteps = std::lround(tau_end / dtau);
    for (int j = 0; j < st.zg.n; ++j) {
        if (j <= nsteps - 1)
            REQUIRE(st.phi[j] == a);  // boundary branch (z <= tau), bit-exact
        else
            REQUIRE(st.phi[j] == 0.0);  // initial branch
    }
}

TEST_CASE("transport: psi mirrors phi with inflow from the right") {
    const double a = 0.4, dtau = 0.05, tau_end = 1.0;
    InitialDataSet1D data;
    data.psi_plus = BoundaryData::const_pulse(a, 10.0);
    data.psi_in = InitialField::gaussian(0.5, 1.0, 0.5);
    auto st = march(data, j2_zero, dtau, tau_end, 6.0);
    const long nsteps = std::lround(tau_end / dtau);
    for (int j = 0; j < st.zetag.n; ++j) {
        double zeta = st.zetag.node(j);
        double expect = j <= nsteps - 1 ? a : data.psi_in.value(g_minus(zeta - tau_end));
        REQUIRE(st.psi[j] == Approx(expect).margin(1e-14));
    }
    // psi_at samples in x: far right is the inflow side
    CHECK(st.psi_at(30.0) == Approx(a).margin(1e-12));
}

TEST_CASE("march vs representation formula on a manufactured source") {
    InitialDataSet1D data;
    data.phi_in = InitialField::gaussian(0.3, 1.5);
    data.psi_in = InitialField::gaussian(0.2, 1.0, 0.5);
    data.phi_minus = BoundaryData::const_pulse(0.05, 10.0);
    data.R0 = 2.4;
    auto j2 = [](double tau, double x) {
        return 0.12 * std::sin(1.3 * tau + 0.4) * bump(x / 2.0);
    };
    const double tau_end = 2.0;
    const double probes[] = {-1.5, -0.5, 0.3, 1.2, 3.0};

    double err[2];
    int lvl = 0;
    for (double dtau : {0.1, 0.05}) {
        auto st = march(data, j2, dtau, tau_end, 7.0);
        double e = 0.0;
        for (double xp : probes) {
            double ref = evaluate_representation(FieldSelect::Phi, tau_end, xp, data, j2);
            e = std::max(e, std::abs(st.phi_at(xp) - ref));
            double refp = evaluate_representation(FieldSelect::Psi, tau_end, xp, data, j2);
            e = std::max(e, std::abs(st.psi_at(xp) - refp));
        }
        err[lvl++] = e;
    }
    CHECK(err[0] < 2e-3);
    CHECK(err[0] / err[1] > 3.0);  // O(dtau^2) source quadrature + interp
}

TEST_CASE("representation: vacuum closed forms in both branches") {
    InitialDataSet1D data;
    data.phi_in = InitialField::gaussian(0.8, 1.2);
    data.phi_minus = BoundaryData::const_pulse(0.3, 20.0);
    data.R0 = 1.5;
    auto j2 = [&](double tau, double x) {
        if (!in_vacuum(tau, x, data.R0)) return 0.05 * bump(x);
        return 0.0;
    };
    // initial-data branch point in the vacuum region
    {
        double tau = 0.4, x = 4.0;  // sqrt(17) > 1.5 + 0.2, tau < g_plus_inv(4)
        REQUIRE(in_vacuum(tau, x, data.R0));
        double v = evaluate_representation(FieldSelect::Phi, tau, x, data, j2);
        CHECK(v == Approx(data.phi_in.value(g_plus(g_plus_inv(x) - tau))).margin(1e-12));
    }
    // boundary-data branch point in the vacuum region
    {
        double tau = 3.0, x = -4.0;  // tau > g_plus_inv(-4) ~ 0.123
        REQUIRE(in_vacuum(tau, x, data.R0));
        double v = evaluate_representation(FieldSelect::Phi, tau, x, data, j2);
        CHECK(v == Approx(data.phi_minus.value(tau - g_plus_inv(x))).margin(1e-12));
    }
}

TEST_CASE("representation: propagates history gaps") {
    InitialDataSet1D data;
    auto gappy = [](double tau, double) -> double {
        if (tau > 0.5) throw std::runtime_error("j2 history gap at tau > 0.5");
        return 0.0;
    };
    CHECK_THROWS_AS(evaluate_representation(FieldSelect::Phi, 1.0, 0.0, data, gappy),
                    std::runtime_error);
}

TEST_CASE("seam continuity for corner-compatible data") {
    const double a = 0.2, dtau = 0.025, tau_end = 1.5;
    InitialDataSet1D data;
    data.phi_in = InitialField::left_plateau(a, -4.0, -2.0);
    data.phi_minus = BoundaryData::const_pulse(a, 10.0);
    auto rep = check_admissibility(data, nullptr, nullptr);
    CHECK(rep.warnings.empty());

    auto st = march(data, j2_zero, dtau, tau_end, 6.0);
    long k = std::lround(tau_end / dtau) - 1;  // seam node, z = tau_end
    REQUIRE(k >= 1);
    REQUIRE(k + 1 < st.zg.n);
    CHECK(std::abs(st.phi[k] - st.phi[k + 1]) < 0.05 * dtau + 1e-12);
}

TEST_CASE("admissibility: incompatible corner warns") {
    InitialDataSet1D data;  // phi_in = 0 but phi_minus(0) = 0.1
    data.phi_minus = BoundaryData::const_pulse(0.1, 5.0);
    auto rep = check_admissibility(data, nullptr, nullptr);
    REQUIRE(!rep.warnings.empty());
    CHECK(rep.corner_phi == Approx(0.1));
}

TEST_CASE("background: raised cosine with exact discrete normalization") {
    UniformGrid g{-3.0, 0.01, 601};
    MomentGrid1D mom(g);
    // a unit of hyperboloidal charge: sampled indicator with half-weight edges
    for (int i = 0; i < g.n; ++i) {
        double ax = std::abs(g.node(i));
        if (ax < 1.0 - 1e-12) mom.hyp[i] = 0.5;
        else if (ax < 1.0 + 1e-12) mom.hyp[i] = 0.25;
    }
    CHECK(trapezoid(g, mom.hyp) == Approx(1.0).margin(1e-13));

    auto n = build_neutralizing_background(mom, 0.0, 1.0);
    CHECK(n[300] == Approx(1.0).margin(2e-3));  // (1/2)(1+cos 0), rescaled
    CHECK(trapezoid(g, n) == Approx(1.0).epsilon(1e-13));

    MomentGrid1D empty(g);
    auto nz = build_neutralizing_background(empty, 0.0, 1.0);
    for (double v : nz) REQUIRE(v == 0.0);

    CHECK_THROWS_AS(build_neutralizing_background(mom, 0.0, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(build_neutralizing_background(mom, 5.0, 1.0), std::invalid_argument);
}

TEST_CASE("solve_U: zero source, ramp example, uniform bound") {
    UniformGrid g{-3.0, 0.01, 801};  // [-3, 5]
    MomentGrid1D mom(g);
    FieldState1D st;
    st.xg = g;

    solve_U(st, mom, {});
    for (double v : st.U) REQUIRE(v == 0.0);

    // source = 1/2 on [-1,1] minus a matching background on [2,4]:
    // U ramps to 1, plateaus, ramps back to zero
    for (int i = 0; i < g.n; ++i)
        if (std::abs(g.node(i)) <= 1.0) mom.hyp[i] = 0.5;
    auto n = build_neutralizing_background(mom, 3.0, 1.0);
    solve_U(st, mom, n);
    CHECK(st.U_at(0.0) == Approx(0.5).margin(0.02));
    CHECK(st.U_at(1.5) == Approx(1.0).margin(0.02));
    CHECK(st.U_at(4.7) == Approx(0.0).margin(1e-10));
    double umax = 0.0;
    for (double v : st.U) umax = std::max(umax, std::abs(v));
    double N0 = trapezoid(g, mom.hyp), nL1 = trapezoid(g, n);
    CHECK(umax <= N0 + nL1 + 1e-12);  // uniform field bound

    // a genuinely non-neutral source trips the edge check
    MomentGrid1D bad(g);
    for (int i = 0; i < g.n; ++i) bad.hyp[i] = 0.1 * std::exp(-g.node(i) * g.node(i));
    CHECK_THROWS_AS(solve_U(st, bad, {}), std::runtime_error);
}

TEST_CASE("advance: configuration and input errors") {
    InitialDataSet1D data;
    auto zg = straightened_grid(0.05, 4.0, 1.0);
    auto st = make_field_state(data, zg, zg, UniformGrid{-1, 1, 2});
    CHECK_THROWS_AS(advance_phi_psi(st, j2_zero, 0.04), std::invalid_argument);
    auto bad_j2 = [](double, double) { return std::nan(""); };
    CHECK_THROWS_AS(advance_phi_psi(st, bad_j2, 0.05), std::runtime_error);
}
