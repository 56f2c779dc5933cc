#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "hvm/diagnostics.hpp"

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

// Minimal field-only history: march phi/psi with zero source and record.
History1D make_wave_history(const InitialDataSet1D& data, double dtau, double tau_end,
                            double x_cover) {
    History1D H;
    H.zg = straightened_grid(dtau, x_cover, tau_end);
    H.zetag = H.zg;
    int half = static_cast<int>(std::ceil(x_cover / dtau));
    H.xg = {-half * dtau, dtau, 2 * half + 1};
    H.phi_minus = data.phi_minus;
    H.psi_plus = data.psi_plus;
    H.R0 = data.R0;
    H.dtau = dtau;
    H.phi_in_limit_minus = data.phi_in.limit_minus;
    H.psi_in_limit_plus = data.psi_in.limit_plus;

    FieldState1D st = make_field_state(data, H.zg, H.zetag, H.xg);
    st.U.assign(H.xg.n, 0.0);
    auto snap = [&](long step) {
        Snapshot1D s;
        s.tau = step * dtau;
        s.step = step;
        s.moments = MomentGrid1D(H.xg);
        s.phi = st.phi;
        s.psi = st.psi;
        s.U = st.U;
        H.snaps.push_back(std::move(s));
    };
    snap(0);
    long n = std::lround(tau_end / dtau);
    for (long k = 0; k < n; ++k) {
        advance_phi_psi(st, [](double, double) { return 0.0; }, dtau);
        snap(k + 1);
    }
    return H;
}

}  // namespace

TEST_CASE("energy density: pinned values") {
    auto z = energy_density_1d(0, 0, 0, 0, 0);
    CHECK(z.e == 0.0);
    CHECK(z.p == 0.0);
    // right-moving null field: e = p, e - p = 0
    auto r = energy_density_1d(0, 1, 0, 0, 0);
    CHECK(r.e == 1.0);
    CHECK(r.p == 1.0);
    auto m = energy_density_1d(2.0, 0.5, -0.5, 0.3, 0.1);
    CHECK(m.e == Approx(2.0 + 0.25 + 0.25 + 0.3));
    CHECK(m.p == Approx(0.25 - 0.25 + 0.1));
}

TEST_CASE("lemma6: deposited states satisfy e +- p >= |j2| nodewise") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> ux(-2.0, 2.0), up(-1.5, 1.5), uw(0.0, 0.2);
    UniformGrid xg{-4.0, 0.1, 81};
    History1D H;
    H.xg = xg;
    H.zg = straightened_grid(0.1, 5.0, 0.0);
    H.zetag = H.zg;
    H.dtau = 0.1;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Marker1D> cloud;
        for (int i = 0; i < 400; ++i) cloud.push_back({ux(rng), up(rng), up(rng), uw(rng)});
        Snapshot1D s;
        s.tau = 0;
        s.moments = deposit_moments(cloud, xg);
        s.U.assign(xg.n, 0.3);
        s.phi.assign(H.zg.n, 0.2);  // fields only add nonnegative margin
        s.psi.assign(H.zg.n, -0.4);
        REQUIRE(lemma6_min_margin(H, s) >= -1e-12);
    }
}

TEST_CASE("pure incoming wave: M0(tau) = a^2 tau to round-off") {
    const double a = 0.1, dtau = 0.05, tau_end = 4.0;
    InitialDataSet1D data;
    data.phi_minus = BoundaryData::const_pulse(a, 10.0);
    auto H = make_wave_history(data, dtau, tau_end, 8.0);
    for (const auto& s : H.snaps) {
        auto b = compute_N0_M0(H, s);
        REQUIRE(b.M0 == Approx(a * a * s.tau).margin(1e-12));
    }
    auto rep = energy_balance_check(H);
    CHECK(rep.max_rel_violation < 1e-10);
}

TEST_CASE("transported bump: field energy exactly conserved by the shift") {
    InitialDataSet1D data;
    data.phi_in = InitialField::gaussian(0.7, 1.1);
    data.psi_in = InitialField::gaussian(0.4, 0.9, -0.5);
    auto H = make_wave_history(data, 0.05, 2.0, 8.0);
    const double M0 = compute_N0_M0(H, H.snaps.front()).M0;
    REQUIRE(M0 > 0.1);
    for (const auto& s : H.snaps) {
        REQUIRE(compute_N0_M0(H, s).M0 == Approx(M0).epsilon(1e-12));
    }
}

TEST_CASE("nirc flux: zero data is exactly zero, pure wave matches a^2 T") {
    InitialDataSet1D zero;
    auto Hz = make_wave_history(zero, 0.05, 2.0, 8.0);
    CHECK(nirc_flux(Hz, 0.0, 2.0, 6.0) == 0.0);

    const double a = 0.1, tau_end = 4.0;
    InitialDataSet1D data;
    data.phi_minus = BoundaryData::const_pulse(a, 10.0);
    auto H = make_wave_history(data, 0.05, tau_end, 10.0);
    // at a far probe the incoming wave arrives after g_plus_inv(-r) ~ 1/(2r)
    double probe = 9.0;
    double flux = nirc_flux(H, 0.0, tau_end, probe);
    CHECK(flux == Approx(a * a * tau_end).epsilon(0.02));

    CHECK_THROWS_AS(nirc_flux(H, 0.0, tau_end, 0.5), std::invalid_argument);
}

TEST_CASE("gauss residual: structural cancellation, perturbation response") {
    UniformGrid g{-3.0, 0.05, 121};
    MomentGrid1D mom(g);
    for (int i = 0; i < g.n; ++i) mom.hyp[i] = 0.3 * bump(g.node(i) / 1.5);
    auto bg = build_neutralizing_background(mom, 0.0, 2.5);
    FieldState1D st;
    st.xg = g;
    solve_U(st, mom, bg);
    double scale = 0.0;
    for (int i = 0; i < g.n; ++i) scale = std::max(scale, std::abs(mom.hyp[i] - bg[i]));
    CHECK(gauss_residual(g, st.U, mom.hyp, bg) < 1e-12 * std::max(scale, 1.0));

    // perturb U at one node by eps: residual ~ eps/h at the two interfaces
    double eps = 1e-4;
    auto U2 = st.U;
    U2[60] += eps;
    CHECK(gauss_residual(g, U2, mom.hyp, bg) == Approx(eps / g.dx).epsilon(1e-6));

    std::vector<double> zeroU(g.n, 0.0), zeroS(g.n, 0.0);
    CHECK(gauss_residual(g, zeroU, zeroS, {}) == 0.0);
}

TEST_CASE("free-streaming history: N0 exact, N1/N2 close to N0, M0 constant") {
    // hand-rolled free-stream loop (fields identically zero)
    auto f = [](double x, double p1, double p2) {
        return 0.5 * bump(x / 1.5) * bump(p1 / 0.4) * bump(p2 / 0.4);
    };
    PhaseBox1D box{-1.6, 1.6, -0.45, 0.45, -0.45, 0.45, 24, 12, 12};
    auto markers = sample_initial_markers(f, box);
    const double dtau = 0.05, tau_end = 10.0;
    const double R0 = sampled_support_radius(markers);

    History1D H;
    int half = static_cast<int>(std::ceil(8.0 / dtau));
    H.xg = {-half * dtau, dtau, 2 * half + 1};
    H.zg = straightened_grid(dtau, 8.0, tau_end);
    H.zetag = H.zg;
    H.R0 = R0;
    H.dtau = dtau;
    auto snap = [&](long step) {
        Snapshot1D s;
        s.tau = step * dtau;
        s.step = step;
        s.moments = deposit_moments(markers, H.xg, 2);
        s.phi.assign(H.zg.n, 0.0);
        s.psi.assign(H.zetag.n, 0.0);
        s.U.assign(H.xg.n, 0.0);
        s.scalars = marker_scalars(markers);
        H.snaps.push_back(std::move(s));
    };
    snap(0);
    auto zero_field = [](double, double) { return FieldSample1D{}; };
    long n = std::lround(tau_end / dtau);
    for (long k = 0; k < n; ++k) {
        push_markers(markers, zero_field, k * dtau, dtau, 2);
        snap(k + 1);
    }

    const double N0in = H.snaps.front().scalars.sum_w;
    const double M0in = compute_N0_M0(H, H.snaps.front()).M0;
    for (const auto& s : H.snaps) {
        REQUIRE(s.scalars.sum_w == N0in);  // bit-exact weight sum
        REQUIRE(compute_N0_M0(H, s).M0 == Approx(M0in).epsilon(1e-12));
    }

    // surface functionals at tau = 1 (momenta bounded: N2 = N1 = N0)
    const double tau = 1.0;
    const double r_need = std::sqrt((2 * R0 + tau) * (2 * R0 + tau) - 1.0);
    auto n1 = surface_mass(H, tau, 1, r_need + 0.5);
    CHECK(n1.value == Approx(N0in).epsilon(1e-2));
    CHECK(n1.saturation < 1e-3 * N0in);
    double reach2 = std::sqrt(std::pow((tau_end - tau) / 2.0, 2) - 1.0);
    auto n2 = surface_mass(H, tau, 2, std::min(reach2, H.xg.back() - 0.5));
    CHECK(n2.value == Approx(N0in).epsilon(1e-2));
    auto m1 = surface_energy(H, tau, 1, r_need + 0.5);
    CHECK(m1.value == Approx(M0in).epsilon(1e-2));

    // history-too-short error names the needed time
    CHECK_THROWS_WITH(surface_mass(H, 9.0, 2, 8.0),
                      Catch::Matchers::ContainsSubstring("history too short"));
}

TEST_CASE("balance: zero data everywhere reports zero violation") {
    InitialDataSet1D zero;
    auto H = make_wave_history(zero, 0.05, 1.0, 6.0);
    auto rep = energy_balance_check(H);
    CHECK(rep.max_rel_violation == 0.0);
    CHECK(rep.M0_in == 0.0);
}

TEST_CASE("spherical history: M0 with Coulomb tail, surface functionals") {
    // static shell, no dynamics: checks the radial quadratures themselves
    auto F = [&](double r, double q, double) {
        return 0.6 * bump((r - 2.0) / 0.4) * bump(q / 0.3);
    };
    SphericalBox box{1.6, 2.4, 0.3, 16, 6, 6};
    auto markers = sample_spherical_markers(F, box);
    HistorySph H;
    H.rg = {0.0, 0.05, 161};  // r_max = 8
    H.dtau = 0.05;
    H.R0 = sampled_support_radius(markers);
    H.Q_tot = total_weight(markers);

    RadialFieldState field(H.rg);
    deposit_shells(field, markers);
    solve_radial_field(field);
    auto snap = [&](long step) {
        SnapshotSph s;
        s.tau = step * 0.05;
        s.step = step;
        s.shell_rho = field.shell_rho;
        s.shell_jx = field.shell_jx;
        s.shell_kin_e = field.shell_kin_e;
        s.shell_kin_p = field.shell_kin_p;
        s.E_mag = field.E_mag;
        s.scalars = marker_scalars(markers);
        H.snaps.push_back(std::move(s));
    };
    for (long k = 0; k <= 200; ++k) snap(k);  // frozen state over tau in [0, 10]

    const double M0 = sph_M0(H, H.snaps.front());
    CHECK(M0 > H.snaps.front().scalars.kinetic_M0);  // field energy included

    auto n1 = sph_surface_mass(H, 0.5, 1, 6.0);
    CHECK(n1.value == Approx(H.Q_tot).epsilon(2e-2));
    auto m1 = sph_surface_energy(H, 0.5, 1, 6.0);
    CHECK(m1.value == Approx(M0).epsilon(2e-2));
}
