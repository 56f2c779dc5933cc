#pragma once

// Flat key=value config files, run-directory output (config copy,
// diagnostics.jsonl, field slices, marker snapshots, summary.json), and the
// recompute-from-disk path used by the diagnose subcommand.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hvm/simulation.hpp"

namespace hvm::io {

using nlohmann::json;

inline std::map<std::string, std::string> parse_kv_text(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const char* ws = " \t\r\n";
            auto b = s.find_first_not_of(ws);
            if (b == std::string::npos) return std::string();
            auto e = s.find_last_not_of(ws);
            return s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        if (!key.empty()) kv[key] = val;
    }
    return kv;
}

inline void apply_key(RunConfig& c, const std::string& key, const std::string& val) {
    auto d = [&] { return std::stod(val); };
    auto i = [&] { return std::stoi(val); };
    auto b = [&] { return val == "1" || val == "true" || val == "yes"; };
    if (key == "mode") c.mode = val;
    else if (key == "scenario") c.scenario = val;
    else if (key == "tau_end") c.tau_end = d();
    else if (key == "dtau") c.dtau = d();
    else if (key == "x_max") c.x_max = d();
    else if (key == "r_max") c.r_max = d();
    else if (key == "nx") c.nx = i();
    else if (key == "np1") c.np1 = i();
    else if (key == "np2") c.np2 = i();
    else if (key == "nr") c.nr = i();
    else if (key == "nq") c.nq = i();
    else if (key == "nmu") c.nmu = i();
    else if (key == "f_amp") c.f_amp = d();
    else if (key == "sigma_x") c.sigma_x = d();
    else if (key == "sigma_p") c.sigma_p = d();
    else if (key == "u2") c.u2 = d();
    else if (key == "bg_center") c.bg_center = d();
    else if (key == "bg_halfwidth") c.bg_halfwidth = d();
    else if (key == "wave_a") c.wave_a = d();
    else if (key == "wave_T") c.wave_T = d();
    else if (key == "psi_wave_a") c.psi_wave_a = d();
    else if (key == "psi_wave_T") c.psi_wave_T = d();
    else if (key == "phi_in_amp") c.phi_in_amp = d();
    else if (key == "phi_in_sigma") c.phi_in_sigma = d();
    else if (key == "phi_in_plateau") c.phi_in_plateau = b();
    else if (key == "plateau_x0") c.plateau_x0 = d();
    else if (key == "plateau_x1") c.plateau_x1 = d();
    else if (key == "man_amp") c.man_amp = d();
    else if (key == "shell_r") c.shell_r = d();
    else if (key == "shell_dr") c.shell_dr = d();
    else if (key == "q_max") c.q_max = d();
    else if (key == "ell_floor") c.ell_floor = d();
    else if (key == "output_cadence") c.output_cadence = i();
    else if (key == "nirc_probe") c.nirc_probe = d();
    else if (key == "threads") c.threads = i();
    else if (key == "picard_sweeps") c.picard_sweeps = i();
    else if (key == "seed") c.seed = static_cast<unsigned>(std::stoul(val));
    else if (key == "fields_off") c.fields_off = b();
    else if (key == "compat_tol") c.compat_tol = d();
    else if (key == "support_tol") c.support_tol = d();
    else if (key == "out") c.out = val;
    else throw std::invalid_argument("unknown config key: " + key);
}

/// Load a config file; the scenario key is applied first so explicit keys
/// override the scenario defaults, then command-line overrides on top.
inline RunConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides = {}) {
    RunConfig c;
    std::map<std::string, std::string> kv;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open config file " + path);
        kv = parse_kv_text(in);
    }
    for (const auto& ov : overrides) {
        auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("override must be key=value: " + ov);
        kv[ov.substr(0, eq)] = ov.substr(eq + 1);
    }
    if (kv.count("scenario")) {
        c.scenario = kv["scenario"];
        apply_scenario_defaults(c);
    }
    for (const auto& [k, v] : kv)
        if (k != "scenario") apply_key(c, k, v);
    return c;
}

inline std::string config_to_string(const RunConfig& c) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "mode = " << c.mode << "\nscenario = " << c.scenario
       << "\ntau_end = " << c.tau_end << "\ndtau = " << c.dtau
       << "\nx_max = " << c.x_max << "\nr_max = " << c.r_max << "\nnx = " << c.nx
       << "\nnp1 = " << c.np1 << "\nnp2 = " << c.np2 << "\nnr = " << c.nr
       << "\nnq = " << c.nq << "\nnmu = " << c.nmu << "\nf_amp = " << c.f_amp
       << "\nsigma_x = " << c.sigma_x << "\nsigma_p = " << c.sigma_p
       << "\nu2 = " << c.u2 << "\nbg_center = " << c.bg_center
       << "\nbg_halfwidth = " << c.bg_halfwidth << "\nwave_a = " << c.wave_a
       << "\nwave_T = " << c.wave_T << "\npsi_wave_a = " << c.psi_wave_a
       << "\npsi_wave_T = " << c.psi_wave_T << "\nphi_in_amp = " << c.phi_in_amp
       << "\nphi_in_sigma = " << c.phi_in_sigma
       << "\nphi_in_plateau = " << (c.phi_in_plateau ? 1 : 0)
       << "\nplateau_x0 = " << c.plateau_x0 << "\nplateau_x1 = " << c.plateau_x1
       << "\nman_amp = " << c.man_amp << "\nshell_r = " << c.shell_r
       << "\nshell_dr = " << c.shell_dr << "\nq_max = " << c.q_max
       << "\nell_floor = " << c.ell_floor
       << "\noutput_cadence = " << c.output_cadence
       << "\nnirc_probe = " << c.nirc_probe << "\nthreads = " << c.threads
       << "\npicard_sweeps = " << c.picard_sweeps << "\nseed = " << c.seed
       << "\nfields_off = " << (c.fields_off ? 1 : 0)
       << "\ncompat_tol = " << c.compat_tol << "\nsupport_tol = " << c.support_tol
       << "\n";
    return os.str();
}

inline json record_to_json(const DiagnosticsRecord& r) {
    json j{{"tau", r.tau},
           {"N0", r.N0},
           {"M0", r.M0},
           {"nirc_flux", r.nirc_flux},
           {"support_radius", r.support_radius},
           {"gauss_residual", r.gauss_residual},
           {"lemma6_margin", r.lemma6_margin},
           {"P_max", r.P_max},
           {"Q_max", r.Q_max},
           {"balance_violation", r.balance_violation},
           {"m0_truncation", r.m0_truncation}};
    if (r.N1) j["N1"] = *r.N1;
    if (r.M1) j["M1"] = *r.M1;
    if (r.N2) j["N2"] = *r.N2;
    if (r.M2) j["M2"] = *r.M2;
    return j;
}

inline void write_diagnostics_jsonl(const RunResult& res, const std::string& path) {
    std::ofstream out(path);
    for (const auto& r : res.records) out << record_to_json(r).dump() << "\n";
}

inline json summary_json(const RunResult& res) {
    json checks = json::array();
    for (const auto& c : res.checks)
        checks.push_back({{"name", c.name},
                          {"pass", c.pass},
                          {"value", c.value},
                          {"threshold", c.threshold}});
    return json{{"scenario", res.cfg.scenario},
                {"mode", res.onedim ? "onedim" : "spherical"},
                {"R0", res.R0},
                {"N0_in", res.N0_in},
                {"M0_in", res.M0_in},
                {"nirc_probe", res.nirc_probe},
                {"all_pass", res.all_checks_pass()},
                {"checks", checks},
                {"warnings", res.warnings}};
}

namespace detail {

inline std::string frame_name(long step) {
    std::ostringstream os;
    os << std::setw(6) << std::setfill('0') << step;
    return os.str();
}

}  // namespace detail

inline void write_run_outputs(const RunResult& res, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream c(dir + "/config.cfg");
        c << config_to_string(res.cfg);
    }
    write_diagnostics_jsonl(res, dir + "/diagnostics.jsonl");
    {
        std::ofstream s(dir + "/summary.json");
        s << summary_json(res).dump(2) << "\n";
    }
    auto csv = [&](const std::string& path) {
        std::ofstream f(path);
        f << std::setprecision(17);
        return f;
    };
    if (res.onedim) {
        fs::create_directories(dir + "/fields");
        fs::create_directories(dir + "/fields_native");
        fs::create_directories(dir + "/markers");
        const History1D& H = res.hist;
        const long cad = res.cfg.output_cadence;
        for (const auto& s : H.snaps) {
            const bool last = &s == &H.snaps.back();
            if (!(last || (cad > 0 && s.step % cad == 0))) continue;
            auto name = detail::frame_name(s.step);
            {
                auto f = csv(dir + "/fields/" + name + ".csv");
                f << "x,U,phi,psi,E2,B\n";
                for (int i = 0; i < H.xg.n; ++i) {
                    double x = H.xg.node(i);
                    double phi = interp(H.zg, s.phi, g_plus_inv(x));
                    double psi = interp(H.zetag, s.psi, g_minus_inv(x));
                    f << x << ',' << s.U[i] << ',' << phi << ',' << psi << ','
                      << phi + psi << ',' << phi - psi << "\n";
                }
            }
            {
                auto f = csv(dir + "/fields_native/" + name + ".csv");
                f << "z,phi,zeta,psi\n";
                for (int j = 0; j < std::max(H.zg.n, H.zetag.n); ++j) {
                    f << (j < H.zg.n ? std::to_string(H.zg.node(j)) : "") << ','
                      << (j < H.zg.n ? std::to_string(s.phi[j]) : "");
                    f << ',' << (j < H.zetag.n ? std::to_string(H.zetag.node(j)) : "")
                      << ',' << (j < H.zetag.n ? std::to_string(s.psi[j]) : "") << "\n";
                }
            }
        }
        for (const auto& [step, cloud] : res.marker_frames) {
            auto f = csv(dir + "/markers/" + detail::frame_name(step) + ".csv");
            f << "tau,x,p1,p2,w\n";
            const double tau = step * res.cfg.dtau;
            for (const auto& m : cloud)
                f << tau << ',' << m.x << ',' << m.p1 << ',' << m.p2 << ',' << m.w << "\n";
        }
    } else {
        fs::create_directories(dir + "/radial");
        fs::create_directories(dir + "/markers");
        const HistorySph& H = res.hist_sph;
        const long cad = res.cfg.output_cadence;
        for (const auto& s : H.snaps) {
            const bool last = &s == &H.snaps.back();
            if (!(last || (cad > 0 && s.step % cad == 0))) continue;
            auto f = csv(dir + "/radial/" + detail::frame_name(s.step) + ".csv");
            f << "r,shell_density,E_mag\n";
            for (int i = 0; i < H.rg.n; ++i)
                f << H.rg.node(i) << ',' << s.shell_rho[i] + s.shell_jx[i] << ','
                  << s.E_mag[i] << "\n";
        }
        for (const auto& [step, cloud] : res.marker_frames_sph) {
            auto f = csv(dir + "/markers/" + detail::frame_name(step) + ".csv");
            f << "tau,x1,x2,x3,p1,p2,p3,w\n";
            const double tau = step * res.cfg.dtau;
            for (const auto& m : cloud)
                f << tau << ',' << m.x.x << ',' << m.x.y << ',' << m.x.z << ',' << m.p.x
                  << ',' << m.p.y << ',' << m.p.z << ',' << m.w << "\n";
        }
    }
}

inline void write_refinement_table(const RefinementTable& t, const std::string& path) {
    json levels = json::array();
    for (const auto& l : t.levels)
        levels.push_back({{"dtau", l.dtau},
                          {"m0_drift", l.m0_drift},
                          {"balance", l.balance},
                          {"representation_gap", l.representation_gap},
                          {"ok", l.ok},
                          {"note", l.note}});
    json j{{"levels", levels},
           {"order_m0", t.order_m0},
           {"order_balance", t.order_balance},
           {"order_representation", t.order_representation}};
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Recompute diagnostics from a stored run directory (marker snapshots and
// native field slices at the stored cadence).

inline std::vector<std::vector<double>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            row.push_back(cell.empty() ? 0.0 : std::stod(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

struct DiagnoseResult {
    std::vector<DiagnosticsRecord> records;
    RunConfig cfg;
};

inline DiagnoseResult diagnose_run_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    DiagnoseResult out;
    out.cfg = load_config(dir + "/config.cfg");
    RunConfig cfg = out.cfg;
    apply_scenario_defaults(cfg);
    if (cfg.mode != "onedim")
        throw std::runtime_error("diagnose: only onedim run directories are supported");

    std::vector<long> steps;
    for (const auto& e : fs::directory_iterator(dir + "/markers"))
        steps.push_back(std::stol(e.path().stem().string()));
    std::sort(steps.begin(), steps.end());
    if (steps.empty()) throw std::runtime_error("diagnose: no marker snapshots in " + dir);

    History1D H;
    {
        // reconstruct the grids exactly as the run built them
        const int half = static_cast<int>(std::ceil(cfg.x_max / cfg.dtau));
        const double xe = half * cfg.dtau;
        H.xg = {-xe, cfg.dtau, 2 * half + 1};
        const double z_max = g_plus_inv(xe) + cfg.tau_end + 2.0 * cfg.dtau;
        const int nz = static_cast<int>(std::ceil((z_max - cfg.dtau) / cfg.dtau)) + 1;
        H.zg = {cfg.dtau, cfg.dtau, nz};
        H.zetag = H.zg;
    }
    H.dtau = cfg.dtau;
    H.phi_minus = cfg.wave_a != 0.0 ? BoundaryData::const_pulse(cfg.wave_a, cfg.wave_T)
                                    : BoundaryData::zero();
    H.psi_plus = cfg.psi_wave_a != 0.0
                     ? BoundaryData::const_pulse(cfg.psi_wave_a, cfg.psi_wave_T)
                     : BoundaryData::zero();
    H.phi_in_limit_minus = cfg.phi_in_plateau ? cfg.wave_a : 0.0;

    double R0 = 1.0;
    std::vector<double> background(H.xg.n, 0.0);
    for (size_t si = 0; si < steps.size(); ++si) {
        const long step = steps[si];
        auto name = detail::frame_name(step);
        auto mrows = read_csv(dir + "/markers/" + name + ".csv");
        std::vector<Marker1D> markers;
        markers.reserve(mrows.size());
        for (const auto& r : mrows) markers.push_back({r[1], r[2], r[3], r[4]});
        Snapshot1D s;
        s.tau = step * cfg.dtau;
        s.step = step;
        s.moments = deposit_moments(markers, H.xg);
        s.scalars = marker_scalars(markers);
        if (si == 0) {
            R0 = markers.empty() ? 1.0 : sampled_support_radius(markers);
            if (!markers.empty() && !cfg.fields_off)
                background =
                    build_neutralizing_background(s.moments, cfg.bg_center, cfg.bg_halfwidth);
        }
        s.phi.assign(H.zg.n, 0.0);
        s.psi.assign(H.zetag.n, 0.0);
        s.U.assign(H.xg.n, 0.0);
        const std::string native = dir + "/fields_native/" + name + ".csv";
        if (fs::exists(native)) {
            auto rows = read_csv(native);
            for (size_t j = 0; j < rows.size(); ++j) {
                if (static_cast<int>(j) < H.zg.n) s.phi[j] = rows[j][1];
                if (static_cast<int>(j) < H.zetag.n) s.psi[j] = rows[j][3];
            }
            FieldState1D tmp;
            tmp.xg = H.xg;
            if (!markers.empty() && !cfg.fields_off) {
                solve_U(tmp, s.moments, background);
                s.U = tmp.U;
            }
        }
        H.snaps.push_back(std::move(s));
    }
    H.R0 = R0;
    H.background = background;

    const double M0_in = compute_N0_M0(H, H.snaps.front()).M0;
    for (const auto& s : H.snaps) {
        DiagnosticsRecord r;
        r.tau = s.tau;
        auto b = compute_N0_M0(H, s);
        r.N0 = b.N0;
        r.M0 = b.M0;
        r.m0_truncation = b.truncation;
        r.support_radius = s.scalars.support_radius;
        r.P_max = s.scalars.p_sup;
        if (!s.moments.hyp.empty() && !cfg.fields_off)
            r.gauss_residual = gauss_residual(H.xg, s.U, s.moments.hyp, background);
        r.lemma6_margin = lemma6_min_margin(H, s);
        const double expect = M0_in + boundary_energy_integral(H, s.tau);
        const double scale =
            std::max({M0_in, boundary_energy_integral(H, cfg.tau_end), 1e-30});
        r.balance_violation = std::abs(r.M0 - expect) / scale;
        out.records.push_back(r);
    }
    return out;
}

}  // namespace hvm::io
