// hvm command line: run a scenario, drive a refinement study, or recompute
// diagnostics from a stored run directory. Exit status is 0 only if all
// enabled invariant checks pass.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hvm/io.hpp"
#include "hvm/simulation.hpp"

namespace {

void print_checks(const hvm::RunResult& res) {
    for (const auto& w : res.warnings) std::printf("[warn] %s\n", w.c_str());
    for (const auto& c : res.checks)
        std::printf("[%s] %-24s value=%.3e threshold=%.3e\n", c.pass ? "pass" : "FAIL",
                    c.name.c_str(), c.value, c.threshold);
    std::printf("N0_in=%.12g M0_in=%.12g R0=%.6g\n", res.N0_in, res.M0_in, res.R0);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hyperboloidal Vlasov-Maxwell simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::vector<std::string> sets;
    int threads = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value config file");
        sub->add_option("--set", sets, "override a config key (repeatable)")
            ->take_all();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--threads", threads, "worker threads");
    };

    auto* cmd_run = app.add_subcommand("run", "run one scenario");
    add_common(cmd_run);

    auto* cmd_refine = app.add_subcommand("refine", "halve h and dtau per level");
    add_common(cmd_refine);
    int levels = 3;
    cmd_refine->add_option("--levels", levels, "number of levels (>= 2)");

    auto* cmd_diag = app.add_subcommand("diagnose",
                                        "recompute diagnostics from stored snapshots");
    std::string run_dir;
    cmd_diag->add_option("dir", run_dir, "run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_run->parsed()) {
            hvm::RunConfig cfg = hvm::io::load_config(config_path, sets);
            if (threads > 0) cfg.threads = threads;
            if (!out_dir.empty()) cfg.out = out_dir;
            hvm::RunResult res = hvm::run(cfg);
            hvm::fill_surface_functionals(res);
            if (!res.cfg.out.empty()) hvm::io::write_run_outputs(res, res.cfg.out);
            print_checks(res);
            return res.all_checks_pass() ? 0 : 1;
        }
        if (cmd_refine->parsed()) {
            hvm::RunConfig cfg = hvm::io::load_config(config_path, sets);
            if (threads > 0) cfg.threads = threads;
            auto table = hvm::refine(cfg, levels);
            for (const auto& l : table.levels) {
                if (l.ok)
                    std::printf("dtau=%-8g m0_drift=%.3e balance=%.3e repr_gap=%.3e\n",
                                l.dtau, l.m0_drift, l.balance, l.representation_gap);
                else
                    std::printf("dtau=%-8g FAILED: %s\n", l.dtau, l.note.c_str());
            }
            std::printf("orders: m0=%.2f balance=%.2f representation=%.2f\n",
                        table.order_m0, table.order_balance, table.order_representation);
            if (!out_dir.empty()) {
                std::filesystem::create_directories(out_dir);
                hvm::io::write_refinement_table(table, out_dir + "/refinement.json");
            }
            for (const auto& l : table.levels)
                if (!l.ok) return 1;
            return 0;
        }
        if (cmd_diag->parsed()) {
            auto res = hvm::io::diagnose_run_dir(run_dir);
            std::ofstream out(run_dir + "/diagnostics_recomputed.jsonl");
            for (const auto& r : res.records)
                out << hvm::io::record_to_json(r).dump() << "\n";
            std::printf("recomputed %zu records into %s/diagnostics_recomputed.jsonl\n",
                        res.records.size(), run_dir.c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
