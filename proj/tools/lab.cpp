// lab: reproducible experiment driver for the delta-impurity laboratory.
//
//   lab <kind> [--config FILE] [--seed N] [--jobs N] [--out DIR]
//   lab plot-data --results DIR
//
// The config file is JSON ({"params": {...}, "seed": N, "jobs": N, "out": "..."})
// and overrides command-line flags. LAB_SEED supplies the default seed.

#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lll/experiments.hpp"

namespace {

const std::vector<std::string> kKinds = {"lemma21", "lemma31",   "zeromode", "detbound",
                                         "g3sweep", "g4sweep",   "auxbounds", "lemma4x",
                                         "wegner",  "conditions", "decayfit", "averaging"};

int apply_config_file(lll::ExperimentConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        std::fprintf(stderr, "config error: cannot open %s\n", path.c_str());
        return lll::exit_bad_config;
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return lll::exit_bad_config;
    }
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (key != "kind" && key != "params" && key != "seed" && key != "jobs" && key != "out") {
            std::fprintf(stderr, "config error: unknown config key '%s'\n", key.c_str());
            return lll::exit_bad_config;
        }
    }
    if (j.contains("kind") && j.at("kind").get<std::string>() != cfg.kind) {
        std::fprintf(stderr, "config error: config kind '%s' does not match subcommand '%s'\n",
                     j.at("kind").get<std::string>().c_str(), cfg.kind.c_str());
        return lll::exit_bad_config;
    }
    // config file overrides flags
    if (j.contains("params")) cfg.params = j.at("params");
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<int>();
    if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
    return -1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"finite-volume laboratory for the random delta-impurity Landau model"};
    app.require_subcommand(1);

    std::uint64_t default_seed = 1;
    if (const char* env = std::getenv("LAB_SEED")) default_seed = std::strtoull(env, nullptr, 10);

    struct SubState {
        CLI::App* sub = nullptr;
        std::string config_path;
        std::uint64_t seed;
        int jobs = 1;
        std::string out = "results";
    };
    std::vector<SubState> subs(kKinds.size());
    for (std::size_t i = 0; i < kKinds.size(); ++i) {
        subs[i].seed = default_seed;
        subs[i].sub = app.add_subcommand(kKinds[i], "run the " + kKinds[i] + " experiment");
        subs[i].sub->add_option("--config", subs[i].config_path, "JSON config file");
        subs[i].sub->add_option("--seed", subs[i].seed, "base seed (default LAB_SEED or 1)");
        subs[i].sub->add_option("--jobs", subs[i].jobs, "worker threads for trials");
        subs[i].sub->add_option("--out", subs[i].out, "output directory");
    }
    std::string results_dir;
    CLI::App* plot = app.add_subcommand("plot-data", "emit plot-ready CSV bundles from a run");
    plot->add_option("--results", results_dir, "results directory of a completed run")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int r = app.exit(e);
        return r == 0 ? 0 : lll::exit_bad_config;
    }

    if (plot->parsed()) return lll::emit_plot_data(results_dir);

    for (std::size_t i = 0; i < kKinds.size(); ++i) {
        if (!subs[i].sub->parsed()) continue;
        lll::ExperimentConfig cfg;
        cfg.kind = kKinds[i];
        cfg.seed = subs[i].seed;
        cfg.jobs = subs[i].jobs;
        cfg.out_dir = subs[i].out;
        if (!subs[i].config_path.empty()) {
            const int rc = apply_config_file(cfg, subs[i].config_path);
            if (rc >= 0) return rc;
        }
        return lll::run_experiment(cfg);
    }
    return lll::exit_bad_config;
}
