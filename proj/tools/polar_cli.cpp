#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "polar/experiment.hpp"
#include "polar/parallel.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Pessimistic model-based DTR learning: experiment runner"};
    std::string config_path;
    std::string preset;
    std::string out_dir;
    std::uint64_t seed = 0;
    int threads = 0;
    bool resume = false;
    bool print_config = false;
    bool full = false;
    auto* cfg_opt = app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    app.add_option("--preset", preset, "fig1 | fig2 | sensitivity")->excludes(cfg_opt);
    app.add_option("--out", out_dir, "output directory");
    auto* seed_opt = app.add_option("--seed", seed, "master seed");
    app.add_option("--threads", threads, "worker threads (default: POLAR_THREADS or 1)");
    app.add_flag("--full", full, "with --preset: full-scale grid (N = 100, n up to 20000)");
    app.add_flag("--resume", resume, "skip cells already listed in the manifest");
    app.add_flag("--print-config", print_config, "print the effective config and exit");
    CLI11_PARSE(app, argc, argv);

    try {
        polar::ExperimentConfig cfg;
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            std::stringstream ss;
            ss << f.rdbuf();
            cfg = polar::config_from_json(ss.str());
        } else if (!preset.empty()) {
            cfg = polar::preset_config(preset, full);
        }
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (*seed_opt) cfg.seed = seed;
        cfg.threads = threads > 0 ? threads : polar::threads_from_env(cfg.threads);
        cfg.validate();
        if (print_config) {
            std::cout << polar::config_to_json(cfg) << '\n';
            return 0;
        }
        const auto summary = polar::run_experiment(cfg, resume, [](const std::string& msg) { std::cerr << msg << '\n'; });
        std::cerr << "finished: " << summary.cells_run << " run, " << summary.cells_skipped << " skipped, "
                  << summary.cells_failed << " failed\n";
        return summary.cells_failed == 0 ? 0 : 3;
    } catch (const polar::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
