#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "polar/baselines.hpp"
#include "polar/optimizer.hpp"
#include "polar/pessimism.hpp"

namespace polar {

struct ExperimentConfig {
    std::string env = "simenv";
    std::vector<long> n{200};
    std::vector<double> p{0.75};
    std::vector<double> c{0.0, 5.0, 10.0, 50.0, 100.0};
    int replications = 20;

    PolarConfig polar = default_polar();
    std::vector<int> policy_budgets{16, 16, 64};
    int policy_max_degree = 3;
    TransitionConfig transition;
    int m_noise = 64;

    /// Any of "dtr_q", "behavior", "oracle".
    std::vector<std::string> baselines{"dtr_q"};
    double lambda_q = 1e-6;
    int q_basis_per_dim = 2;

    long eval_rollouts = 2000;
    bool eval_every_iteration = true;
    DpOracle::Options oracle;

    std::string out_dir = "results";
    std::uint64_t seed = 2024;
    int threads = 1;
    bool record_timing = false;
    bool save_policies = false;

    void validate() const;

    /// T = 20, m = (32, 32, 128), 32 Q rollouts, constant η = 0.1.
    static PolarConfig default_polar();
};

ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);
/// "fig1", "fig2" or "sensitivity". Desk scale by default (N = 20, n <= 1000);
/// `full` restores N = 100 and n up to 20000.
ExperimentConfig preset_config(const std::string& name, bool full = false);

struct ResultRow {
    std::string method;
    long n = 0;
    double p = 0.0;
    std::optional<double> c;
    int replication = 0;
    int iteration = 0;
    double value_mean = 0.0;
    double value_stderr = 0.0;
    double wall_ms = 0.0;
    std::uint64_t seed = 0;
};

extern const char* const kCsvHeader;
std::string format_row(const ResultRow& row);

struct CellKey {
    long n = 0;
    double p = 0.0;
    int replication = 0;
    std::string id() const;
};

std::uint64_t cell_seed(std::uint64_t master, const CellKey& key);

/// Everything for one (n, p, replication): data generation, transition fit,
/// POLAR for every c, and the enabled baselines. Rows are in a fixed order.
/// The oracle is shared across cells; `policy_dir` (optional) receives the
/// trained POLAR policies.
std::vector<ResultRow> run_cell(const ExperimentConfig& config, const CellKey& key, const DpOracle& oracle,
                                const std::string& policy_dir = "");

struct ExperimentSummary {
    int cells_total = 0;
    int cells_run = 0;
    int cells_skipped = 0;
    int cells_failed = 0;
};

/// Sweeps the grid, writing results.csv and manifest.json under out_dir.
/// With `resume`, cells listed in the manifest are skipped and new rows are
/// appended; otherwise both files are rewritten.
ExperimentSummary run_experiment(const ExperimentConfig& config, bool resume,
                                 const std::function<void(const std::string&)>& log = {});

/// The shared DP oracle for a config (simenv).
std::shared_ptr<DpOracle> make_oracle(const ExperimentConfig& config);

}  // namespace polar
