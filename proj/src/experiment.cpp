#include "polar/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "json.hpp"
#include "polar/eval.hpp"
#include "polar/parallel.hpp"
#include "polar/simenv.hpp"

namespace polar {

using nlohmann::json;
namespace fs = std::filesystem;

const char* const kCsvHeader = "method,n,p,c,replication,iteration,value_mean,value_stderr,wall_ms,seed";

void ExperimentConfig::validate() const {
    if (env != "simenv") throw ConfigError("unknown env '" + env + "'");
    if (n.empty() || p.empty() || c.empty()) throw ConfigError("grid axes must be non-empty");
    for (long v : n) {
        if (v < 1) throw ConfigError("n must be positive");
    }
    for (double v : p) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("p must lie in [0, 1]");
    }
    for (double v : c) {
        if (!(v >= 0.0)) throw ConfigError("c must be non-negative");
    }
    if (replications < 1) throw ConfigError("replications must be positive");
    if (polar.T < 0 || polar.q_rollouts < 1) throw ConfigError("invalid POLAR settings");
    if (policy_budgets.size() != 1 && policy_budgets.size() != SimEnv::kHorizon) {
        throw ConfigError("policy budgets must have one entry or one per stage");
    }
    transition.validate();
    if (m_noise < 1) throw ConfigError("m_noise must be positive");
    for (const auto& b : baselines) {
        if (b != "dtr_q" && b != "behavior" && b != "oracle") throw ConfigError("unknown baseline '" + b + "'");
    }
    if (lambda_q < 0.0) throw ConfigError("lambda_q must be non-negative");
    if (q_basis_per_dim < 1) throw ConfigError("q_basis_per_dim must be positive");
    if (eval_rollouts < 1) throw ConfigError("eval_rollouts must be positive");
    if (threads < 1) throw ConfigError("threads must be positive");
    if (oracle.n_branch < 1 || oracle.grid_per_dim < 1) throw ConfigError("invalid oracle settings");
}

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
    ExperimentConfig cfg;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    try {
        check_keys(j,
                   {"env", "grid", "replications", "polar", "policy", "transition", "m_noise", "baselines",
                    "lambda_q", "q_basis_per_dim", "eval", "oracle", "out_dir", "seed", "threads", "record_timing",
                    "save_policies"},
                   "config");
        read(j, "env", cfg.env);
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            check_keys(g, {"n", "p", "c"}, "grid");
            read(g, "n", cfg.n);
            read(g, "p", cfg.p);
            read(g, "c", cfg.c);
        }
        read(j, "replications", cfg.replications);
        if (j.contains("polar")) {
            const auto& g = j.at("polar");
            check_keys(g, {"T", "m", "q_rollouts", "eta_mode", "eta", "ridge_fallback"}, "polar");
            read(g, "T", cfg.polar.T);
            read(g, "m", cfg.polar.m);
            read(g, "q_rollouts", cfg.polar.q_rollouts);
            if (g.contains("eta_mode")) {
                const auto mode = g.at("eta_mode").get<std::string>();
                if (mode == "theoretical") {
                    cfg.polar.eta_mode = EtaMode::Theoretical;
                } else if (mode == "constant") {
                    cfg.polar.eta_mode = EtaMode::Constant;
                } else {
                    throw ConfigError("eta_mode must be 'theoretical' or 'constant'");
                }
            }
            read(g, "eta", cfg.polar.eta_constant);
            read(g, "ridge_fallback", cfg.polar.ridge_fallback);
        }
        if (j.contains("policy")) {
            const auto& g = j.at("policy");
            check_keys(g, {"budgets", "max_degree"}, "policy");
            read(g, "budgets", cfg.policy_budgets);
            read(g, "max_degree", cfg.policy_max_degree);
        }
        if (j.contains("transition")) {
            const auto& g = j.at("transition");
            check_keys(g,
                       {"kind", "penalty_scale", "delta", "lambda", "basis_per_dim", "basis_max_degree",
                        "w_star_norm_bound", "gp_sigma", "gp_signal_variance", "gp_lengthscale",
                        "gp_lengthscale_grid", "gp_n_max"},
                       "transition");
            auto& t = cfg.transition;
            if (g.contains("kind")) {
                const auto kind = g.at("kind").get<std::string>();
                if (kind == "linear") {
                    t.kind = TransitionKind::Linear;
                } else if (kind == "gp") {
                    t.kind = TransitionKind::Gp;
                } else {
                    throw ConfigError("transition kind must be 'linear' or 'gp'");
                }
            }
            if (g.contains("penalty_scale")) {
                const auto s = g.at("penalty_scale").get<std::string>();
                if (s == "folded") {
                    t.scale = PenaltyScale::Folded;
                } else if (s == "theoretical") {
                    t.scale = PenaltyScale::Theoretical;
                } else {
                    throw ConfigError("penalty_scale must be 'folded' or 'theoretical'");
                }
            }
            read(g, "delta", t.delta);
            read(g, "lambda", t.lambda_reg);
            read(g, "basis_per_dim", t.basis_per_dim);
            read(g, "basis_max_degree", t.basis_max_degree);
            if (g.contains("w_star_norm_bound") && !g.at("w_star_norm_bound").is_null()) {
                t.w_star_norm_bound = g.at("w_star_norm_bound").get<double>();
            }
            read(g, "gp_sigma", t.gp_sigma);
            read(g, "gp_signal_variance", t.gp_signal_variance);
            read(g, "gp_lengthscale", t.gp_lengthscale);
            read(g, "gp_lengthscale_grid", t.gp_lengthscale_grid);
            read(g, "gp_n_max", t.gp_n_max);
        }
        read(j, "m_noise", cfg.m_noise);
        read(j, "baselines", cfg.baselines);
        read(j, "lambda_q", cfg.lambda_q);
        read(j, "q_basis_per_dim", cfg.q_basis_per_dim);
        if (j.contains("eval")) {
            const auto& g = j.at("eval");
            check_keys(g, {"rollouts", "every_iteration"}, "eval");
            read(g, "rollouts", cfg.eval_rollouts);
            read(g, "every_iteration", cfg.eval_every_iteration);
        }
        if (j.contains("oracle")) {
            const auto& g = j.at("oracle");
            check_keys(g, {"n_branch", "grid_per_dim", "seed"}, "oracle");
            read(g, "n_branch", cfg.oracle.n_branch);
            read(g, "grid_per_dim", cfg.oracle.grid_per_dim);
            read(g, "seed", cfg.oracle.seed);
        }
        read(j, "out_dir", cfg.out_dir);
        read(j, "seed", cfg.seed);
        read(j, "threads", cfg.threads);
        read(j, "record_timing", cfg.record_timing);
        read(j, "save_policies", cfg.save_policies);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["env"] = cfg.env;
    j["grid"] = {{"n", cfg.n}, {"p", cfg.p}, {"c", cfg.c}};
    j["replications"] = cfg.replications;
    j["polar"] = {{"T", cfg.polar.T},
                  {"m", cfg.polar.m},
                  {"q_rollouts", cfg.polar.q_rollouts},
                  {"eta_mode", cfg.polar.eta_mode == EtaMode::Theoretical ? "theoretical" : "constant"},
                  {"eta", cfg.polar.eta_constant},
                  {"ridge_fallback", cfg.polar.ridge_fallback}};
    j["policy"] = {{"budgets", cfg.policy_budgets}, {"max_degree", cfg.policy_max_degree}};
    const auto& t = cfg.transition;
    j["transition"] = {{"kind", t.kind == TransitionKind::Linear ? "linear" : "gp"},
                       {"penalty_scale", t.scale == PenaltyScale::Folded ? "folded" : "theoretical"},
                       {"delta", t.delta},
                       {"lambda", t.lambda_reg},
                       {"basis_per_dim", t.basis_per_dim},
                       {"basis_max_degree", t.basis_max_degree},
                       {"w_star_norm_bound", t.w_star_norm_bound ? json(*t.w_star_norm_bound) : json(nullptr)},
                       {"gp_sigma", t.gp_sigma},
                       {"gp_signal_variance", t.gp_signal_variance},
                       {"gp_lengthscale", t.gp_lengthscale},
                       {"gp_lengthscale_grid", t.gp_lengthscale_grid},
                       {"gp_n_max", t.gp_n_max}};
    j["m_noise"] = cfg.m_noise;
    j["baselines"] = cfg.baselines;
    j["lambda_q"] = cfg.lambda_q;
    j["q_basis_per_dim"] = cfg.q_basis_per_dim;
    j["eval"] = {{"rollouts", cfg.eval_rollouts}, {"every_iteration", cfg.eval_every_iteration}};
    j["oracle"] = {{"n_branch", cfg.oracle.n_branch},
                   {"grid_per_dim", cfg.oracle.grid_per_dim},
                   {"seed", cfg.oracle.seed}};
    j["out_dir"] = cfg.out_dir;
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    j["record_timing"] = cfg.record_timing;
    j["save_policies"] = cfg.save_policies;
    return j.dump(2);
}

PolarConfig ExperimentConfig::default_polar() {
    PolarConfig pc;
    pc.T = 20;
    pc.m = {32, 32, 128};
    pc.q_rollouts = 32;
    pc.eta_mode = EtaMode::Constant;
    pc.eta_constant = 0.1;
    return pc;
}

ExperimentConfig preset_config(const std::string& name, bool full) {
    ExperimentConfig cfg;
    if (name == "fig1") {
        cfg.n = {200};
        cfg.p = {0.75};
        cfg.c = {0.0, 5.0, 10.0, 50.0, 100.0};
        cfg.replications = 20;
        cfg.baselines = {"dtr_q", "behavior"};
    } else if (name == "fig2") {
        cfg.n = {50, 200, 1000};
        cfg.p = {0.95, 0.75, 0.55};
        cfg.c = {0.0, 5.0, 10.0, 50.0, 100.0};
        cfg.replications = 20;
        cfg.eval_every_iteration = false;
    } else if (name == "sensitivity") {
        cfg.n = {200};
        cfg.p = {0.75};
        cfg.c = {10.0};
        cfg.replications = 10;
        cfg.transition.kind = TransitionKind::Gp;
        cfg.eval_every_iteration = false;
    } else {
        throw ConfigError("unknown preset '" + name + "' (expected fig1, fig2 or sensitivity)");
    }
    if (full) {
        cfg.replications = 100;
        if (name == "fig2") cfg.n = {50, 200, 1000, 5000, 20000};
    }
    cfg.out_dir = "results_" + name + (full ? "_full" : "");
    return cfg;
}

namespace {

// Shortest representation that parses back to the same double.
std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::string format_row(const ResultRow& r) {
    std::ostringstream os;
    os << r.method << ',' << r.n << ',' << fmt_double(r.p) << ',' << (r.c ? fmt_double(*r.c) : std::string()) << ','
       << r.replication << ',' << r.iteration << ',' << fmt_double(r.value_mean) << ',' << fmt_double(r.value_stderr)
       << ',' << fmt_double(r.wall_ms) << ',' << r.seed;
    return os.str();
}

std::string CellKey::id() const {
    return "n=" + std::to_string(n) + ",p=" + fmt_double(p) + ",rep=" + std::to_string(replication);
}

std::uint64_t cell_seed(std::uint64_t master, const CellKey& key) {
    const auto p_key = static_cast<std::uint64_t>(std::llround(key.p * 1e6));
    return derive_seed(master, {static_cast<std::uint64_t>(key.n), p_key, static_cast<std::uint64_t>(key.replication)});
}

std::shared_ptr<DpOracle> make_oracle(const ExperimentConfig& config) {
    auto opts = config.oracle;
    opts.threads = config.threads;
    return std::make_shared<DpOracle>(std::make_shared<SimEnv>(), opts);
}

std::vector<ResultRow> run_cell(const ExperimentConfig& config, const CellKey& key, const DpOracle& oracle,
                                const std::string& policy_dir) {
    const SimEnv env;
    const ModelSpec& spec = env.spec();
    const std::uint64_t seed = cell_seed(config.seed, key);
    const Rng root(seed);
    const std::uint64_t data_seed = root.child({1}).seed();
    const Rng fit_rng = root.child({2});
    const std::uint64_t polar_seed = root.child({3}).seed();
    const std::uint64_t eval_seed = root.child({4}).seed();
    const int threads = config.threads;
    const auto clock_start = std::chrono::steady_clock::now();
    auto wall = [&] {
        if (!config.record_timing) return 0.0;
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - clock_start).count();
    };

    const std::shared_ptr<const Policy> oracle_ref(std::shared_ptr<const Policy>{}, &oracle);
    const auto behavior = make_behavior_policy(oracle_ref, spec, key.p);
    const OfflineDataset data =
        generate_offline_dataset(env, *behavior, key.n, key.p, data_seed, SimEnv::kVersion, threads);
    const StageModels models = fit_transition_models(spec, data.trajectories, config.transition, env.noise(), fit_rng);

    std::vector<ResultRow> rows;
    auto row = [&](std::string method, std::optional<double> c, int iteration, const ValueEstimate& v) {
        rows.push_back({std::move(method), key.n, key.p, c, key.replication, iteration, v.mean, v.std_error, wall(),
                        seed});
    };
    auto evaluate = [&](const Policy& pol) {
        return evaluate_policy_true(env, pol, config.eval_rollouts, eval_seed, threads);
    };

    const auto initial = SoftmaxSievePolicy::with_budgets(
        spec,
        config.policy_budgets.size() == 1 ? std::vector<int>(SimEnv::kHorizon, config.policy_budgets.front())
                                          : config.policy_budgets,
        config.policy_max_degree);
    const Box s1_box = spec.box(1);
    for (double c : config.c) {
        const auto model = build_modified_model(spec, models, env.reward_fns(), {c}, config.m_noise,
                                                [s1_box](Rng& r) { return s1_box.sample(r); });
        PolarConfig pc = config.polar;
        pc.seed = polar_seed;
        pc.threads = threads;
        EvalHook hook = [&](int t, const SoftmaxSievePolicy& pol) {
            if (config.eval_every_iteration || t == pc.T) return evaluate(pol);
            return ValueEstimate{std::nan(""), std::nan(""), 0};
        };
        const PolarResult res = polar_train(*model, initial, pc, hook);
        for (const auto& e : res.trace) {
            if (!config.eval_every_iteration && e.iteration != pc.T) continue;
            row("polar", c, e.iteration, *e.value);
        }
        if (!policy_dir.empty()) {
            std::ofstream f(fs::path(policy_dir) / ("polar_" + key.id() + ",c=" + fmt_double(c) + ".json"));
            f << res.policy.to_json() << '\n';
        }
    }
    const int final_it = config.polar.T;
    for (const auto& b : config.baselines) {
        if (b == "dtr_q") {
            const auto q = dtr_q_learning(spec, data.trajectories,
                                          default_q_features(spec, config.q_basis_per_dim, config.transition.basis_max_degree),
                                          config.lambda_q);
            row("dtr_q", std::nullopt, final_it, evaluate(q));
        } else if (b == "behavior") {
            row("behavior", std::nullopt, final_it, evaluate(*behavior));
        } else if (b == "oracle") {
            row("oracle", std::nullopt, final_it, evaluate(oracle));
        }
    }
    return rows;
}

namespace {

struct Manifest {
    std::string config_json;
    std::vector<std::string> completed;
    std::vector<std::string> failed;

    void save(const fs::path& path) const {
        json j;
        j["version"] = 1;
        j["csv_header"] = kCsvHeader;
        j["config"] = json::parse(config_json);
        j["completed"] = completed;
        j["failed"] = failed;
        const fs::path tmp = path.string() + ".tmp";
        {
            std::ofstream f(tmp);
            f << j.dump(2) << '\n';
        }
        fs::rename(tmp, path);
    }

    static Manifest load(const fs::path& path) {
        std::ifstream f(path);
        if (!f) throw DataError("cannot read manifest " + path.string());
        try {
            const json j = json::parse(f);
            Manifest m;
            m.config_json = j.at("config").dump();
            m.completed = j.at("completed").get<std::vector<std::string>>();
            return m;
        } catch (const json::exception& e) {
            throw DataError(std::string("malformed manifest: ") + e.what());
        }
    }
};

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& config, bool resume,
                                 const std::function<void(const std::string&)>& log) {
    config.validate();
    const fs::path out(config.out_dir);
    fs::create_directories(out);
    const fs::path csv_path = out / "results.csv";
    const fs::path manifest_path = out / "manifest.json";
    const std::string policy_dir = config.save_policies ? (out / "policies").string() : std::string();
    if (!policy_dir.empty()) fs::create_directories(policy_dir);

    Manifest manifest;
    manifest.config_json = config_to_json(config);
    std::set<std::string> done;
    const bool resuming = resume && fs::exists(manifest_path) && fs::exists(csv_path);
    if (resuming) {
        Manifest old = Manifest::load(manifest_path);
        manifest.completed = old.completed;
        done.insert(old.completed.begin(), old.completed.end());
    }
    std::ofstream csv(csv_path, resuming ? std::ios::app : std::ios::trunc);
    if (!csv) throw DataError("cannot open " + csv_path.string());
    if (!resuming) csv << kCsvHeader << '\n';
    std::ofstream errors(out / "errors.log", resuming ? std::ios::app : std::ios::trunc);

    std::vector<CellKey> pending;
    ExperimentSummary summary;
    for (long n : config.n) {
        for (double p : config.p) {
            for (int r = 0; r < config.replications; ++r) {
                ++summary.cells_total;
                CellKey key{n, p, r};
                if (done.count(key.id())) {
                    ++summary.cells_skipped;
                } else {
                    pending.push_back(key);
                }
            }
        }
    }
    if (log) log("cells: " + std::to_string(summary.cells_total) + " total, " + std::to_string(pending.size()) + " to run");
    if (pending.empty()) {
        manifest.save(manifest_path);
        return summary;
    }

    const auto oracle = make_oracle(config);
    // Cells run concurrently when there are several; each then runs single-threaded.
    const int cell_workers = std::min<int>(config.threads, static_cast<int>(pending.size()));
    ExperimentConfig cell_cfg = config;
    if (cell_workers > 1) cell_cfg.threads = 1;

    std::mutex commit_mutex;
    std::vector<std::optional<std::vector<ResultRow>>> finished(pending.size());
    std::vector<std::string> messages(pending.size());
    std::size_t next_commit = 0;
    auto commit = [&] {
        while (next_commit < pending.size() && finished[next_commit]) {
            const auto& key = pending[next_commit];
            for (const auto& r : *finished[next_commit]) csv << format_row(r) << '\n';
            csv.flush();
            if (messages[next_commit].empty()) {
                manifest.completed.push_back(key.id());
                ++summary.cells_run;
            } else {
                manifest.failed.push_back(key.id());
                errors << key.id() << ": " << messages[next_commit] << '\n';
                errors.flush();
                ++summary.cells_failed;
            }
            manifest.save(manifest_path);
            if (log) log("cell " + key.id() + (messages[next_commit].empty() ? " done" : " FAILED: " + messages[next_commit]));
            ++next_commit;
        }
    };

    parallel_for(static_cast<long>(pending.size()), cell_workers, [&](long i) {
        const auto& key = pending[static_cast<std::size_t>(i)];
        std::vector<ResultRow> rows;
        std::string message;
        try {
            rows = run_cell(cell_cfg, key, *oracle, policy_dir);
        } catch (const std::exception& e) {
            message = e.what();
            rows = {{"error", key.n, key.p, std::nullopt, key.replication, -1, std::nan(""), std::nan(""), 0.0,
                     cell_seed(config.seed, key)}};
        }
        std::lock_guard lock(commit_mutex);
        finished[static_cast<std::size_t>(i)] = std::move(rows);
        messages[static_cast<std::size_t>(i)] = std::move(message);
        commit();
    });
    return summary;
}

}  // namespace polar
