#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "polar/baselines.hpp"
#include "polar/experiment.hpp"
#include "polar/gp_transition.hpp"
#include "polar/simenv.hpp"

namespace py = pybind11;
using namespace polar;

namespace {

py::dict row_dict(const ResultRow& r) {
    py::dict d;
    d["method"] = r.method;
    d["n"] = r.n;
    d["p"] = r.p;
    d["c"] = r.c ? py::cast(*r.c) : py::none();
    d["replication"] = r.replication;
    d["iteration"] = r.iteration;
    d["value_mean"] = r.value_mean;
    d["value_stderr"] = r.value_stderr;
    d["wall_ms"] = r.wall_ms;
    d["seed"] = r.seed;
    return d;
}

std::shared_ptr<DpOracle> oracle_for(const ExperimentConfig& cfg) { return make_oracle(cfg); }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Pessimistic model-based DTR learning";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.attr("CSV_HEADER") = kCsvHeader;

    m.def("preset_config", [](const std::string& name, bool full) { return config_to_json(preset_config(name, full)); },
          py::arg("name"), py::arg("full") = false, "Preset experiment config as JSON text.");
    m.def("default_config", [] { return config_to_json(ExperimentConfig{}); });
    m.def("normalize_config", [](const std::string& text) { return config_to_json(config_from_json(text)); },
          py::arg("config_json"), "Validate a JSON config and fill in defaults.");

    m.def(
        "run_experiment",
        [](const std::string& config_json, bool resume) {
            const auto cfg = config_from_json(config_json);
            ExperimentSummary s;
            {
                py::gil_scoped_release release;
                s = run_experiment(cfg, resume);
            }
            py::dict d;
            d["cells_total"] = s.cells_total;
            d["cells_run"] = s.cells_run;
            d["cells_skipped"] = s.cells_skipped;
            d["cells_failed"] = s.cells_failed;
            return d;
        },
        py::arg("config_json"), py::arg("resume") = false,
        "Run the grid in the config, writing results.csv and manifest.json to out_dir.");

    m.def(
        "run_cell",
        [](const std::string& config_json, long n, double p, int replication) {
            const auto cfg = config_from_json(config_json);
            std::vector<ResultRow> rows;
            {
                py::gil_scoped_release release;
                const auto oracle = oracle_for(cfg);
                rows = run_cell(cfg, CellKey{n, p, replication}, *oracle);
            }
            py::list out;
            for (const auto& r : rows) out.append(row_dict(r));
            return out;
        },
        py::arg("config_json"), py::arg("n"), py::arg("p"), py::arg("replication") = 0,
        "Result rows of one (n, p, replication) cell.");

    m.def("format_row", [](const py::dict& d) {
        ResultRow r;
        r.method = d["method"].cast<std::string>();
        r.n = d["n"].cast<long>();
        r.p = d["p"].cast<double>();
        if (!d["c"].is_none()) r.c = d["c"].cast<double>();
        r.replication = d["replication"].cast<int>();
        r.iteration = d["iteration"].cast<int>();
        r.value_mean = d["value_mean"].cast<double>();
        r.value_stderr = d["value_stderr"].cast<double>();
        r.wall_ms = d["wall_ms"].cast<double>();
        r.seed = d["seed"].cast<std::uint64_t>();
        return format_row(r);
    });

    auto env = m.def_submodule("simenv", "Three-stage simulation environment");
    env.def("weight", &SimEnv::weight, py::arg("k"), py::arg("action"));
    env.def("mean_next", [](int k, int a, const Eigen::VectorXd& s) -> Eigen::VectorXd { return SimEnv::mean_next(k, a, s); },
            py::arg("k"), py::arg("action"), py::arg("state"));
    env.def("terminal_reward", &SimEnv::terminal_reward, py::arg("s3"), py::arg("a3"), py::arg("s4"));
    env.def("reward_bound", [] { return SimEnv().reward_bound(SimEnv::kHorizon); });
    env.def(
        "dp_value",
        [](const Eigen::VectorXd& s1, int n_branch, std::uint64_t seed) {
            const SimEnv e;
            const auto r = dp_optimal_action(e, History::initial(s1), n_branch, Rng(seed));
            return py::make_tuple(r.action, r.value, r.q);
        },
        py::arg("s1"), py::arg("n_branch") = 100, py::arg("seed") = 0,
        "(action, V_1*, Q_1*) at s1 from the sampled-tree DP.");
    env.def(
        "generate_dataset",
        [](long n, double p, std::uint64_t seed, int grid_per_dim, int n_branch) {
            ExperimentConfig cfg;
            cfg.oracle.grid_per_dim = grid_per_dim;
            cfg.oracle.n_branch = n_branch;
            OfflineDataset data;
            {
                py::gil_scoped_release release;
                const auto oracle = oracle_for(cfg);
                const SimEnv e;
                const auto b = make_behavior_policy(oracle, e.spec(), p);
                data = generate_offline_dataset(e, *b, n, p, seed, SimEnv::kVersion);
            }
            const int K = SimEnv::kHorizon;
            py::array_t<double> states({static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(K + 1), py::ssize_t{2}});
            py::array_t<int> actions({static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(K)});
            py::array_t<double> rewards({static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(K)});
            py::array_t<double> probs({static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(K)});
            auto s = states.mutable_unchecked<3>();
            auto a = actions.mutable_unchecked<2>();
            auto r = rewards.mutable_unchecked<2>();
            auto q = probs.mutable_unchecked<2>();
            for (long i = 0; i < n; ++i) {
                const auto& t = data.trajectories[static_cast<std::size_t>(i)];
                for (int k = 0; k <= K; ++k)
                    for (int d = 0; d < 2; ++d) s(i, k, d) = t.states[static_cast<std::size_t>(k)][d];
                for (int k = 0; k < K; ++k) {
                    a(i, k) = t.actions[static_cast<std::size_t>(k)];
                    r(i, k) = t.rewards[static_cast<std::size_t>(k)];
                    q(i, k) = data.behavior_probs[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
                }
            }
            py::dict d;
            d["states"] = states;
            d["actions"] = actions;
            d["rewards"] = rewards;
            d["behavior_probs"] = probs;
            return d;
        },
        py::arg("n"), py::arg("p"), py::arg("seed"), py::arg("grid_per_dim") = 21, py::arg("n_branch") = 100,
        "Offline trajectories from the oracle-based behavior policy.");

    auto gp = m.def_submodule("gp", "Exact GP regression");
    gp.def(
        "posterior",
        [](const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const Eigen::VectorXd& lengthscales,
           double signal_variance, double sigma, const Eigen::MatrixXd& Xq) {
            const auto post = gp_fit(X, Y, Kernel{lengthscales, signal_variance}, sigma);
            Eigen::MatrixXd mean(Xq.rows(), Y.rows());
            Eigen::VectorXd var(Xq.rows());
            for (Eigen::Index i = 0; i < Xq.rows(); ++i) {
                const auto pr = gp_predict(post, Xq.row(i).transpose());
                mean.row(i) = pr.mean.transpose();
                var[i] = pr.variance;
            }
            return py::make_tuple(mean, var, gp_log_marginal_likelihood(post));
        },
        py::arg("X"), py::arg("Y"), py::arg("lengthscales"), py::arg("signal_variance"), py::arg("sigma"),
        py::arg("Xq"), "X is n x d, Y is out x n. Returns (mean q x out, variance q, log marginal likelihood).");

    auto basis = m.def_submodule("basis", "B-spline sieves");
    basis.def(
        "tensor_eval",
        [](const std::vector<std::pair<double, double>>& domain, int per_dim, int max_degree, const Eigen::MatrixXd& pts) {
            std::vector<Interval> iv;
            for (const auto& [lo, hi] : domain) iv.push_back({lo, hi});
            const std::vector<Box> boxes{Box(iv)};
            const auto tb = TensorBasis::uniform(boxes, per_dim, max_degree);
            Eigen::MatrixXd out(pts.rows(), tb.size());
            for (Eigen::Index i = 0; i < pts.rows(); ++i) out.row(i) = tb.eval(pts.row(i).transpose()).transpose();
            return out;
        },
        py::arg("domain"), py::arg("per_dim"), py::arg("max_degree"), py::arg("points"),
        "Tensor B-spline features of each row of `points`.");
}
