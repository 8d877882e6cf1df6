#include "polar/policy.hpp"

#include <cmath>

#include "json.hpp"

namespace polar {

using nlohmann::json;

std::vector<double> softmax(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    std::vector<double> p(static_cast<std::size_t>(logits.size()));
    double z = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        p[static_cast<std::size_t>(i)] = std::exp(logits[i] - m);
        z += p[static_cast<std::size_t>(i)];
    }
    for (double& v : p) v /= z;
    return p;
}

SoftmaxSievePolicy::SoftmaxSievePolicy(ModelSpec spec, std::vector<TensorBasis> bases)
    : spec_(std::move(spec)), bases_(std::move(bases)) {
    spec_.validate();
    if (static_cast<int>(bases_.size()) != spec_.horizon()) throw ConfigError("one policy basis per stage is required");
    for (int k = 1; k <= spec_.horizon(); ++k) {
        const auto& b = bases_[static_cast<std::size_t>(k - 1)];
        if (b.dim() != spec_.history_dim(k)) throw ConfigError("policy basis dimension does not match stage history");
        indices_.emplace_back(spec_.action_sizes(k));
        thetas_.push_back(Eigen::MatrixXd::Zero(b.size(), indices_.back().count()));
    }
}

SoftmaxSievePolicy SoftmaxSievePolicy::with_budgets(const ModelSpec& spec, std::span<const int> budgets,
                                                    int max_degree) {
    if (static_cast<int>(budgets.size()) != spec.horizon()) throw ConfigError("one basis budget per stage is required");
    std::vector<TensorBasis> bases;
    for (int k = 1; k <= spec.horizon(); ++k) {
        const auto boxes = history_boxes(spec, k);
        bases.push_back(TensorBasis::from_budget(boxes, budgets[static_cast<std::size_t>(k - 1)], max_degree));
    }
    return SoftmaxSievePolicy(spec, std::move(bases));
}

Eigen::VectorXd SoftmaxSievePolicy::features(int k, const History& h) const {
    if (h.stage() != k) throw ConfigError("history length does not match stage");
    Eigen::VectorXd sbar(spec_.history_dim(k));
    Eigen::Index off = 0;
    for (int j = 1; j <= k; ++j) {
        const Box& box = spec_.box(j);
        sbar.segment(off, box.dim()) = box.clip(h.states[static_cast<std::size_t>(j - 1)]);
        off += box.dim();
    }
    return basis(k).eval(sbar);
}

Eigen::VectorXd SoftmaxSievePolicy::logits(int k, const History& h) const {
    const Eigen::VectorXd ups = features(k, h);
    const auto& idx = action_index(k);
    const auto& th = theta(k);
    const int n_actions = spec_.stage(k).num_actions;
    Eigen::VectorXd f(n_actions);
    for (int a = 0; a < n_actions; ++a) f[a] = th.col(idx.encode(h.actions, a)).dot(ups);
    return f;
}

std::vector<double> SoftmaxSievePolicy::action_probs(int k, const History& h) const { return softmax(logits(k, h)); }

double SoftmaxSievePolicy::log_prob(int k, const History& h, int action) const {
    const Eigen::VectorXd f = logits(k, h);
    if (action < 0 || action >= f.size()) throw ConfigError("action index out of range");
    const double m = f.maxCoeff();
    return f[action] - m - std::log((f.array() - m).exp().sum());
}

SoftmaxSievePolicy SoftmaxSievePolicy::with_theta(int k, Eigen::MatrixXd theta_k) const {
    const auto& cur = theta(k);
    if (theta_k.rows() != cur.rows() || theta_k.cols() != cur.cols()) throw ConfigError("theta shape mismatch");
    SoftmaxSievePolicy out = *this;
    out.thetas_[static_cast<std::size_t>(k - 1)] = std::move(theta_k);
    return out;
}

SoftmaxSievePolicy SoftmaxSievePolicy::npg_update(int k, const Eigen::MatrixXd& theta_hat, double eta) const {
    const auto& cur = theta(k);
    if (theta_hat.rows() != cur.rows() || theta_hat.cols() != cur.cols()) throw ConfigError("theta_hat shape mismatch");
    return with_theta(k, cur + eta * theta_hat);
}

namespace {

json box_to_json(const Box& b) {
    json arr = json::array();
    for (const auto& iv : b.intervals()) arr.push_back({iv.lo, iv.hi});
    return arr;
}

Box box_from_json(const json& j) {
    std::vector<Interval> dims;
    for (const auto& iv : j) dims.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
    return Box(std::move(dims));
}

}  // namespace

std::string SoftmaxSievePolicy::to_json() const {
    json j;
    j["format"] = "polar-softmax-sieve";
    j["version"] = 1;
    json stages = json::array();
    for (int k = 1; k <= horizon(); ++k) {
        json st;
        st["k"] = k;
        st["state_box"] = box_to_json(spec_.box(k));
        st["num_actions"] = spec_.stage(k).num_actions;
        json factors = json::array();
        for (const auto& f : basis(k).factors()) {
            factors.push_back({{"degree", f.degree()},
                               {"interior_knots", f.interior_knots()},
                               {"domain", {f.domain().lo, f.domain().hi}}});
        }
        st["basis"] = factors;
        const auto& th = theta(k);
        json rows = json::array();
        for (Eigen::Index r = 0; r < th.rows(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(th.cols()));
            for (Eigen::Index c = 0; c < th.cols(); ++c) row[static_cast<std::size_t>(c)] = th(r, c);
            rows.push_back(row);
        }
        st["theta"] = rows;
        stages.push_back(st);
    }
    j["stages"] = stages;
    j["final_box"] = box_to_json(spec_.final_box);
    return j.dump();
}

SoftmaxSievePolicy SoftmaxSievePolicy::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("policy file is not valid JSON: ") + e.what());
    }
    if (j.value("format", "") != "polar-softmax-sieve") throw DataError("not a softmax sieve policy file");
    try {
        ModelSpec spec;
        std::vector<TensorBasis> bases;
        std::vector<Eigen::MatrixXd> thetas;
        for (const auto& st : j.at("stages")) {
            spec.stages.push_back({st.at("k").get<int>(), box_from_json(st.at("state_box")),
                                   st.at("num_actions").get<int>()});
            std::vector<BSplineBasis1D> factors;
            for (const auto& f : st.at("basis")) {
                factors.emplace_back(f.at("degree").get<int>(), f.at("interior_knots").get<std::vector<double>>(),
                                     Interval{f.at("domain").at(0).get<double>(), f.at("domain").at(1).get<double>()});
            }
            bases.emplace_back(std::move(factors));
            const auto& rows = st.at("theta");
            const auto n_rows = static_cast<Eigen::Index>(rows.size());
            const auto n_cols = n_rows ? static_cast<Eigen::Index>(rows.at(0).size()) : 0;
            Eigen::MatrixXd th(n_rows, n_cols);
            for (Eigen::Index r = 0; r < n_rows; ++r) {
                const auto& row = rows.at(static_cast<std::size_t>(r));
                if (static_cast<Eigen::Index>(row.size()) != n_cols) throw DataError("ragged theta matrix");
                for (Eigen::Index c = 0; c < n_cols; ++c) th(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
            }
            thetas.push_back(std::move(th));
        }
        spec.final_box = box_from_json(j.at("final_box"));
        SoftmaxSievePolicy pol(std::move(spec), std::move(bases));
        for (int k = 1; k <= pol.horizon(); ++k) pol = pol.with_theta(k, thetas[static_cast<std::size_t>(k - 1)]);
        return pol;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed policy file: ") + e.what());
    }
}

}  // namespace polar
