#include "polar/pessimism.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace polar {

RewardFn RewardFn::constant(double value) {
    RewardFn r;
    r.fn = [value](const History&, int, const Eigen::VectorXd&) { return value; };
    r.sup_norm = std::abs(value);
    return r;
}

LinearStageModel::LinearStageModel(FeatureMap features, LinearTransitionEstimate estimate, double c2, Box next_box)
    : features_(std::move(features)), estimate_(std::move(estimate)), c2_(c2), next_box_(std::move(next_box)) {
    if (estimate_.block_size != features_.tensor().size() || estimate_.num_blocks != features_.action_index().count()) {
        throw ConfigError("linear estimate does not match its feature map");
    }
    if (c2_ < 0.0) throw ConfigError("penalty constant must be non-negative");
}

Eigen::VectorXd LinearStageModel::mean(const History& h, int action) const {
    return estimate_.mean(features_(h, action));
}

Eigen::VectorXd LinearStageModel::sample_next(const History& h, int action, Rng& rng) const {
    return sample_next_linear(estimate_, features_(h, action), next_box_, rng);
}

double LinearStageModel::gamma(const History& h, int action) const {
    return gamma_linear_with_constant(estimate_, c2_, features_(h, action));
}

GpInputEncoder::GpInputEncoder(const ModelSpec& spec, int k)
    : k_(k), state_dim_(spec.history_dim(k)), index_(spec.action_sizes(k)), boxes_(history_boxes(spec, k)) {}

Eigen::VectorXd GpInputEncoder::operator()(const History& h, int action) const {
    if (h.stage() != k_) throw ConfigError("history length does not match GP encoder stage");
    Eigen::VectorXd x = Eigen::VectorXd::Zero(dim());
    Eigen::Index off = 0;
    for (std::size_t j = 0; j < boxes_.size(); ++j) {
        const Box& box = boxes_[j];
        const Eigen::VectorXd s = box.clip(h.states[j]);
        for (int i = 0; i < box.dim(); ++i) x[off++] = (s[i] - box[i].lo) / box[i].width();
    }
    x[state_dim_ + index_.encode(h.actions, action)] = 1.0;
    return x;
}

std::vector<int> GpInputEncoder::groups() const {
    std::vector<int> g(static_cast<std::size_t>(dim()), 1);
    std::fill(g.begin(), g.begin() + state_dim_, 0);
    return g;
}

GpStageModel::GpStageModel(GpInputEncoder encoder, GpPosterior posterior, Eigen::VectorXd offset, double beta,
                           Box next_box)
    : encoder_(std::move(encoder)),
      posterior_(std::move(posterior)),
      offset_(std::move(offset)),
      beta_(beta),
      next_box_(std::move(next_box)) {
    if (posterior_.input_dim() != encoder_.dim()) throw ConfigError("GP posterior does not match its encoder");
    if (offset_.size() != posterior_.out_dim()) throw ConfigError("GP offset dimension mismatch");
    if (beta_ < 0.0) throw ConfigError("beta must be non-negative");
}

Eigen::VectorXd GpStageModel::mean(const History& h, int action) const {
    return gp_predict(posterior_, encoder_(h, action)).mean + offset_;
}

Eigen::VectorXd GpStageModel::sample_next(const History& h, int action, Rng& rng) const {
    Eigen::VectorXd s = mean(h, action);
    for (Eigen::Index i = 0; i < s.size(); ++i) s[i] += posterior_.sigma * rng.normal();
    return next_box_.clip(s);
}

double GpStageModel::gamma(const History& h, int action) const {
    return gamma_gp(posterior_, encoder_(h, action), beta_);
}

double GpStageModel::gamma_bound() const {
    return beta_ / posterior_.sigma * std::sqrt(posterior_.kernel.signal_variance);
}

void TransitionConfig::validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
    if (lambda_reg < 0.0) throw ConfigError("lambda must be non-negative");
    if (basis_per_dim < 1) throw ConfigError("basis size must be positive");
    if (!(gp_sigma > 0.0) || !(gp_signal_variance > 0.0) || !(gp_lengthscale > 0.0)) {
        throw ConfigError("GP hyperparameters must be positive");
    }
    if (gp_n_max < 1) throw ConfigError("gp_n_max must be positive");
}

namespace {

std::shared_ptr<const StageTransitionModel> fit_linear_stage(const ModelSpec& spec, int k,
                                                             std::span<const Trajectory> data,
                                                             const TransitionConfig& config, const NoiseSpec& noise) {
    const auto boxes = history_boxes(spec, k);
    FeatureMap fmap(spec, k, TensorBasis::uniform(boxes, config.basis_per_dim, config.basis_max_degree));
    const int out_dim = spec.box(k + 1).dim();
    std::vector<BlockFeature> feats;
    feats.reserve(data.size());
    Eigen::MatrixXd next(static_cast<Eigen::Index>(data.size()), out_dim);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Trajectory& t = data[i];
        feats.push_back(fmap(t.history(k), t.actions[static_cast<std::size_t>(k - 1)]));
        next.row(static_cast<Eigen::Index>(i)) = t.states[static_cast<std::size_t>(k)].transpose();
    }
    auto est = fit_ridge(feats, next, config.lambda_reg, noise, fmap.tensor().size(), fmap.action_index().count());
    est.stage = k;
    GammaLinearParams params;
    params.delta = config.delta;
    params.w_star_norm_bound = config.w_star_norm_bound;
    params.scale = config.scale;
    const double c2 = gamma_constant_linear(est, params);
    return std::make_shared<LinearStageModel>(std::move(fmap), std::move(est), c2, spec.box(k + 1));
}

std::shared_ptr<const StageTransitionModel> fit_gp_stage(const ModelSpec& spec, int k,
                                                         std::span<const Trajectory> data,
                                                         const TransitionConfig& config, Rng rng) {
    GpInputEncoder enc(spec, k);
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), 0);
    if (static_cast<int>(rows.size()) > config.gp_n_max) {
        // partial Fisher-Yates
        for (int i = 0; i < config.gp_n_max; ++i) {
            const int j = i + rng.uniform_int(static_cast<int>(rows.size()) - i);
            std::swap(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(j)]);
        }
        rows.resize(static_cast<std::size_t>(config.gp_n_max));
        std::sort(rows.begin(), rows.end());
    }
    const int out_dim = spec.box(k + 1).dim();
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), enc.dim());
    Eigen::MatrixXd Y(out_dim, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const Trajectory& t = data[rows[r]];
        X.row(static_cast<Eigen::Index>(r)) = enc(t.history(k), t.actions[static_cast<std::size_t>(k - 1)]).transpose();
        Y.col(static_cast<Eigen::Index>(r)) = t.states[static_cast<std::size_t>(k)];
    }
    const Eigen::VectorXd offset = Y.rowwise().mean();
    Y.colwise() -= offset;
    Kernel kernel = Kernel::rbf(enc.dim(), config.gp_lengthscale, config.gp_signal_variance);
    if (!config.gp_lengthscale_grid.empty()) {
        kernel = tune_lengthscales(X, Y, kernel, config.gp_sigma, enc.groups(), config.gp_lengthscale_grid);
    }
    GpPosterior post = gp_fit(X, Y, kernel, config.gp_sigma);
    post.stage = k;
    const double beta = config.scale == PenaltyScale::Folded ? 1.0 : beta_gp(post, config.delta);
    return std::make_shared<GpStageModel>(std::move(enc), std::move(post), offset, beta, spec.box(k + 1));
}

}  // namespace

StageModels fit_transition_models(const ModelSpec& spec, std::span<const Trajectory> data,
                                  const TransitionConfig& config, const NoiseSpec& noise, const Rng& rng) {
    config.validate();
    spec.validate();
    for (const auto& t : data) {
        if (t.horizon() != spec.horizon() || !t.structurally_valid()) throw DataError("malformed trajectory");
    }
    if (config.kind == TransitionKind::Gp && data.empty()) throw DataError("GP fit needs at least one trajectory");
    StageModels out;
    for (int k = 1; k <= spec.horizon(); ++k) {
        if (config.kind == TransitionKind::Linear) {
            out.push_back(fit_linear_stage(spec, k, data, config, noise));
        } else {
            out.push_back(fit_gp_stage(spec, k, data, config, rng.child({static_cast<std::uint64_t>(k)})));
        }
    }
    return out;
}

double estimate_reward(const StageTransitionModel& model, const RewardFn& reward, const History& h, int action,
                       int m_noise, Rng& rng) {
    if (m_noise < 1) throw ConfigError("m_noise must be at least 1");
    if (reward.is_zero()) return 0.0;
    double acc = 0.0;
    for (int i = 0; i < m_noise; ++i) acc += reward(h, action, model.sample_next(h, action, rng));
    return acc / m_noise;
}

double modified_reward(double r_hat, double gamma, double c) {
    if (c < 0.0) throw ConfigError("penalty multiplier c must be non-negative");
    if (gamma < 0.0) throw ConfigError("uncertainty quantifier must be non-negative");
    return r_hat - c * gamma;
}

ModifiedDtrModel::ModifiedDtrModel(ModelSpec spec, StageModels transitions, std::vector<RewardFn> rewards,
                                   std::vector<double> c, int m_noise, std::function<Eigen::VectorXd(Rng&)> initial)
    : spec_(std::move(spec)),
      transitions_(std::move(transitions)),
      rewards_(std::move(rewards)),
      c_(std::move(c)),
      m_noise_(m_noise),
      initial_(std::move(initial)) {
    spec_.validate();
    const auto K = static_cast<std::size_t>(spec_.horizon());
    if (transitions_.size() != K) throw ConfigError("one transition estimate per stage is required");
    for (std::size_t k = 0; k < K; ++k) {
        if (!transitions_[k]) throw ConfigError("missing transition estimate for a stage");
        if (transitions_[k]->stage() != static_cast<int>(k) + 1) throw ConfigError("transition estimates out of order");
    }
    if (rewards_.size() != K) throw ConfigError("one reward function per stage is required");
    if (c_.size() == 1) c_.assign(K, c_.front());
    if (c_.size() != K) throw ConfigError("penalty multipliers must be scalar or per stage");
    for (double ck : c_) {
        if (ck < 0.0) throw ConfigError("penalty multiplier c must be non-negative");
    }
    if (m_noise_ < 1) throw ConfigError("m_noise must be at least 1");
    if (!initial_) throw ConfigError("initial-state sampler is required");
}

Eigen::VectorXd ModifiedDtrModel::transition(int k, const History& h, int action, Rng& rng) const {
    return stage_model(k).sample_next(h, action, rng);
}

double ModifiedDtrModel::gamma(int k, const History& h, int action) const {
    return penalty(k) == 0.0 ? 0.0 : stage_model(k).gamma(h, action);
}

double ModifiedDtrModel::expected_reward(int k, const History& h, int action, Rng& rng) const {
    const double r_hat = estimate_reward(stage_model(k), reward(k), h, action, m_noise_, rng);
    return modified_reward(r_hat, gamma(k, h, action), penalty(k));
}

double ModifiedDtrModel::realized_reward(int k, const History& h, int action, const Eigen::VectorXd& next) const {
    return modified_reward(reward(k)(h, action, next), gamma(k, h, action), penalty(k));
}

double ModifiedDtrModel::reward_bound(int k) const {
    return reward(k).sup_norm + penalty(k) * stage_model(k).gamma_bound();
}

std::shared_ptr<ModifiedDtrModel> build_modified_model(const ModelSpec& spec, StageModels transitions,
                                                       std::vector<RewardFn> rewards, std::vector<double> c,
                                                       int m_noise, std::function<Eigen::VectorXd(Rng&)> initial) {
    return std::make_shared<ModifiedDtrModel>(spec, std::move(transitions), std::move(rewards), std::move(c), m_noise,
                                              std::move(initial));
}

std::vector<double> theoretical_penalties(std::span<const RewardFn> rewards) {
    std::vector<double> c(rewards.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = rewards.size(); i-- > 0;) {
        acc += rewards[i].sup_norm;
        c[i] = acc;
    }
    return c;
}

}  // namespace polar
