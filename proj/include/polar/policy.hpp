#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "polar/basis.hpp"
#include "polar/core.hpp"

namespace polar {

/// π_k(a | h_k) ∝ exp(θ_k[ā_k]^T Υ_k(s̄_k)), ā_k = (a_1, ..., a_{k-1}, a).
///
/// θ_k is L_k x N_k^(A), one column per full action history. Snapshots are
/// immutable; `npg_update` returns a new policy.
class SoftmaxSievePolicy final : public Policy {
public:
    /// Zero parameters (uniform policy). `bases[k-1]` spans the state history
    /// of stage k.
    SoftmaxSievePolicy(ModelSpec spec, std::vector<TensorBasis> bases);

    /// Per-stage bases with the largest per-dimension size m such that
    /// m^(dim s̄_k) <= budgets[k-1].
    static SoftmaxSievePolicy with_budgets(const ModelSpec& spec, std::span<const int> budgets, int max_degree = 3);

    int horizon() const override { return spec_.horizon(); }
    const ModelSpec& spec() const { return spec_; }
    const TensorBasis& basis(int k) const { return bases_.at(static_cast<std::size_t>(k - 1)); }
    const ActionHistoryIndex& action_index(int k) const { return indices_.at(static_cast<std::size_t>(k - 1)); }
    const Eigen::MatrixXd& theta(int k) const { return thetas_.at(static_cast<std::size_t>(k - 1)); }

    /// Υ_k(s̄_k) with s̄_k clipped into the boxes.
    Eigen::VectorXd features(int k, const History& h) const;
    /// f_k(θ, h, a) for every a in A_k.
    Eigen::VectorXd logits(int k, const History& h) const;

    std::vector<double> action_probs(int k, const History& h) const override;
    double log_prob(int k, const History& h, int action) const;

    SoftmaxSievePolicy with_theta(int k, Eigen::MatrixXd theta) const;
    /// θ_k <- θ_k + η θ̂_k; other stages untouched.
    SoftmaxSievePolicy npg_update(int k, const Eigen::MatrixXd& theta_hat, double eta) const;

    std::string to_json() const;
    static SoftmaxSievePolicy from_json(const std::string& text);

private:
    ModelSpec spec_;
    std::vector<TensorBasis> bases_;
    std::vector<ActionHistoryIndex> indices_;
    std::vector<Eigen::MatrixXd> thetas_;
};

/// Max-subtracted softmax.
std::vector<double> softmax(const Eigen::VectorXd& logits);

}  // namespace polar
