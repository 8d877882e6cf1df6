#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "polar/core.hpp"

namespace polar {

/// Clamped B-spline basis of a given degree on [lo, hi].
///
/// Knot vector is (lo x (degree+1), interior..., hi x (degree+1)), so the
/// basis has degree + 1 + #interior functions and forms a partition of unity
/// on the closed domain. Degree 0 with no interior knots is the constant basis.
class BSplineBasis1D {
public:
    BSplineBasis1D(int degree, std::vector<double> interior_knots, Interval domain);

    /// `size` functions of degree min(max_degree, size-1) with equally spaced
    /// interior knots.
    static BSplineBasis1D uniform(Interval domain, int size, int max_degree = 3);

    int degree() const { return degree_; }
    int size() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
    const Interval& domain() const { return domain_; }
    const std::vector<double>& interior_knots() const { return interior_; }

    /// Full basis vector at x. Throws std::domain_error outside the domain.
    Eigen::VectorXd eval(double x) const;

    /// Writes the degree+1 possibly-nonzero values at x into `values` and
    /// returns the index of the first one.
    int eval_local(double x, std::span<double> values) const;

private:
    int find_span(double x) const;

    int degree_;
    std::vector<double> interior_;
    Interval domain_;
    std::vector<double> knots_;
};

/// Tensor-product basis Υ over a concatenated state history s̄_k. The first
/// dimension is the outermost (slowest-varying) Kronecker factor; dimensions
/// are ordered stage-major then coordinate-major, as in History::concat_states.
class TensorBasis {
public:
    TensorBasis() = default;
    explicit TensorBasis(std::vector<BSplineBasis1D> dims);

    /// Same per-dimension size for every dimension of the boxes. Size 1 gives
    /// the constant basis.
    static TensorBasis uniform(std::span<const Box> boxes, int per_dim_size, int max_degree = 3);

    /// Largest common per-dimension size m with m^D <= budget (at least 2,
    /// or 1 when budget is 1).
    static TensorBasis from_budget(std::span<const Box> boxes, int budget, int max_degree = 3);

    int dim() const { return static_cast<int>(dims_.size()); }
    int size() const { return size_; }
    const std::vector<BSplineBasis1D>& factors() const { return dims_; }

    Eigen::VectorXd eval(const Eigen::VectorXd& sbar) const;

private:
    std::vector<BSplineBasis1D> dims_;
    int size_ = 1;
};

/// Row-major bijection between action histories (a_1, ..., a_k) and
/// 0..N_k^(A)-1, a_1 outermost.
class ActionHistoryIndex {
public:
    ActionHistoryIndex() = default;
    explicit ActionHistoryIndex(std::vector<int> sizes);

    int length() const { return static_cast<int>(sizes_.size()); }
    int count() const { return count_; }
    const std::vector<int>& sizes() const { return sizes_; }

    int encode(std::span<const int> actions) const;
    /// Encoding of (prefix..., last).
    int encode(std::span<const int> prefix, int last) const;
    std::vector<int> decode(int index) const;

private:
    std::vector<int> sizes_;
    int count_ = 1;
};

/// φ_k(h_k, a_k): Υ(s̄_k) placed in the block of action history ā_k, zeros
/// elsewhere. Dense layout is block-major: entry (block * L + l).
struct BlockFeature {
    int block = 0;
    int num_blocks = 1;
    Eigen::VectorXd upsilon;

    int block_size() const { return static_cast<int>(upsilon.size()); }
    int dense_size() const { return block_size() * num_blocks; }
    Eigen::VectorXd dense() const;
};

Eigen::VectorXd eval_state_features(const TensorBasis& tensor, const Eigen::VectorXd& sbar);

BlockFeature phi_features(const TensorBasis& tensor, const ActionHistoryIndex& index, const Eigen::VectorXd& sbar,
                          std::span<const int> action_history);

/// Stage-k transition feature map over the boxes of a model spec.
class FeatureMap {
public:
    FeatureMap(const ModelSpec& spec, int k, TensorBasis tensor);

    int stage() const { return k_; }
    const TensorBasis& tensor() const { return tensor_; }
    const ActionHistoryIndex& action_index() const { return index_; }
    int dim() const { return tensor_.size() * index_.count(); }

    /// φ_k(h_k, a_k); the state history is clipped into the boxes first.
    BlockFeature operator()(const History& h, int action) const;

private:
    int k_;
    TensorBasis tensor_;
    ActionHistoryIndex index_;
    std::vector<Box> boxes_;
};

/// Boxes of S_1..S_k in stage order.
std::vector<Box> history_boxes(const ModelSpec& spec, int k);

}  // namespace polar
