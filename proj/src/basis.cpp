#include "polar/basis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace polar {

BSplineBasis1D::BSplineBasis1D(int degree, std::vector<double> interior_knots, Interval domain)
    : degree_(degree), interior_(std::move(interior_knots)), domain_(domain) {
    if (degree_ < 0) throw ConfigError("B-spline degree must be non-negative");
    if (!(domain_.lo < domain_.hi)) throw ConfigError("B-spline domain must be non-degenerate");
    if (!std::is_sorted(interior_.begin(), interior_.end())) throw ConfigError("interior knots must be sorted");
    for (double t : interior_) {
        if (!(t > domain_.lo && t < domain_.hi)) throw ConfigError("interior knots must lie strictly inside the domain");
    }
    knots_.assign(static_cast<std::size_t>(degree_ + 1), domain_.lo);
    knots_.insert(knots_.end(), interior_.begin(), interior_.end());
    knots_.insert(knots_.end(), static_cast<std::size_t>(degree_ + 1), domain_.hi);
}

BSplineBasis1D BSplineBasis1D::uniform(Interval domain, int size, int max_degree) {
    if (size < 1) throw ConfigError("basis size must be at least 1");
    const int degree = std::min(max_degree, size - 1);
    const int n_interior = size - degree - 1;
    std::vector<double> interior;
    interior.reserve(static_cast<std::size_t>(n_interior));
    for (int i = 1; i <= n_interior; ++i) {
        interior.push_back(domain.lo + domain.width() * static_cast<double>(i) / static_cast<double>(n_interior + 1));
    }
    return BSplineBasis1D(degree, std::move(interior), domain);
}

int BSplineBasis1D::find_span(double x) const {
    const int n = size() - 1;
    if (x >= knots_[static_cast<std::size_t>(n + 1)]) return n;
    // Largest i in [degree, n] with knots[i] <= x.
    auto first = knots_.begin() + degree_;
    auto last = knots_.begin() + n + 1;
    auto it = std::upper_bound(first, last, x);
    return static_cast<int>(it - knots_.begin()) - 1;
}

int BSplineBasis1D::eval_local(double x, std::span<double> values) const {
    if (!(x >= domain_.lo && x <= domain_.hi)) throw std::domain_error("B-spline evaluated outside its domain");
    const int p = degree_;
    const int span = find_span(x);
    values[0] = 1.0;
    double left[16];
    double right[16];
    if (p >= 16) throw ConfigError("B-spline degree too large");
    for (int j = 1; j <= p; ++j) {
        left[j] = x - knots_[static_cast<std::size_t>(span + 1 - j)];
        right[j] = knots_[static_cast<std::size_t>(span + j)] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double temp = values[r] / (right[r + 1] + left[j - r]);
            values[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        values[j] = saved;
    }
    return span - p;
}

Eigen::VectorXd BSplineBasis1D::eval(double x) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(size());
    double local[16];
    const int first = eval_local(x, std::span<double>(local, static_cast<std::size_t>(degree_ + 1)));
    for (int j = 0; j <= degree_; ++j) out[first + j] = local[j];
    return out;
}

TensorBasis::TensorBasis(std::vector<BSplineBasis1D> dims) : dims_(std::move(dims)) {
    size_ = 1;
    for (const auto& b : dims_) size_ *= b.size();
}

TensorBasis TensorBasis::uniform(std::span<const Box> boxes, int per_dim_size, int max_degree) {
    std::vector<BSplineBasis1D> dims;
    for (const auto& box : boxes) {
        for (const auto& iv : box.intervals()) dims.push_back(BSplineBasis1D::uniform(iv, per_dim_size, max_degree));
    }
    return TensorBasis(std::move(dims));
}

TensorBasis TensorBasis::from_budget(std::span<const Box> boxes, int budget, int max_degree) {
    if (budget < 1) throw ConfigError("basis budget must be at least 1");
    int D = 0;
    for (const auto& box : boxes) D += box.dim();
    auto power = [D](int m) {
        double v = 1.0;
        for (int i = 0; i < D; ++i) v *= m;
        return v;
    };
    int m = 1;
    while (power(m + 1) <= static_cast<double>(budget)) ++m;
    return uniform(boxes, m, max_degree);
}

Eigen::VectorXd TensorBasis::eval(const Eigen::VectorXd& sbar) const {
    if (sbar.size() != dim()) throw ConfigError("state history dimension does not match tensor basis");
    Eigen::VectorXd out(size_);
    out[0] = 1.0;
    int current = 1;
    double local[16];
    for (int d = 0; d < dim(); ++d) {
        const auto& b = dims_[static_cast<std::size_t>(d)];
        const int nd = b.size();
        const int p = b.degree();
        const int first = b.eval_local(sbar[d], std::span<double>(local, static_cast<std::size_t>(p + 1)));
        // Expand in place from the back so earlier entries are read before overwritten.
        for (int i = current - 1; i >= 0; --i) {
            const double v = out[i];
            double* dst = out.data() + static_cast<std::ptrdiff_t>(i) * nd;
            std::fill(dst, dst + nd, 0.0);
            for (int j = 0; j <= p; ++j) dst[first + j] = v * local[j];
        }
        current *= nd;
    }
    return out;
}

ActionHistoryIndex::ActionHistoryIndex(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    count_ = 1;
    for (int s : sizes_) {
        if (s < 1) throw ConfigError("action set sizes must be positive");
        count_ *= s;
    }
}

int ActionHistoryIndex::encode(std::span<const int> actions) const {
    if (static_cast<int>(actions.size()) != length()) throw ConfigError("action history length mismatch");
    int idx = 0;
    for (std::size_t j = 0; j < actions.size(); ++j) {
        const int a = actions[j];
        if (a < 0 || a >= sizes_[j]) throw std::out_of_range("invalid action index in action history");
        idx = idx * sizes_[j] + a;
    }
    return idx;
}

int ActionHistoryIndex::encode(std::span<const int> prefix, int last) const {
    if (static_cast<int>(prefix.size()) + 1 != length()) throw ConfigError("action history length mismatch");
    int idx = 0;
    for (std::size_t j = 0; j < prefix.size(); ++j) {
        const int a = prefix[j];
        if (a < 0 || a >= sizes_[j]) throw std::out_of_range("invalid action index in action history");
        idx = idx * sizes_[j] + a;
    }
    if (last < 0 || last >= sizes_.back()) throw std::out_of_range("invalid action index in action history");
    return idx * sizes_.back() + last;
}

std::vector<int> ActionHistoryIndex::decode(int index) const {
    if (index < 0 || index >= count_) throw std::out_of_range("action history index out of range");
    std::vector<int> out(sizes_.size());
    for (int j = length() - 1; j >= 0; --j) {
        out[static_cast<std::size_t>(j)] = index % sizes_[static_cast<std::size_t>(j)];
        index /= sizes_[static_cast<std::size_t>(j)];
    }
    return out;
}

Eigen::VectorXd BlockFeature::dense() const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dense_size());
    out.segment(static_cast<Eigen::Index>(block) * block_size(), block_size()) = upsilon;
    return out;
}

Eigen::VectorXd eval_state_features(const TensorBasis& tensor, const Eigen::VectorXd& sbar) { return tensor.eval(sbar); }

BlockFeature phi_features(const TensorBasis& tensor, const ActionHistoryIndex& index, const Eigen::VectorXd& sbar,
                          std::span<const int> action_history) {
    BlockFeature f;
    f.block = index.encode(action_history);
    f.num_blocks = index.count();
    f.upsilon = tensor.eval(sbar);
    return f;
}

std::vector<Box> history_boxes(const ModelSpec& spec, int k) {
    std::vector<Box> boxes;
    for (int j = 1; j <= k; ++j) boxes.push_back(spec.box(j));
    return boxes;
}

FeatureMap::FeatureMap(const ModelSpec& spec, int k, TensorBasis tensor)
    : k_(k), tensor_(std::move(tensor)), index_(spec.action_sizes(k)), boxes_(history_boxes(spec, k)) {
    if (tensor_.dim() != spec.history_dim(k)) throw ConfigError("feature basis dimension does not match stage history");
}

BlockFeature FeatureMap::operator()(const History& h, int action) const {
    if (h.stage() != k_) throw ConfigError("history length does not match feature map stage");
    Eigen::VectorXd sbar(tensor_.dim());
    Eigen::Index off = 0;
    for (int j = 0; j < k_; ++j) {
        const auto& s = h.states[static_cast<std::size_t>(j)];
        sbar.segment(off, s.size()) = boxes_[static_cast<std::size_t>(j)].clip(s);
        off += s.size();
    }
    BlockFeature f;
    f.block = index_.encode(h.actions, action);
    f.num_blocks = index_.count();
    f.upsilon = tensor_.eval(sbar);
    return f;
}

}  // namespace polar
