#include "xfmr/baselines.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "xfmr/errors.hpp"

namespace xfmr::baselines {

// ---------------------------------------------------------------------------
// Linear regression

LinearModel fit_linear(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    if (x.rows() != y.rows()) throw ShapeError("fit_linear: row count mismatch");
    if (x.rows() <= x.cols() + 1) throw SizeError("fit_linear: need more rows than features + intercept");

    const Eigen::RowVectorXd x_mean = x.colwise().mean();
    const Eigen::RowVectorXd y_mean = y.colwise().mean();
    const Eigen::MatrixXd xc = x.rowwise() - x_mean;
    const Eigen::MatrixXd yc = y.rowwise() - y_mean;

    Eigen::MatrixXd gram = xc.transpose() * xc;
    const Eigen::MatrixXd rhs = xc.transpose() * yc;

    LinearModel m;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    constexpr double kMinRcond = 1e-12;
    if (llt.info() != Eigen::Success || !(llt.rcond() > kMinRcond)) {
        gram.diagonal().array() += kRidgeLambda;
        llt.compute(gram);
        m.used_ridge = true;
        if (llt.info() != Eigen::Success) throw SingularSystemError("fit_linear: normal equations are singular");
    }
    m.coefficients = llt.solve(rhs);
    if (!m.coefficients.allFinite()) throw SingularSystemError("fit_linear: non-finite solution");
    m.intercept = (y_mean - x_mean * m.coefficients).transpose();
    return m;
}

Eigen::MatrixXd predict_linear(const LinearModel& m, const Eigen::MatrixXd& x) {
    if (x.cols() != m.coefficients.rows()) throw ShapeError("predict_linear: feature count mismatch");
    Eigen::MatrixXd out = x * m.coefficients;
    out.rowwise() += m.intercept.transpose();
    return out;
}

// ---------------------------------------------------------------------------
// Gradient boosting

double RegressionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>& x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
        const auto& n = nodes[static_cast<std::size_t>(i)];
        i = x(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
}

namespace {

/// Builds one tree on residuals. `sorted[f]` lists the node's sample indices
/// ordered by feature f; children receive stable partitions of these lists so
/// sorting happens once per fit.
class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& x, const std::vector<double>& residual, std::size_t max_depth)
        : x_(x), r_(residual), max_depth_(max_depth), in_left_(static_cast<std::size_t>(x.rows()), 0) {}

    RegressionTree build(std::vector<std::vector<std::size_t>> sorted) {
        RegressionTree tree;
        grow(tree, std::move(sorted), 0);
        return tree;
    }

private:
    struct Best {
        int feature = -1;
        double threshold = 0.0;
        double gain = 0.0;
    };

    int grow(RegressionTree& tree, std::vector<std::vector<std::size_t>> sorted, std::size_t depth) {
        const auto& rows = sorted.front();
        const double n = static_cast<double>(rows.size());
        double sum = 0.0;
        for (auto i : rows) sum += r_[i];

        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, sum / n});

        if (depth >= max_depth_ || rows.size() < 2) return id;
        const Best best = find_split(sorted, sum);
        if (best.feature < 0) return id;

        for (auto i : rows) in_left_[i] = x_(static_cast<Eigen::Index>(i), best.feature) <= best.threshold;
        std::vector<std::vector<std::size_t>> left(sorted.size());
        std::vector<std::vector<std::size_t>> right(sorted.size());
        for (std::size_t f = 0; f < sorted.size(); ++f) {
            for (auto i : sorted[f]) (in_left_[i] ? left[f] : right[f]).push_back(i);
        }
        sorted.clear();

        const int l = grow(tree, std::move(left), depth + 1);
        const int r = grow(tree, std::move(right), depth + 1);
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    // Maximizes S_L^2/n_L + S_R^2/n_R - S^2/n, the reduction in squared error.
    Best find_split(const std::vector<std::vector<std::size_t>>& sorted, double total) const {
        Best best;
        const double n = static_cast<double>(sorted.front().size());
        const double parent = total * total / n;
        for (std::size_t f = 0; f < sorted.size(); ++f) {
            const auto& order = sorted[f];
            const auto col = static_cast<Eigen::Index>(f);
            double left_sum = 0.0;
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                left_sum += r_[order[k]];
                const double a = x_(static_cast<Eigen::Index>(order[k]), col);
                const double b = x_(static_cast<Eigen::Index>(order[k + 1]), col);
                if (a == b) continue;
                const double nl = static_cast<double>(k + 1);
                const double nr = n - nl;
                const double right_sum = total - left_sum;
                const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent;
                if (gain > best.gain) {
                    best.gain = gain;
                    best.feature = static_cast<int>(f);
                    best.threshold = a + 0.5 * (b - a);
                }
            }
        }
        // Ignore splits whose gain is rounding noise.
        if (best.gain <= 1e-12 * std::max(parent, 1e-300)) best.feature = -1;
        return best;
    }

    const Eigen::MatrixXd& x_;
    const std::vector<double>& r_;
    std::size_t max_depth_;
    std::vector<std::uint8_t> in_left_;
};

GBTDimension fit_dimension(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GBTOptions& opt,
                           const std::vector<std::vector<std::size_t>>& presorted) {
    const auto n = static_cast<std::size_t>(x.rows());
    GBTDimension dim;
    dim.initial = y.mean();
    std::vector<double> prediction(n, dim.initial);
    std::vector<double> residual(n);

    auto mse = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = y(static_cast<Eigen::Index>(i)) - prediction[i];
            s += e * e;
        }
        return s / static_cast<double>(n);
    };
    dim.training_mse.push_back(mse());

    for (std::size_t round = 0; round < opt.rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) residual[i] = y(static_cast<Eigen::Index>(i)) - prediction[i];
        TreeBuilder builder(x, residual, opt.max_depth);
        dim.trees.push_back(builder.build(presorted));
        const auto& tree = dim.trees.back();
        for (std::size_t i = 0; i < n; ++i) {
            prediction[i] += opt.shrinkage * tree.predict(x.row(static_cast<Eigen::Index>(i)));
        }
        dim.training_mse.push_back(mse());
    }
    return dim;
}

}  // namespace

GBTModel fit_gbt(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const GBTOptions& options) {
    if (x.rows() != y.rows()) throw ShapeError("fit_gbt: row count mismatch");
    if (x.rows() < 2) throw SizeError("fit_gbt: need at least two samples");
    if (options.rounds < 1) throw InvalidArgument("fit_gbt: rounds must be >= 1");
    if (!(options.shrinkage > 0.0)) throw InvalidArgument("fit_gbt: shrinkage must be > 0");

    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<std::vector<std::size_t>> presorted(static_cast<std::size_t>(x.cols()));
    for (std::size_t f = 0; f < presorted.size(); ++f) {
        auto& order = presorted[f];
        order.resize(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        const auto col = static_cast<Eigen::Index>(f);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return x(static_cast<Eigen::Index>(a), col) < x(static_cast<Eigen::Index>(b), col);
        });
    }

    GBTModel model;
    model.shrinkage = options.shrinkage;
    model.dimensions.resize(static_cast<std::size_t>(y.cols()));

    const std::size_t dims = model.dimensions.size();
    const std::size_t workers = std::clamp<std::size_t>(options.threads, 1, std::max<std::size_t>(dims, 1));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t j = next++; j < dims; j = next++) {
            model.dimensions[j] = fit_dimension(x, y.col(static_cast<Eigen::Index>(j)), options, presorted);
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    return model;
}

Eigen::MatrixXd predict_gbt(const GBTModel& m, const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(m.dimensions.size()));
    for (std::size_t j = 0; j < m.dimensions.size(); ++j) {
        const auto& dim = m.dimensions[j];
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            double v = dim.initial;
            for (const auto& tree : dim.trees) v += m.shrinkage * tree.predict(x.row(i));
            out(i, static_cast<Eigen::Index>(j)) = v;
        }
    }
    return out;
}

}  // namespace xfmr::baselines
