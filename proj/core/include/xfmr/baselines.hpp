#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace xfmr::baselines {

/// y_hat = x * coefficients + intercept^T
struct LinearModel {
    Eigen::MatrixXd coefficients;  // features x outputs
    Eigen::VectorXd intercept;     // outputs
    bool used_ridge = false;       // true when the normal equations needed the ridge fallback
};

inline constexpr double kRidgeLambda = 1e-8;

/// Ordinary least squares on centred data through the normal equations.
/// Falls back to adding kRidgeLambda * I when the Gram matrix is
/// near-singular; throws SingularSystemError if that also fails.
LinearModel fit_linear(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);
Eigen::MatrixXd predict_linear(const LinearModel& m, const Eigen::MatrixXd& x);

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;     // x[feature] <= threshold
    int right = -1;
    double value = 0.0;
};

/// Axis-aligned regression tree stored as a node array; node 0 is the root.
struct RegressionTree {
    std::vector<TreeNode> nodes;

    double predict(const Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>& x) const;
};

struct GBTOptions {
    std::size_t rounds = 200;
    std::size_t max_depth = 3;
    double shrinkage = 0.1;
    unsigned threads = 1;
};

struct GBTDimension {
    double initial = 0.0;
    std::vector<RegressionTree> trees;
    /// Training MSE after each round (entry 0 is the constant model).
    std::vector<double> training_mse;
};

struct GBTModel {
    double shrinkage = 0.1;
    std::vector<GBTDimension> dimensions;
};

/// Least-squares gradient boosting, one independent ensemble per output column.
/// Split search is exhaustive over midpoints between sorted distinct values.
GBTModel fit_gbt(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const GBTOptions& options = {});
Eigen::MatrixXd predict_gbt(const GBTModel& m, const Eigen::MatrixXd& x);

}  // namespace xfmr::baselines
