#pragma once

// Independent reference implementations used by `xfmr check` and the
// acceptance suite. Nothing here calls the backpropagation or metric code it
// is meant to verify.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xfmr/nn.hpp"
#include "xfmr/random.hpp"

namespace xfmr::check {

double brute_smse(const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y);
double brute_sdmse(const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y);
double brute_r2(const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y);
std::vector<double> brute_per_param_smse(const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y);

/// Central differences of the batch objective, evaluated by a loop-based
/// forward pass and loss in long double (plus (w/2)|theta|^2 on decayed
/// entries in coupled mode). The extended precision keeps cancellation noise
/// well below the 1e-5 relative tolerance at step 1e-5.
std::vector<double> finite_difference_gradient(const nn::Model& model, const Eigen::MatrixXd& x,
                                               const Eigen::MatrixXd& y, nn::LossKind kind, double step,
                                               double weight_decay = 0.0,
                                               nn::DecayMode mode = nn::DecayMode::decoupled);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
double max_relative_error(std::span<const double> a, std::span<const double> b, double floor);

inline constexpr double kGradientFloor = 1e-6;

/// Random dense net with widths in [2, max_width], 1..max_layers hidden
/// layers and, when `shortcuts` is set, at least one random shortcut.
nn::Architecture random_architecture(Rng& rng, std::size_t max_width, std::size_t max_layers, bool shortcuts,
                                     std::size_t input_dim = 6, std::size_t output_dim = 6);

struct GradientCase {
    nn::Architecture arch;
    nn::LossKind loss = nn::LossKind::smse;
    double max_rel_error = 0.0;
};

/// Backprop against central differences (step 1e-5) on `count` random
/// small architectures, alternating losses and shortcut use.
std::vector<GradientCase> gradient_sweep(std::uint64_t seed, std::size_t count);

struct MetricOracleResult {
    std::size_t trials = 0;
    double max_rel_error = 0.0;
    bool worked_example_exact = false;
};

/// Compares library metrics with the brute-force versions on random 5x3
/// matrices, and checks the [[2,4]] vs [[1,5]] example.
MetricOracleResult metric_oracles(std::uint64_t seed, std::size_t trials);

struct CheckLine {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Gradient, optimizer and metric self-tests for `xfmr check`.
std::vector<CheckLine> run_self_checks(std::uint64_t seed);

}  // namespace xfmr::check
