#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xfmr/baselines.hpp"
#include "xfmr/data.hpp"
#include "xfmr/nn.hpp"
#include "xfmr/surrogate.hpp"

namespace xfmr::eval {

/// Uniform average over output dimensions of 1 - SS_res / SS_tot, with
/// SS_tot taken about each dimension's mean in `y`. Throws
/// DegenerateFeatureError when a dimension of `y` is constant.
double r2_score(const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y);

/// SMSE of each output dimension on its own; the mean of the result equals
/// the full SMSE.
Eigen::VectorXd per_param_smse(const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y);

/// Drops the feed-length target column. Throws AlreadyExcludedError if the
/// dataset has only five targets.
data::Dataset exclude_feed_length(const data::Dataset& ds);

/// Population quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

// ---------------------------------------------------------------------------
// Experiment protocol

enum class ModelFamily { linear, boosting, network };

/// A comparison entry: "LR", "GB", or a network preset name ("FN7", "N7", ...).
struct ModelSpec {
    std::string name;
    ModelFamily family = ModelFamily::network;

    static ModelSpec parse(std::string_view name);
};

struct ComparisonConfig {
    std::vector<std::string> models = {"LR", "GB", "FN7", "N7"};
    std::vector<std::size_t> training_sizes = {600, 1200, 2400, 4800};
    std::vector<nn::LossKind> losses = {nn::LossKind::smse, nn::LossKind::sdmse};
    std::size_t test_size = 1200;
    std::size_t repeats = 5;
    std::size_t width = 2048;
    nn::ProjectionMode projection = nn::ProjectionMode::learned;
    nn::HyperParams hyper{};  // hyper.seed is ignored; seeds derive from master_seed
    baselines::GBTOptions gbt{};
    std::uint64_t master_seed = 0;
    unsigned threads = 1;
    /// Called with a one-line note after each finished run; may be empty.
    std::function<void(const std::string&)> progress;
};

struct ExperimentReport {
    std::string model;
    nn::LossKind loss = nn::LossKind::sdmse;
    std::size_t training_size = 0;
    std::size_t target_dim = 6;
    std::size_t repeats = 0;
    double smse_mean = 0.0;
    double smse_std = 0.0;  // sample standard deviation over repeats; 0 for one repeat
    double r2_mean = 0.0;
    double r2_std = 0.0;
    Eigen::VectorXd per_param_smse;  // mean over repeats
    double seconds = 0.0;            // wall clock summed over repeats
};

/// Every (model, loss, size) cell, repeated with a fresh split and
/// initialization per repeat. Repeat r splits with derive_seed(master,
/// "split", r), so all models and sizes in a repeat share one test set.
/// Rows come back in configuration order (model, loss, size).
std::vector<ExperimentReport> run_comparison(const std::vector<std::string>& models, const data::Dataset& ds,
                                             const ComparisonConfig& config);
inline std::vector<ExperimentReport> run_comparison(const data::Dataset& ds, const ComparisonConfig& config) {
    return run_comparison(config.models, ds, config);
}

/// Single evaluation of already-computed predictions, used by `eval` on a saved model.
ExperimentReport evaluate_predictions(std::string model, nn::LossKind loss, std::size_t training_size,
                                      const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y);

/// CSV with one row per report. Wall-clock time is written only when
/// `include_timing` is set, so default reports are byte-reproducible.
void write_report_csv(std::span<const ExperimentReport> reports, std::ostream& out, bool include_timing = false);
void write_report_csv(std::span<const ExperimentReport> reports, const std::filesystem::path& path,
                      bool include_timing = false);
void print_report_table(std::span<const ExperimentReport> reports, std::ostream& out);

// ---------------------------------------------------------------------------
// Closed-loop synthesis

struct ClosedLoopResult {
    CircuitParams target;
    TransformerGeometry raw_prediction;
    TransformerGeometry predicted;  // raw_prediction clamped to the geometry bounds
    CircuitParams synthesized;      // forward_model(predicted)
    std::array<double, 6> relative_error{};
    bool out_of_envelope = false;   // target outside the network's training inputs
    bool clamped = false;
};

struct ClosedLoopOptions {
    GeometryBounds bounds{};
    SurrogateConstants constants{};
    /// Used for networks trained without the feed-length target.
    double fallback_feed_length = 22.5;
};

std::vector<ClosedLoopResult> closed_loop_validate(const nn::Network& network,
                                                   std::span<const CircuitParams> targets,
                                                   const ClosedLoopOptions& options = {});

struct ClosedLoopSummary {
    std::array<double, 6> median{};
    std::array<double, 6> p90{};
    std::size_t flagged = 0;
};

ClosedLoopSummary summarize(std::span<const ClosedLoopResult> results);

void write_closed_loop_csv(std::span<const ClosedLoopResult> results, std::ostream& out);
void write_closed_loop_csv(std::span<const ClosedLoopResult> results, const std::filesystem::path& path);

}  // namespace xfmr::eval
