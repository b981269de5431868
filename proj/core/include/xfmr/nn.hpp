#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "xfmr/data.hpp"
#include "xfmr/loss.hpp"

namespace xfmr::nn {

/// Parameter and gradient storage. Eigen picks its vectorized summation order
/// from the address of each mapped block, so the base is always max-aligned
/// and results do not depend on where the allocator put the buffer.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

/// Layers are numbered from 1: layers 1..L are hidden, L+1 is the output
/// layer. A shortcut (from, to) adds the input of layer `from` to the input
/// of layer `to`.
struct Shortcut {
    std::size_t from = 0;
    std::size_t to = 0;
    auto operator<=>(const Shortcut&) const = default;
};

/// How a shortcut bridges layers of different width.
enum class ProjectionMode : std::uint8_t {
    learned = 0,  // trained like any other weight matrix
    fixed = 1,    // random at init, never updated or decayed
};

struct Architecture {
    std::size_t input_dim = 6;
    std::size_t output_dim = 6;
    std::vector<std::size_t> hidden;
    std::vector<Shortcut> shortcuts;
    ProjectionMode projection = ProjectionMode::learned;

    std::size_t layer_count() const { return hidden.size() + 1; }
    std::size_t layer_input_dim(std::size_t layer) const;
    std::size_t layer_output_dim(std::size_t layer) const;
    bool needs_projection(const Shortcut& s) const {
        return layer_input_dim(s.from) != layer_input_dim(s.to);
    }

    /// Throws InvalidArgument on zero widths, endpoints outside [1, L+1],
    /// from >= to, or shortcut lists that are not strictly increasing.
    void validate() const;
    std::string describe() const;
    bool operator==(const Architecture&) const = default;
};

/// Named networks: FN2..FN7 (plain stacks of 2..7 hidden layers), N5 = (1,5),
/// N6 = (1,6), N7 = (1,3),(3,5),(5,7). Underscores and case are ignored
/// ("FN_7", "n7").
Architecture make_preset(std::string_view name, std::size_t width, std::size_t input_dim = 6,
                         std::size_t output_dim = 6);

/// Dense network parameters in one flat vector. Order: for each layer
/// 1..L+1 its weight matrix (out x in, column-major) then its bias; then one
/// projection matrix (target width x source width, column-major) per shortcut
/// whose endpoint widths differ, in shortcut order.
class Model {
public:
    Model() = default;
    explicit Model(Architecture arch);

    const Architecture& architecture() const { return arch_; }
    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }
    std::size_t parameter_count() const { return params_.size(); }
    /// Entries that get weight decay: weights and learned projections.
    std::span<const std::uint8_t> decay_mask() const { return decay_mask_; }
    /// Entries Adam updates: everything except fixed projections.
    std::span<const std::uint8_t> trainable_mask() const { return trainable_mask_; }

    Eigen::Map<Eigen::MatrixXd> weight(std::size_t layer);
    Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const;
    Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);
    Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;
    bool has_projection(std::size_t shortcut) const { return projections_[shortcut].rows != 0; }
    Eigen::Map<Eigen::MatrixXd> projection(std::size_t shortcut);
    Eigen::Map<const Eigen::MatrixXd> projection(std::size_t shortcut) const;

    /// Offsets of each block into parameters(); used by gradients, which share the layout.
    struct Block {
        std::size_t offset = 0;
        std::size_t rows = 0;
        std::size_t cols = 0;
        std::size_t size() const { return rows * cols; }
    };
    const Block& weight_block(std::size_t layer) const { return weights_[layer - 1]; }
    const Block& bias_block(std::size_t layer) const { return biases_[layer - 1]; }
    const Block& projection_block(std::size_t shortcut) const { return projections_[shortcut]; }

private:
    Architecture arch_;
    ParamVector params_;
    std::vector<std::uint8_t> decay_mask_;
    std::vector<std::uint8_t> trainable_mask_;
    std::vector<Block> weights_;
    std::vector<Block> biases_;
    std::vector<Block> projections_;
};

/// He-normal weights and projections (variance 2 / fan_in), zero biases.
Model init_model(const Architecture& arch, std::uint64_t seed);

/// Rows of `x` are samples (already standardized). Returns one row per sample.
Eigen::MatrixXd forward(const Model& model, const Eigen::MatrixXd& x);

enum class DecayMode : std::uint8_t {
    decoupled,  // (1 - eta w) factor inside the Adam update; gradient is the data loss only
    coupled,    // w * theta added to the gradient; Adam applies no separate decay
};

struct Gradient {
    double loss = 0.0;           // data loss, plus (w/2)|theta|^2 when coupled
    ParamVector values;          // same layout as Model::parameters()
};

/// Exact gradient of the batch loss by backpropagation.
Gradient gradient(const Model& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, LossKind kind,
                  double weight_decay = 0.0, DecayMode mode = DecayMode::decoupled);

struct HyperParams {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-4;
    DecayMode decay_mode = DecayMode::decoupled;
    std::size_t batch_size = 16;
    std::size_t epochs = 200;
    std::uint64_t seed = 0;

    void validate() const;
};

struct OptimizerState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;

    static OptimizerState zeros(std::size_t n) { return {std::vector<double>(n), std::vector<double>(n), 0}; }
};

/// One Adam update with multiplicative decay:
///   m = b1 m + (1-b1) g;  v = b2 v + (1-b2) g*g;
///   theta = (1 - eta w) theta - eta mhat / (sqrt(vhat) + eps)
/// Empty masks mean "all ones". Entries with trainable == 0 are left alone;
/// entries with decay == 0 skip the (1 - eta w) factor. In coupled mode the
/// factor is omitted everywhere.
void adam_step(std::span<double> theta, OptimizerState& state, std::span<const double> grad,
               const HyperParams& hp, std::span<const std::uint8_t> decay_mask = {},
               std::span<const std::uint8_t> trainable_mask = {});

void adam_step(Model& model, OptimizerState& state, std::span<const double> grad, const HyperParams& hp);

/// Per-feature [min, max] of the inputs a network was trained on.
struct InputEnvelope {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;

    static InputEnvelope of(const Eigen::MatrixXd& x);
    bool contains(const Eigen::VectorXd& point) const;
};

/// Model plus the input standardization it was trained with.
struct Network {
    data::Standardizer standardizer;
    InputEnvelope envelope;
    Model model;

    /// Raw circuit parameters in, raw geometry out.
    Eigen::MatrixXd predict(const Eigen::MatrixXd& raw_x) const;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0;  // full-training-set data loss after the epoch
};

struct TrainResult {
    Network network;
    std::vector<EpochRecord> log;
};

/// Fits a standardizer on `train_set.x`, initializes from `hp.seed` and runs
/// `hp.epochs` passes of shuffled mini-batch Adam. Throws DivergenceError on a
/// non-finite loss.
TrainResult train(const Architecture& arch, const data::Dataset& train_set, const HyperParams& hp,
                  LossKind kind);

void save_model(const Network& network, const std::filesystem::path& path);
Network load_model(const std::filesystem::path& path);

std::vector<char> serialize(const Network& network);
Network deserialize(std::span<const char> bytes);

}  // namespace xfmr::nn
