#include "xfmr/nn.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "xfmr/errors.hpp"
#include "xfmr/random.hpp"

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

namespace xfmr::nn {

// ---------------------------------------------------------------------------
// Architecture

std::size_t Architecture::layer_input_dim(std::size_t layer) const {
    if (layer == 0 || layer > layer_count()) throw InvalidArgument("layer index out of range");
    return layer == 1 ? input_dim : hidden[layer - 2];
}

std::size_t Architecture::layer_output_dim(std::size_t layer) const {
    if (layer == 0 || layer > layer_count()) throw InvalidArgument("layer index out of range");
    return layer == layer_count() ? output_dim : hidden[layer - 1];
}

void Architecture::validate() const {
    if (input_dim == 0 || output_dim == 0) throw InvalidArgument("architecture: zero input/output dim");
    for (auto w : hidden) {
        if (w == 0) throw InvalidArgument("architecture: zero-width hidden layer");
    }
    const std::size_t last = layer_count();
    for (std::size_t i = 0; i < shortcuts.size(); ++i) {
        const auto& s = shortcuts[i];
        if (s.from < 1 || s.to > last || s.from >= s.to) {
            throw InvalidArgument("architecture: shortcut (" + std::to_string(s.from) + "," +
                                  std::to_string(s.to) + ") outside [1, " + std::to_string(last) + "]");
        }
        if (i > 0 && !(shortcuts[i - 1] < s)) {
            throw InvalidArgument("architecture: shortcuts must be strictly increasing without duplicates");
        }
    }
}

std::string Architecture::describe() const {
    std::ostringstream os;
    os << input_dim;
    for (auto w : hidden) os << '-' << w;
    os << '-' << output_dim;
    for (const auto& s : shortcuts) os << " (" << s.from << ',' << s.to << ')';
    return os.str();
}

Architecture make_preset(std::string_view name, std::size_t width, std::size_t input_dim,
                         std::size_t output_dim) {
    std::string key;
    for (char c : name) {
        if (c != '_') key.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    Architecture arch;
    arch.input_dim = input_dim;
    arch.output_dim = output_dim;

    std::size_t depth = 0;
    if (key.size() == 3 && key.starts_with("FN") && key[2] >= '2' && key[2] <= '7') {
        depth = static_cast<std::size_t>(key[2] - '0');
    } else if (key == "N5") {
        depth = 5;
        arch.shortcuts = {{1, 5}};
    } else if (key == "N6") {
        depth = 6;
        arch.shortcuts = {{1, 6}};
    } else if (key == "N7") {
        depth = 7;
        arch.shortcuts = {{1, 3}, {3, 5}, {5, 7}};
    } else {
        throw InvalidArgument("unknown architecture preset '" + std::string(name) + "'");
    }
    arch.hidden.assign(depth, width);
    arch.validate();
    return arch;
}

// ---------------------------------------------------------------------------
// Model

Model::Model(Architecture arch) : arch_(std::move(arch)) {
    arch_.validate();
    std::size_t offset = 0;
    auto take = [&offset](std::size_t rows, std::size_t cols) {
        Block b{offset, rows, cols};
        offset += rows * cols;
        return b;
    };
    for (std::size_t layer = 1; layer <= arch_.layer_count(); ++layer) {
        weights_.push_back(take(arch_.layer_output_dim(layer), arch_.layer_input_dim(layer)));
        biases_.push_back(take(arch_.layer_output_dim(layer), 1));
    }
    for (const auto& s : arch_.shortcuts) {
        projections_.push_back(arch_.needs_projection(s)
                                   ? take(arch_.layer_input_dim(s.to), arch_.layer_input_dim(s.from))
                                   : Block{offset, 0, 0});
    }
    params_.assign(offset, 0.0);
    decay_mask_.assign(offset, 0);
    trainable_mask_.assign(offset, 1);
    for (const auto& w : weights_) std::fill_n(decay_mask_.begin() + static_cast<std::ptrdiff_t>(w.offset), w.size(), 1);
    for (const auto& p : projections_) {
        const auto first = static_cast<std::ptrdiff_t>(p.offset);
        if (arch_.projection == ProjectionMode::learned) {
            std::fill_n(decay_mask_.begin() + first, p.size(), 1);
        } else {
            std::fill_n(trainable_mask_.begin() + first, p.size(), 0);
        }
    }
}

namespace {

Eigen::Map<Eigen::MatrixXd> map_block(ParamVector& v, const Model::Block& b) {
    return {v.data() + b.offset, static_cast<Eigen::Index>(b.rows), static_cast<Eigen::Index>(b.cols)};
}

Eigen::Map<const Eigen::MatrixXd> map_block(const double* base, const Model::Block& b) {
    return {base + b.offset, static_cast<Eigen::Index>(b.rows), static_cast<Eigen::Index>(b.cols)};
}

}  // namespace

Eigen::Map<Eigen::MatrixXd> Model::weight(std::size_t layer) { return map_block(params_, weights_.at(layer - 1)); }
Eigen::Map<const Eigen::MatrixXd> Model::weight(std::size_t layer) const {
    return map_block(params_.data(), weights_.at(layer - 1));
}
Eigen::Map<Eigen::VectorXd> Model::bias(std::size_t layer) {
    const auto& b = biases_.at(layer - 1);
    return {params_.data() + b.offset, static_cast<Eigen::Index>(b.rows)};
}
Eigen::Map<const Eigen::VectorXd> Model::bias(std::size_t layer) const {
    const auto& b = biases_.at(layer - 1);
    return {params_.data() + b.offset, static_cast<Eigen::Index>(b.rows)};
}
Eigen::Map<Eigen::MatrixXd> Model::projection(std::size_t shortcut) {
    return map_block(params_, projections_.at(shortcut));
}
Eigen::Map<const Eigen::MatrixXd> Model::projection(std::size_t shortcut) const {
    return map_block(params_.data(), projections_.at(shortcut));
}

Model init_model(const Architecture& arch, std::uint64_t seed) {
    Model model(arch);
    Rng rng(seed);
    auto fill = [&rng](Eigen::Map<Eigen::MatrixXd> m) {
        const double scale = std::sqrt(2.0 / static_cast<double>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = scale * rng.normal();
        }
    };
    for (std::size_t layer = 1; layer <= arch.layer_count(); ++layer) fill(model.weight(layer));
    for (std::size_t s = 0; s < arch.shortcuts.size(); ++s) {
        if (model.has_projection(s)) fill(model.projection(s));
    }
    return model;
}

// ---------------------------------------------------------------------------
// Forward / backward. Internally activations are (features x samples).

namespace {

struct ForwardCache {
    // inputs[k] is the input of layer k+1 after shortcut additions.
    std::vector<Eigen::MatrixXd> inputs;
    // pre[k] is the affine output of layer k+1 before the rectifier.
    std::vector<Eigen::MatrixXd> pre;
};

Eigen::MatrixXd run_forward(const Model& model, const Eigen::MatrixXd& xt, ForwardCache* cache) {
    const auto& arch = model.architecture();
    const std::size_t layers = arch.layer_count();
    std::vector<Eigen::MatrixXd> local_inputs;
    std::vector<Eigen::MatrixXd>& inputs = cache ? cache->inputs : local_inputs;
    inputs.assign(layers, Eigen::MatrixXd());
    if (cache) cache->pre.assign(layers, Eigen::MatrixXd());

    Eigen::MatrixXd a = xt;
    for (std::size_t layer = 1; layer <= layers; ++layer) {
        for (std::size_t s = 0; s < arch.shortcuts.size(); ++s) {
            const auto& sc = arch.shortcuts[s];
            if (sc.to != layer) continue;
            if (model.has_projection(s)) {
                a.noalias() += model.projection(s) * inputs[sc.from - 1];
            } else {
                a += inputs[sc.from - 1];
            }
        }
        Eigen::MatrixXd z = model.weight(layer) * a;
        z.colwise() += model.bias(layer);
        inputs[layer - 1] = std::move(a);
        if (layer == layers) return z;
        a = z.cwiseMax(0.0);
        if (cache) cache->pre[layer - 1] = std::move(z);
    }
    return a;  // unreachable: the output layer returns above
}

void check_input(const Model& model, const Eigen::MatrixXd& x) {
    if (static_cast<std::size_t>(x.cols()) != model.architecture().input_dim) {
        throw ShapeError("forward: input has " + std::to_string(x.cols()) + " columns, model expects " +
                         std::to_string(model.architecture().input_dim));
    }
}

}  // namespace

Eigen::MatrixXd forward(const Model& model, const Eigen::MatrixXd& x) {
    check_input(model, x);
    if (x.rows() == 0) return Eigen::MatrixXd(0, static_cast<Eigen::Index>(model.architecture().output_dim));
    return run_forward(model, x.transpose(), nullptr).transpose();
}

Gradient gradient(const Model& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, LossKind kind,
                  double weight_decay, DecayMode mode) {
    check_input(model, x);
    if (x.rows() == 0) throw SizeError("gradient: empty batch");
    if (x.rows() != y.rows() || static_cast<std::size_t>(y.cols()) != model.architecture().output_dim) {
        throw ShapeError("gradient: target shape mismatch");
    }
    const auto& arch = model.architecture();
    const std::size_t layers = arch.layer_count();

    ForwardCache cache;
    const Eigen::MatrixXd out_t = run_forward(model, x.transpose(), &cache);
    const Eigen::MatrixXd y_hat = out_t.transpose();

    Gradient result;
    result.loss = loss(kind, y_hat, y);
    result.values.assign(model.parameter_count(), 0.0);
    ParamVector& g = result.values;

    // d_in[k]: gradient with respect to inputs[k].
    std::vector<Eigen::MatrixXd> d_in(layers);
    Eigen::MatrixXd dz = loss_gradient(kind, y_hat, y).transpose();

    for (std::size_t layer = layers; layer >= 1; --layer) {
        if (layer < layers) {
            // dz = d(output of layer) masked by the rectifier.
            dz = (cache.pre[layer - 1].array() > 0.0).select(d_in[layer], 0.0);
        }
        const auto& input = cache.inputs[layer - 1];
        map_block(g, model.weight_block(layer)).noalias() = dz * input.transpose();
        map_block(g, model.bias_block(layer)) = dz.rowwise().sum();

        Eigen::MatrixXd d_input = model.weight(layer).transpose() * dz;
        if (d_in[layer - 1].size() != 0) d_input += d_in[layer - 1];
        d_in[layer - 1] = std::move(d_input);

        for (std::size_t s = 0; s < arch.shortcuts.size(); ++s) {
            const auto& sc = arch.shortcuts[s];
            if (sc.to != layer) continue;
            auto& d_src = d_in[sc.from - 1];
            Eigen::MatrixXd contribution;
            if (model.has_projection(s)) {
                map_block(g, model.projection_block(s)).noalias() =
                    d_in[layer - 1] * cache.inputs[sc.from - 1].transpose();
                contribution = model.projection(s).transpose() * d_in[layer - 1];
            } else {
                contribution = d_in[layer - 1];
            }
            if (d_src.size() == 0) {
                d_src = std::move(contribution);
            } else {
                d_src += contribution;
            }
        }
    }

    if (mode == DecayMode::coupled && weight_decay != 0.0) {
        const auto theta = model.parameters();
        const auto mask = model.decay_mask();
        double norm2 = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!mask[i]) continue;
            g[i] += weight_decay * theta[i];
            norm2 += theta[i] * theta[i];
        }
        result.loss += 0.5 * weight_decay * norm2;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Adam

void HyperParams::validate() const {
    if (!(learning_rate > 0.0)) throw InvalidArgument("hyperparameters: learning rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw InvalidArgument("hyperparameters: betas must lie in [0, 1)");
    }
    if (!(epsilon >= 0.0)) throw InvalidArgument("hyperparameters: epsilon must be >= 0");
    if (!(weight_decay >= 0.0)) throw InvalidArgument("hyperparameters: weight decay must be >= 0");
    if (batch_size == 0) throw InvalidArgument("hyperparameters: batch size must be >= 1");
}

void adam_step(std::span<double> theta, OptimizerState& state, std::span<const double> grad,
               const HyperParams& hp, std::span<const std::uint8_t> decay_mask,
               std::span<const std::uint8_t> trainable_mask) {
    const std::size_t n = theta.size();
    if (grad.size() != n) throw ShapeError("adam_step: gradient size mismatch");
    if (!decay_mask.empty() && decay_mask.size() != n) throw ShapeError("adam_step: decay mask size mismatch");
    if (!trainable_mask.empty() && trainable_mask.size() != n) {
        throw ShapeError("adam_step: trainable mask size mismatch");
    }
    if (state.m.size() != n || state.v.size() != n) {
        if (state.t != 0) throw ShapeError("adam_step: optimizer state size mismatch");
        state = OptimizerState::zeros(n);
    }

    ++state.t;
    const double t = static_cast<double>(state.t);
    const double bias1 = 1.0 - std::pow(hp.beta1, t);
    const double bias2 = 1.0 - std::pow(hp.beta2, t);
    const double eta = hp.learning_rate;
    const double decay = hp.decay_mode == DecayMode::decoupled ? 1.0 - eta * hp.weight_decay : 1.0;

    for (std::size_t i = 0; i < n; ++i) {
        if (!trainable_mask.empty() && !trainable_mask[i]) continue;
        const double gi = grad[i];
        state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * gi;
        state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * gi * gi;
        const double m_hat = state.m[i] / bias1;
        const double v_hat = state.v[i] / bias2;
        const double factor = (decay_mask.empty() || decay_mask[i]) ? decay : 1.0;
        const double denom = std::sqrt(v_hat) + hp.epsilon;
        // With epsilon = 0 a zero second moment means a zero first moment.
        const double step = denom == 0.0 ? 0.0 : eta * m_hat / denom;
        theta[i] = factor * theta[i] - step;
    }
}

void adam_step(Model& model, OptimizerState& state, std::span<const double> grad, const HyperParams& hp) {
    adam_step(model.parameters(), state, grad, hp, model.decay_mask(), model.trainable_mask());
}

// ---------------------------------------------------------------------------
// Network / training

InputEnvelope InputEnvelope::of(const Eigen::MatrixXd& x) {
    if (x.rows() == 0) throw SizeError("envelope: empty input");
    return {x.colwise().minCoeff().transpose(), x.colwise().maxCoeff().transpose()};
}

bool InputEnvelope::contains(const Eigen::VectorXd& point) const {
    if (point.size() != lo.size()) throw ShapeError("envelope: dimension mismatch");
    return (point.array() >= lo.array()).all() && (point.array() <= hi.array()).all();
}

Eigen::MatrixXd Network::predict(const Eigen::MatrixXd& raw_x) const {
    return forward(model, standardizer.apply(raw_x));
}

namespace {

// Adam moments of parameters with no gradient (dead rectifier units) decay
// geometrically into the subnormal range, which is very slow on x86. Flush
// subnormals to zero while training; restores the caller's mode on exit.
class FlushSubnormals {
public:
#if defined(__SSE2__)
    FlushSubnormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040); }
    ~FlushSubnormals() { _mm_setcsr(saved_); }

private:
    unsigned int saved_;
#endif
};

void gather(const Eigen::MatrixXd& source, std::span<const std::size_t> rows, Eigen::MatrixXd& out) {
    out.resize(static_cast<Eigen::Index>(rows.size()), source.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = source.row(static_cast<Eigen::Index>(rows[i]));
    }
}

}  // namespace

TrainResult train(const Architecture& arch, const data::Dataset& train_set, const HyperParams& hp,
                  LossKind kind) {
    arch.validate();
    hp.validate();
    train_set.validate();
    if (train_set.size() == 0) throw SizeError("train: empty training set");
    if (train_set.target_dim() != arch.output_dim) throw ShapeError("train: target dim does not match architecture");

    const FlushSubnormals ftz;
    TrainResult result;
    result.network.standardizer = data::fit_standardizer(train_set);
    result.network.envelope = InputEnvelope::of(train_set.x);
    result.network.model = init_model(arch, derive_seed(hp.seed, "init"));
    Model& model = result.network.model;

    const Eigen::MatrixXd xs = result.network.standardizer.apply(train_set.x);
    const std::size_t n = train_set.size();
    const std::size_t batch = std::min(hp.batch_size, n);
    const std::uint64_t batch_seed = derive_seed(hp.seed, "batch");

    OptimizerState state = OptimizerState::zeros(model.parameter_count());
    Eigen::MatrixXd xb;
    Eigen::MatrixXd yb;
    for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
        const auto batches = data::minibatches(n, batch, batch_seed, epoch);
        for (const auto& rows : batches) {
            gather(xs, rows, xb);
            gather(train_set.y, rows, yb);
            const auto g = gradient(model, xb, yb, kind, hp.weight_decay, hp.decay_mode);
            if (!std::isfinite(g.loss)) {
                throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch + 1) +
                                          ", step " + std::to_string(state.t + 1),
                                      epoch + 1, state.t + 1);
            }
            adam_step(model, state, g.values, hp);
        }
        const double full = loss(kind, forward(model, xs), train_set.y);
        if (!std::isfinite(full)) {
            throw DivergenceError("train: non-finite training loss after epoch " + std::to_string(epoch + 1),
                                  epoch + 1, state.t);
        }
        result.log.push_back({epoch + 1, full});
    }
    return result;
}

}  // namespace xfmr::nn
