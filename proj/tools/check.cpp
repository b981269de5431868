#include "check.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "xfmr/eval.hpp"
#include "xfmr/loss.hpp"

namespace xfmr::check {

double brute_smse(const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            const double e = (y(i, j) - y_hat(i, j)) / y(i, j);
            s += e * e;
        }
    }
    return s / static_cast<double>(y.rows() * y.cols());
}

double brute_sdmse(const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        double col = 0.0;
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            const double e = (y(i, j) - y_hat(i, j)) / y(i, j);
            col += e * e;
        }
        s += std::sqrt(col / static_cast<double>(y.rows()));
    }
    return s / static_cast<double>(y.cols());
}

double brute_r2(const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        double mean = 0.0;
        for (Eigen::Index i = 0; i < y.rows(); ++i) mean += y(i, j);
        mean /= static_cast<double>(y.rows());
        double res = 0.0;
        double tot = 0.0;
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            res += (y(i, j) - y_hat(i, j)) * (y(i, j) - y_hat(i, j));
            tot += (y(i, j) - mean) * (y(i, j) - mean);
        }
        s += 1.0 - res / tot;
    }
    return s / static_cast<double>(y.cols());
}

std::vector<double> brute_per_param_smse(const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y) {
    std::vector<double> out;
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            const double e = (y(i, j) - y_hat(i, j)) / y(i, j);
            s += e * e;
        }
        out.push_back(s / static_cast<double>(y.rows()));
    }
    return out;
}

namespace {

using Real = long double;
using Table = std::vector<std::vector<Real>>;  // [unit][sample]

// y = M * in for a column-major block of the flat parameter vector.
Table apply_block(std::span<const Real> theta, const nn::Model::Block& b, const Table& in) {
    Table out(b.rows, std::vector<Real>(in.front().size(), 0.0L));
    for (std::size_t c = 0; c < b.cols; ++c) {
        for (std::size_t r = 0; r < b.rows; ++r) {
            const Real w = theta[b.offset + c * b.rows + r];
            for (std::size_t i = 0; i < in[c].size(); ++i) out[r][i] += w * in[c][i];
        }
    }
    return out;
}

// Plain-loop forward pass in extended precision, written from the layer
// definitions rather than from nn::forward.
Table reference_forward(const nn::Model& model, std::span<const Real> theta, const Eigen::MatrixXd& x) {
    const auto& arch = model.architecture();
    const std::size_t layers = arch.layer_count();
    std::vector<Table> inputs(layers);
    Table a(static_cast<std::size_t>(x.cols()), std::vector<Real>(static_cast<std::size_t>(x.rows())));
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) a[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = x(i, j);
    }
    for (std::size_t layer = 1; layer <= layers; ++layer) {
        for (std::size_t s = 0; s < arch.shortcuts.size(); ++s) {
            const auto& sc = arch.shortcuts[s];
            if (sc.to != layer) continue;
            const Table& src = inputs[sc.from - 1];
            const Table add = model.has_projection(s) ? apply_block(theta, model.projection_block(s), src) : src;
            for (std::size_t u = 0; u < a.size(); ++u) {
                for (std::size_t i = 0; i < a[u].size(); ++i) a[u][i] += add[u][i];
            }
        }
        Table z = apply_block(theta, model.weight_block(layer), a);
        const auto& bb = model.bias_block(layer);
        for (std::size_t u = 0; u < z.size(); ++u) {
            for (auto& v : z[u]) {
                v += theta[bb.offset + u];
                if (layer < layers) v = std::max(v, 0.0L);
            }
        }
        inputs[layer - 1] = std::move(a);
        a = std::move(z);
    }
    return a;
}

Real objective(const nn::Model& model, std::span<const Real> theta, const Eigen::MatrixXd& x,
               const Eigen::MatrixXd& y, nn::LossKind kind, double weight_decay, nn::DecayMode mode) {
    const Table y_hat = reference_forward(model, theta, x);
    const std::size_t n = static_cast<std::size_t>(y.rows());
    const std::size_t k = static_cast<std::size_t>(y.cols());
    Real value = 0.0L;
    for (std::size_t j = 0; j < k; ++j) {
        Real col = 0.0L;
        for (std::size_t i = 0; i < n; ++i) {
            const Real t = y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            const Real e = (t - y_hat[j][i]) / t;
            col += e * e;
        }
        value += kind == nn::LossKind::smse ? col / static_cast<Real>(n * k) : std::sqrt(col / static_cast<Real>(n)) / static_cast<Real>(k);
    }
    if (mode == nn::DecayMode::coupled) {
        const auto mask = model.decay_mask();
        Real norm2 = 0.0L;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            if (mask[i]) norm2 += theta[i] * theta[i];
        }
        value += 0.5L * weight_decay * norm2;
    }
    return value;
}

}  // namespace

std::vector<double> finite_difference_gradient(const nn::Model& model, const Eigen::MatrixXd& x,
                                               const Eigen::MatrixXd& y, nn::LossKind kind, double step,
                                               double weight_decay, nn::DecayMode mode) {
    const auto params = model.parameters();
    std::vector<Real> theta(params.begin(), params.end());
    std::vector<double> grad(theta.size());
    const Real h = step;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const Real saved = theta[i];
        theta[i] = saved + h;
        const Real up = objective(model, theta, x, y, kind, weight_decay, mode);
        theta[i] = saved - h;
        const Real down = objective(model, theta, x, y, kind, weight_decay, mode);
        theta[i] = saved;
        grad[i] = static_cast<double>((up - down) / (2.0L * h));
    }
    return grad;
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

nn::Architecture random_architecture(Rng& rng, std::size_t max_width, std::size_t max_layers, bool shortcuts,
                                     std::size_t input_dim, std::size_t output_dim) {
    nn::Architecture arch;
    arch.input_dim = input_dim;
    arch.output_dim = output_dim;
    const std::size_t depth = 1 + static_cast<std::size_t>(rng.below(max_layers));
    for (std::size_t l = 0; l < depth; ++l) arch.hidden.push_back(2 + static_cast<std::size_t>(rng.below(max_width - 1)));
    if (shortcuts) {
        const std::size_t last = arch.layer_count();
        std::vector<nn::Shortcut> all;
        for (std::size_t from = 1; from <= last; ++from) {
            for (std::size_t to = from + 1; to <= last; ++to) all.push_back({from, to});
        }
        if (!all.empty()) {
            for (const auto& s : all) {
                if (rng.uniform() < 0.35) arch.shortcuts.push_back(s);
            }
            if (arch.shortcuts.empty()) arch.shortcuts.push_back(all[static_cast<std::size_t>(rng.below(all.size()))]);
        }
    }
    arch.validate();
    return arch;
}

std::vector<GradientCase> gradient_sweep(std::uint64_t seed, std::size_t count) {
    std::vector<GradientCase> cases;
    for (std::size_t c = 0; c < count; ++c) {
        Rng rng(derive_seed(seed, "gradcheck", c));
        const bool with_shortcuts = c % 2 == 1;
        GradientCase gc;
        gc.loss = (c / 2) % 2 == 0 ? nn::LossKind::smse : nn::LossKind::sdmse;
        gc.arch = random_architecture(rng, 16, 4, with_shortcuts);
        auto model = nn::init_model(gc.arch, rng.next());
        // Nonzero biases so no rectifier input sits exactly at the kink.
        for (std::size_t layer = 1; layer <= gc.arch.layer_count(); ++layer) {
            auto b = model.bias(layer);
            for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.1 * rng.normal();
        }
        const Eigen::Index batch = 8;
        Eigen::MatrixXd x(batch, static_cast<Eigen::Index>(gc.arch.input_dim));
        Eigen::MatrixXd y(batch, static_cast<Eigen::Index>(gc.arch.output_dim));
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
        for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.uniform(0.5, 2.0);

        const auto analytic = nn::gradient(model, x, y, gc.loss);
        const auto numeric = finite_difference_gradient(model, x, y, gc.loss, 1e-5);
        gc.max_rel_error = max_relative_error(analytic.values, numeric, kGradientFloor);
        cases.push_back(std::move(gc));
    }
    return cases;
}

MetricOracleResult metric_oracles(std::uint64_t seed, std::size_t trials) {
    MetricOracleResult out;
    Rng rng(seed);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); };
    for (std::size_t t = 0; t < trials; ++t) {
        Eigen::MatrixXd y(5, 3);
        Eigen::MatrixXd y_hat(5, 3);
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            y.data()[i] = rng.uniform(0.5, 5.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
            y_hat.data()[i] = y.data()[i] + rng.normal();
        }
        double worst = 0.0;
        worst = std::max(worst, rel(nn::loss_smse(y_hat, y), brute_smse(y_hat, y)));
        worst = std::max(worst, rel(nn::loss_sdmse(y_hat, y), brute_sdmse(y_hat, y)));
        worst = std::max(worst, rel(eval::r2_score(y_hat, y), brute_r2(y_hat, y)));
        const auto pp = eval::per_param_smse(y_hat, y);
        const auto bp = brute_per_param_smse(y_hat, y);
        for (std::size_t j = 0; j < bp.size(); ++j) worst = std::max(worst, rel(pp(static_cast<Eigen::Index>(j)), bp[j]));
        out.max_rel_error = std::max(out.max_rel_error, worst);
        ++out.trials;
    }
    Eigen::MatrixXd y(1, 2);
    y << 2.0, 4.0;
    Eigen::MatrixXd y_hat(1, 2);
    y_hat << 1.0, 5.0;
    out.worked_example_exact = nn::loss_smse(y_hat, y) == 0.15625 && nn::loss_sdmse(y_hat, y) == 0.375;
    return out;
}

std::vector<CheckLine> run_self_checks(std::uint64_t seed) {
    std::vector<CheckLine> lines;
    char buf[128];

    const auto cases = gradient_sweep(seed, 20);
    double worst = 0.0;
    for (const auto& c : cases) worst = std::max(worst, c.max_rel_error);
    std::snprintf(buf, sizeof buf, "20 architectures, max relative error %.3e (limit 1e-5)", worst);
    lines.push_back({"gradient", worst < 1e-5, buf});

    {
        nn::HyperParams hp;
        hp.learning_rate = 0.1;
        hp.epsilon = 0.0;
        hp.weight_decay = 0.0;
        std::vector<double> theta{0.0};
        std::vector<double> g{1.0};
        auto state = nn::OptimizerState::zeros(1);
        nn::adam_step(theta, state, g, hp);
        const bool trace = std::abs(theta[0] + 0.1) < 1e-12 && std::abs(state.m[0] - 0.1) < 1e-12 &&
                           std::abs(state.v[0] - 0.001) < 1e-12 && state.t == 1;
        hp.weight_decay = 0.5;
        std::vector<double> decayed{3.0};
        std::vector<double> zero{0.0};
        auto state2 = nn::OptimizerState::zeros(1);
        nn::adam_step(decayed, state2, zero, hp);
        const bool decay = std::abs(decayed[0] - 3.0 * (1.0 - 0.1 * 0.5)) < 1e-12;
        lines.push_back({"adam", trace && decay, "hand trace theta1=-0.1 and decay-only step"});
    }

    const auto m = metric_oracles(derive_seed(seed, "metrics"), 100);
    std::snprintf(buf, sizeof buf, "%zu trials, max relative error %.3e, worked example %s", m.trials,
                  m.max_rel_error, m.worked_example_exact ? "exact" : "WRONG");
    lines.push_back({"metrics", m.max_rel_error < 1e-10 && m.worked_example_exact, buf});
    return lines;
}

}  // namespace xfmr::check
