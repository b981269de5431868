#include "xfmr/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include "xfmr/errors.hpp"

namespace xfmr {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void SurrogateConstants::validate() const {
    for (double v : {mu, alpha_f, k_max, gamma_k, r_sh, f_ref, c_a, c_f, x_ref}) {
        if (!positive_finite(v)) throw InvalidArgument("surrogate constants must be positive and finite");
    }
    if (k_max >= 1.0) throw InvalidArgument("surrogate constant k_max must be below 1");
}

bool GeometryBounds::contains(const TransformerGeometry& g) const {
    const double r1_hi = std::min(r1_ratio_max * g.r0, r1_max);
    return g.w_oa >= w_min && g.w_oa <= w_max && g.w_ob >= w_min && g.w_ob <= w_max &&
           g.r0 >= r0_min && g.r0 <= r0_max && g.r1 >= g.r0 && g.r1 <= r1_hi &&
           g.x_gnd >= x_gnd_min && g.x_gnd <= x_gnd_max && g.l_f >= l_f_min && g.l_f <= l_f_max;
}

TransformerGeometry GeometryBounds::clamp(const TransformerGeometry& g) const {
    TransformerGeometry out;
    out.w_oa = std::clamp(g.w_oa, w_min, w_max);
    out.w_ob = std::clamp(g.w_ob, w_min, w_max);
    out.r0 = std::clamp(g.r0, r0_min, r0_max);
    out.r1 = std::clamp(g.r1, out.r0, std::min(r1_ratio_max * out.r0, r1_max));
    out.x_gnd = std::clamp(g.x_gnd, x_gnd_min, x_gnd_max);
    out.l_f = std::clamp(g.l_f, l_f_min, l_f_max);
    return out;
}

void validate(const TransformerGeometry& g) {
    for (double v : g.to_array()) {
        if (!positive_finite(v)) throw DomainError("geometry fields must be positive and finite");
    }
}

void validate(const CircuitParams& c) {
    for (double v : {c.lp, c.ls, c.srf, c.qp, c.qs}) {
        if (!positive_finite(v)) throw DomainError("circuit parameters must be positive and finite");
    }
    if (!(c.k > 0.0 && c.k < 1.0)) throw DomainError("coupling coefficient must lie in (0, 1)");
}

CircuitParams forward_model(const TransformerGeometry& g, const SurrogateConstants& c) {
    validate(g);

    // Single-turn loop inductance plus the feed line.
    const double log_p = std::log(8.0 * g.r0 / g.w_oa) - 2.0;
    const double log_s = std::log(8.0 * g.r1 / g.w_ob) - 2.0;
    if (!(log_p > 0.0) || !(log_s > 0.0)) {
        throw DomainError("forward_model: coil too wide for its radius (8r/w <= e^2)");
    }
    const double lp = c.mu * g.r0 * log_p + c.alpha_f * g.l_f;
    const double ls = c.mu * g.r1 * log_s + c.alpha_f * g.l_f;

    const double ratio = std::min(g.r0, g.r1) / std::max(g.r0, g.r1);
    const double k = c.k_max * std::pow(ratio, c.gamma_k);

    // pH * fF = 1e-27 s^2; report in GHz.
    const double cp = c.c_a * (kTwoPi * g.r0 * g.w_oa) / g.x_gnd + c.c_f * g.l_f;
    const double lc = lp * cp;
    if (!(lc > 0.0)) throw DomainError("forward_model: non-positive L*C");
    const double srf = 1.0 / (kTwoPi * std::sqrt(lc * 1e-27)) * 1e-9;

    const double rp = c.r_sh * (kTwoPi * g.r0) / g.w_oa;
    const double rs = c.r_sh * (kTwoPi * g.r1) / g.w_ob;
    const double g_q = 1.0 - std::exp(-g.x_gnd / c.x_ref);
    // omega * L with f in GHz and L in pH gives ohms after the 1e-3 factor.
    const double omega = kTwoPi * c.f_ref * 1e-3;
    const double qp = omega * lp / rp * g_q;
    const double qs = omega * ls / rs * g_q;

    return {lp, ls, k, srf, qp, qs};
}

TransformerGeometry sample_geometry(Rng& rng, const GeometryBounds& b) {
    TransformerGeometry g;
    g.w_oa = rng.uniform(b.w_min, b.w_max);
    g.w_ob = rng.uniform(b.w_min, b.w_max);
    g.r0 = rng.uniform(b.r0_min, b.r0_max);
    g.r1 = std::min(g.r0 * rng.uniform(1.0, b.r1_ratio_max), b.r1_max);
    g.x_gnd = rng.uniform(b.x_gnd_min, b.x_gnd_max);
    g.l_f = rng.uniform(b.l_f_min, b.l_f_max);
    return g;
}

data::Dataset generate_dataset(std::size_t n, std::uint64_t seed, const DatasetOptions& options) {
    if (n == 0) throw InvalidArgument("generate_dataset: n must be at least 1");
    options.constants.validate();
    if (!(options.noise_sigma >= 0.0)) throw InvalidArgument("generate_dataset: noise sigma must be >= 0");

    data::Dataset ds;
    ds.x.resize(static_cast<Eigen::Index>(n), 6);
    ds.y.resize(static_cast<Eigen::Index>(n), 6);

    auto fill = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Rng rng(derive_seed(seed, "sample", i));
            const auto g = sample_geometry(rng, options.bounds);
            auto params = forward_model(g, options.constants).to_array();
            if (options.noise_sigma > 0.0) {
                for (double& v : params) v *= 1.0 + options.noise_sigma * rng.normal();
            }
            const auto geo = g.to_array();
            const auto row = static_cast<Eigen::Index>(i);
            for (Eigen::Index j = 0; j < 6; ++j) {
                ds.x(row, j) = params[static_cast<std::size_t>(j)];
                ds.y(row, j) = geo[static_cast<std::size_t>(j)];
            }
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(options.threads, 1, n);
    if (workers == 1) {
        fill(0, n);
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (n + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(n, begin + chunk);
            if (begin < end) pool.emplace_back(fill, begin, end);
        }
    }
    return ds;
}

}  // namespace xfmr
