#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "xfmr/errors.hpp"
#include "xfmr/surrogate.hpp"

using namespace xfmr;
using Catch::Approx;

namespace {

// Geometry I of the reference synthesis table, used only as a realistic input.
constexpr TransformerGeometry kGeometryI{10.05, 9.98, 45.32, 52.24, 60.74, 24.03};

bool satisfies_bounds(const TransformerGeometry& g) {
    return g.w_oa >= 2 && g.w_oa <= 16 && g.w_ob >= 2 && g.w_ob <= 16 && g.r0 >= 35 && g.r0 <= 70 &&
           g.r1 >= g.r0 && g.r1 <= std::min(1.5 * g.r0, 85.0) && g.x_gnd >= 50 && g.x_gnd <= 90 &&
           g.l_f >= 10 && g.l_f <= 35 && 8 * g.r0 / g.w_oa > std::exp(2.0) && 8 * g.r1 / g.w_ob > std::exp(2.0);
}

}  // namespace

TEST_CASE("forward_model reproduces the hand-evaluated Geometry I case", "[surrogate]") {
    // Frozen from an independent evaluation of the closed-form expressions
    // (double precision, outside this code base).
    const auto c = forward_model(kGeometryI);
    CHECK(c.lp == Approx(138.35949967470214).epsilon(1e-12));
    CHECK(c.ls == Approx(161.93446213833266).epsilon(1e-12));
    CHECK(c.k == Approx(0.5473259942723824).epsilon(1e-12));
    CHECK(c.srf == Approx(97.23280357510498).epsilon(1e-12));
    CHECK(c.qp == Approx(20.3790835095272).epsilon(1e-12));
    CHECK(c.qs == Approx(20.547839352720203).epsilon(1e-12));

    // The commonly quoted figures are these values rounded.
    const auto round_to = [](double v, double unit) { return std::round(v / unit) * unit; };
    CHECK(round_to(c.lp, 0.1) == Approx(138.4));
    CHECK(round_to(c.ls, 0.1) == Approx(161.9));
    CHECK(round_to(c.k, 0.001) == Approx(0.547));
    CHECK(round_to(c.srf, 0.1) == Approx(97.2));
    CHECK(round_to(c.qp, 0.1) == Approx(20.4));
    CHECK(round_to(c.qs, 0.1) == Approx(20.5));
}

TEST_CASE("SRF unit conversion: 138.4 pH with 19.36 fF resonates near 97.2 GHz", "[surrogate]") {
    // f = 1 / (2 pi sqrt(L C)), L in H, C in F.
    const double f_hz = 1.0 / (2.0 * std::numbers::pi * std::sqrt(138.4e-12 * 19.36e-15));
    CHECK(f_hz / 1e9 == Approx(97.2).epsilon(1e-3));

    const double cp = 0.36 * (2.0 * std::numbers::pi * kGeometryI.r0 * kGeometryI.w_oa) / kGeometryI.x_gnd +
                      0.10 * kGeometryI.l_f;
    CHECK(cp == Approx(19.36).epsilon(1e-3));
}

TEST_CASE("symmetric coils give equal primary and secondary values", "[surrogate]") {
    const TransformerGeometry g{8.0, 8.0, 50.0, 50.0, 70.0, 13.0};
    const auto c = forward_model(g);
    CHECK(c.lp == c.ls);
    CHECK(c.qp == c.qs);
    CHECK(c.k == SurrogateConstants{}.k_max);
}

TEST_CASE("feed length adds exactly alpha_f per micrometre", "[surrogate]") {
    auto g = kGeometryI;
    const double before = forward_model(g).lp;
    g.l_f *= 2.0;
    const double after = forward_model(g).lp;
    CHECK(after - before == Approx(2.0 * kGeometryI.l_f).epsilon(1e-12));
}

TEST_CASE("forward_model is pure", "[surrogate]") {
    const auto a = forward_model(kGeometryI);
    const auto b = forward_model(kGeometryI);
    CHECK(a == b);
}

TEST_CASE("monotonicity of inductance and coupling", "[surrogate]") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        auto g = sample_geometry(rng);
        const auto base = forward_model(g);

        auto bigger_r0 = g;
        bigger_r0.r0 *= 1.01;
        bigger_r0.r1 = std::max(bigger_r0.r1, bigger_r0.r0);
        CHECK(forward_model(bigger_r0).lp > base.lp);

        auto longer = g;
        longer.l_f += 0.5;
        CHECK(forward_model(longer).lp > base.lp);

        // Moving r1 toward r0 raises k.
        if (g.r1 > g.r0) {
            auto closer = g;
            closer.r1 = g.r0 + 0.5 * (g.r1 - g.r0);
            CHECK(forward_model(closer).k > base.k);
            CHECK(forward_model(closer).k <= SurrogateConstants{}.k_max);
        }

        // Qp equals omega L / R times the ground factor, evaluated directly.
        const double rp = 0.043 * 2.0 * std::numbers::pi * g.r0 / g.w_oa;
        const double gq = 1.0 - std::exp(-g.x_gnd / 20.0);
        CHECK(base.qp == Approx(2.0 * std::numbers::pi * 30e9 * base.lp * 1e-12 / rp * gq).epsilon(1e-12));
    }
}

TEST_CASE("forward_model rejects geometry outside the log domain", "[surrogate]") {
    CHECK_THROWS_AS(forward_model({60.0, 8.0, 50.0, 55.0, 70.0, 20.0}), DomainError);
    CHECK_THROWS_AS(forward_model({-1.0, 8.0, 50.0, 55.0, 70.0, 20.0}), DomainError);
    CHECK_THROWS_AS(forward_model({8.0, 8.0, 50.0, 55.0, 70.0, std::nan("")}), DomainError);
}

TEST_CASE("sampled geometries satisfy the bounds and are seed-deterministic", "[surrogate]") {
    Rng a(99), b(99);
    for (int i = 0; i < 1000; ++i) {
        const auto g = sample_geometry(a);
        REQUIRE(satisfies_bounds(g));
        REQUIRE(g == sample_geometry(b));
        REQUIRE(GeometryBounds{}.contains(g));
        validate(forward_model(g));
    }
}

TEST_CASE("sampler means match the analytic uniform means", "[surrogate]") {
    Rng rng(2024);
    const int n = 10000;
    std::array<double, 6> lo{1e9, 1e9, 1e9, 1e9, 1e9, 1e9}, hi{}, sum{};
    for (int i = 0; i < n; ++i) {
        const auto g = sample_geometry(rng).to_array();
        for (std::size_t j = 0; j < 6; ++j) {
            lo[j] = std::min(lo[j], g[j]);
            hi[j] = std::max(hi[j], g[j]);
            sum[j] += g[j];
        }
    }
    // E[min(r0 * rho, 85)] with r0 ~ U[35, 70], rho ~ U[1, 1.5] by midpoint quadrature.
    double r1_mean = 0.0;
    const int grid = 2000;
    for (int i = 0; i < grid; ++i) {
        const double r0 = 35.0 + 35.0 * (i + 0.5) / grid;
        for (int j = 0; j < grid; ++j) {
            const double rho = 1.0 + 0.5 * (j + 0.5) / grid;
            r1_mean += std::min(r0 * rho, 85.0);
        }
    }
    r1_mean /= static_cast<double>(grid) * grid;

    const std::array<double, 6> expected{9.0, 9.0, 52.5, r1_mean, 70.0, 22.5};
    const std::array<double, 6> min_b{2, 2, 35, 35, 50, 10}, max_b{16, 16, 70, 85, 90, 35};
    for (std::size_t j = 0; j < 6; ++j) {
        CHECK(lo[j] >= min_b[j]);
        CHECK(hi[j] <= max_b[j]);
        CHECK(sum[j] / n == Approx(expected[j]).epsilon(0.05));
    }
}

TEST_CASE("generate_dataset rows are forward_model images of their targets", "[surrogate]") {
    const auto ds = generate_dataset(500, 42);
    ds.validate();
    for (Eigen::Index i = 0; i < ds.y.rows(); ++i) {
        const auto g = TransformerGeometry::from_array({ds.y(i, 0), ds.y(i, 1), ds.y(i, 2), ds.y(i, 3), ds.y(i, 4),
                                                        ds.y(i, 5)});
        const auto c = forward_model(g).to_array();
        for (Eigen::Index j = 0; j < 6; ++j) REQUIRE(ds.x(i, j) == c[static_cast<std::size_t>(j)]);
    }
}

TEST_CASE("generate_dataset single row and thread independence", "[surrogate]") {
    const auto one = generate_dataset(1, 7);
    REQUIRE(one.size() == 1);
    const auto g = TransformerGeometry::from_array(
        {one.y(0, 0), one.y(0, 1), one.y(0, 2), one.y(0, 3), one.y(0, 4), one.y(0, 5)});
    CHECK(forward_model(g) ==
          CircuitParams::from_array({one.x(0, 0), one.x(0, 1), one.x(0, 2), one.x(0, 3), one.x(0, 4), one.x(0, 5)}));

    DatasetOptions threaded;
    threaded.threads = 4;
    const auto a = generate_dataset(1000, 3);
    const auto b = generate_dataset(1000, 3, threaded);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    CHECK_THROWS_AS(generate_dataset(0, 3), InvalidArgument);
}

TEST_CASE("6400-sample envelope overlaps the reference design ranges", "[surrogate]") {
    const auto ds = generate_dataset(6400, 42);
    REQUIRE(ds.size() == 6400);
    const Eigen::RowVectorXd lo = ds.x.colwise().minCoeff();
    const Eigen::RowVectorXd hi = ds.x.colwise().maxCoeff();
    // lp, ls cover [100, 300] pH; k reaches [0.4, 0.7]; SRF [60, 100] GHz; Q [15, 25].
    CHECK(lo(0) <= 100.0);
    CHECK(hi(0) >= 300.0);
    CHECK(lo(2) <= 0.4);
    CHECK(hi(2) >= 0.7);
    CHECK(lo(3) <= 60.0);
    CHECK(hi(3) >= 100.0);
    CHECK(lo(4) <= 15.0);
    CHECK(hi(4) >= 25.0);
    CHECK(lo(5) <= 15.0);
    CHECK(hi(5) >= 25.0);
}

TEST_CASE("noise knob perturbs inputs but keeps targets", "[surrogate]") {
    DatasetOptions noisy;
    noisy.noise_sigma = 0.01;
    const auto clean = generate_dataset(200, 5);
    const auto dirty = generate_dataset(200, 5, noisy);
    CHECK(clean.y == dirty.y);
    CHECK(clean.x != dirty.x);
    const double rel = ((dirty.x - clean.x).array() / clean.x.array()).abs().maxCoeff();
    CHECK(rel < 0.06);
}

TEST_CASE("clamp projects into the sampling box", "[surrogate]") {
    const GeometryBounds b;
    const auto g = b.clamp({1.0, 20.0, 80.0, 60.0, 100.0, 5.0});
    CHECK(g.w_oa == 2.0);
    CHECK(g.w_ob == 16.0);
    CHECK(g.r0 == 70.0);
    CHECK(g.r1 == 70.0);
    CHECK(g.x_gnd == 90.0);
    CHECK(g.l_f == 10.0);
    CHECK(b.contains(g));
}
