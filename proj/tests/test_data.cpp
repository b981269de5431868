#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <fstream>
#include <set>

#include "test_support.hpp"
#include "xfmr/data.hpp"
#include "xfmr/errors.hpp"
#include "xfmr/surrogate.hpp"

using namespace xfmr;
using namespace xfmr::data;

namespace {

std::set<std::size_t> as_set(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("split sizes and disjointness", "[data]") {
    const auto ds = generate_dataset(6400, 42);
    const auto s = split(ds, 1200, 4800, 1);
    CHECK(s.test.size() == 1200);
    CHECK(s.train.size() == 4800);
    const auto test = as_set(s.test_rows);
    const auto train = as_set(s.train_rows);
    CHECK(test.size() == 1200);
    CHECK(train.size() == 4800);
    for (auto i : train) REQUIRE_FALSE(test.contains(i));
    CHECK(s.test.x.row(0) == ds.x.row(static_cast<Eigen::Index>(s.test_rows[0])));
}

TEST_CASE("split with an empty training set", "[data]") {
    const auto ds = generate_dataset(100, 1);
    const auto s = split(ds, 100, 0, 9);
    CHECK(s.train.size() == 0);
    CHECK(s.test.size() == 100);
}

TEST_CASE("split rejects oversize requests", "[data]") {
    const auto ds = generate_dataset(100, 1);
    CHECK_THROWS_AS(split(ds, 60, 41, 0), SizeError);
}

TEST_CASE("training sizes share one test set under a seed", "[data][property]") {
    const auto ds = generate_dataset(6400, 42);
    Rng rng(123);
    for (int trial = 0; trial < 10; ++trial) {
        const auto seed = rng.next();
        const auto small = split(ds, 1200, 600, seed);
        const auto large = split(ds, 1200, 2400, seed);
        CHECK(small.test_rows == large.test_rows);
        const auto test = as_set(small.test_rows);
        for (auto i : small.train_rows) REQUIRE_FALSE(test.contains(i));
        for (auto i : large.train_rows) REQUIRE_FALSE(test.contains(i));
        // Smaller training sets are prefixes of larger ones.
        CHECK(std::equal(small.train_rows.begin(), small.train_rows.end(), large.train_rows.begin()));
    }
}

TEST_CASE("standardizer: mean 0, std 1 on the fitting set, invertible", "[data]") {
    const auto ds = generate_dataset(2000, 8);
    const auto sc = fit_standardizer(ds);
    const Eigen::MatrixXd z = sc.apply(ds.x);
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const double mean = z.col(j).mean();
        const double sd = std::sqrt((z.col(j).array() - mean).square().mean());
        CHECK(std::abs(mean) < 1e-10);
        CHECK(std::abs(sd - 1.0) < 1e-10);
    }
    const Eigen::MatrixXd back = sc.invert(z);
    const double rel = ((back - ds.x).array() / ds.x.array()).abs().maxCoeff();
    CHECK(rel < 1e-12);
}

TEST_CASE("standardizer rejects constant features", "[data]") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 6);
    x.col(3).setConstant(0.1);
    CHECK_THROWS_AS(Standardizer::fit(x), DegenerateFeatureError);
    CHECK_THROWS_AS(Standardizer::fit(Eigen::MatrixXd(0, 6)), SizeError);
}

TEST_CASE("minibatches partition the training set", "[data]") {
    const auto batches = minibatches(2400, 16, 5, 0);
    CHECK(batches.size() == 150);
    std::vector<int> seen(2400, 0);
    for (const auto& b : batches) {
        CHECK(b.size() == 16);
        for (auto i : b) ++seen[i];
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));

    CHECK(minibatches(2400, 16, 5, 0) == batches);
    CHECK(minibatches(2400, 16, 5, 1) != batches);

    const auto tail = minibatches(10, 4, 5, 0);
    REQUIRE(tail.size() == 3);
    CHECK(tail.back().size() == 2);
}

TEST_CASE("one batch of size n holds every index", "[data]") {
    const auto batches = minibatches(37, 37, 2, 3);
    REQUIRE(batches.size() == 1);
    auto b = batches.front();
    std::sort(b.begin(), b.end());
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(b[i] == i);
    CHECK_THROWS_AS(minibatches(5, 0, 0, 0), InvalidArgument);
    CHECK_THROWS_AS(minibatches(5, 6, 0, 0), InvalidArgument);
}

TEST_CASE("CSV round trip is exact", "[data][property]") {
    Rng rng(77);
    for (int trial = 0; trial < 5; ++trial) {
        Dataset ds = generate_dataset(200, rng.next());
        // Awkward magnitudes survive too.
        ds.x(0, 0) = 1e-300;
        ds.x(1, 1) = 123456789.123456789;
        ds.y(2, 2) = 0.1 + 0.2;
        const auto path = testing::temp_path("roundtrip.csv");
        save_csv(ds, path);
        const auto back = load_csv(path);
        CHECK(back.x == ds.x);
        CHECK(back.y == ds.y);
    }
}

TEST_CASE("CSV header and five-target files", "[data]") {
    const auto ds = generate_dataset(3, 1);
    const auto path = testing::temp_path("header.csv");
    save_csv(ds, path);
    const auto text = testing::read_file(path);
    CHECK(text.starts_with("lp_pH,ls_pH,k,srf_GHz,qp,qs,w_oa_um,w_ob_um,r0_um,r1_um,x_gnd_um,l_f_um\n"));
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);

    Dataset five{ds.x, ds.y.leftCols(5)};
    save_csv(five, path);
    const auto back = load_csv(path);
    CHECK(back.target_dim() == 5);
    CHECK(back.y == five.y);
}

TEST_CASE("CSV loader rejects malformed input", "[data]") {
    const auto path = testing::temp_path("bad.csv");
    {
        std::ofstream out(path);
        out << "lp_pH,ls_pH,k,srf_GHz,qp,qs,w_oa_um,w_ob_um,r0_um,r1_um,x_gnd_um,l_f_um\n1,2,0.5,4,5,6,7,8,9,10,11,abc\n";
    }
    CHECK_THROWS_AS(load_csv(path), CorruptFileError);
    {
        std::ofstream out(path);
        out << "a,b\n1,2\n";
    }
    CHECK_THROWS_AS(load_csv(path), CorruptFileError);
    CHECK_THROWS_AS(load_csv(testing::temp_path("does_not_exist.csv")), IoError);
}

TEST_CASE("dataset validation", "[data]") {
    Dataset ds = generate_dataset(5, 1);
    ds.y(0, 0) = 0.0;
    CHECK_THROWS_AS(ds.validate(), DomainError);
    ds = generate_dataset(5, 1);
    ds.x(1, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(ds.validate(), DomainError);
    ds = generate_dataset(5, 1);
    ds.y.conservativeResize(4, Eigen::NoChange);
    CHECK_THROWS_AS(ds.validate(), ShapeError);
}
