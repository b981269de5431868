#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <vector>

#include "xfmr/random.hpp"

using namespace xfmr;

TEST_CASE("derive_seed separates purposes and indices", "[random]") {
    CHECK(derive_seed(1, "split", 0) == derive_seed(1, "split", 0));
    CHECK(derive_seed(1, "split", 0) != derive_seed(1, "split", 1));
    CHECK(derive_seed(1, "split", 0) != derive_seed(1, "init", 0));
    CHECK(derive_seed(1, "split", 0) != derive_seed(2, "split", 0));
}

TEST_CASE("uniform stays in [0, 1) and has the right mean", "[random]") {
    Rng rng(5);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(sum / 100000 == Catch::Approx(0.5).margin(0.005));
}

TEST_CASE("normal has zero mean and unit variance", "[random]") {
    Rng rng(11);
    double s = 0.0, s2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        s += z;
        s2 += z * z;
    }
    CHECK(s / n == Catch::Approx(0.0).margin(0.01));
    CHECK(s2 / n == Catch::Approx(1.0).margin(0.01));
}

TEST_CASE("shuffle is a seeded permutation", "[random]") {
    std::vector<std::size_t> a(100), b(100);
    std::iota(a.begin(), a.end(), 0);
    std::iota(b.begin(), b.end(), 0);
    Rng r1(3), r2(3);
    shuffle(a, r1);
    shuffle(b, r2);
    CHECK(a == b);
    auto sorted = a;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) REQUIRE(sorted[i] == i);
}
