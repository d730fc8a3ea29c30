#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <vector>

#include "heat/rng.hpp"

using heat::Rng;

TEST_CASE("streams are reproducible and separated by tag and index") {
    Rng a = Rng::derive(42, "sgld", {3, 7});
    Rng b = Rng::derive(42, "sgld", {3, 7});
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    std::set<std::uint64_t> firsts;
    firsts.insert(Rng::derive(42, "sgld", {3, 7}).next_u64());
    firsts.insert(Rng::derive(42, "sgld", {7, 3}).next_u64());
    firsts.insert(Rng::derive(42, "sgle", {3, 7}).next_u64());
    firsts.insert(Rng::derive(43, "sgld", {3, 7}).next_u64());
    firsts.insert(Rng::derive(42, "sgld", {3}).next_u64());
    CHECK(firsts.size() == 5);
}

TEST_CASE("uniform lies in [0, 1) with the right mean") {
    Rng r(1);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    // std of the mean is sqrt(1/12 / n) ~ 6.5e-4
    CHECK(std::abs(sum / n - 0.5) < 5 * 6.5e-4);
}

TEST_CASE("below covers its range without bias") {
    Rng r(2);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) counts[r.below(7)]++;
    // Each count is Binomial(n, 1/7): std ~ 92.
    for (int c : counts) CHECK(std::abs(c - 10000) < 5 * 92);
    CHECK(r.below(1) == 0);
}

TEST_CASE("normal has zero mean, unit variance and light tails") {
    Rng r(3);
    const int n = 200000;
    double s = 0.0, ss = 0.0, s4 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        s += x;
        ss += x * x;
        s4 += x * x * x * x;
    }
    const double mean = s / n;
    const double var = ss / n - mean * mean;
    CHECK(std::abs(mean) < 5 * std::sqrt(1.0 / n));
    CHECK(std::abs(var - 1.0) < 5 * std::sqrt(2.0 / n));
    CHECK(std::abs(s4 / n - 3.0) < 5 * std::sqrt(96.0 / n));
}

TEST_CASE("mix_seed depends on every input") {
    const auto a = heat::mix_seed(1, "x", {1});
    CHECK(a == heat::mix_seed(1, "x", {1}));
    CHECK(a != heat::mix_seed(2, "x", {1}));
    CHECK(a != heat::mix_seed(1, "y", {1}));
    CHECK(a != heat::mix_seed(1, "x", {2}));
    CHECK(a != heat::mix_seed(1, "x", {}));
}
