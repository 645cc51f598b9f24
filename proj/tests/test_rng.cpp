#include <doctest.h>

#include <algorithm>
#include <stdexcept>

#include <cmath>
#include <set>

#include "decon/rng.hpp"

using namespace decon;

TEST_CASE("uniform is deterministic and in [0,1)") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        double u = a.uniform();
        CHECK(u == b.uniform());
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("normal moments") {
    Rng rng(7);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double z = rng.normal();
        sum += z;
        sum2 += z * z;
    }
    double mean = sum / n;
    double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("gamma moments match shape parameter") {
    Rng rng(11);
    const int n = 100000;
    for (double alpha : {0.5, 2.0, 7.5}) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += rng.gamma(alpha);
        CHECK(std::abs(sum / n - alpha) < 0.05 * alpha + 0.02);
    }
}

TEST_CASE("dirichlet draws lie on the simplex") {
    Rng rng(3);
    for (int rep = 0; rep < 100; ++rep) {
        auto w = rng.dirichlet(1.0, 6);
        double s = 0.0;
        for (double v : w) {
            CHECK(v >= 0.0);
            s += v;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("index stays in range and covers all values") {
    Rng rng(9);
    std::set<std::size_t> seen;
    for (int i = 0; i < 1000; ++i) {
        std::size_t k = rng.index(5);
        CHECK(k < 5);
        seen.insert(k);
    }
    CHECK(seen.size() == 5);
}

TEST_CASE("substreams differ from each other and from the root") {
    auto a = substream_seed(0, "data");
    auto b = substream_seed(0, "init");
    auto c = substream_seed(1, "data");
    CHECK(a != b);
    CHECK(a != c);
    CHECK(a == substream_seed(0, "data"));
}
