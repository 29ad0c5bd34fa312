#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "fedadc/rng.hpp"

using namespace fedadc;

TEST_CASE("mix is deterministic and input-sensitive") {
    CHECK(rng::mix(1, 2) == rng::mix(1, 2));
    CHECK(rng::mix(1, 2) != rng::mix(2, 1));
    CHECK(rng::mix(0, 0) != rng::mix(0, 1));
    CHECK(rng::mix(0, 0) != rng::mix(1, 0));
}

TEST_CASE("streams with equal keys replay; any key change decorrelates") {
    auto a = rng::make_stream(7, rng::Purpose::SELECTION, 3, 4);
    auto b = rng::make_stream(7, rng::Purpose::SELECTION, 3, 4);
    for (int i = 0; i < 64; ++i) CHECK(a() == b());

    auto base = rng::make_stream(7, rng::Purpose::SELECTION, 3, 4);
    auto other_purpose = rng::make_stream(7, rng::Purpose::CLIENT_BATCHES, 3, 4);
    auto other_a = rng::make_stream(7, rng::Purpose::SELECTION, 5, 4);
    auto other_b = rng::make_stream(7, rng::Purpose::SELECTION, 3, 5);
    auto other_seed = rng::make_stream(8, rng::Purpose::SELECTION, 3, 4);
    // First draws almost surely differ if the seeding is decorrelated.
    const auto v = base();
    CHECK(v != other_purpose());
    CHECK(v != other_a());
    CHECK(v != other_b());
    CHECK(v != other_seed());
}

TEST_CASE("uniform_below stays in range and covers all residues") {
    auto eng = rng::make_stream(1, rng::Purpose::DATASET);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto v = rng::uniform_below(eng, 7);
        REQUIRE(v < 7);
        ++counts[static_cast<std::size_t>(v)];
    }
    for (int c : counts) CHECK(c > 800);  // ~1000 expected per bucket
    CHECK(rng::uniform_below(eng, 1) == 0);
    CHECK_THROWS_AS(rng::uniform_below(eng, 0), std::invalid_argument);
}

TEST_CASE("uniform01 lies in [0, 1) with mean near 1/2") {
    auto eng = rng::make_stream(2, rng::Purpose::DATASET);
    double sum = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double u = rng::uniform01(eng);
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(std::fabs(sum / 20000.0 - 0.5) < 0.01);
}

TEST_CASE("normal has approximately zero mean and unit variance") {
    auto eng = rng::make_stream(3, rng::Purpose::DATASET);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng::normal(eng);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::fabs(mean) < 0.02);
    CHECK(std::fabs(var - 1.0) < 0.03);
}

TEST_CASE("gamma matches its first two moments") {
    auto eng = rng::make_stream(4, rng::Purpose::DATASET);
    for (double shape : {0.3, 1.0, 2.5}) {
        const int n = 60000;
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = rng::gamma(eng, shape);
            REQUIRE(x >= 0.0);
            sum += x;
            sq += x * x;
        }
        const double mean = sum / n;
        const double var = sq / n - mean * mean;
        CHECK(std::fabs(mean - shape) < 0.05 * std::max(1.0, shape));
        CHECK(std::fabs(var - shape) < 0.12 * std::max(1.0, shape));
    }
    CHECK_THROWS_AS(rng::gamma(eng, 0.0), std::invalid_argument);
}

TEST_CASE("dirichlet draws are valid distributions") {
    auto eng = rng::make_stream(5, rng::Purpose::PARTITION);
    for (double alpha : {0.1, 1.0, 10.0}) {
        const auto p = rng::dirichlet(eng, alpha, 12);
        REQUIRE(p.size() == 12);
        double total = 0.0;
        for (double v : p) {
            REQUIRE(v >= 0.0);
            total += v;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("shuffle permutes and replays per stream") {
    std::vector<int> items(50);
    std::iota(items.begin(), items.end(), 0);
    auto eng = rng::make_stream(6, rng::Purpose::PARTITION);
    auto shuffled = items;
    rng::shuffle(eng, shuffled);
    auto sorted = shuffled;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == items);
    CHECK(shuffled != items);  // 50! permutations; identity is negligible

    auto eng2 = rng::make_stream(6, rng::Purpose::PARTITION);
    auto again = items;
    rng::shuffle(eng2, again);
    CHECK(again == shuffled);
}

TEST_CASE("sample_without_replacement returns ascending distinct values") {
    auto eng = rng::make_stream(7, rng::Purpose::SELECTION);
    const auto s = rng::sample_without_replacement(eng, 100, 17);
    REQUIRE(s.size() == 17);
    CHECK(std::is_sorted(s.begin(), s.end()));
    CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 17);
    CHECK(s.back() < 100);

    const auto all = rng::sample_without_replacement(eng, 9, 9);
    std::vector<std::size_t> expect(9);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(all == expect);
    CHECK(rng::sample_without_replacement(eng, 5, 0).empty());
    CHECK_THROWS_AS(rng::sample_without_replacement(eng, 3, 4), std::invalid_argument);
}

TEST_CASE("selection frequencies are close to uniform across many draws") {
    std::vector<int> hits(20, 0);
    for (std::uint64_t t = 0; t < 4000; ++t) {
        auto eng = rng::make_stream(9, rng::Purpose::SELECTION, t);
        for (auto i : rng::sample_without_replacement(eng, 20, 4)) ++hits[i];
    }
    // 4000 rounds * 4 picks / 20 clients = 800 expected hits each.
    for (int h : hits) {
        CHECK(h > 650);
        CHECK(h < 950);
    }
}
