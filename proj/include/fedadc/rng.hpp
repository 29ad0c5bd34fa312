#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fedadc::rng {

// Labels for derived RNG streams. Every random decision in a run draws from a
// stream keyed by (master seed, purpose, a, b), so e.g. client i's batch order
// at round t depends only on (seed, CLIENT_BATCHES, t, i) and never on which
// other clients were selected or on thread scheduling.
enum class Purpose : std::uint64_t {
    DATASET = 1,
    PARTITION = 2,
    MODEL_INIT = 3,
    SELECTION = 4,
    CLIENT_BATCHES = 5,
    SHARD_SPLIT = 6,
    PERSONALIZATION = 7,
};

std::uint64_t mix(std::uint64_t a, std::uint64_t b);

using Engine = std::mt19937_64;

Engine make_stream(std::uint64_t seed, Purpose purpose, std::uint64_t a = 0, std::uint64_t b = 0);

// Uniform integer in [0, n) without modulo bias. Sampling helpers are written
// out rather than taken from <random> distributions because distribution
// output is implementation-defined there, and run artifacts must be
// byte-reproducible.
std::uint64_t uniform_below(Engine& eng, std::uint64_t n);

double uniform01(Engine& eng);

// Standard normal via Box-Muller; stateless (two uniforms per call).
double normal(Engine& eng);

// Gamma(shape, 1) via Marsaglia-Tsang, with the u^(1/shape) boost for shape < 1.
double gamma(Engine& eng, double shape);

// Dirichlet(alpha * 1_n) draw.
std::vector<double> dirichlet(Engine& eng, double alpha, std::size_t n);

// In-place Fisher-Yates.
template <typename T>
void shuffle(Engine& eng, std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(uniform_below(eng, i));
        std::swap(items[i - 1], items[j]);
    }
}

// k distinct values from [0, n), ascending.
std::vector<std::size_t> sample_without_replacement(Engine& eng, std::size_t n, std::size_t k);

}  // namespace fedadc::rng
