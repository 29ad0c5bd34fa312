#include "fedadc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedadc::rng {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the combined word.
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Engine make_stream(std::uint64_t seed, Purpose purpose, std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = mix(seed, static_cast<std::uint64_t>(purpose));
    s = mix(s, a);
    s = mix(s, b);
    return Engine(s);
}

std::uint64_t uniform_below(Engine& eng, std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
        v = eng();
    } while (v >= limit);
    return v % n;
}

double uniform01(Engine& eng) {
    // 53 random bits into [0, 1).
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

double normal(Engine& eng) {
    double u1;
    do {
        u1 = uniform01(eng);
    } while (u1 <= 0.0);
    const double u2 = uniform01(eng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double gamma(Engine& eng, double shape) {
    if (shape <= 0.0) throw std::invalid_argument("gamma: shape must be positive");
    if (shape < 1.0) {
        double u;
        do {
            u = uniform01(eng);
        } while (u <= 0.0);
        return gamma(eng, shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal(eng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform01(eng);
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

std::vector<double> dirichlet(Engine& eng, double alpha, std::size_t n) {
    std::vector<double> w(n);
    double total = 0.0;
    for (auto& wi : w) {
        wi = gamma(eng, alpha);
        total += wi;
    }
    if (total <= 0.0) {
        // All gammas underflowed (tiny alpha); fall back to a single winner.
        w.assign(n, 0.0);
        w[static_cast<std::size_t>(uniform_below(eng, n))] = 1.0;
        return w;
    }
    for (auto& wi : w) wi /= total;
    return w;
}

std::vector<std::size_t> sample_without_replacement(Engine& eng, std::size_t n, std::size_t k) {
    if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(uniform_below(eng, n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace fedadc::rng
