#include "fedadc/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedadc/errors.hpp"
#include "fedadc/rng.hpp"

namespace fedadc {

std::size_t ClientShard::distinct_labels() const {
    std::size_t n = 0;
    for (double g : gamma)
        if (g > 0.0) ++n;
    return n;
}

void PartitionSpec::validate(std::size_t num_classes) const {
    if (num_clients == 0) throw ConfigError("partition: num_clients must be >= 1");
    if (method == PartitionMethod::SortPartition) {
        if (skew_s < 1 || skew_s > num_classes)
            throw ConfigError("partition: s must lie in [1, K]");
    } else {
        if (alpha <= 0.0) throw ConfigError("partition: alpha must be positive");
    }
}

std::pair<std::vector<double>, std::vector<double>> class_stats(
    std::span<const std::size_t> shard_indices, const std::vector<int>& labels,
    std::size_t num_classes) {
    if (shard_indices.empty()) throw InputError("class_stats: empty shard");
    std::vector<double> gamma(num_classes, 0.0);
    for (auto idx : shard_indices) gamma[static_cast<std::size_t>(labels[idx])] += 1.0;
    const double inv = 1.0 / static_cast<double>(shard_indices.size());
    double gmax = 0.0;
    for (auto& g : gamma) {
        g *= inv;
        gmax = std::max(gmax, g);
    }
    std::vector<double> rho(num_classes, 0.0);
    for (std::size_t k = 0; k < num_classes; ++k) rho[k] = gamma[k] / gmax;
    return {std::move(gamma), std::move(rho)};
}

namespace {

// Shuffles a shard's indices and installs the 80/20 train/test split plus
// class statistics. The split shuffle stream is keyed by (seed, client id)
// only, so shards are reproducible independent of partition internals.
ClientShard finish_shard(int client_id, std::vector<std::size_t> indices,
                         const LabeledDataset& ds, std::uint64_t seed) {
    auto eng = rng::make_stream(seed, rng::Purpose::SHARD_SPLIT,
                                static_cast<std::uint64_t>(client_id));
    rng::shuffle(eng, indices);
    ClientShard shard;
    shard.client_id = client_id;
    shard.indices = std::move(indices);
    shard.split = shard.indices.size() - shard.indices.size() / 5;
    auto stats = class_stats(shard.indices, ds.labels, ds.num_classes);
    shard.gamma = std::move(stats.first);
    shard.rho = std::move(stats.second);
    return shard;
}

}  // namespace

std::vector<ClientShard> sort_and_partition(const LabeledDataset& ds, std::size_t num_clients,
                                            std::size_t s, std::uint64_t seed,
                                            std::size_t* dropped) {
    ds.validate();
    if (s < 1 || s > ds.num_classes) throw ConfigError("sort_and_partition: s must lie in [1, K]");
    if (num_clients == 0) throw ConfigError("sort_and_partition: num_clients must be >= 1");

    const std::size_t num_blocks = num_clients * s;
    const std::size_t usable = ds.size() - ds.size() % num_blocks;
    if (dropped) *dropped = ds.size() - usable;
    if (usable < num_blocks)
        throw ConfigError("sort_and_partition: dataset too small for " +
                          std::to_string(num_blocks) + " blocks");

    // Stable sort by label: counting sort keeps dataset order within a label.
    std::vector<std::size_t> sorted;
    sorted.reserve(ds.size());
    for (std::size_t k = 0; k < ds.num_classes; ++k)
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (static_cast<std::size_t>(ds.labels[i]) == k) sorted.push_back(i);
    sorted.resize(usable);

    const std::size_t block_size = usable / num_blocks;
    std::vector<std::size_t> block_order(num_blocks);
    std::iota(block_order.begin(), block_order.end(), 0);
    auto eng = rng::make_stream(seed, rng::Purpose::PARTITION);
    rng::shuffle(eng, block_order);

    std::vector<ClientShard> shards;
    shards.reserve(num_clients);
    for (std::size_t c = 0; c < num_clients; ++c) {
        std::vector<std::size_t> indices;
        indices.reserve(s * block_size);
        for (std::size_t j = 0; j < s; ++j) {
            const std::size_t b = block_order[c * s + j];
            for (std::size_t i = 0; i < block_size; ++i)
                indices.push_back(sorted[b * block_size + i]);
        }
        shards.push_back(finish_shard(static_cast<int>(c), std::move(indices), ds, seed));
    }
    return shards;
}

std::vector<ClientShard> dirichlet_partition(const LabeledDataset& ds, std::size_t num_clients,
                                             double alpha, std::uint64_t seed) {
    ds.validate();
    if (alpha <= 0.0) throw ConfigError("dirichlet_partition: alpha must be positive");
    if (num_clients == 0) throw ConfigError("dirichlet_partition: num_clients must be >= 1");

    std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
    for (std::size_t i = 0; i < ds.size(); ++i)
        by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

    auto eng = rng::make_stream(seed, rng::Purpose::PARTITION);
    constexpr int kMaxAttempts = 100;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        std::vector<std::vector<std::size_t>> assigned(num_clients);
        for (std::size_t k = 0; k < ds.num_classes; ++k) {
            const auto& rows = by_class[k];
            if (rows.empty()) continue;
            const auto w = rng::dirichlet(eng, alpha, num_clients);

            // Largest-remainder apportionment, ties to the lower client index.
            const double n = static_cast<double>(rows.size());
            std::vector<std::size_t> counts(num_clients);
            std::vector<std::pair<double, std::size_t>> fracs(num_clients);
            std::size_t used = 0;
            for (std::size_t c = 0; c < num_clients; ++c) {
                const double quota = w[c] * n;
                counts[c] = static_cast<std::size_t>(std::floor(quota));
                fracs[c] = {quota - std::floor(quota), c};
                used += counts[c];
            }
            std::sort(fracs.begin(), fracs.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            for (std::size_t r = 0; r < rows.size() - used; ++r) counts[fracs[r].second]++;

            std::size_t pos = 0;
            for (std::size_t c = 0; c < num_clients; ++c)
                for (std::size_t i = 0; i < counts[c]; ++i) assigned[c].push_back(rows[pos++]);
        }

        const bool any_empty = std::any_of(assigned.begin(), assigned.end(),
                                           [](const auto& v) { return v.empty(); });
        if (any_empty) continue;

        std::vector<ClientShard> shards;
        shards.reserve(num_clients);
        for (std::size_t c = 0; c < num_clients; ++c)
            shards.push_back(finish_shard(static_cast<int>(c), std::move(assigned[c]), ds, seed));
        return shards;
    }
    throw PartitionError("dirichlet_partition: could not avoid empty shards after " +
                         std::to_string(kMaxAttempts) + " attempts (alpha=" +
                         std::to_string(alpha) + ", N=" + std::to_string(num_clients) + ")");
}

std::vector<ClientShard> make_partition(const LabeledDataset& ds, const PartitionSpec& spec,
                                        std::size_t* dropped) {
    spec.validate(ds.num_classes);
    if (dropped) *dropped = 0;
    if (spec.method == PartitionMethod::SortPartition)
        return sort_and_partition(ds, spec.num_clients, spec.skew_s, spec.seed, dropped);
    return dirichlet_partition(ds, spec.num_clients, spec.alpha, spec.seed);
}

}  // namespace fedadc
