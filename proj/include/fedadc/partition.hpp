#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fedadc/dataset.hpp"

namespace fedadc {

// A client's slice of the dataset. `indices` is already shuffled; the first
// `split` entries are the train split, the rest the client-local test split
// (used only by personalization evaluation).
struct ClientShard {
    int client_id = 0;
    std::vector<std::size_t> indices;
    std::size_t split = 0;
    std::vector<double> gamma;  // per-class data proportions, sums to 1
    std::vector<double> rho;    // gamma / max(gamma); max entry is exactly 1

    std::span<const std::size_t> train_indices() const {
        return {indices.data(), split};
    }
    std::span<const std::size_t> test_indices() const {
        return {indices.data() + split, indices.size() - split};
    }
    std::size_t distinct_labels() const;
    bool holds_class(std::size_t k) const { return gamma[k] > 0.0; }
};

enum class PartitionMethod { SortPartition, Dirichlet };

struct PartitionSpec {
    PartitionMethod method = PartitionMethod::SortPartition;
    std::size_t skew_s = 2;       // sort-partition: max distinct labels per client
    double alpha = 0.5;           // dirichlet concentration
    std::size_t num_clients = 1;
    std::uint64_t seed = 0;

    void validate(std::size_t num_classes) const;  // throws ConfigError
};

// gamma_i = count(class i) / |shard|, rho_i = gamma_i / max_j gamma_j.
std::pair<std::vector<double>, std::vector<double>> class_stats(
    std::span<const std::size_t> shard_indices, const std::vector<int>& labels,
    std::size_t num_classes);

// Sorts by label (dataset order preserved within a label), splits into
// num_clients * s equal contiguous blocks and deals s random blocks to each
// client. Samples beyond a multiple of num_clients * s are dropped; the count
// is reported through `dropped` when non-null.
std::vector<ClientShard> sort_and_partition(const LabeledDataset& ds, std::size_t num_clients,
                                            std::size_t s, std::uint64_t seed,
                                            std::size_t* dropped = nullptr);

// Per class, splits the class's samples across clients by a Dir(alpha * 1_N)
// draw with largest-remainder rounding. Redraws the whole allocation (up to
// 100 attempts) if any client would end up with an empty shard.
std::vector<ClientShard> dirichlet_partition(const LabeledDataset& ds, std::size_t num_clients,
                                             double alpha, std::uint64_t seed);

std::vector<ClientShard> make_partition(const LabeledDataset& ds, const PartitionSpec& spec,
                                        std::size_t* dropped = nullptr);

}  // namespace fedadc
