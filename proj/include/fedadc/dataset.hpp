#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedadc/model.hpp"

namespace fedadc {

struct LabeledDataset {
    Matrix features;           // n x input_dim
    std::vector<int> labels;   // class indices in [0, K)
    std::size_t num_classes = 0;

    std::size_t size() const { return features.rows; }
    std::size_t input_dim() const { return features.cols; }
    void validate() const;  // throws InputError on label/shape violations
};

// Gaussian class clusters: per class, a mean drawn uniformly on the sphere of
// radius `class_separation`, unit covariance, `per_class` samples. Rows are
// grouped by class. Deterministic per seed.
LabeledDataset gen_synthetic(std::size_t num_classes, std::size_t input_dim,
                             std::size_t per_class, double class_separation,
                             std::uint64_t seed);

// Splits a class-balanced dataset into (train, test) by taking the last
// `test_per_class` rows of each class as test. Both halves stay balanced and
// share the generating distribution.
std::pair<LabeledDataset, LabeledDataset> split_per_class(const LabeledDataset& ds,
                                                          std::size_t test_per_class);

// Copies the given rows into a Batch.
Batch gather(const LabeledDataset& ds, std::span<const std::size_t> rows);

// Flat binary export: magic "FADC", then version, n, dim, K as little-endian
// u32, then row-major f64 features, then u32 labels.
void export_dataset(const LabeledDataset& ds, const std::string& path);
LabeledDataset import_dataset(const std::string& path);

}  // namespace fedadc
