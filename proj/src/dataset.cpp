#include "fedadc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "fedadc/errors.hpp"
#include "fedadc/rng.hpp"

namespace fedadc {

Batch gather(const LabeledDataset& ds, std::span<const std::size_t> rows) {
    Batch b;
    b.features = Matrix(rows.size(), ds.input_dim());
    b.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= ds.size()) throw InputError("gather: row index out of range");
        const double* src = ds.features.row(rows[i]);
        std::copy(src, src + ds.input_dim(), b.features.row(i));
        b.labels[i] = ds.labels[rows[i]];
    }
    return b;
}

void LabeledDataset::validate() const {
    if (features.rows != labels.size())
        throw InputError("dataset: feature rows and label count differ");
    if (size() < num_classes) throw InputError("dataset: fewer samples than classes");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
            throw InputError("dataset: label " + std::to_string(y) + " out of range");
}

LabeledDataset gen_synthetic(std::size_t num_classes, std::size_t input_dim,
                             std::size_t per_class, double class_separation,
                             std::uint64_t seed) {
    if (num_classes < 2) throw ConfigError("gen_synthetic: need at least 2 classes");
    if (input_dim == 0 || per_class == 0)
        throw ConfigError("gen_synthetic: dimensions and per-class count must be positive");

    auto eng = rng::make_stream(seed, rng::Purpose::DATASET);

    // Class means on the sphere of radius class_separation.
    Matrix means(num_classes, input_dim);
    for (std::size_t k = 0; k < num_classes; ++k) {
        double norm_sq = 0.0;
        for (std::size_t d = 0; d < input_dim; ++d) {
            means.at(k, d) = rng::normal(eng);
            norm_sq += means.at(k, d) * means.at(k, d);
        }
        const double scale = class_separation / std::sqrt(norm_sq);
        for (std::size_t d = 0; d < input_dim; ++d) means.at(k, d) *= scale;
    }

    LabeledDataset ds;
    ds.num_classes = num_classes;
    ds.features = Matrix(num_classes * per_class, input_dim);
    ds.labels.resize(num_classes * per_class);
    std::size_t row = 0;
    for (std::size_t k = 0; k < num_classes; ++k) {
        for (std::size_t s = 0; s < per_class; ++s, ++row) {
            for (std::size_t d = 0; d < input_dim; ++d)
                ds.features.at(row, d) = means.at(k, d) + rng::normal(eng);
            ds.labels[row] = static_cast<int>(k);
        }
    }
    return ds;
}

std::pair<LabeledDataset, LabeledDataset> split_per_class(const LabeledDataset& ds,
                                                          std::size_t test_per_class) {
    ds.validate();
    std::vector<std::size_t> counts(ds.num_classes, 0);
    for (int y : ds.labels) counts[static_cast<std::size_t>(y)]++;
    for (auto c : counts)
        if (c <= test_per_class)
            throw ConfigError("split_per_class: a class has too few samples for the test split");

    std::vector<std::size_t> seen(ds.num_classes, 0);
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t r = 0; r < ds.size(); ++r) {
        const auto k = static_cast<std::size_t>(ds.labels[r]);
        if (seen[k] < counts[k] - test_per_class)
            train_rows.push_back(r);
        else
            test_rows.push_back(r);
        seen[k]++;
    }

    auto gather = [&](const std::vector<std::size_t>& rows) {
        LabeledDataset out;
        out.num_classes = ds.num_classes;
        out.features = Matrix(rows.size(), ds.input_dim());
        out.labels.resize(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::memcpy(out.features.row(i), ds.features.row(rows[i]),
                        ds.input_dim() * sizeof(double));
            out.labels[i] = ds.labels[rows[i]];
        }
        return out;
    };
    return {gather(train_rows), gather(test_rows)};
}

namespace {

constexpr char kMagic[4] = {'F', 'A', 'D', 'C'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u32_le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw IoError("dataset import: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f64_le(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64_le(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw IoError("dataset import: truncated features");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

void export_dataset(const LabeledDataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(kMagic, 4);
    write_u32_le(out, kFormatVersion);
    write_u32_le(out, static_cast<std::uint32_t>(ds.size()));
    write_u32_le(out, static_cast<std::uint32_t>(ds.input_dim()));
    write_u32_le(out, static_cast<std::uint32_t>(ds.num_classes));
    for (double v : ds.features.data) write_f64_le(out, v);
    for (int y : ds.labels) write_u32_le(out, static_cast<std::uint32_t>(y));
    if (!out) throw IoError("write failed for " + path);
}

LabeledDataset import_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError(path + ": not a FADC dataset file");
    const auto version = read_u32_le(in);
    if (version != kFormatVersion)
        throw IoError(path + ": unsupported format version " + std::to_string(version));
    const auto n = read_u32_le(in);
    const auto dim = read_u32_le(in);
    const auto k = read_u32_le(in);

    LabeledDataset ds;
    ds.num_classes = k;
    ds.features = Matrix(n, dim);
    for (auto& v : ds.features.data) v = read_f64_le(in);
    ds.labels.resize(n);
    for (auto& y : ds.labels) {
        const auto u = read_u32_le(in);
        y = static_cast<int>(u);
    }
    ds.validate();
    return ds;
}

}  // namespace fedadc
