#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedadc/param_vector.hpp"
#include "fedadc/rng.hpp"

namespace fedadc {

// Minimal row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double v = 0.0) : rows(r), cols(c), data(r * c, v) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double* row(std::size_t r) { return data.data() + r * cols; }
};

enum class ModelKind { Logistic, Mlp };
enum class Activation { Relu, Tanh };

struct ModelSpec {
    ModelKind kind = ModelKind::Logistic;
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims;  // empty for logistic
    std::size_t num_classes = 0;
    Activation activation = Activation::Relu;

    void validate() const;  // throws ConfigError
    std::size_t num_layers() const { return hidden_dims.size() + 1; }
    // Per-layer sizes including input: [in, h..., K].
    std::vector<std::size_t> layer_widths() const;
    // Shapes of the flat parameter vector: W0, b0, W1, b1, ... (W row-major, out x in).
    std::vector<LayerShape> param_shapes() const;
    std::size_t param_count() const;
    // Offset of the final linear layer (weights start, total head size).
    std::size_t head_offset() const;
    std::size_t head_size() const;
};

struct Batch {
    Matrix features;              // batch-size x input-dim
    std::vector<int> labels;      // class indices in [0, K)

    std::size_t size() const { return features.rows; }
};

// Random init: Gaussian weights scaled by fan-in (He for relu, Xavier-style
// otherwise), zero biases.
ParamVector init_params(const ModelSpec& spec, rng::Engine& eng);

// Forward pass, returning batch-size x K logits. Throws ConfigError on shape
// mismatch between spec, params and batch.
Matrix forward(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

}  // namespace fedadc
