#include "fedadc/model.hpp"

#include <cmath>

#include "fedadc/errors.hpp"

namespace fedadc {

void ModelSpec::validate() const {
    if (input_dim == 0) throw ConfigError("model: input_dim must be positive");
    if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
    if (kind == ModelKind::Logistic && !hidden_dims.empty())
        throw ConfigError("model: logistic takes no hidden dims");
    if (kind == ModelKind::Mlp && hidden_dims.empty())
        throw ConfigError("model: mlp requires at least one hidden dim");
    for (auto h : hidden_dims)
        if (h == 0) throw ConfigError("model: hidden dims must be positive");
}

std::vector<std::size_t> ModelSpec::layer_widths() const {
    std::vector<std::size_t> w;
    w.push_back(input_dim);
    for (auto h : hidden_dims) w.push_back(h);
    w.push_back(num_classes);
    return w;
}

std::vector<LayerShape> ModelSpec::param_shapes() const {
    const auto widths = layer_widths();
    std::vector<LayerShape> shapes;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        shapes.push_back({"fc" + std::to_string(l) + ".weight", {widths[l + 1], widths[l]}});
        shapes.push_back({"fc" + std::to_string(l) + ".bias", {widths[l + 1]}});
    }
    return shapes;
}

std::size_t ModelSpec::param_count() const {
    std::size_t n = 0;
    for (const auto& s : param_shapes()) n += s.count();
    return n;
}

std::size_t ModelSpec::head_offset() const {
    const auto widths = layer_widths();
    std::size_t off = 0;
    for (std::size_t l = 0; l + 2 < widths.size(); ++l)
        off += widths[l + 1] * widths[l] + widths[l + 1];
    return off;
}

std::size_t ModelSpec::head_size() const {
    const auto widths = layer_widths();
    const std::size_t in = widths[widths.size() - 2];
    return num_classes * in + num_classes;
}

ParamVector init_params(const ModelSpec& spec, rng::Engine& eng) {
    spec.validate();
    ParamVector params(spec.param_shapes());
    const auto widths = spec.layer_widths();
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t fan_in = widths[l];
        const std::size_t fan_out = widths[l + 1];
        const double gain = (spec.activation == Activation::Relu && spec.kind == ModelKind::Mlp)
                                ? 2.0
                                : 1.0;
        const double stddev = std::sqrt(gain / static_cast<double>(fan_in));
        for (std::size_t i = 0; i < fan_out * fan_in; ++i)
            params.values[off + i] = stddev * rng::normal(eng);
        off += fan_out * fan_in;
        off += fan_out;  // biases stay zero
    }
    return params;
}

namespace {

void check_compat(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
    if (params.size() != spec.param_count())
        throw ConfigError("forward: parameter count does not match model spec");
    if (batch.features.cols != spec.input_dim)
        throw ConfigError("forward: feature dimension does not match model spec");
    if (batch.features.rows != batch.labels.size() && !batch.labels.empty())
        throw ConfigError("forward: feature rows and label count differ");
}

double activate(double x, Activation a) {
    if (a == Activation::Relu) return x > 0.0 ? x : 0.0;
    return std::tanh(x);
}

}  // namespace

Matrix forward(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
    check_compat(spec, params, batch);
    const auto widths = spec.layer_widths();
    const std::size_t B = batch.features.rows;

    Matrix cur = batch.features;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t in = widths[l];
        const std::size_t out = widths[l + 1];
        const double* W = params.values.data() + off;
        const double* b = params.values.data() + off + out * in;
        Matrix next(B, out);
        for (std::size_t r = 0; r < B; ++r) {
            const double* x = cur.row(r);
            double* y = next.row(r);
            for (std::size_t o = 0; o < out; ++o) {
                double acc = b[o];
                const double* w = W + o * in;
                for (std::size_t i = 0; i < in; ++i) acc += w[i] * x[i];
                y[o] = acc;
            }
        }
        const bool last = (l + 2 == widths.size());
        if (!last) {
            for (auto& v : next.data) v = activate(v, spec.activation);
        }
        cur = std::move(next);
        off += out * in + out;
    }
    return cur;
}

}  // namespace fedadc
