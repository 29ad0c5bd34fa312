#include "fedadc/param_vector.hpp"

#include <algorithm>
#include <cmath>

#include "fedadc/errors.hpp"

namespace fedadc {

ParamVector::ParamVector(std::vector<LayerShape> layer_shapes) : shapes(std::move(layer_shapes)) {
    std::size_t total = 0;
    for (const auto& s : shapes) total += s.count();
    values.assign(total, 0.0);
}

ParamVector ParamVector::zeros_like(const ParamVector& other) {
    ParamVector pv;
    pv.shapes = other.shapes;
    pv.values.assign(other.values.size(), 0.0);
    return pv;
}

bool ParamVector::all_finite() const {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void ParamVector::fill(double v) { std::fill(values.begin(), values.end(), v); }

void ParamVector::add_scaled(const ParamVector& other, double s) {
    if (values.size() != other.values.size())
        throw InputError("ParamVector::add_scaled: size mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += s * other.values[i];
}

void ParamVector::scale(double s) {
    for (auto& v : values) v *= s;
}

double ParamVector::max_abs_diff(const ParamVector& other) const {
    if (values.size() != other.values.size())
        throw InputError("ParamVector::max_abs_diff: size mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        m = std::max(m, std::fabs(values[i] - other.values[i]));
    return m;
}

bool ParamVector::values_equal(const ParamVector& other) const {
    if (values.size() != other.values.size()) return false;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] != other.values[i]) return false;
    return true;
}

}  // namespace fedadc
