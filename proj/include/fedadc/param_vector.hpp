#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace fedadc {

struct LayerShape {
    std::string name;
    std::vector<std::size_t> dims;

    std::size_t count() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
    bool operator==(const LayerShape&) const = default;
};

// Flat 64-bit parameter vector with layer-shape metadata. The same type holds
// the model, momenta, accumulated client updates and gradients.
struct ParamVector {
    std::vector<double> values;
    std::vector<LayerShape> shapes;

    ParamVector() = default;
    explicit ParamVector(std::vector<LayerShape> layer_shapes);

    std::size_t size() const { return values.size(); }

    static ParamVector zeros_like(const ParamVector& other);

    bool same_shapes(const ParamVector& other) const { return shapes == other.shapes; }
    bool all_finite() const;

    void fill(double v);
    void add_scaled(const ParamVector& other, double scale);  // this += scale * other
    void scale(double s);

    double max_abs_diff(const ParamVector& other) const;
    bool values_equal(const ParamVector& other) const;  // elementwise ==
};

}  // namespace fedadc
