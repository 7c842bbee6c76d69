#include "radar/tensor.hpp"

#include <cmath>
#include <sstream>

#include "radar/errors.hpp"

namespace radar {

static int64_t product(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor dimension must be positive, got " + shape_str());
    }
    data.assign(static_cast<size_t>(product(shape)), 0.0f);
}

Tensor Tensor::from(std::vector<int> s, std::vector<float> values) {
    Tensor t(std::move(s));
    if (static_cast<int64_t>(values.size()) != t.numel()) {
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not fill shape " + t.shape_str());
    }
    t.data = std::move(values);
    return t;
}

int64_t Tensor::numel() const { return product(shape); }

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

bool Tensor::all_finite() const {
    for (float v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace radar
