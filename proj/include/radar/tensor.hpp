#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace radar {

// Dense row-major N-d float array; the only value type the network sees.
// Layer tensors are [channels, height, width].
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor from(std::vector<int> s, std::vector<float> values);

    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int64_t numel() const;

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    std::string shape_str() const;

    // [C,H,W] accessors.
    float& at3(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    float at3(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
    }

    float* chan(int c) { return data.data() + static_cast<size_t>(c) * shape[1] * shape[2]; }
    const float* chan(int c) const {
        return data.data() + static_cast<size_t>(c) * shape[1] * shape[2];
    }

    bool all_finite() const;
};

}  // namespace radar
