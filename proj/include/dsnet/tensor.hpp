#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "dsnet/error.hpp"

namespace dsnet {

// Dense rank-4 layout (batch, channels, height, width), row-major.
struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::int64_t numel() const {
        return static_cast<std::int64_t>(n) * c * h * w;
    }

    bool operator==(const Shape& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }

    void validate(const char* what) const {
        if (n < 1 || c < 1 || h < 1 || w < 1)
            throw DimensionError(std::string(what) + ": all dimensions must be >= 1, got " + str());
    }
};

// Value-type tensor. `grad` is empty when absent and mirrors `data` in length
// once allocated. Storage is the scalar parameter T; reductions and
// convolutions accumulate in double regardless of T.
template <typename T>
class BasicTensor {
public:
    Shape shape{};
    std::vector<T> data;
    std::vector<T> grad;  // empty = no gradient slot

    BasicTensor() = default;

    explicit BasicTensor(Shape s, T fill = T(0)) : shape(s) {
        shape.validate("tensor");
        data.assign(static_cast<std::size_t>(shape.numel()), fill);
    }

    BasicTensor(Shape s, std::vector<T> values) : shape(s), data(std::move(values)) {
        shape.validate("tensor");
        if (static_cast<std::int64_t>(data.size()) != shape.numel())
            throw DimensionError("tensor: " + std::to_string(data.size()) +
                                 " values do not fill shape " + shape.str());
    }

    std::int64_t numel() const { return shape.numel(); }
    bool empty() const { return data.empty(); }

    std::int64_t index(int n, int c, int h, int w) const {
        return ((static_cast<std::int64_t>(n) * shape.c + c) * shape.h + h) * shape.w + w;
    }

    T& at(int n, int c, int h, int w) { return data[index(n, c, h, w)]; }
    const T& at(int n, int c, int h, int w) const { return data[index(n, c, h, w)]; }

    bool has_grad() const { return !grad.empty(); }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }

    void zero_grad() {
        if (grad.empty())
            grad.assign(data.size(), T(0));
        else
            std::fill(grad.begin(), grad.end(), T(0));
    }

    void drop_grad() { grad.clear(); }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    template <typename U>
    BasicTensor<U> cast() const {
        BasicTensor<U> out(shape);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using Tensor = BasicTensor<float>;

template <typename T>
inline void check_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* what) {
    if (a.shape != b.shape)
        throw DimensionError(std::string(what) + ": shape mismatch " + a.shape.str() + " vs " +
                             b.shape.str());
}

}  // namespace dsnet
