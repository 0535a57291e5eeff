#ifndef VIBNN_TENSOR_HPP
#define VIBNN_TENSOR_HPP

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace vibnn {

// Minimal row-major dense matrix.
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(size_t r, size_t c, float fill = 0.f) : rows(r), cols(c), data(r * c, fill) {}

    float& at(size_t r, size_t c) { return data[r * cols + c]; }
    float at(size_t r, size_t c) const { return data[r * cols + c]; }
    const float* row(size_t r) const { return data.data() + r * cols; }
    float* row(size_t r) { return data.data() + r * cols; }
    size_t size() const { return data.size(); }
};

}  // namespace vibnn

#endif
