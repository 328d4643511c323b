#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace skel {

/// N-dimensional double tensor. Activations use NCHW order, conv kernels
/// OIKK, biases O. The grad buffer is allocated lazily and always mirrors
/// the data shape.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0);

    static Tensor scalar(double v);

    int64_t numel() const;
    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    std::string shape_str() const;

    void reshape(const std::vector<int>& s);  // resizes data, zero-fills
    void fill(double v);
    void ensure_grad();
    void zero_grad();

    // 4-d accessors (shape must have 4 dims)
    int64_t idx4(int n, int c, int y, int x) const {
        return ((static_cast<int64_t>(n) * shape[1] + c) * shape[2] + y) * shape[3] + x;
    }
    double& at(int n, int c, int y, int x) { return data[idx4(n, c, y, x)]; }
    double at(int n, int c, int y, int x) const { return data[idx4(n, c, y, x)]; }

    bool all_finite() const;
};

}  // namespace skel
