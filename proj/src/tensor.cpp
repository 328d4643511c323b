#include "skel/tensor.hpp"

#include <cmath>
#include <sstream>

#include "skel/error.hpp"

namespace skel {

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
    for (int d : shape) {
        if (d <= 0) throw DimError("tensor: nonpositive extent in shape " + shape_str());
    }
    data.assign(static_cast<size_t>(numel()), fill);
}

Tensor Tensor::scalar(double v) {
    Tensor t(std::vector<int>{1});
    t.data[0] = v;
    return t;
}

int64_t Tensor::numel() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

void Tensor::reshape(const std::vector<int>& s) {
    shape = s;
    data.assign(static_cast<size_t>(numel()), 0.0);
    if (!grad.empty()) grad.assign(data.size(), 0.0);
}

void Tensor::fill(double v) {
    std::fill(data.begin(), data.end(), v);
}

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
}

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace skel
