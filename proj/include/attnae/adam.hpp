#pragma once

// Adam with bias correction. One AdamState per parameter tensor.

#include <cmath>

#include "attnae/matrix.hpp"

namespace attnae {

struct AdamState {
    Matrix m;  // first moment, same shape as the parameter
    Matrix v;  // second moment
    std::uint64_t step = 0;
    double lr = 0.006;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    AdamState(std::size_t rows, std::size_t cols, double lr_)
        : m(rows, cols), v(rows, cols), lr(lr_) {}
};

inline void adam_step(Matrix& param, const Matrix& grad, AdamState& st) {
    require_same_shape(param, grad, "adam_step");
    require_same_shape(param, st.m, "adam_step state");
    ++st.step;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    double* p = param.data();
    const double* g = grad.data();
    double* m = st.m.data();
    double* v = st.v.data();
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
        v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
    }
}

}  // namespace attnae
