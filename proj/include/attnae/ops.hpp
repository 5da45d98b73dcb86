#pragma once

// Pointwise nonlinearities, stabilized softmax and inverted-dropout masks.

#include <cmath>
#include <stdexcept>

#include "attnae/matrix.hpp"
#include "attnae/rng.hpp"

namespace attnae {

inline double sigmoid(double x) {
    // Split on sign so exp never overflows.
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double tanh_act(double x) { return std::tanh(x); }

inline void sigmoid_inplace(Vec& v) {
    for (double& x : v) x = sigmoid(x);
}

inline void tanh_inplace(Vec& v) {
    for (double& x : v) x = std::tanh(x);
}

// Max-subtracted softmax; output is positive and sums to 1.
inline Vec softmax(const Vec& v) {
    if (v.empty()) throw std::domain_error("softmax: empty input");
    double m = v[0];
    for (double x : v)
        if (x > m) m = x;
    Vec out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - m);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

// Backward of y = softmax(e): de_i = y_i * (dy_i - sum_j y_j dy_j).
inline Vec softmax_backward(const Vec& y, const Vec& dy) {
    if (y.size() != dy.size()) throw shape_error("softmax_backward: size mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) s += y[j] * dy[j];
    Vec de(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) de[i] = y[i] * (dy[i] - s);
    return de;
}

// Inverted dropout: entries are 0 with probability `rate`, else 1/(1-rate),
// so the mask has unit expectation and inference needs no rescaling.
inline Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0))
        throw std::domain_error("dropout_mask: rate must be in [0,1)");
    Matrix m(rows, cols);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (double& v : m.raw()) v = (rng.uniform01() >= rate) ? keep_scale : 0.0;
    return m;
}

}  // namespace attnae
