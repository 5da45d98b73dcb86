#pragma once

// Central-difference gradient oracle used to check every analytic gradient.

#include <functional>
#include <stdexcept>

#include "attnae/matrix.hpp"

namespace attnae {

inline Vec finite_diff_grad(const std::function<double(const Vec&)>& f, Vec x, double eps) {
    Vec g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + eps;
        const double fp = f(x);
        x[i] = orig - eps;
        const double fm = f(x);
        x[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("finite_diff_grad: non-finite function value");
        g[i] = (fp - fm) / (2.0 * eps);
    }
    return g;
}

}  // namespace attnae
