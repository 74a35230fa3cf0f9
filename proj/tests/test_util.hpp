#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ttm/tensor.hpp"

namespace ttm_test {

inline ttm::Tensor random_tensor(ttm::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                                 double hi = 1.0, bool requires_grad = false) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<ttm::real> data(static_cast<std::size_t>(ttm::shape_numel(shape)));
    for (auto& v : data) v = static_cast<ttm::real>(dist(rng));
    return ttm::Tensor(std::move(shape), std::move(data), requires_grad);
}

// Central finite-difference check of d(loss)/d(param) against param.grad().
// `loss_fn` must rebuild the graph from current parameter values and return
// the scalar loss value. Returns the max relative error seen.
inline double fd_check(ttm::Tensor& param, const std::function<double()>& loss_fn,
                       const std::vector<ttm::real>& autodiff_grad, double h = 1e-5,
                       std::size_t max_elems = static_cast<std::size_t>(-1)) {
    double worst = 0.0;
    auto& data = param.data();
    const std::size_t n = std::min(data.size(), max_elems);
    for (std::size_t i = 0; i < n; ++i) {
        const ttm::real saved = data[i];
        data[i] = saved + static_cast<ttm::real>(h);
        const double up = loss_fn();
        data[i] = saved - static_cast<ttm::real>(h);
        const double dn = loss_fn();
        data[i] = saved;
        const double fd = (up - dn) / (2.0 * h);
        const double ad = static_cast<double>(autodiff_grad[i]);
        const double rel = std::abs(ad - fd) / std::max(1.0, std::abs(fd));
        worst = std::max(worst, rel);
    }
    return worst;
}

} // namespace ttm_test
