#pragma once

#include <functional>

#include "futureseg/tensor.hpp"

namespace futureseg {

// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) for every
// element of x. f must be pure.
template <typename T>
Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x, T eps);

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps elements
// whose true gradient is ~0 from dominating through round-off.
template <typename T>
double max_relative_error(const Tensor<T>& a, const Tensor<T>& b, double floor = 1e-6);

}  // namespace futureseg
