#include "futureseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "futureseg/error.hpp"

namespace futureseg {

template <typename T>
Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x, T eps) {
  Tensor<T> grad(x.dims());
  Tensor<T> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T orig = probe.ptr()[i];
    probe.ptr()[i] = orig + eps;
    const T up = f(probe);
    probe.ptr()[i] = orig - eps;
    const T down = f(probe);
    probe.ptr()[i] = orig;
    grad.ptr()[i] = (up - down) / (T(2) * eps);
  }
  return grad;
}

template <typename T>
double max_relative_error(const Tensor<T>& a, const Tensor<T>& b, double floor) {
  if (a.dims() != b.dims()) throw ShapeError("max_relative_error: dims mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a.ptr()[i];
    const double y = b.ptr()[i];
    const double denom = std::max({std::abs(x), std::abs(y), floor});
    worst = std::max(worst, std::abs(x - y) / denom);
  }
  return worst;
}

template Tensor<float> finite_diff_grad(const std::function<float(const Tensor<float>&)>&,
                                        const Tensor<float>&, float);
template Tensor<double> finite_diff_grad(const std::function<double(const Tensor<double>&)>&,
                                         const Tensor<double>&, double);
template double max_relative_error(const Tensor<float>&, const Tensor<float>&, double);
template double max_relative_error(const Tensor<double>&, const Tensor<double>&, double);

}  // namespace futureseg
