#include "futureseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "futureseg/error.hpp"
#include "futureseg/rng.hpp"

namespace futureseg {

namespace {

std::size_t checked_mul(std::size_t a, std::size_t b) {
  if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a) {
    throw ShapeError("tensor element count overflows size_t");
  }
  return a * b;
}

}  // namespace

std::size_t Dims::count() const {
  return checked_mul(checked_mul(checked_mul(n, c), h), w);
}

std::size_t Dims::operator[](int axis) const {
  switch (axis) {
    case 0: return n;
    case 1: return c;
    case 2: return h;
    case 3: return w;
    default: throw ShapeError("axis out of range: " + std::to_string(axis));
  }
}

std::string Dims::str() const {
  std::ostringstream os;
  os << n << "x" << c << "x" << h << "x" << w;
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Dims dims) : dims_(dims), data_(dims.count(), T(0)) {}

template <typename T>
Tensor<T>::Tensor(Dims dims, std::vector<T> data) : dims_(dims), data_(data.begin(), data.end()) {
  if (data_.size() != dims_.count()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match dims " + dims_.str());
  }
}

template <typename T>
Tensor<T> Tensor<T>::constant(Dims dims, T value) {
  Tensor t(dims);
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::uniform(Dims dims, T bound, std::uint64_t seed) {
  Tensor t(dims);
  Rng rng(seed);
  for (auto& v : t.data_) v = static_cast<T>(rng.uniform(-static_cast<double>(bound), bound));
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::normal(Dims dims, T sigma, std::uint64_t seed) {
  Tensor t(dims);
  Rng rng(seed);
  for (auto& v : t.data_) v = static_cast<T>(sigma * rng.normal());
  return t;
}

template <typename T>
bool Tensor<T>::all_finite() const {
  for (T v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
void Tensor<T>::check_finite(const char* what) const {
  if (!all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + what + " (dims " +
                       dims_.str() + ")");
  }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace futureseg
