#pragma once

#include <cstddef>
#include <cstdint>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace futureseg {

// Storage alignment for tensor buffers. Eigen picks its vectorized code path
// from the runtime address, so a fixed alignment keeps results bit-exact
// from run to run.
inline constexpr std::size_t kTensorAlignment = 64;

template <typename T>
struct AlignedAllocator {
  using value_type = T;

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kTensorAlignment}));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{kTensorAlignment}); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

// Extents of a rank-4 NCHW tensor.
struct Dims {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  // Element count; throws ShapeError when the product overflows.
  std::size_t count() const;
  std::size_t plane() const { return h * w; }
  std::size_t operator[](int axis) const;
  std::string str() const;

  friend bool operator==(const Dims&, const Dims&) = default;
};

// Dense row-major NCHW array. Instantiated for float (training) and double
// (gradient checking).
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Dims dims);
  Tensor(Dims dims, std::vector<T> data);

  static Tensor zeros(Dims dims) { return Tensor(dims); }
  static Tensor constant(Dims dims, T value);
  // Seeded inits; equal (dims, scale, seed) give bit-identical tensors.
  static Tensor uniform(Dims dims, T bound, std::uint64_t seed);
  static Tensor normal(Dims dims, T sigma, std::uint64_t seed);

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }
  const T* ptr() const { return data_.data(); }
  T* ptr() { return data_.data(); }

  std::size_t index(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return ((n * dims_.c + c) * dims_.h + h) * dims_.w + w;
  }
  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[index(n, c, h, w)];
  }
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[index(n, c, h, w)];
  }

  bool all_finite() const;
  // Throws NumericError naming `what` if any element is NaN or Inf.
  void check_finite(const char* what) const;

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(dims_, std::move(out));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Dims dims_{};
  AlignedVector<T> data_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace futureseg
