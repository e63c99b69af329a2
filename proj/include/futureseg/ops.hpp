#pragma once

#include <cstdint>
#include <span>

#include "futureseg/autodiff.hpp"

namespace futureseg {

enum class Elementwise { add, hadamard };
enum class Activation { sigmoid, tanh, relu };

struct ConvOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;
};

// Output extent of a convolution along one axis; throws ShapeError when it
// would be non-positive.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, ConvOptions opt);

// Zero-padded cross-correlation. x: [N,Cin,H,W], w: [Cout,Cin,kh,kw],
// b: [Cout,1,1,1] or an undefined Var for no bias.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, ConvOptions opt = {});

// Pointwise a+b or a*b. Dims must match, except that a side with N=1 is
// broadcast over the other side's batch.
template <typename T>
Var<T> elementwise(Elementwise kind, const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  return elementwise(Elementwise::add, a, b);
}
template <typename T>
Var<T> hadamard(const Var<T>& a, const Var<T>& b) {
  return elementwise(Elementwise::hadamard, a, b);
}

template <typename T>
Var<T> activation(Activation kind, const Var<T>& x);

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return activation(Activation::sigmoid, x);
}
template <typename T>
Var<T> tanh(const Var<T>& x) {
  return activation(Activation::tanh, x);
}
template <typename T>
Var<T> relu(const Var<T>& x) {
  return activation(Activation::relu, x);
}

// Each pixel becomes a factor x factor block.
template <typename T>
Var<T> upsample_nearest(const Var<T>& x, std::size_t factor);

// Concatenation along `axis` (0..3); all other extents must agree.
template <typename T>
Var<T> concat(int axis, std::span<const Var<T>> parts);

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const Var<T> parts[] = {a, b};
  return concat<T>(1, parts);
}

// Half-open range [begin, end) along `axis`.
template <typename T>
Var<T> slice(const Var<T>& x, int axis, std::size_t begin, std::size_t end);

// Mean over all N*H*W pixels of -log softmax(logits)[target]. `targets` holds
// one class index per pixel in N,H,W order.
template <typename T>
Var<T> softmax_cross_entropy_mean(const Var<T>& logits, std::span<const std::uint8_t> targets);

// Sum of all elements as a 1x1x1x1 scalar.
template <typename T>
Var<T> sum(const Var<T>& x);

}  // namespace futureseg
