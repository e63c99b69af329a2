#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "futureseg/autodiff.hpp"

namespace futureseg {

// Number of input frames consumed by every recurrent runner.
inline constexpr std::size_t kSequenceLength = 4;

template <typename T>
struct NamedParam {
  std::string name;
  Var<T> var;
};

struct ConvLstmShape {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t height = 0;  // working spatial dims of the state
  std::size_t width = 0;
  std::size_t kernel = 3;  // 1 or 3

  friend bool operator==(const ConvLstmShape&, const ConvLstmShape&) = default;
};

// Peephole ConvLSTM weights. Input-to-state kernels are Cout x Cin x k x k,
// state-to-state kernels Cout x Cout x k x k, peepholes 1 x Cout x Hs x Ws
// (broadcast over the batch), biases Cout x 1 x 1 x 1.
template <typename T>
struct ConvLstmParams {
  Var<T> w_fi, w_ff, w_fc, w_fo;
  Var<T> w_hi, w_hf, w_hc, w_ho;
  Var<T> w_ci, w_cf, w_co;
  Var<T> b_i, b_f, b_c, b_o;

  static ConvLstmParams zeros(const ConvLstmShape& shape);
  // Kernels uniform in +-1/sqrt(fan_in), peepholes uniform in +-0.1,
  // biases zero except the forget gate at 1.
  static ConvLstmParams random(const ConvLstmShape& shape, std::uint64_t seed);
  // Builds from 15 tensors in the order of collect().
  static ConvLstmParams from_tensors(std::span<const Tensor<T>> tensors);

  ConvLstmShape shape() const;
  // Throws ShapeError if the 15 tensors disagree on Cin, Cout, k or Hs x Ws.
  void validate() const;
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;
};

template <typename T>
struct CellState {
  Var<T> h;
  Var<T> c;
};

// Gate activations of one step, for inspection in tests.
template <typename T>
struct GateTrace {
  Var<T> input, forget, output;
};

template <typename T>
CellState<T> zero_state(std::size_t n, std::size_t cout, std::size_t hs, std::size_t ws);

// One step: i, F, candidate, C, o (reading the new C), H.
template <typename T>
CellState<T> cell_step(const ConvLstmParams<T>& p, const Var<T>& f, const CellState<T>& prev,
                       GateTrace<T>* trace = nullptr);

// Final hidden state after consuming seq[0..3] in order from a zero state.
template <typename T>
Var<T> run_sequence(const ConvLstmParams<T>& p, std::span<const Var<T>> seq);

// concat_channels(forward final hidden over seq[0..3], backward final hidden
// over seq[3..0]).
template <typename T>
Var<T> run_bidirectional(const ConvLstmParams<T>& fwd, const ConvLstmParams<T>& bwd,
                         std::span<const Var<T>> seq);

}  // namespace futureseg
