#include "futureseg/convlstm.hpp"

#include <array>
#include <cmath>

#include "futureseg/error.hpp"
#include "futureseg/ops.hpp"
#include "futureseg/rng.hpp"

namespace futureseg {

namespace {

constexpr std::array<const char*, 15> kNames = {"w_fi", "w_ff", "w_fc", "w_fo", "w_hi",
                                                "w_hf", "w_hc", "w_ho", "w_ci", "w_cf",
                                                "w_co", "b_i",  "b_f",  "b_c",  "b_o"};

template <typename T>
std::array<Var<T>*, 15> fields(ConvLstmParams<T>& p) {
  return {&p.w_fi, &p.w_ff, &p.w_fc, &p.w_fo, &p.w_hi, &p.w_hf, &p.w_hc, &p.w_ho,
          &p.w_ci, &p.w_cf, &p.w_co, &p.b_i,  &p.b_f,  &p.b_c,  &p.b_o};
}

template <typename T>
std::array<const Var<T>*, 15> fields(const ConvLstmParams<T>& p) {
  return {&p.w_fi, &p.w_ff, &p.w_fc, &p.w_fo, &p.w_hi, &p.w_hf, &p.w_hc, &p.w_ho,
          &p.w_ci, &p.w_cf, &p.w_co, &p.b_i,  &p.b_f,  &p.b_c,  &p.b_o};
}

std::array<Dims, 15> expected_dims(const ConvLstmShape& s) {
  const Dims wf{s.out_channels, s.in_channels, s.kernel, s.kernel};
  const Dims wh{s.out_channels, s.out_channels, s.kernel, s.kernel};
  const Dims peep{1, s.out_channels, s.height, s.width};
  const Dims bias{s.out_channels, 1, 1, 1};
  return {wf, wf, wf, wf, wh, wh, wh, wh, peep, peep, peep, bias, bias, bias, bias};
}

// The eight gate kernels stacked into one [4*Cout, Cin+Cout, k, k] kernel that
// acts on concat(f, H); gate order i, F, c, o.
template <typename T>
struct FusedGates {
  Var<T> weight;
  Var<T> bias;
};

template <typename T>
FusedGates<T> fuse(const ConvLstmParams<T>& p) {
  const Var<T> wi = concat_channels(p.w_fi, p.w_hi);
  const Var<T> wf = concat_channels(p.w_ff, p.w_hf);
  const Var<T> wc = concat_channels(p.w_fc, p.w_hc);
  const Var<T> wo = concat_channels(p.w_fo, p.w_ho);
  const Var<T> ws[] = {wi, wf, wc, wo};
  const Var<T> bs[] = {p.b_i, p.b_f, p.b_c, p.b_o};
  return {concat<T>(0, ws), concat<T>(0, bs)};
}

template <typename T>
void check_input(const ConvLstmShape& s, const Var<T>& f, const CellState<T>& prev) {
  const Dims fd = f.dims();
  if (fd.c != s.in_channels || fd.h != s.height || fd.w != s.width) {
    throw ShapeError("convlstm: input " + fd.str() + " does not match Cin=" +
                     std::to_string(s.in_channels) + " at " + std::to_string(s.height) + "x" +
                     std::to_string(s.width));
  }
  const Dims sd{fd.n, s.out_channels, s.height, s.width};
  if (prev.h.dims() != sd || prev.c.dims() != sd) {
    throw ShapeError("convlstm: state dims " + prev.h.dims().str() + " expected " + sd.str());
  }
}

template <typename T>
CellState<T> step(const ConvLstmParams<T>& p, const FusedGates<T>& g, std::size_t kernel,
                  const Var<T>& f, const CellState<T>& prev, GateTrace<T>* trace) {
  const std::size_t cout = p.b_i.dims().n;
  const Var<T> z = conv2d(concat_channels(f, prev.h), g.weight, g.bias,
                          ConvOptions{1, kernel / 2, 1});
  const Var<T> zi = slice(z, 1, 0, cout);
  const Var<T> zf = slice(z, 1, cout, 2 * cout);
  const Var<T> zc = slice(z, 1, 2 * cout, 3 * cout);
  const Var<T> zo = slice(z, 1, 3 * cout, 4 * cout);

  const Var<T> i = sigmoid(add(zi, hadamard(prev.c, p.w_ci)));
  const Var<T> forget = sigmoid(add(zf, hadamard(prev.c, p.w_cf)));
  const Var<T> c = add(hadamard(forget, prev.c), hadamard(i, tanh(zc)));
  const Var<T> o = sigmoid(add(zo, hadamard(c, p.w_co)));
  const Var<T> h = hadamard(o, tanh(c));
  if (trace) *trace = {i, forget, o};
  return {h, c};
}

}  // namespace

template <typename T>
ConvLstmParams<T> ConvLstmParams<T>::zeros(const ConvLstmShape& shape) {
  ConvLstmParams p;
  const auto dims = expected_dims(shape);
  auto fs = fields(p);
  for (std::size_t i = 0; i < fs.size(); ++i) *fs[i] = Var<T>::parameter(Tensor<T>(dims[i]));
  return p;
}

template <typename T>
ConvLstmParams<T> ConvLstmParams<T>::random(const ConvLstmShape& shape, std::uint64_t seed) {
  ConvLstmParams p;
  const auto dims = expected_dims(shape);
  const T bound = static_cast<T>(
      1.0 / std::sqrt(static_cast<double>((shape.in_channels + shape.out_channels) * shape.kernel *
                                          shape.kernel)));
  auto fs = fields(p);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    Tensor<T> t;
    if (i < 8) {
      t = Tensor<T>::uniform(dims[i], bound, mix_seed(seed, i));
    } else if (i < 11) {
      t = Tensor<T>::uniform(dims[i], T(0.1), mix_seed(seed, i));
    } else if (i == 12) {
      t = Tensor<T>::constant(dims[i], T(1));
    } else {
      t = Tensor<T>(dims[i]);
    }
    *fs[i] = Var<T>::parameter(std::move(t));
  }
  return p;
}

template <typename T>
ConvLstmParams<T> ConvLstmParams<T>::from_tensors(std::span<const Tensor<T>> tensors) {
  if (tensors.size() != kNames.size()) {
    throw ShapeError("convlstm: expected 15 parameter tensors, got " + std::to_string(tensors.size()));
  }
  ConvLstmParams p;
  auto fs = fields(p);
  for (std::size_t i = 0; i < fs.size(); ++i) *fs[i] = Var<T>::parameter(tensors[i]);
  p.validate();
  return p;
}

template <typename T>
ConvLstmShape ConvLstmParams<T>::shape() const {
  const Dims wf = w_fi.dims();
  const Dims peep = w_ci.dims();
  return {wf.c, wf.n, peep.h, peep.w, wf.h};
}

template <typename T>
void ConvLstmParams<T>::validate() const {
  const ConvLstmShape s = shape();
  if (s.kernel != 1 && s.kernel != 3) {
    throw ShapeError("convlstm: kernel size must be 1 or 3, got " + std::to_string(s.kernel));
  }
  const auto dims = expected_dims(s);
  const auto fs = fields(*this);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    if (!fs[i]->defined() || fs[i]->dims() != dims[i]) {
      throw ShapeError(std::string("convlstm: parameter ") + kNames[i] + " has dims " +
                       (fs[i]->defined() ? fs[i]->dims().str() : "undefined") + ", expected " +
                       dims[i].str());
    }
  }
}

template <typename T>
void ConvLstmParams<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const {
  const auto fs = fields(*this);
  for (std::size_t i = 0; i < fs.size(); ++i) out.push_back({prefix + kNames[i], *fs[i]});
}

template <typename T>
CellState<T> zero_state(std::size_t n, std::size_t cout, std::size_t hs, std::size_t ws) {
  const Dims d{n, cout, hs, ws};
  return {Var<T>::constant(Tensor<T>(d)), Var<T>::constant(Tensor<T>(d))};
}

template <typename T>
CellState<T> cell_step(const ConvLstmParams<T>& p, const Var<T>& f, const CellState<T>& prev,
                       GateTrace<T>* trace) {
  p.validate();
  const ConvLstmShape s = p.shape();
  check_input(s, f, prev);
  return step(p, fuse(p), s.kernel, f, prev, trace);
}

template <typename T>
Var<T> run_sequence(const ConvLstmParams<T>& p, std::span<const Var<T>> seq) {
  if (seq.size() != kSequenceLength) {
    throw ShapeError("convlstm: sequence length must be 4, got " + std::to_string(seq.size()));
  }
  p.validate();
  const ConvLstmShape s = p.shape();
  const FusedGates<T> g = fuse(p);
  CellState<T> state = zero_state<T>(seq[0].dims().n, s.out_channels, s.height, s.width);
  for (const Var<T>& f : seq) {
    check_input(s, f, state);
    state = step(p, g, s.kernel, f, state, static_cast<GateTrace<T>*>(nullptr));
  }
  return state.h;
}

template <typename T>
Var<T> run_bidirectional(const ConvLstmParams<T>& fwd, const ConvLstmParams<T>& bwd,
                         std::span<const Var<T>> seq) {
  if (seq.size() != kSequenceLength) {
    throw ShapeError("convlstm: sequence length must be 4, got " + std::to_string(seq.size()));
  }
  const ConvLstmShape a = fwd.shape();
  const ConvLstmShape b = bwd.shape();
  if (a.in_channels != b.in_channels || a.height != b.height || a.width != b.width) {
    throw ShapeError("convlstm: forward and backward directions disagree on Cin or working dims");
  }
  std::vector<Var<T>> reversed(seq.rbegin(), seq.rend());
  const Var<T> hf = run_sequence(fwd, seq);
  const Var<T> hb = run_sequence<T>(bwd, reversed);
  return concat_channels(hf, hb);
}

#define FUTURESEG_INSTANTIATE_CONVLSTM(T)                                                      \
  template struct ConvLstmParams<T>;                                                          \
  template CellState<T> zero_state<T>(std::size_t, std::size_t, std::size_t, std::size_t);    \
  template CellState<T> cell_step(const ConvLstmParams<T>&, const Var<T>&, const CellState<T>&, \
                                  GateTrace<T>*);                                             \
  template Var<T> run_sequence(const ConvLstmParams<T>&, std::span<const Var<T>>);            \
  template Var<T> run_bidirectional(const ConvLstmParams<T>&, const ConvLstmParams<T>&,       \
                                    std::span<const Var<T>>);

FUTURESEG_INSTANTIATE_CONVLSTM(float)
FUTURESEG_INSTANTIATE_CONVLSTM(double)

}  // namespace futureseg
