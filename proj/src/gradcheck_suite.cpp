#include "futureseg/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "futureseg/convlstm.hpp"
#include "futureseg/gradcheck.hpp"
#include "futureseg/ops.hpp"
#include "futureseg/rng.hpp"
#include "futureseg/segnet.hpp"

namespace futureseg {

namespace {

using D = double;
using LossFn = std::function<Var<D>()>;

GradCheckResult check(const std::string& name, std::vector<Var<D>> leaves, const LossFn& loss_fn,
                      double tolerance) {
  const GradientSet<D> grads = backward(loss_fn());
  GradCheckResult r{name, 0.0, tolerance, 0};
  for (Var<D>& leaf : leaves) {
    const Tensor<D> analytic = grads.of(leaf);
    const Tensor<D> original = leaf.value();
    const std::function<D(const Tensor<D>&)> f = [&](const Tensor<D>& x) {
      leaf.assign(x);
      NoGradGuard no_grad;
      return loss_fn().value().ptr()[0];
    };
    const Tensor<D> numeric = finite_diff_grad<D>(f, original, kFiniteDiffEps);
    leaf.assign(original);
    r.max_rel_error = std::max(r.max_rel_error, max_relative_error(analytic, numeric));
    r.elements += analytic.size();
  }
  return r;
}

// Random tensor with every entry at least `gap` away from zero, so relu's
// kink stays outside the finite-difference stencil.
Tensor<D> away_from_zero(Dims d, std::uint64_t seed, D gap) {
  Tensor<D> t = Tensor<D>::uniform(d, 1.0, seed);
  for (D& v : t.data()) v = v >= 0 ? v + gap : v - gap;
  return t;
}

class SuiteBuilder {
 public:
  explicit SuiteBuilder(std::uint64_t seed) : seed_(seed) {}

  Var<D> param(Dims d, D bound = 1.0) { return Var<D>::parameter(Tensor<D>::uniform(d, bound, next())); }

  // Reduces an op output to a scalar with fixed random weights so every
  // output element carries a distinct gradient.
  Var<D> project(const Var<D>& out, std::uint64_t salt) {
    return sum(hadamard(out, Var<D>::constant(Tensor<D>::uniform(out.dims(), 1.0, mix_seed(seed_, salt)))));
  }

  std::uint64_t next() { return mix_seed(seed_, counter_++); }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

void op_cases(std::uint64_t seed, std::vector<GradCheckResult>& out) {
  SuiteBuilder b(seed);
  const double tol = kOpGradTolerance;

  struct ConvCase {
    const char* name;
    Dims x, w;
    ConvOptions opt;
  };
  const ConvCase convs[] = {
      {"conv2d 3x3 s1 p1", {2, 3, 6, 6}, {4, 3, 3, 3}, {1, 1, 1}},
      {"conv2d 3x3 s2 p1", {2, 3, 6, 6}, {4, 3, 3, 3}, {2, 1, 1}},
      {"conv2d 3x3 s2 p2 d2", {2, 2, 6, 6}, {3, 2, 3, 3}, {2, 2, 2}},
      {"conv2d 1x1", {2, 4, 5, 5}, {3, 4, 1, 1}, {1, 0, 1}},
      {"conv2d 2x3 s1 p0", {1, 2, 6, 6}, {2, 2, 2, 3}, {1, 0, 1}},
  };
  for (const auto& c : convs) {
    Var<D> x = b.param(c.x);
    Var<D> w = b.param(c.w);
    Var<D> bias = b.param({c.w.n, 1, 1, 1});
    const ConvOptions opt = c.opt;
    out.push_back(check(c.name, {x, w, bias}, [&] { return b.project(conv2d(x, w, bias, opt), 1); }, tol));
  }

  {
    Var<D> x = b.param({2, 3, 4, 4});
    Var<D> y = b.param({2, 3, 4, 4});
    out.push_back(check("add", {x, y}, [&] { return b.project(add(x, y), 2); }, tol));
    out.push_back(check("hadamard", {x, y}, [&] { return b.project(hadamard(x, y), 3); }, tol));
    Var<D> z = b.param({1, 3, 4, 4});
    out.push_back(check("add (batch broadcast)", {x, z}, [&] { return b.project(add(x, z), 4); }, tol));
    out.push_back(check("hadamard (batch broadcast)", {z, x}, [&] { return b.project(hadamard(z, x), 5); }, tol));
  }
  {
    Var<D> x = Var<D>::parameter(Tensor<D>::uniform({2, 3, 4, 4}, 3.0, b.next()));
    out.push_back(check("sigmoid", {x}, [&] { return b.project(sigmoid(x), 6); }, tol));
    out.push_back(check("tanh", {x}, [&] { return b.project(tanh(x), 7); }, tol));
    Var<D> r = Var<D>::parameter(away_from_zero({2, 3, 4, 4}, b.next(), 0.01));
    out.push_back(check("relu", {r}, [&] { return b.project(relu(r), 8); }, tol));
  }
  {
    Var<D> x = b.param({2, 2, 3, 3});
    out.push_back(check("upsample_nearest x2", {x}, [&] { return b.project(upsample_nearest(x, 2), 9); }, tol));
    out.push_back(check("upsample_nearest x3", {x}, [&] { return b.project(upsample_nearest(x, 3), 10); }, tol));
  }
  {
    Var<D> a = b.param({2, 2, 3, 4});
    Var<D> c = b.param({2, 3, 3, 4});
    out.push_back(check("concat channels", {a, c}, [&] { return b.project(concat_channels(a, c), 11); }, tol));
    Var<D> d = b.param({1, 2, 3, 4});
    out.push_back(check("concat batch", {a, d}, [&] {
      const Var<D> parts[] = {a, d};
      return b.project(concat<D>(0, parts), 12);
    }, tol));
    Var<D> e = b.param({2, 2, 3, 2});
    out.push_back(check("concat width", {a, e}, [&] {
      const Var<D> parts[] = {a, e};
      return b.project(concat<D>(3, parts), 13);
    }, tol));
    out.push_back(check("slice channels", {c}, [&] { return b.project(slice(c, 1, 1, 3), 14); }, tol));
    out.push_back(check("slice height", {c}, [&] { return b.project(slice(c, 2, 0, 2), 15); }, tol));
  }
  {
    Var<D> logits = Var<D>::parameter(Tensor<D>::uniform({2, 4, 3, 3}, 2.0, b.next()));
    Rng rng(b.next());
    std::vector<std::uint8_t> targets(2 * 3 * 3);
    for (auto& t : targets) t = static_cast<std::uint8_t>(rng.uniform_int(0, 3));
    out.push_back(check("softmax_cross_entropy_mean", {logits},
                        [&] { return softmax_cross_entropy_mean(logits, targets); }, tol));
    Var<D> x = b.param({2, 3, 2, 2});
    out.push_back(check("sum", {x}, [&] { return sum(x); }, tol));
  }
}

std::vector<Var<D>> lstm_leaves(const ConvLstmParams<D>& p) {
  std::vector<NamedParam<D>> named;
  p.collect("", named);
  std::vector<Var<D>> out;
  for (auto& n : named) out.push_back(n.var);
  return out;
}

// Random ConvLSTM weights with non-trivial peephole and bias values.
ConvLstmParams<D> random_lstm(const ConvLstmShape& s, SuiteBuilder& b) {
  ConvLstmParams<D> p = ConvLstmParams<D>::random(s, b.next());
  for (Var<D>* v : {&p.w_ci, &p.w_cf, &p.w_co, &p.b_i, &p.b_f, &p.b_c, &p.b_o}) {
    v->assign(Tensor<D>::uniform(v->dims(), 0.5, b.next()));
  }
  return p;
}

void lstm_cases(std::uint64_t seed, std::vector<GradCheckResult>& out) {
  SuiteBuilder b(seed);
  const double tol = kOpGradTolerance;
  for (std::size_t k : {3u, 1u}) {
    const ConvLstmShape s{2, 2, 4, 4, k};
    ConvLstmParams<D> p = random_lstm(s, b);
    Var<D> f = b.param({1, 2, 4, 4});
    Var<D> h = b.param({1, 2, 4, 4}, 0.9);
    Var<D> c = b.param({1, 2, 4, 4});
    std::vector<Var<D>> leaves = lstm_leaves(p);
    leaves.insert(leaves.end(), {f, h, c});
    out.push_back(check("convlstm cell_step k=" + std::to_string(k), leaves, [&] {
      const CellState<D> next = cell_step(p, f, CellState<D>{h, c});
      return add(b.project(next.h, 20), b.project(next.c, 21));
    }, tol));
  }
  {
    const ConvLstmShape s{2, 2, 4, 4, 3};
    ConvLstmParams<D> p = random_lstm(s, b);
    std::vector<Var<D>> seq;
    for (int i = 0; i < 4; ++i) seq.push_back(b.param({1, 2, 4, 4}));
    std::vector<Var<D>> leaves = lstm_leaves(p);
    leaves.insert(leaves.end(), seq.begin(), seq.end());
    out.push_back(check("convlstm run_sequence", leaves, [&] { return b.project(run_sequence<D>(p, seq), 22); }, tol));

    ConvLstmParams<D> q = random_lstm(ConvLstmShape{2, 3, 4, 4, 3}, b);
    std::vector<Var<D>> bi_leaves = lstm_leaves(p);
    for (const auto& v : lstm_leaves(q)) bi_leaves.push_back(v);
    bi_leaves.insert(bi_leaves.end(), seq.begin(), seq.end());
    out.push_back(check("convlstm run_bidirectional", bi_leaves,
                        [&] { return b.project(run_bidirectional<D>(p, q, seq), 23); }, tol));
  }
}

void model_cases(std::uint64_t seed, std::vector<GradCheckResult>& out) {
  for (LstmMode mode : {LstmMode::uni, LstmMode::bi, LstmMode::none}) {
    ModelConfig cfg;
    cfg.num_classes = 3;
    cfg.height = 16;
    cfg.width = 16;
    cfg.widths = {4, 4, 4, 4};
    cfg.mode = mode;
    const std::uint64_t sub = mix_seed(seed, 100 + static_cast<std::uint64_t>(mode));
    ModelParams<D> params = init_params<D>(cfg, sub);
    // Larger classifier weights than the training init so the logits (and
    // hence every upstream gradient) are far from zero.
    params.cls_w.assign(Tensor<D>::uniform(params.cls_w.dims(), 0.5, mix_seed(sub, 1)));
    for (auto& l : params.lstm_fwd) {
      l.b_c.assign(Tensor<D>::uniform(l.b_c.dims(), 0.5, mix_seed(sub, 2)));
    }

    Rng rng(mix_seed(sub, 3));
    std::vector<SegMap> inputs(4, SegMap(16, 16));
    for (auto& m : inputs) {
      for (auto& v : m.labels) v = static_cast<std::uint8_t>(rng.uniform_int(0, 2));
    }
    std::vector<std::uint8_t> targets(16 * 16);
    for (auto& t : targets) t = static_cast<std::uint8_t>(rng.uniform_int(0, 2));

    std::vector<Var<D>> leaves;
    for (const auto& np : params.named()) leaves.push_back(np.var);
    out.push_back(check("end-to-end model (" + std::string(to_string(mode)) + ")", leaves, [&] {
      return softmax_cross_entropy_mean(forward_one_step<D>(params, cfg, inputs), targets);
    }, kModelGradTolerance));
  }
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed, bool include_models) {
  std::vector<GradCheckResult> out;
  op_cases(mix_seed(seed, 1), out);
  lstm_cases(mix_seed(seed, 2), out);
  if (include_models) model_cases(mix_seed(seed, 3), out);
  return out;
}

}  // namespace futureseg
