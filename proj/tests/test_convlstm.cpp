#include <doctest.h>

#include <cmath>

#include "futureseg/convlstm.hpp"
#include "futureseg/error.hpp"
#include "futureseg/ops.hpp"
#include "futureseg/rng.hpp"
#include "oracles.hpp"

using namespace futureseg;

namespace {

Var<double> scalar(double v) { return Var<double>::constant(Tensor<double>({1, 1, 1, 1}, {v})); }
double value_of(const Var<double>& v) { return v.value().ptr()[0]; }

std::vector<Var<float>> random_seq(Dims d, std::uint64_t seed) {
  std::vector<Var<float>> seq;
  for (std::uint64_t i = 0; i < 4; ++i) seq.push_back(Var<float>::constant(Tensor<float>::uniform(d, 1.0f, mix_seed(seed, i))));
  return seq;
}

}  // namespace

TEST_CASE("zero_state") {
  const auto s = zero_state<float>(2, 3, 4, 5);
  CHECK(s.h.dims() == Dims{2, 3, 4, 5});
  for (float v : s.h.value().data()) CHECK(v == 0.0f);
  for (float v : s.c.value().data()) CHECK(v == 0.0f);
}

TEST_CASE("cell_step with zero parameters") {
  const ConvLstmShape shape{2, 3, 4, 4, 3};
  const auto p = ConvLstmParams<float>::zeros(shape);
  const auto f = Var<float>::constant(Tensor<float>::uniform({1, 2, 4, 4}, 1.0f, 3));
  GateTrace<float> trace;
  const auto next = cell_step(p, f, zero_state<float>(1, 3, 4, 4), &trace);
  for (float v : trace.input.value().data()) CHECK(v == 0.5f);
  for (float v : trace.forget.value().data()) CHECK(v == 0.5f);
  for (float v : trace.output.value().data()) CHECK(v == 0.5f);
  for (float v : next.h.value().data()) CHECK(v == 0.0f);
  for (float v : next.c.value().data()) CHECK(v == 0.0f);
}

TEST_CASE("saturated forget gate keeps the cell") {
  const ConvLstmShape shape{1, 2, 3, 3, 3};
  auto p = ConvLstmParams<double>::zeros(shape);
  p.b_f.assign(Tensor<double>::constant(p.b_f.dims(), 50.0));
  const auto c0 = Tensor<double>::uniform({1, 2, 3, 3}, 1.0, 8);
  const auto f = Var<double>::constant(Tensor<double>::uniform({1, 1, 3, 3}, 1.0, 9));
  const auto next = cell_step(p, f, CellState<double>{zero_state<double>(1, 2, 3, 3).h, Var<double>::constant(c0)});
  for (std::size_t i = 0; i < c0.size(); ++i) CHECK(next.c.value().data()[i] == doctest::Approx(c0.data()[i]).epsilon(1e-15));
}

TEST_CASE("scalar recurrence oracle") {
  Rng rng(2024);
  for (int draw = 0; draw < 20; ++draw) {
    std::vector<double> w(15);
    for (double& v : w) v = rng.uniform(-1.5, 1.5);
    const oracle::ScalarLstm ref{w[0], w[1], w[2], w[3], w[4], w[5], w[6], w[7],
                                 w[8], w[9], w[10], w[11], w[12], w[13], w[14]};
    std::vector<Tensor<double>> ts;
    for (double v : w) ts.emplace_back(Dims{1, 1, 1, 1}, std::vector<double>{v});
    const auto p = ConvLstmParams<double>::from_tensors(ts);

    double h = rng.uniform(-0.9, 0.9), c = rng.uniform(-2, 2);
    CellState<double> st{scalar(h), scalar(c)};
    for (int t = 0; t < 4; ++t) {
      const double f = rng.uniform(-2, 2);
      ref.step(f, h, c);
      st = cell_step(p, scalar(f), st);
      CHECK(value_of(st.h) == doctest::Approx(h).epsilon(1e-12));
      CHECK(value_of(st.c) == doctest::Approx(c).epsilon(1e-12));
    }
  }
}

TEST_CASE("hidden values and gates stay in range") {
  const ConvLstmShape shape{3, 4, 6, 6, 3};
  auto p = ConvLstmParams<float>::random(shape, 77);
  p.b_c.assign(Tensor<float>::uniform(p.b_c.dims(), 3.0f, 78));
  CellState<float> st = zero_state<float>(2, 4, 6, 6);
  for (std::uint64_t t = 0; t < 6; ++t) {
    GateTrace<float> tr;
    st = cell_step(p, Var<float>::constant(Tensor<float>::uniform({2, 3, 6, 6}, 4.0f, t)), st, &tr);
    for (float v : st.h.value().data()) CHECK(std::abs(v) <= 1.0f);
    for (const auto* g : {&tr.input, &tr.forget, &tr.output}) {
      for (float v : g->value().data()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
      }
    }
  }
}

TEST_CASE("run_sequence") {
  const ConvLstmShape shape{2, 3, 5, 5, 3};
  const auto seq = random_seq({1, 2, 5, 5}, 4);
  SUBCASE("zero parameters give zero output") {
    const auto g = run_sequence<float>(ConvLstmParams<float>::zeros(shape), seq);
    for (float v : g.value().data()) CHECK(v == 0.0f);
  }
  const auto p = ConvLstmParams<float>::random(shape, 5);
  SUBCASE("equals four chained steps") {
    CellState<float> st = zero_state<float>(1, 3, 5, 5);
    for (const auto& f : seq) st = cell_step(p, f, st);
    CHECK(run_sequence<float>(p, seq).value() == st.h.value());
  }
  SUBCASE("deterministic") { CHECK(run_sequence<float>(p, seq).value() == run_sequence<float>(p, seq).value()); }
  SUBCASE("oldest frame influences the output") {
    auto changed = seq;
    auto t = changed[0].value();
    for (float& v : t.data()) v += 0.5f;
    changed[0] = Var<float>::constant(t);
    const auto a = run_sequence<float>(p, seq).value();
    const auto b = run_sequence<float>(p, changed).value();
    double delta = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) delta += std::abs(a.data()[i] - b.data()[i]);
    CHECK(delta > 0.0);
  }
  SUBCASE("wrong length") {
    const std::vector<Var<float>> three(seq.begin(), seq.begin() + 3);
    CHECK_THROWS_AS(run_sequence<float>(p, three), ShapeError);
  }
  SUBCASE("wrong channel count") {
    CHECK_THROWS_AS(run_sequence<float>(p, random_seq({1, 3, 5, 5}, 6)), ShapeError);
  }
}

TEST_CASE("run_bidirectional") {
  const ConvLstmShape shape{2, 3, 4, 4, 3};
  const auto seq = random_seq({2, 2, 4, 4}, 40);
  const auto p = ConvLstmParams<float>::random(shape, 41);
  const auto q = ConvLstmParams<float>::random(shape, 42);
  CHECK(run_bidirectional<float>(p, q, seq).dims() == Dims{2, 6, 4, 4});
  const auto zero = ConvLstmParams<float>::zeros(shape);
  const auto zg = run_bidirectional<float>(zero, zero, seq).value();
  for (float v : zg.data()) CHECK(v == 0.0f);

  SUBCASE("halves are the two directional runs") {
    const auto g = run_bidirectional<float>(p, q, seq);
    const std::vector<Var<float>> rev(seq.rbegin(), seq.rend());
    CHECK(slice(g, 1, 0, 3).value() == run_sequence<float>(p, seq).value());
    CHECK(slice(g, 1, 3, 6).value() == run_sequence<float>(q, rev).value());
  }
  SUBCASE("shared parameters swap halves under time reversal") {
    const std::vector<Var<float>> rev(seq.rbegin(), seq.rend());
    const auto g = run_bidirectional<float>(p, p, seq);
    const auto r = run_bidirectional<float>(p, p, rev);
    CHECK(slice(g, 1, 0, 3).value() == slice(r, 1, 3, 6).value());
    CHECK(slice(g, 1, 3, 6).value() == slice(r, 1, 0, 3).value());
  }
  SUBCASE("directions may differ in output width") {
    const auto wide = ConvLstmParams<float>::random(ConvLstmShape{2, 5, 4, 4, 3}, 43);
    CHECK(run_bidirectional<float>(p, wide, seq).dims() == Dims{2, 8, 4, 4});
  }
}

TEST_CASE("parameter validation") {
  auto p = ConvLstmParams<float>::random(ConvLstmShape{2, 3, 4, 4, 3}, 1);
  CHECK_NOTHROW(p.validate());
  CHECK(p.shape() == ConvLstmShape{2, 3, 4, 4, 3});
  std::vector<Tensor<float>> ts;
  std::vector<NamedParam<float>> named;
  p.collect("", named);
  CHECK(named.size() == 15);
  for (const auto& n : named) ts.push_back(n.var.value());
  ts[8] = Tensor<float>::zeros({1, 3, 5, 4});  // peephole at the wrong spatial size
  CHECK_THROWS_AS(ConvLstmParams<float>::from_tensors(ts), ShapeError);
}
