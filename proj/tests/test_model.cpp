#include <doctest.h>

#include <cmath>

#include "futureseg/error.hpp"
#include "futureseg/ops.hpp"
#include "futureseg/rng.hpp"
#include "futureseg/segnet.hpp"

using namespace futureseg;

namespace {

ModelConfig tiny(LstmMode mode) {
  ModelConfig cfg;
  cfg.num_classes = 3;
  cfg.height = cfg.width = 16;
  cfg.widths = {4, 5, 6, 7};
  cfg.mode = mode;
  return cfg;
}

std::vector<SegMap> random_maps(std::size_t h, std::size_t w, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SegMap> maps(4, SegMap(h, w));
  for (auto& m : maps) {
    for (auto& v : m.labels) v = static_cast<std::uint8_t>(rng.uniform_int(0, static_cast<std::int64_t>(k) - 1));
  }
  return maps;
}

bool all_zero(const Tensor<float>& t) {
  for (float v : t.data()) {
    if (v != 0.0f) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("encoder stride law") {
  ModelConfig cfg;
  const auto p = init_params<float>(cfg, 1);
  SegMap m(64, 64);
  const auto feats = encode(p, Var<float>::constant(one_hot_encode<float>(m, 4)));
  CHECK(feats.maps[0].dims() == Dims{1, 16, 32, 32});
  CHECK(feats.maps[1].dims() == Dims{1, 32, 16, 16});
  CHECK(feats.maps[2].dims() == Dims{1, 64, 8, 8});
  CHECK(feats.maps[3].dims() == Dims{1, 64, 4, 4});

  const auto z = zero_params<float>(cfg);
  const auto zf = encode(z, Var<float>::constant(one_hot_encode<float>(m, 4)));
  for (const auto& f : zf.maps) CHECK(all_zero(f.value()));

  const auto x = Var<float>::constant(one_hot_encode<float>(random_maps(64, 64, 4, 3)[0], 4));
  const auto a = encode(p, x), b = encode(p, x);
  for (std::size_t k = 0; k < kScales; ++k) CHECK(a.maps[k].value() == b.maps[k].value());
}

TEST_CASE("forward output shape and zero parameters") {
  for (LstmMode mode : {LstmMode::none, LstmMode::uni, LstmMode::bi}) {
    CAPTURE(to_string(mode));
    const ModelConfig cfg = tiny(mode);
    const auto inputs = random_maps(16, 16, 3, 11);
    const auto logits = forward_one_step<float>(init_params<float>(cfg, 2), cfg, inputs);
    CHECK(logits.dims() == Dims{1, 3, 16, 16});

    const auto zl = forward_one_step<float>(zero_params<float>(cfg), cfg, inputs);
    CHECK(all_zero(zl.value()));
    const std::vector<std::uint8_t> targets(inputs[3].labels);
    CHECK(softmax_cross_entropy_mean(zl, targets).value().ptr()[0] == doctest::Approx(std::log(3.0)));
  }
}

TEST_CASE("forward is pure") {
  const ModelConfig cfg = tiny(LstmMode::bi);
  const auto p = init_params<float>(cfg, 3);
  const auto inputs = random_maps(16, 16, 3, 12);
  CHECK(forward_one_step<float>(p, cfg, inputs).value() == forward_one_step<float>(p, cfg, inputs).value());
}

TEST_CASE("batched forward equals per-sample forward") {
  const ModelConfig cfg = tiny(LstmMode::uni);
  const auto p = init_params<float>(cfg, 4);
  const auto a = random_maps(16, 16, 3, 13), b = random_maps(16, 16, 3, 14);
  std::vector<Tensor<float>> frames;
  for (std::size_t t = 0; t < 4; ++t) {
    const SegMap* maps[] = {&a[t], &b[t]};
    frames.push_back(one_hot_batch<float>(maps, 3));
  }
  const auto batch = forward_batch<float>(p, cfg, frames).value();
  const auto la = forward_one_step<float>(p, cfg, a).value();
  const auto lb = forward_one_step<float>(p, cfg, b).value();
  for (std::size_t i = 0; i < la.size(); ++i) {
    CHECK(batch.data()[i] == doctest::Approx(la.data()[i]).epsilon(1e-5));
    CHECK(batch.data()[la.size() + i] == doctest::Approx(lb.data()[i]).epsilon(1e-5));
  }
}

TEST_CASE("bidirectional doubles g channels but not logits") {
  const ModelConfig uni = tiny(LstmMode::uni), bi = tiny(LstmMode::bi);
  for (std::size_t k = 0; k < kScales; ++k) CHECK(bi.g_channels(k) == 2 * uni.g_channels(k));
  const auto inputs = random_maps(16, 16, 3, 5);
  CHECK(forward_one_step<float>(init_params<float>(bi, 1), bi, inputs).dims() ==
        forward_one_step<float>(init_params<float>(uni, 1), uni, inputs).dims());
  ModelConfig shared = bi;
  shared.share_directions = true;
  CHECK(init_params<float>(shared, 1).named().size() < init_params<float>(bi, 1).named().size());
}

TEST_CASE("wider one-hot input keeps output dims") {
  ModelConfig cfg = tiny(LstmMode::uni);
  cfg.num_classes = 6;
  const auto logits = forward_one_step<float>(init_params<float>(cfg, 1), cfg, random_maps(16, 16, 3, 6));
  CHECK(logits.dims() == Dims{1, 6, 16, 16});
}

TEST_CASE("decode") {
  const ModelConfig cfg = tiny(LstmMode::uni);
  const auto p = init_params<float>(cfg, 6);
  std::array<Var<float>, kScales> g;
  for (std::size_t k = 0; k < kScales; ++k) {
    g[k] = Var<float>::constant(Tensor<float>::zeros({1, cfg.g_channels(k), cfg.scale_height(k), cfg.scale_width(k)}));
  }
  const auto zero_logits = decode(zero_params<float>(cfg), g);
  CHECK(all_zero(zero_logits.value()));
  CHECK(zero_logits.dims().h == 16 * g[3].dims().h);
  auto broken = g;
  broken[2] = Var<float>{};
  CHECK_THROWS_AS(decode(p, broken), ShapeError);
  broken = g;
  broken[1] = Var<float>::constant(Tensor<float>::zeros({1, cfg.g_channels(1), 5, 5}));
  CHECK_THROWS_AS(decode(p, broken), ShapeError);
}

TEST_CASE("fusion baseline") {
  const ModelConfig cfg = tiny(LstmMode::none);
  const auto p = init_params<float>(cfg, 7);
  const auto maps = random_maps(16, 16, 3, 8);
  std::vector<MultiScaleFeatures<float>> feats;
  for (const auto& m : maps) feats.push_back(encode(p, Var<float>::constant(one_hot_encode<float>(m, 3))));
  const auto g = fusion_baseline<float>(p, feats);
  for (std::size_t k = 0; k < kScales; ++k) CHECK(g[k].dims().c == cfg.widths[k]);

  auto swapped = feats;
  std::swap(swapped[0], swapped[3]);
  const auto gs = fusion_baseline<float>(p, swapped);
  CHECK_FALSE(gs[0].value() == g[0].value());

  const auto zp = zero_params<float>(cfg);
  for (const auto& v : fusion_baseline<float>(zp, feats)) CHECK(all_zero(v.value()));
  const std::vector<MultiScaleFeatures<float>> three(feats.begin(), feats.begin() + 3);
  CHECK_THROWS_AS(fusion_baseline<float>(p, three), ShapeError);
}

TEST_CASE("input errors") {
  const ModelConfig cfg = tiny(LstmMode::uni);
  const auto p = init_params<float>(cfg, 9);
  auto maps = random_maps(16, 16, 3, 9);
  const std::vector<SegMap> three(maps.begin(), maps.begin() + 3);
  CHECK_THROWS_AS(forward_one_step<float>(p, cfg, three), ShapeError);
  maps[2].labels[5] = 3;
  CHECK_THROWS_AS(forward_one_step<float>(p, cfg, maps), ClassRangeError);
  CHECK_THROWS_AS(forward_one_step<float>(p, cfg, random_maps(32, 32, 3, 1)), ShapeError);
  ModelConfig odd = cfg;
  odd.height = 20;
  CHECK_THROWS_AS(odd.validate(), ShapeError);
  CHECK_THROWS_AS(parse_lstm_mode("sideways"), ConfigError);
}

TEST_CASE("initial loss is close to ln K") {
  ModelConfig cfg;
  const auto p = init_params<float>(cfg, 7);
  const auto maps = random_maps(64, 64, 4, 10);
  const auto loss = softmax_cross_entropy_mean(forward_one_step<float>(p, cfg, maps), maps[3].labels);
  CHECK(std::abs(loss.value().ptr()[0] - std::log(4.0)) < 0.01 * std::log(4.0));
}
