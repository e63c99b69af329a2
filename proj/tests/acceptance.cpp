// Acceptance gate: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exit status is nonzero if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "futureseg/checkpoint.hpp"
#include "futureseg/convlstm.hpp"
#include "futureseg/gradcheck_suite.hpp"
#include "futureseg/ops.hpp"
#include "futureseg/predict.hpp"
#include "futureseg/rng.hpp"
#include "futureseg/run_config.hpp"
#include "futureseg/segv_io.hpp"
#include "futureseg/train.hpp"
#include "oracles.hpp"

using namespace futureseg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void progress(const std::string& s) {
  std::fprintf(stderr, "  .. %s\n", s.c_str());
  std::fflush(stderr);
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const auto results = run_gradcheck_suite(7);
  const double secs = seconds_since(t0);
  double worst_op = 0, worst_model = 0;
  bool ok = true;
  for (const auto& r : results) {
    if (!r.passed()) {
      ok = false;
      progress("gradient check failed: " + r.name + fmt(" rel err %.3e", r.max_rel_error));
    }
    if (r.tolerance == kModelGradTolerance) {
      worst_model = std::max(worst_model, r.max_rel_error);
    } else {
      worst_op = std::max(worst_op, r.max_rel_error);
    }
  }
  return {ok && secs < 120.0, fmt("%zu checks, worst op rel err %.2e (< 1e-4), worst end-to-end %.2e (< 1e-3), %.1f s (< 120 s)",
                                   results.size(), worst_op, worst_model, secs)};
}

Outcome scalar_oracle() {
  Rng rng(11);
  double worst = 0;
  for (int draw = 0; draw < 100; ++draw) {
    std::vector<double> w(15);
    for (double& v : w) v = rng.uniform(-2.0, 2.0);
    const oracle::ScalarLstm ref{w[0], w[1], w[2], w[3], w[4], w[5], w[6], w[7],
                                 w[8], w[9], w[10], w[11], w[12], w[13], w[14]};
    std::vector<Tensor<double>> ts;
    for (double v : w) ts.emplace_back(Dims{1, 1, 1, 1}, std::vector<double>{v});
    const auto p = ConvLstmParams<double>::from_tensors(ts);
    double h = rng.uniform(-1, 1), c = rng.uniform(-2, 2);
    CellState<double> st{Var<double>::constant(Tensor<double>({1, 1, 1, 1}, {h})),
                         Var<double>::constant(Tensor<double>({1, 1, 1, 1}, {c}))};
    for (int t = 0; t < 4; ++t) {
      const double f = rng.uniform(-3, 3);
      ref.step(f, h, c);
      st = cell_step(p, Var<double>::constant(Tensor<double>({1, 1, 1, 1}, {f})), st);
      worst = std::max({worst, std::abs(st.h.value().ptr()[0] - h), std::abs(st.c.value().ptr()[0] - c)});
    }
  }
  return {worst <= 1e-6, fmt("100 draws x 4 steps, max |diff| %.2e (<= 1e-6)", worst)};
}

Outcome miou_oracle() {
  Rng rng(12);
  std::size_t mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<SegMap> p(1, SegMap(8, 8)), g(1, SegMap(8, 8));
    for (auto& v : p[0].labels) v = static_cast<std::uint8_t>(rng.uniform_int(0, 4));
    for (auto& v : g[0].labels) v = static_cast<std::uint8_t>(rng.uniform_int(0, 4));
    const auto r = evaluate_miou(p, g, 5);
    const auto o = oracle::confusion_iou(p, g, 5);
    bool same = r.miou == o.miou;
    for (std::size_t c = 0; c < 5; ++c) {
      same = same && r.present[c] == o.present[c] && (!o.present[c] || r.class_iou[c] == o.iou[c]);
    }
    if (!same) ++mismatches;
  }
  SegMap pred(2, 2), gt(2, 2);
  pred.labels = {0, 0, 1, 1};
  gt.labels = {0, 1, 1, 1};
  const double hand = evaluate_miou(std::span(&pred, 1), std::span(&gt, 1), 2).miou;
  return {mismatches == 0 && std::abs(hand - 7.0 / 12.0) < 1e-12,
          fmt("%zu/1000 oracle mismatches, hand case %.6f (7/12 = %.6f)", mismatches, hand, 7.0 / 12.0)};
}

struct TrainedRun {
  TrainResult result;
  EvalReport eval;
  double seconds = 0;
};

TrainedRun train_default(LstmMode mode, const Dataset& train_data, const Dataset& val_data) {
  RunConfig rc;
  rc.mode = mode;
  const auto t0 = Clock::now();
  TrainedRun run;
  run.result = train(rc.training(), train_data, val_data,
                     [&](const std::string& line) { progress(std::string(to_string(mode)) + " " + line); });
  run.seconds = seconds_since(t0);
  run.eval = evaluate_model(Model::from_checkpoint(run.result.best), val_data, 3, evaluation_threads());
  return run;
}

Outcome bidirectional_symmetry() {
  const ConvLstmShape shape{8, 8, 16, 16, 3};
  const auto p = ConvLstmParams<float>::random(shape, 21);
  std::vector<Var<float>> seq;
  for (std::uint64_t i = 0; i < 4; ++i) {
    seq.push_back(Var<float>::constant(Tensor<float>::uniform({2, 8, 16, 16}, 1.0f, mix_seed(22, i))));
  }
  const std::vector<Var<float>> rev(seq.rbegin(), seq.rend());
  const auto g = run_bidirectional<float>(p, p, seq);
  const auto r = run_bidirectional<float>(p, p, rev);
  const bool a = slice(g, 1, 0, 8).value() == slice(r, 1, 8, 16).value();
  const bool b = slice(g, 1, 8, 16).value() == slice(r, 1, 0, 8).value();

  // The same property through the full model with shared directions.
  ModelConfig cfg;
  cfg.num_classes = 4;
  cfg.height = cfg.width = 32;
  cfg.widths = {4, 4, 4, 4};
  cfg.mode = LstmMode::bi;
  cfg.share_directions = true;
  const auto params = init_params<float>(cfg, 23);
  GenConfig gen;
  gen.height = gen.width = 32;
  gen.sequence_count = 1;
  gen.frames = 4;
  const auto frames = generate_dataset(gen).sequences[0].frames;
  bool model_ok = true;
  std::vector<MultiScaleFeatures<float>> fwd, bwd;
  for (const auto& m : frames) fwd.push_back(encode(params, Var<float>::constant(one_hot_encode<float>(m, 4))));
  bwd.assign(fwd.rbegin(), fwd.rend());
  for (std::size_t k = 0; k < kScales; ++k) {
    std::vector<Var<float>> s1, s2;
    for (const auto& f : fwd) s1.push_back(f.maps[k]);
    for (const auto& f : bwd) s2.push_back(f.maps[k]);
    const auto& lp = params.lstm_fwd[k];
    const auto x = run_bidirectional<float>(lp, lp, s1);
    const auto y = run_bidirectional<float>(lp, lp, s2);
    const std::size_t c = cfg.widths[k];
    model_ok = model_ok && slice(x, 1, 0, c).value() == slice(y, 1, c, 2 * c).value() &&
               slice(x, 1, c, 2 * c).value() == slice(y, 1, 0, c).value();
  }
  return {a && b && model_ok, fmt("standalone halves swap: %s/%s, all 4 model scales: %s", a ? "yes" : "no",
                                  b ? "yes" : "no", model_ok ? "yes" : "no")};
}

Outcome determinism_and_round_trips() {
  RunConfig rc;
  const Dataset d1 = generate_dataset(rc.train_generator());
  const Dataset d2 = generate_dataset(rc.train_generator());
  const bool data_same = encode_segv(d1) == encode_segv(d2);
  const std::string segv = encode_segv(d1);
  const bool segv_rt = decode_segv(segv) == d1 && encode_segv(decode_segv(segv)) == segv;

  // Two identical short training runs.
  RunConfig small = rc;
  small.train_sequences = 24;
  small.val_sequences = 8;
  small.epochs = 2;
  const Dataset tr = generate_dataset(small.train_generator());
  const Dataset va = generate_dataset(small.val_generator());
  const TrainResult a = train(small.training(), tr, va);
  const TrainResult b = train(small.training(), tr, va);
  const bool curves_same = a.loss_curve == b.loss_curve && a.initial_loss == b.initial_loss;
  const std::string ck = encode_checkpoint(a.best);
  const bool ckpt_same = ck == encode_checkpoint(b.best);
  const bool ckpt_rt = decode_checkpoint(ck) == a.best && encode_checkpoint(decode_checkpoint(ck)) == ck;
  return {data_same && segv_rt && curves_same && ckpt_same && ckpt_rt,
          fmt("datasets %s, SEGV round trip %s, loss curves %s, checkpoints %s, checkpoint round trip %s",
              data_same ? "identical" : "DIFFER", segv_rt ? "exact" : "BROKEN", curves_same ? "identical" : "DIFFER",
              ckpt_same ? "identical" : "DIFFER", ckpt_rt ? "exact" : "BROKEN")};
}

Outcome loss_sanity(double default_initial_loss) {
  RunConfig rc;
  rc.train_sequences = 50;
  rc.val_sequences = 0;
  rc.epochs = 3;
  const Dataset tr = generate_dataset(rc.train_generator());
  const TrainResult r = train(rc.training(), tr, Dataset{});
  const double ln_k = std::log(4.0);
  const double rel = std::abs(default_initial_loss - ln_k) / ln_k;
  const double final_loss = r.loss_curve.back();
  return {rel < 0.01 && final_loss < 0.5 * r.initial_loss,
          fmt("default initial loss %.4f vs ln 4 = %.4f (rel %.2f%%, < 1%%); tiny run final %.4f < 0.5 x %.4f",
              default_initial_loss, ln_k, 100.0 * rel, final_loss, r.initial_loss)};
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, Outcome>> rows;
  const auto report = [&](const std::string& name, const Outcome& o) {
    std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    rows.emplace_back(name, o);
  };
  const auto guarded = [&](const std::string& name, const std::function<Outcome()>& fn) {
    try {
      report(name, fn());
    } catch (const std::exception& e) {
      report(name, {false, std::string("exception: ") + e.what()});
    }
  };

  guarded("1 gradient suite", gradient_suite);
  guarded("2 ConvLSTM scalar oracle", scalar_oracle);
  guarded("3 mIoU oracle", miou_oracle);

  // Criteria 4, 5, 6 and the first half of 9 share the default-scale runs.
  RunConfig rc;
  std::optional<TrainedRun> uni, none;
  try {
    const Dataset train_data = generate_dataset(rc.train_generator());
    const Dataset val_data = generate_dataset(rc.val_generator());
    progress(fmt("training uni on %zu sequences, %zu epochs", train_data.sequences.size(), rc.epochs));
    uni = train_default(LstmMode::uni, train_data, val_data);
    progress(fmt("training none (fusion baseline), same budget"));
    none = train_default(LstmMode::none, train_data, val_data);
  } catch (const std::exception& e) {
    progress(std::string("default-scale training failed: ") + e.what());
  }

  if (uni) {
    const double model = uni->eval.model[0].miou, copy = uni->eval.copy_last[0].miou;
    report("4 baseline-beating",
           {model - copy >= 0.05 && uni->seconds < 1800.0,
            fmt("uni one-step mIoU %.2f vs copy-last %.2f (margin %.2f >= 5 points), training %.1f min (< 30)",
                100 * model, 100 * copy, 100 * (model - copy), uni->seconds / 60.0)});
  } else {
    report("4 baseline-beating", {false, "training did not complete"});
  }
  if (uni && none) {
    const double u = uni->eval.model[0].miou, n = none->eval.model[0].miou;
    report("5 recurrence-beating", {u >= n, fmt("uni %.2f >= fusion baseline %.2f mIoU", 100 * u, 100 * n)});
  } else {
    report("5 recurrence-beating", {false, "training did not complete"});
  }
  if (uni) {
    const auto& m = uni->eval.model;
    report("6 horizon degradation", {m[2].miou <= m[0].miou, fmt("mIoU h1 %.2f, h2 %.2f, h3 %.2f (h3 <= h1)", 100 * m[0].miou,
                                                                   100 * m[1].miou, 100 * m[2].miou)});
  } else {
    report("6 horizon degradation", {false, "training did not complete"});
  }

  guarded("7 bidirectional symmetry", bidirectional_symmetry);
  guarded("8 determinism and round trips", determinism_and_round_trips);
  if (uni) {
    const double init = uni->result.initial_loss;
    guarded("9 loss sanity", [&] { return loss_sanity(init); });
  } else {
    report("9 loss sanity", {false, "default-scale training did not complete"});
  }

  std::size_t failed = 0;
  for (const auto& [name, o] : rows) failed += o.pass ? 0 : 1;
  std::printf("%zu/%zu criteria passed\n", rows.size() - failed, rows.size());
  return failed == 0 ? 0 : 1;
}
