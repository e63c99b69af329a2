#include "futureseg/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>

#include "binary_io.hpp"
#include "futureseg/checkpoint.hpp"
#include "futureseg/error.hpp"
#include "futureseg/gradcheck_suite.hpp"
#include "futureseg/predict.hpp"
#include "futureseg/run_config.hpp"
#include "futureseg/segv_io.hpp"
#include "futureseg/train.hpp"

namespace futureseg {

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::string out = "out";
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::string> mode;
  std::optional<std::size_t> horizon;
  std::optional<std::string> data;
  std::optional<std::string> checkpoint;
  std::optional<std::string> predictions;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "key = value config file");
  sub->add_option("--out", f.out, "output directory")->capture_default_str();
  sub->add_option("--set", f.sets, "override one setting, key=value (repeatable)");
  sub->add_option("--seed", f.seed, "random seed");
  sub->add_option("--epochs", f.epochs, "training epochs");
  sub->add_option("--mode", f.mode, "temporal module")->check(CLI::IsMember({"none", "uni", "bi"}));
  sub->add_option("--horizon", f.horizon, "rollout horizon");
  sub->add_option("--data", f.data, "SEGV file or directory holding train.segv/val.segv");
  sub->add_option("--checkpoint", f.checkpoint, "checkpoint file");
  sub->add_option("--predictions", f.predictions, "predicted SEGV file to score");
}

// File first, then --set overrides, then the dedicated flags.
RunConfig resolve(const Flags& f) {
  RunConfig rc;
  if (!f.config.empty()) rc.apply_file(f.config);
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("config: override '" + kv + "' is not key=value");
    rc.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed) rc.seed = *f.seed;
  if (f.epochs) rc.epochs = *f.epochs;
  if (f.mode) rc.mode = parse_lstm_mode(*f.mode);
  if (f.horizon) rc.horizon = *f.horizon;
  if (f.data) rc.data = *f.data;
  if (f.checkpoint) rc.checkpoint = *f.checkpoint;
  if (f.predictions) rc.predictions = *f.predictions;
  return rc;
}

fs::path prepare_out(const Flags& f, const RunConfig& rc) {
  const fs::path out = f.out;
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());
  detail::write_file(out / "resolved.cfg", rc.to_text());
  return out;
}

// `which` is "train" or "val". A directory resolves to <dir>/<which>.segv.
Dataset load_split(const RunConfig& rc, const std::string& which) {
  fs::path p = rc.data;
  if (fs::is_directory(p)) p /= which + ".segv";
  if (!fs::exists(p)) throw IoError("missing data file " + p.string());
  return read_segv(p);
}

Checkpoint load_checkpoint(const RunConfig& rc) {
  if (rc.checkpoint.empty()) throw ConfigError("config: a checkpoint is required (--checkpoint PATH)");
  if (!fs::exists(rc.checkpoint)) throw IoError("missing checkpoint file " + rc.checkpoint);
  return read_checkpoint(rc.checkpoint);
}

void check_compatible(const ModelConfig& m, const Dataset& ds) {
  if (ds.num_classes != m.num_classes || ds.height != m.height || ds.width != m.width) {
    throw ShapeError("checkpoint expects K=" + std::to_string(m.num_classes) + " " + std::to_string(m.height) +
                     "x" + std::to_string(m.width) + ", data is K=" + std::to_string(ds.num_classes) + " " +
                     std::to_string(ds.height) + "x" + std::to_string(ds.width));
  }
}

void print_side_by_side(std::ostream& out, const std::string& label, const std::vector<MetricsReport>& model,
                        const std::vector<MetricsReport>& copy_last) {
  out << "horizon  " << std::setw(12) << label << "  copy-last\n";
  out << std::fixed << std::setprecision(4);
  for (std::size_t h = 0; h < model.size(); ++h) {
    out << std::setw(7) << h + 1 << "  " << std::setw(12) << model[h].miou << "  " << copy_last[h].miou << "\n";
  }
  out << std::defaultfloat;
  for (std::size_t h = 0; h < model.size(); ++h) {
    out << "{\"horizon\":" << h + 1 << ",\"" << label << "\":" << to_json(model[h])
        << ",\"copy_last\":" << to_json(copy_last[h]) << "}\n";
  }
}

int run_generate(const RunConfig& rc, const fs::path& out_dir, std::ostream& out) {
  const Dataset train = generate_dataset(rc.train_generator());
  const Dataset val = generate_dataset(rc.val_generator());
  write_segv(out_dir / "train.segv", train);
  write_segv(out_dir / "val.segv", val);
  out << "wrote " << train.sequences.size() << " training and " << val.sequences.size()
      << " validation sequences to " << out_dir.string() << "\n";
  return 0;
}

int run_train(const RunConfig& rc, const fs::path& out_dir, std::ostream& out) {
  Dataset train_data, val_data;
  if (rc.data.empty()) {
    train_data = generate_dataset(rc.train_generator());
    val_data = generate_dataset(rc.val_generator());
  } else {
    if (!fs::is_directory(rc.data)) throw ConfigError("config: train needs a data directory with train.segv and val.segv");
    train_data = load_split(rc, "train");
    val_data = load_split(rc, "val");
  }
  std::ofstream log(out_dir / "metrics.jsonl", std::ios::binary | std::ios::trunc);
  if (!log) throw IoError("cannot write " + (out_dir / "metrics.jsonl").string());
  const TrainResult res = train(rc.training(), train_data, val_data, [&](const std::string& line) {
    log << line << "\n";
    log.flush();
    out << line << "\n";
  });
  write_checkpoint(out_dir / "checkpoint.fsck", res.best);
  out << "best epoch " << res.best_epoch << ", checkpoint written to " << (out_dir / "checkpoint.fsck").string()
      << "\n";
  return 0;
}

int run_eval(const RunConfig& rc, std::ostream& out) {
  if (rc.data.empty()) throw ConfigError("config: eval needs --data");
  const Dataset gts = load_split(rc, "val");
  if (!rc.predictions.empty()) {
    if (!fs::exists(rc.predictions)) throw IoError("missing predictions file " + rc.predictions);
    const Dataset preds = read_segv(rc.predictions);
    if (preds.sequences.size() != gts.sequences.size() || preds.height != gts.height || preds.width != gts.width) {
      throw ShapeError("predictions and ground truth differ in sequence count or frame size");
    }
    std::size_t horizon = rc.horizon;
    for (std::size_t s = 0; s < gts.sequences.size(); ++s) {
      const std::size_t t = std::min(preds.sequences[s].frames.size(), gts.sequences[s].frames.size());
      if (t <= kSequenceLength) throw ShapeError("sequence " + std::to_string(s) + " has no frame past the inputs");
      horizon = std::min(horizon, t - kSequenceLength);
    }
    const std::size_t k = std::max(preds.num_classes, gts.num_classes);
    std::vector<MetricsReport> model, copy_last;
    for (std::size_t h = 1; h <= horizon; ++h) {
      IouAccumulator acc(k), base(k);
      for (std::size_t s = 0; s < gts.sequences.size(); ++s) {
        const auto& g = gts.sequences[s].frames;
        acc.add(preds.sequences[s].frames[kSequenceLength - 1 + h], g[kSequenceLength - 1 + h]);
        base.add(g[kSequenceLength - 1], g[kSequenceLength - 1 + h]);
      }
      model.push_back(acc.report());
      copy_last.push_back(base.report());
    }
    print_side_by_side(out, "predictions", model, copy_last);
    return 0;
  }
  const Model model = Model::from_checkpoint(load_checkpoint(rc));
  check_compatible(model.config, gts);
  const EvalReport rep = evaluate_model(model, gts, rc.horizon, evaluation_threads());
  print_side_by_side(out, "model", rep.model, rep.copy_last);
  return 0;
}

int run_predict(const RunConfig& rc, const fs::path& out_dir, std::ostream& out) {
  if (rc.data.empty()) throw ConfigError("config: predict needs --data");
  const Dataset inputs = load_split(rc, "val");
  const Model model = Model::from_checkpoint(load_checkpoint(rc));
  check_compatible(model.config, inputs);
  std::vector<std::vector<SegMap>> windows;
  for (std::size_t s = 0; s < inputs.sequences.size(); ++s) {
    const auto& fr = inputs.sequences[s].frames;
    if (fr.size() < kSequenceLength) {
      throw ShapeError("sequence " + std::to_string(s) + " has fewer than 4 frames");
    }
    windows.emplace_back(fr.begin(), fr.begin() + kSequenceLength);
  }
  const auto rolled = rollout_batch(model, windows, rc.horizon);
  Dataset pred{inputs.num_classes, inputs.height, inputs.width, {}};
  for (std::size_t s = 0; s < windows.size(); ++s) {
    SegSequence seq;
    seq.frames = windows[s];
    seq.frames.insert(seq.frames.end(), rolled[s].begin(), rolled[s].end());
    pred.sequences.push_back(std::move(seq));
  }
  write_segv(out_dir / "predictions.segv", pred);
  out << "wrote " << pred.sequences.size() << " predicted sequences (4 inputs + " << rc.horizon << " frames) to "
      << (out_dir / "predictions.segv").string() << "\n";
  return 0;
}

int run_gradcheck(const RunConfig& rc, std::ostream& out) {
  const auto results = run_gradcheck_suite(rc.seed);
  bool ok = true;
  for (const auto& r : results) {
    out << (r.passed() ? "ok    " : "FAIL  ") << std::left << std::setw(40) << r.name << std::right
        << " max rel err " << std::scientific << std::setprecision(3) << r.max_rel_error << " (tol "
        << r.tolerance << ", " << std::defaultfloat << r.elements << " entries)\n";
    ok = ok && r.passed();
  }
  return ok ? 0 : 1;
}

const char* kind_of(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const BadMagicError*>(&e)) return "bad-magic";
  if (dynamic_cast<const BadVersionError*>(&e)) return "bad-version";
  if (dynamic_cast<const TruncatedError*>(&e)) return "truncated";
  if (dynamic_cast<const FormatError*>(&e)) return "format";
  if (dynamic_cast<const IoError*>(&e)) return "io";
  if (dynamic_cast<const ShapeError*>(&e)) return "shape";
  if (dynamic_cast<const ClassRangeError*>(&e)) return "class-range";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric";
  return "error";
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Future semantic segmentation with convolutional LSTMs", "futureseg"};
  app.require_subcommand(1);
  Flags flags;
  std::string chosen;
  for (const char* name : {"generate", "train", "eval", "predict", "gradcheck"}) {
    static const std::map<std::string, std::string> help = {
        {"generate", "write synthetic train.segv and val.segv"},
        {"train", "train a model, writing checkpoint.fsck and metrics.jsonl"},
        {"eval", "score a checkpoint (or a predictions file) against copy-last"},
        {"predict", "roll a checkpoint forward and write predictions.segv"},
        {"gradcheck", "compare analytic and finite-difference gradients"},
    };
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    add_common(sub, flags);
    sub->callback([&chosen, name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    const RunConfig rc = resolve(flags);
    const fs::path out_dir = prepare_out(flags, rc);
    if (chosen == "generate") return run_generate(rc, out_dir, out);
    if (chosen == "train") return run_train(rc, out_dir, out);
    if (chosen == "eval") return run_eval(rc, out);
    if (chosen == "predict") return run_predict(rc, out_dir, out);
    return run_gradcheck(rc, out);
  } catch (const ConfigError& e) {
    err << "error [config]: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error [" << kind_of(e) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace futureseg
