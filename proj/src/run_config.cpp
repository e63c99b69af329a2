#include "futureseg/run_config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "binary_io.hpp"
#include "futureseg/error.hpp"
#include "futureseg/rng.hpp"

namespace futureseg {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config: '" + std::string(key) + "' expects an integer, got '" + std::string(v) + "'");
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(std::string(v), &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + std::string(key) + "' expects a number, got '" + std::string(v) + "'");
  }
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: '" + std::string(key) + "' expects true/false, got '" + std::string(v) + "'");
}

std::string format_double(double d) {
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view raw) {
  const std::string_view v = trim(raw);
  auto size = [&](std::size_t& field) { field = parse_int<std::size_t>(key, v); };
  const std::map<std::string_view, std::function<void()>> setters = {
      {"train_sequences", [&] { size(train_sequences); }},
      {"val_sequences", [&] { size(val_sequences); }},
      {"frames", [&] { size(frames); }},
      {"shapes", [&] { size(shapes); }},
      {"min_size", [&] { size(min_size); }},
      {"max_size", [&] { size(max_size); }},
      {"max_speed", [&] { max_speed = parse_int<int>(key, v); }},
      {"shape_kinds", [&] { shape_kinds = std::string(v); }},
      {"num_classes", [&] { size(num_classes); }},
      {"height", [&] { size(height); }},
      {"width", [&] { size(width); }},
      {"widths",
       [&] {
         std::array<std::size_t, 4> w{};
         std::size_t i = 0;
         std::string_view rest = v;
         while (true) {
           const auto comma = rest.find(',');
           if (i == 4) throw ConfigError("config: 'widths' expects 4 comma-separated integers");
           w[i++] = parse_int<std::size_t>(key, trim(rest.substr(0, comma)));
           if (comma == std::string_view::npos) break;
           rest = rest.substr(comma + 1);
         }
         if (i != 4) throw ConfigError("config: 'widths' expects 4 comma-separated integers");
         widths = w;
       }},
      {"mode", [&] { mode = parse_lstm_mode(v); }},
      {"share_directions", [&] { share_directions = parse_bool(key, v); }},
      {"seed", [&] { seed = parse_int<std::uint64_t>(key, v); }},
      {"epochs", [&] { size(epochs); }},
      {"batch_size", [&] { size(batch_size); }},
      {"lr", [&] { lr = parse_double(key, v); }},
      {"beta1", [&] { beta1 = parse_double(key, v); }},
      {"beta2", [&] { beta2 = parse_double(key, v); }},
      {"adam_eps", [&] { adam_eps = parse_double(key, v); }},
      {"augment", [&] { augment = parse_bool(key, v); }},
      {"horizon", [&] { size(horizon); }},
      {"data", [&] { data = std::string(v); }},
      {"checkpoint", [&] { checkpoint = std::string(v); }},
      {"predictions", [&] { predictions = std::string(v); }},
  };
  const auto it = setters.find(trim(key));
  if (it == setters.end()) throw ConfigError("config: unknown key '" + std::string(key) + "'");
  it->second();
}

void RunConfig::apply_text(std::string_view text, std::string_view origin) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config: " + std::string(origin) + ":" + std::to_string(line_no) +
                        ": expected key = value, got '" + std::string(line) + "'");
    }
    set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::string text;
  try {
    text = detail::read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  apply_text(text, path.string());
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "# resolved run configuration\n";
  os << "train_sequences = " << train_sequences << "\n";
  os << "val_sequences = " << val_sequences << "\n";
  os << "frames = " << frames << "\n";
  os << "shapes = " << shapes << "\n";
  os << "min_size = " << min_size << "\n";
  os << "max_size = " << max_size << "\n";
  os << "max_speed = " << max_speed << "\n";
  os << "shape_kinds = " << shape_kinds << "\n";
  os << "num_classes = " << num_classes << "\n";
  os << "height = " << height << "\n";
  os << "width = " << width << "\n";
  os << "widths = " << widths[0] << "," << widths[1] << "," << widths[2] << "," << widths[3] << "\n";
  os << "mode = " << to_string(mode) << "\n";
  os << "share_directions = " << (share_directions ? "true" : "false") << "\n";
  os << "seed = " << seed << "\n";
  os << "epochs = " << epochs << "\n";
  os << "batch_size = " << batch_size << "\n";
  os << "lr = " << format_double(lr) << "\n";
  os << "beta1 = " << format_double(beta1) << "\n";
  os << "beta2 = " << format_double(beta2) << "\n";
  os << "adam_eps = " << format_double(adam_eps) << "\n";
  os << "augment = " << (augment ? "true" : "false") << "\n";
  os << "horizon = " << horizon << "\n";
  if (!data.empty()) os << "data = " << data << "\n";
  if (!checkpoint.empty()) os << "checkpoint = " << checkpoint << "\n";
  if (!predictions.empty()) os << "predictions = " << predictions << "\n";
  return os.str();
}

GenConfig RunConfig::train_generator() const {
  GenConfig g;
  g.height = height;
  g.width = width;
  g.num_classes = num_classes;
  g.shapes_per_sequence = shapes;
  g.min_size = min_size;
  g.max_size = max_size;
  g.max_speed = max_speed;
  g.rectangles = shape_kinds.find("rectangle") != std::string::npos;
  g.discs = shape_kinds.find("disc") != std::string::npos;
  g.sequence_count = train_sequences;
  g.frames = frames;
  g.seed = seed;
  return g;
}

GenConfig RunConfig::val_generator() const {
  GenConfig g = train_generator();
  g.sequence_count = val_sequences;
  g.seed = mix_seed(seed, 0x7A1);
  return g;
}

ModelConfig RunConfig::model() const {
  ModelConfig m;
  m.num_classes = num_classes;
  m.height = height;
  m.width = width;
  m.widths = widths;
  m.mode = mode;
  m.share_directions = share_directions;
  return m;
}

TrainConfig RunConfig::training() const {
  TrainConfig t;
  t.model = model();
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.adam = AdamConfig{lr, beta1, beta2, adam_eps};
  t.seed = seed;
  t.augment = augment;
  t.horizon = horizon;
  return t;
}

}  // namespace futureseg
