#include "chrono_shield/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "chrono_shield/error.hpp"

namespace chrono_shield {

namespace {

struct Entry {
  ConfigKey key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument("not a number: " + v);
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("not a boolean: " + v);
}

// Shortest text that parses back to the same double.
std::string fmt(double d) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string fmt_int(T v) {
  return std::to_string(v);
}

#define CS_INT(NAME, DOC, FIELD)                                                                          \
  Entry {                                                                                                 \
    {NAME, DOC}, [](ExperimentConfig& c, const std::string& v) { c.FIELD = parse_number<int>(v); },       \
        [](const ExperimentConfig& c) { return fmt_int(c.FIELD); }                                        \
  }
#define CS_DOUBLE(NAME, DOC, FIELD)                                                                       \
  Entry {                                                                                                 \
    {NAME, DOC}, [](ExperimentConfig& c, const std::string& v) { c.FIELD = parse_number<double>(v); },    \
        [](const ExperimentConfig& c) { return fmt(c.FIELD); }                                            \
  }
#define CS_BOOL(NAME, DOC, FIELD)                                                                         \
  Entry {                                                                                                 \
    {NAME, DOC}, [](ExperimentConfig& c, const std::string& v) { c.FIELD = parse_bool(v); },              \
        [](const ExperimentConfig& c) { return std::string(c.FIELD ? "true" : "false"); }                 \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      Entry{{"seed", "master seed; derives the corpus, training and attack seeds"},
            [](ExperimentConfig& c, const std::string& v) { c.apply_seed(parse_number<std::uint64_t>(v)); },
            [](const ExperimentConfig& c) { return fmt_int(c.seed); }},
      CS_INT("synth.train_per_class", "training renders per class", synth.train_per_class),
      CS_INT("synth.test_per_class", "test renders per class", synth.test_per_class),
      CS_INT("synth.image_side", "rendered image side in pixels", synth.image_side),
      CS_INT("model.input_side", "classifier input side (multiple of 8)", train.arch.input_side),
      CS_INT("model.conv1_channels", "first conv stage width", train.arch.conv_channels[0]),
      CS_INT("model.conv2_channels", "second conv stage width", train.arch.conv_channels[1]),
      CS_INT("model.conv3_channels", "third conv stage width", train.arch.conv_channels[2]),
      CS_INT("train.epochs", "SGD epochs", train.epochs),
      CS_DOUBLE("train.learning_rate", "SGD step size", train.learning_rate),
      CS_DOUBLE("train.momentum", "SGD momentum", train.momentum),
      CS_INT("train.batch_size", "minibatch size", train.batch_size),
      CS_INT("attack.swarm_size", "PSO particles", attack.pso.swarm_size),
      CS_INT("attack.iterations", "PSO iterations, counting the initial evaluation", attack.pso.iterations),
      CS_DOUBLE("attack.inertia", "PSO inertia weight w", attack.pso.inertia),
      CS_DOUBLE("attack.cognitive", "PSO personal-best weight c1", attack.pso.cognitive),
      CS_DOUBLE("attack.social", "PSO global-best weight c2", attack.pso.social),
      CS_DOUBLE("attack.max_velocity", "PSO per-coordinate speed limit, <= 0 disables", attack.pso.max_velocity),
      CS_INT("attack.pso_workers", "threads evaluating one swarm", attack.pso.workers),
      CS_INT("attack.vertices", "shadow polygon vertex count", attack.vertices),
      CS_DOUBLE("attack.darkening", "shadow intensity factor in (0, 1]", attack.darkening),
      CS_BOOL("attack.early_stop", "stop once the global best flips the label", attack.early_stop),
      Entry{{"attack.fitness", "probability (p[true]) or margin (p[true] - best other)"},
            [](ExperimentConfig& c, const std::string& v) {
              if (v == "probability") {
                c.attack.fitness = AttackFitness::true_class_probability;
              } else if (v == "margin") {
                c.attack.fitness = AttackFitness::margin;
              } else {
                throw std::invalid_argument("fitness must be probability or margin");
              }
            },
            [](const ExperimentConfig& c) {
              return std::string(c.attack.fitness == AttackFitness::margin ? "margin" : "probability");
            }},
      CS_INT("sweep.attack_workers", "images attacked concurrently", attack_workers),
      CS_DOUBLE("mask.sigma", "Gaussian blur sigma", mask.sigma),
      CS_INT("mask.blur_radius", "Gaussian kernel half width", mask.blur_radius),
      CS_DOUBLE("mask.canny_low", "Canny low threshold", mask.canny_low),
      CS_DOUBLE("mask.canny_high", "Canny high threshold", mask.canny_high),
      CS_INT("mask.dilate_half", "edge dilation half width", mask.dilate_half),
      CS_INT("mask.close_half", "closing half width", mask.close_half),
      CS_DOUBLE("mask.min_area_fraction", "smallest contour kept, as a fraction of the image", mask.min_area_fraction),
      Entry{{"mask.shrink_half", "erosion after filling; 'auto' uses mask.dilate_half"},
            [](ExperimentConfig& c, const std::string& v) {
              if (v == "auto") {
                c.mask.shrink_half.reset();
              } else {
                c.mask.shrink_half = parse_number<int>(v);
              }
            },
            [](const ExperimentConfig& c) {
              return c.mask.shrink_half ? fmt_int(*c.mask.shrink_half) : std::string("auto");
            }},
      CS_BOOL("mask.refine_boundary", "reassign edge pixels by local gray level", mask.refine_boundary),
      Entry{{"vote.min_history", "historical votes needed before no warning is raised"},
            [](ExperimentConfig& c, const std::string& v) { c.vote.min_history = parse_number<std::size_t>(v); },
            [](const ExperimentConfig& c) { return fmt_int(c.vote.min_history); }},
      CS_DOUBLE("vote.change_threshold", "current-image confidence that flags a possible sign change",
                vote.change_threshold),
      CS_DOUBLE("history.radius_m", "match radius around the sign in meters", match.radius_m),
      CS_DOUBLE("history.heading_tolerance_deg", "camera heading tolerance in degrees", match.heading_tolerance_deg),
      CS_INT("history.per_sign", "historical captures archived and requested per sign", history_per_sign),
      Entry{{"history.current_date", "date of the current capture; history must predate it"},
            [](ExperimentConfig& c, const std::string& v) { c.current_date = Date::parse(v); },
            [](const ExperimentConfig& c) { return c.current_date.iso(); }},
      CS_BOOL("baseline.enabled", "train and evaluate the adversarial-training baseline", adversarial_baseline),
  };
  return table;
}

#undef CS_INT
#undef CS_DOUBLE
#undef CS_BOOL

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& e : entries()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

void apply_config(ExperimentConfig& config, std::string_view text) {
  std::vector<std::pair<int, std::pair<std::string, std::string>>> pairs;
  std::istringstream in{std::string(text)};
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      raise(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": expected key = value");
    }
    pairs.push_back({line_no, {trim(t.substr(0, eq)), trim(t.substr(eq + 1))}});
  }
  // The seed fans out into several fields, so it goes first.
  std::stable_partition(pairs.begin(), pairs.end(), [](const auto& p) { return p.second.first == "seed"; });
  for (const auto& [no, kv] : pairs) {
    const auto& [key, value] = kv;
    const auto& table = entries();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Entry& e) { return e.key.name == key; });
    if (it == table.end()) raise(ErrorCode::InvalidConfig, "line " + std::to_string(no) + ": unknown key '" + key + "'");
    try {
      it->set(config, value);
    } catch (const std::exception& e) {
      raise(ErrorCode::InvalidConfig, "line " + std::to_string(no) + ": " + key + ": " + e.what());
    }
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::InvalidConfig, "cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  ExperimentConfig config;
  apply_config(config, text.str());
  return config;
}

std::string dump_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& e : entries()) {
    out += "# " + std::string(e.key.description) + "\n";
    out += std::string(e.key.name) + " = " + e.get(config) + "\n";
  }
  return out;
}

}  // namespace chrono_shield
