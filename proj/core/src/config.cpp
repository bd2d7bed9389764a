#include "cmfactor/config.hpp"

#include "cmfactor/csv.hpp"  // parse_double

#include <charconv>
#include <fstream>
#include <set>

namespace cmfactor::io {

namespace {

const std::map<std::string, std::set<std::string>>& known_schema() {
  static const std::map<std::string, std::set<std::string>> schema = {
      {"map", {"gamma", "r0", "delta"}},
      {"network", {"m", "n", "seed"}},
      {"sim", {"epsilon", "t", "burn_in", "seed", "r_cap"}},
      {"sweep",
       {"m_values", "epsilon_grid", "n_per_cluster", "reps", "t", "burn_in",
        "base_seed", "n_baseline", "r_cap", "fix_network", "mode"}},
      {"calibration",
       {"r0_start", "r0_step", "r0_count", "gamma_start", "gamma_step", "gamma_count",
        "gamma_stride", "delta_values", "lb_lags", "r_cap", "seed"}},
      {"moments", {"n_series", "t", "seed"}},
  };
  return schema;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

[[noreturn]] void fail(const std::string& message) { throw ConfigError(message); }

// Typed accessors over one section; every getter falls back to the default
// when the key is absent.

class SectionView {
 public:
  SectionView(const IniDoc& doc, const std::string& name) : name_(name) {
    const auto it = doc.sections.find(name);
    section_ = (it != doc.sections.end()) ? &it->second : nullptr;
  }

  const std::string* raw(const std::string& key) const {
    if (section_ == nullptr) return nullptr;
    const auto it = section_->find(key);
    return (it != section_->end()) ? &it->second : nullptr;
  }

  double number(const std::string& key, double fallback) const {
    const std::string* value = raw(key);
    if (value == nullptr) return fallback;
    try {
      return parse_double(*value);
    } catch (const std::invalid_argument&) {
      fail(context(key) + ": expected a number, got '" + *value + "'");
    }
  }

  int integer(const std::string& key, int fallback) const {
    const std::string* value = raw(key);
    if (value == nullptr) return fallback;
    int out = 0;
    const auto* begin = value->data();
    const auto* end = begin + value->size();
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end) {
      fail(context(key) + ": expected an integer, got '" + *value + "'");
    }
    return out;
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) const {
    const std::string* value = raw(key);
    if (value == nullptr) return fallback;
    std::uint64_t out = 0;
    const auto* begin = value->data();
    const auto* end = begin + value->size();
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end) {
      fail(context(key) + ": expected an unsigned integer, got '" + *value + "'");
    }
    return out;
  }

  bool boolean(const std::string& key, bool fallback) const {
    const std::string* value = raw(key);
    if (value == nullptr) return fallback;
    if (*value == "true" || *value == "1" || *value == "yes") return true;
    if (*value == "false" || *value == "0" || *value == "no") return false;
    fail(context(key) + ": expected true/false, got '" + *value + "'");
  }

  // "a,b,c" or "start:step:count"; the range form is expanded by index.
  std::vector<double> number_list(const std::string& key,
                                  std::vector<double> fallback) const {
    const std::string* value = raw(key);
    if (value == nullptr) return fallback;
    const std::string_view text = trim(*value);
    if (text.empty()) fail(context(key) + ": empty list");
    std::vector<double> out;
    if (text.find(':') != std::string_view::npos) {
      const auto first = text.find(':');
      const auto second = text.find(':', first + 1);
      if (second == std::string_view::npos || text.find(':', second + 1) != std::string_view::npos) {
        fail(context(key) + ": range form is start:step:count");
      }
      double start = 0.0, step = 0.0;
      long count = 0;
      try {
        start = parse_double(trim(text.substr(0, first)));
        step = parse_double(trim(text.substr(first + 1, second - first - 1)));
      } catch (const std::invalid_argument&) {
        fail(context(key) + ": invalid range bound");
      }
      const std::string_view count_text = trim(text.substr(second + 1));
      const auto [ptr, ec] =
          std::from_chars(count_text.data(), count_text.data() + count_text.size(), count);
      if (ec != std::errc() || ptr != count_text.data() + count_text.size() || count < 1) {
        fail(context(key) + ": range count must be a positive integer");
      }
      out.reserve(static_cast<std::size_t>(count));
      for (long i = 0; i < count; ++i) out.push_back(start + step * static_cast<double>(i));
      return out;
    }
    std::size_t pos = 0;
    const std::string text_owned(text);
    while (pos <= text_owned.size()) {
      const std::size_t comma = text_owned.find(',', pos);
      const std::string_view item =
          trim(std::string_view(text_owned).substr(pos, comma == std::string::npos
                                                             ? std::string::npos
                                                             : comma - pos));
      try {
        out.push_back(parse_double(item));
      } catch (const std::invalid_argument&) {
        fail(context(key) + ": invalid list entry '" + std::string(item) + "'");
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return out;
  }

  std::vector<int> integer_list(const std::string& key, std::vector<int> fallback) const {
    const std::string* value = raw(key);
    if (value == nullptr) return fallback;
    const std::vector<double> numbers = number_list(key, {});
    std::vector<int> out;
    out.reserve(numbers.size());
    for (double v : numbers) {
      const int i = static_cast<int>(v);
      if (static_cast<double>(i) != v) {
        fail(context(key) + ": expected integers");
      }
      out.push_back(i);
    }
    return out;
  }

  std::string text(const std::string& key, std::string fallback) const {
    const std::string* value = raw(key);
    return (value != nullptr) ? *value : fallback;
  }

 private:
  std::string context(const std::string& key) const { return "[" + name_ + "] " + key; }

  std::string name_;
  const IniSection* section_ = nullptr;
};

}  // namespace

ConfigError::ConfigError(const std::string& message)
    : std::runtime_error("config error: " + message) {}

IniDoc parse_ini(std::istream& input) {
  IniDoc doc;
  std::string raw;
  std::string current;
  int line_number = 0;
  while (std::getline(input, raw)) {
    ++line_number;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        fail("line " + std::to_string(line_number) + ": unterminated section header");
      }
      current = std::string(trim(line.substr(1, line.size() - 2)));
      if (current.empty()) {
        fail("line " + std::to_string(line_number) + ": empty section name");
      }
      if (known_schema().count(current) == 0) {
        fail("line " + std::to_string(line_number) + ": unknown section [" + current + "]");
      }
      doc.sections[current];  // register even when empty
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail("line " + std::to_string(line_number) + ": expected 'key = value'");
    }
    if (current.empty()) {
      fail("line " + std::to_string(line_number) + ": key outside any section");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) {
      fail("line " + std::to_string(line_number) + ": empty key");
    }
    if (known_schema().at(current).count(key) == 0) {
      fail("line " + std::to_string(line_number) + ": unknown key '" + key +
           "' in section [" + current + "]");
    }
    if (!doc.sections[current].emplace(key, value).second) {
      fail("line " + std::to_string(line_number) + ": duplicate key '" + key +
           "' in section [" + current + "]");
    }
  }
  return doc;
}

IniDoc parse_ini_file(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) {
    fail("cannot open '" + path.string() + "'");
  }
  return parse_ini(file);
}

SimConfig load_sim_config(const IniDoc& doc, const CliOverrides& overrides) {
  const SectionView map(doc, "map");
  const SectionView network(doc, "network");
  const SectionView sim(doc, "sim");

  SimConfig cfg;
  cfg.map.gamma = map.number("gamma", cfg.map.gamma);
  cfg.map.r0 = map.number("r0", cfg.map.r0);
  cfg.map.delta = map.number("delta", cfg.map.delta);
  cfg.net.m = network.integer("m", cfg.net.m);
  cfg.net.n = network.integer("n", cfg.net.n);
  cfg.net.seed = network.seed("seed", cfg.net.seed);
  cfg.epsilon = sim.number("epsilon", cfg.epsilon);
  cfg.steps = sim.integer("t", cfg.steps);
  cfg.burn_in = sim.integer("burn_in", cfg.burn_in);
  cfg.sim_seed = sim.seed("seed", cfg.sim_seed);
  cfg.r_cap = sim.number("r_cap", cfg.r_cap);
  if (overrides.seed) cfg.sim_seed = *overrides.seed;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& err) {
    fail(err.what());
  }
  return cfg;
}

SweepConfig load_sweep_config(const IniDoc& doc, const CliOverrides& overrides) {
  const SectionView map(doc, "map");
  const SectionView sweep(doc, "sweep");

  SweepConfig cfg;
  cfg.map.gamma = map.number("gamma", cfg.map.gamma);
  cfg.map.r0 = map.number("r0", cfg.map.r0);
  cfg.map.delta = map.number("delta", cfg.map.delta);
  cfg.m_values = sweep.integer_list("m_values", cfg.m_values);
  cfg.epsilon_grid = sweep.number_list("epsilon_grid", cfg.epsilon_grid);
  cfg.n_per_cluster = sweep.integer("n_per_cluster", cfg.n_per_cluster);
  cfg.reps = sweep.integer("reps", cfg.reps);
  cfg.steps = sweep.integer("t", cfg.steps);
  cfg.burn_in = sweep.integer("burn_in", cfg.burn_in);
  cfg.base_seed = sweep.seed("base_seed", cfg.base_seed);
  cfg.n_baseline = sweep.integer("n_baseline", cfg.n_baseline);
  cfg.r_cap = sweep.number("r_cap", cfg.r_cap);
  cfg.fix_network = sweep.boolean("fix_network", cfg.fix_network);
  const std::string mode = sweep.text("mode", "raw_count");
  if (mode == "raw_count") {
    cfg.mode = DetectionMode::raw_count;
  } else if (mode == "leading_run") {
    cfg.mode = DetectionMode::leading_run;
  } else {
    fail("[sweep] mode: expected raw_count or leading_run, got '" + mode + "'");
  }
  if (overrides.seed) cfg.base_seed = *overrides.seed;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& err) {
    fail(err.what());
  }
  return cfg;
}

CalibrationSpec load_calibration_spec(const IniDoc& doc, const CliOverrides& overrides) {
  const SectionView section(doc, "calibration");

  CalibrationSpec spec;
  spec.grid.r0_start = section.number("r0_start", spec.grid.r0_start);
  spec.grid.r0_step = section.number("r0_step", spec.grid.r0_step);
  spec.grid.r0_count = section.integer("r0_count", spec.grid.r0_count);
  spec.grid.gamma_start = section.number("gamma_start", spec.grid.gamma_start);
  spec.grid.gamma_step = section.number("gamma_step", spec.grid.gamma_step);
  spec.grid.gamma_count = section.integer("gamma_count", spec.grid.gamma_count);
  spec.grid.gamma_stride = section.integer("gamma_stride", spec.grid.gamma_stride);
  spec.grid.delta_values = section.number_list("delta_values", spec.grid.delta_values);
  spec.grid.lb_lags = section.integer("lb_lags", spec.grid.lb_lags);
  spec.grid.r_cap = section.number("r_cap", spec.grid.r_cap);
  spec.seed = section.seed("seed", spec.seed);
  if (overrides.seed) spec.seed = *overrides.seed;
  try {
    spec.grid.validate();
  } catch (const std::invalid_argument& err) {
    fail(err.what());
  }
  return spec;
}

MomentsSpec load_moments_spec(const IniDoc& doc, const CliOverrides& overrides) {
  const SectionView map(doc, "map");
  const SectionView moments(doc, "moments");

  MomentsSpec spec;
  spec.map.gamma = map.number("gamma", spec.map.gamma);
  spec.map.r0 = map.number("r0", spec.map.r0);
  spec.map.delta = map.number("delta", spec.map.delta);
  spec.n_series = moments.integer("n_series", spec.n_series);
  spec.steps = moments.integer("t", spec.steps);
  spec.seed = moments.seed("seed", spec.seed);
  if (overrides.seed) spec.seed = *overrides.seed;
  try {
    spec.map.validate();
  } catch (const std::invalid_argument& err) {
    fail(err.what());
  }
  if (spec.n_series < 100) {
    fail("[moments] n_series: must be at least 100");
  }
  if (spec.steps < 2) {
    fail("[moments] t: must be at least 2");
  }
  return spec;
}

}  // namespace cmfactor::io
