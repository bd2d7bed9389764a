#pragma once

#include "cmfactor/experiments.hpp"
#include "cmfactor/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

// INI-style run configuration.
//
// Sections mirror the library types field for field:
//
//   [map]          gamma, r0, delta
//   [network]      m, n, seed
//   [sim]          epsilon, t, burn_in, seed, r_cap
//   [sweep]        m_values, epsilon_grid, n_per_cluster, reps, t, burn_in,
//                  base_seed, n_baseline, r_cap, fix_network, mode
//   [calibration]  r0_start, r0_step, r0_count, gamma_start, gamma_step,
//                  gamma_count, gamma_stride, delta_values, lb_lags, r_cap, seed
//   [moments]      n_series, t, seed
//
// Every key is optional and defaults to the documented baseline values.
// Unknown sections and unknown keys are hard errors: a typo must fail the
// run, not silently fall back to a default.  List-valued keys accept either
// a comma list ("0.40,0.45,0.50") or a range "start:step:count" that is
// expanded by index.  Full-line comments start with '#' or ';'.

namespace cmfactor::io {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& message);
};

using IniSection = std::map<std::string, std::string>;

struct IniDoc {
  std::map<std::string, IniSection> sections;
};

// Parses and schema-checks the document (syntax, known sections, known
// keys, no duplicates).
IniDoc parse_ini(std::istream& input);
IniDoc parse_ini_file(const std::filesystem::path& path);

// Command-line values that take precedence over file contents.
struct CliOverrides {
  std::optional<std::uint64_t> seed;
};

// [map] + [network] + [sim]; --seed overrides the simulation seed.
SimConfig load_sim_config(const IniDoc& doc, const CliOverrides& overrides = {});

// [map] + [sweep]; --seed overrides the base seed.
SweepConfig load_sweep_config(const IniDoc& doc, const CliOverrides& overrides = {});

struct CalibrationSpec {
  CalibrationGrid grid;
  std::uint64_t seed = 0;
};
// [calibration]; --seed overrides the shared orbit seed.
CalibrationSpec load_calibration_spec(const IniDoc& doc,
                                      const CliOverrides& overrides = {});

struct MomentsSpec {
  LocalMapParams map;
  int n_series = 100;
  int steps = 1000;
  std::uint64_t seed = 0;
};
// [map] + [moments]; --seed overrides the study seed.
MomentsSpec load_moments_spec(const IniDoc& doc, const CliOverrides& overrides = {});

}  // namespace cmfactor::io
