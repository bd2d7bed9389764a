#pragma once

#include "cmfactor/factor_analysis.hpp"
#include "cmfactor/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

// JSON artifacts: the panel metadata sidecar (enough to regenerate a panel
// and its uncoupled baseline), the factor-fit report, and the per-run
// manifest.  Schemas carry a schema_version field so future layout changes
// stay detectable.

namespace cmfactor::io {

struct PanelMeta {
  SimConfig config;
  bool stable = true;
  std::optional<int> truncated_at;
  std::uint64_t config_hash = 0;
};

void write_panel_meta_json(const std::filesystem::path& path, const SimConfig& cfg,
                           const ReturnPanel& panel);
PanelMeta read_panel_meta_json(const std::filesystem::path& path);

void write_factor_fit_json(const std::filesystem::path& path, const FactorFit& fit);

struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t base_seed = 0;
  std::string output_dir;
  std::string tool_version;
  std::string timestamp;  // UTC, ISO 8601
};

void write_manifest_json(const std::filesystem::path& path, const RunManifest& manifest);

// Current UTC time formatted as e.g. 2024-05-31T09:41:00Z.
std::string current_timestamp_utc();

}  // namespace cmfactor::io
