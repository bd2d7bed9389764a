#include "cmfactor/report_io.hpp"

#include "cmfactor/csv.hpp"  // IoError
#include "cmfactor/version.hpp"

#include <json.hpp>

#include <ctime>
#include <fstream>

namespace cmfactor::io {

namespace {

using nlohmann::json;

void write_json_file(const std::filesystem::path& path, const json& doc) {
  std::ofstream file(path);
  if (!file) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  file << doc.dump(2) << '\n';
  file.flush();
  if (!file.good()) {
    throw IoError("write to '" + path.string() + "' failed");
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) {
    throw IoError("cannot open '" + path.string() + "' for reading");
  }
  try {
    return json::parse(file);
  } catch (const json::parse_error& err) {
    throw IoError("invalid JSON in '" + path.string() + "': " + err.what());
  }
}

}  // namespace

void write_panel_meta_json(const std::filesystem::path& path, const SimConfig& cfg,
                           const ReturnPanel& panel) {
  json doc;
  doc["schema_version"] = 1;
  doc["map"] = {{"gamma", cfg.map.gamma}, {"r0", cfg.map.r0}, {"delta", cfg.map.delta}};
  doc["network"] = {{"m", cfg.net.m}, {"n", cfg.net.n}, {"seed", cfg.net.seed}};
  doc["sim"] = {{"epsilon", cfg.epsilon},
                {"steps", cfg.steps},
                {"burn_in", cfg.burn_in},
                {"seed", cfg.sim_seed},
                {"r_cap", cfg.r_cap}};
  doc["stable"] = panel.stable;
  if (panel.truncated_at) {
    doc["truncated_at"] = *panel.truncated_at;
  } else {
    doc["truncated_at"] = nullptr;
  }
  doc["config_hash"] = panel.config_hash;
  write_json_file(path, doc);
}

PanelMeta read_panel_meta_json(const std::filesystem::path& path) {
  const json doc = read_json_file(path);
  try {
    PanelMeta meta;
    meta.config.map.gamma = doc.at("map").at("gamma").get<double>();
    meta.config.map.r0 = doc.at("map").at("r0").get<double>();
    meta.config.map.delta = doc.at("map").at("delta").get<double>();
    meta.config.net.m = doc.at("network").at("m").get<int>();
    meta.config.net.n = doc.at("network").at("n").get<int>();
    meta.config.net.seed = doc.at("network").at("seed").get<std::uint64_t>();
    meta.config.epsilon = doc.at("sim").at("epsilon").get<double>();
    meta.config.steps = doc.at("sim").at("steps").get<int>();
    meta.config.burn_in = doc.at("sim").at("burn_in").get<int>();
    meta.config.sim_seed = doc.at("sim").at("seed").get<std::uint64_t>();
    meta.config.r_cap = doc.at("sim").at("r_cap").get<double>();
    meta.stable = doc.at("stable").get<bool>();
    if (!doc.at("truncated_at").is_null()) {
      meta.truncated_at = doc.at("truncated_at").get<int>();
    }
    meta.config_hash = doc.at("config_hash").get<std::uint64_t>();
    return meta;
  } catch (const json::exception& err) {
    throw IoError("panel metadata '" + path.string() + "' is malformed: " + err.what());
  }
}

void write_factor_fit_json(const std::filesystem::path& path, const FactorFit& fit) {
  json doc;
  doc["schema_version"] = 1;
  doc["m_hat"] = fit.m_hat;
  doc["n_periods"] = fit.residuals.rows();
  doc["n_assets"] = fit.residuals.cols();
  doc["explained_variance"] = fit.explained_variance;

  json entropy = json::array();
  for (const auto& h : fit.entropy) {
    if (h) {
      entropy.push_back(*h);
    } else {
      entropy.push_back(nullptr);
    }
  }
  doc["entropy"] = std::move(entropy);

  const auto matrix_to_json = [](const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  doc["loadings"] = matrix_to_json(fit.loadings);
  doc["weights"] = matrix_to_json(fit.weights);
  write_json_file(path, doc);
}

void write_manifest_json(const std::filesystem::path& path, const RunManifest& manifest) {
  json doc;
  doc["schema_version"] = 1;
  doc["command"] = manifest.command;
  doc["config_path"] = manifest.config_path;
  doc["base_seed"] = manifest.base_seed;
  doc["output_dir"] = manifest.output_dir;
  doc["tool_version"] = manifest.tool_version;
  doc["timestamp"] = manifest.timestamp;
  write_json_file(path, doc);
}

std::string current_timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

}  // namespace cmfactor::io
