#include "cmfactor/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace cmfactor::io {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream file(path);
  if (!file) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  return file;
}

void finish_write(std::ofstream& file, const std::filesystem::path& path) {
  file.flush();
  if (!file.good()) {
    throw IoError("write to '" + path.string() + "' failed");
  }
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) {
    throw IoError("cannot open '" + path.string() + "' for reading");
  }
  return file;
}

// Strips one trailing '\r' so files from CRLF environments still parse.
std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

int parse_int_field(std::string_view field, int line_number, const char* what) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw CsvError(std::string("invalid ") + what + " field '" + std::string(field) + "'",
                   line_number);
  }
  return value;
}

std::uint64_t parse_u64_field(std::string_view field, int line_number, const char* what) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw CsvError(std::string("invalid ") + what + " field '" + std::string(field) + "'",
                   line_number);
  }
  return value;
}

double parse_double_field(std::string_view field, int line_number, const char* what) {
  try {
    return parse_double(field);
  } catch (const std::invalid_argument&) {
    throw CsvError(std::string("invalid ") + what + " field '" + std::string(field) + "'",
                   line_number);
  }
}

std::optional<double> parse_optional_field(std::string_view field, int line_number,
                                           const char* what) {
  if (field.empty()) return std::nullopt;
  return parse_double_field(field, line_number, what);
}

std::string optional_cell(const std::optional<double>& value) {
  return value ? format_double(*value) : std::string();
}

}  // namespace

CsvError::CsvError(const std::string& message, int line_number)
    : std::runtime_error(message + " (line " + std::to_string(line_number) + ")"),
      line(line_number) {}

IoError::IoError(const std::string& message) : std::runtime_error(message) {}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) {
    throw std::invalid_argument("format_double: conversion failed");
  }
  return std::string(buf, ptr);
}

double parse_double(std::string_view field) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw std::invalid_argument("parse_double: invalid numeric field '" +
                                std::string(field) + "'");
  }
  return value;
}

void write_panel_csv(const std::filesystem::path& path, const Eigen::MatrixXd& returns) {
  std::ofstream file = open_for_write(path);
  file << 't';
  for (Eigen::Index k = 0; k < returns.cols(); ++k) file << ",asset_" << k;
  file << '\n';
  for (Eigen::Index t = 0; t < returns.rows(); ++t) {
    file << t;
    for (Eigen::Index k = 0; k < returns.cols(); ++k) {
      file << ',' << format_double(returns(t, k));
    }
    file << '\n';
  }
  finish_write(file, path);
}

Eigen::MatrixXd read_panel_csv(const std::filesystem::path& path) {
  std::ifstream file = open_for_read(path);
  std::string raw;
  if (!std::getline(file, raw)) {
    throw CsvError("panel file is empty", 1);
  }
  const std::string_view header = trim_cr(raw);
  const auto head_fields = split_fields(header);
  if (head_fields.size() < 2 || head_fields[0] != "t") {
    throw CsvError("expected header 't,asset_0,...'", 1);
  }
  for (std::size_t k = 1; k < head_fields.size(); ++k) {
    if (head_fields[k] != "asset_" + std::to_string(k - 1)) {
      throw CsvError("expected header column 'asset_" + std::to_string(k - 1) + "'", 1);
    }
  }
  const std::size_t n_assets = head_fields.size() - 1;

  std::vector<std::vector<double>> rows;
  int line_number = 1;
  while (std::getline(file, raw)) {
    ++line_number;
    const std::string_view line = trim_cr(raw);
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != n_assets + 1) {
      throw CsvError("expected " + std::to_string(n_assets + 1) + " fields, found " +
                         std::to_string(fields.size()),
                     line_number);
    }
    parse_int_field(fields[0], line_number, "period");
    std::vector<double> row(n_assets);
    for (std::size_t k = 0; k < n_assets; ++k) {
      row[k] = parse_double_field(fields[k + 1], line_number, "return");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw CsvError("panel file has no data rows", line_number);
  }
  Eigen::MatrixXd panel(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(n_assets));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t k = 0; k < n_assets; ++k) {
      panel(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = rows[t][k];
    }
  }
  return panel;
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& matrix) {
  std::ofstream file = open_for_write(path);
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      if (j > 0) file << ',';
      file << format_double(matrix(i, j));
    }
    file << '\n';
  }
  finish_write(file, path);
}

void write_factor_scores_csv(const std::filesystem::path& path,
                             const Eigen::MatrixXd& factors) {
  std::ofstream file = open_for_write(path);
  file << 't';
  for (Eigen::Index f = 0; f < factors.cols(); ++f) file << ",f_" << f;
  file << '\n';
  for (Eigen::Index t = 0; t < factors.rows(); ++t) {
    file << t;
    for (Eigen::Index f = 0; f < factors.cols(); ++f) {
      file << ',' << format_double(factors(t, f));
    }
    file << '\n';
  }
  finish_write(file, path);
}

EmpiricalSeries read_empirical_csv(const std::filesystem::path& path) {
  std::ifstream file = open_for_read(path);
  std::string raw;
  if (!std::getline(file, raw)) {
    throw CsvError("empirical file is empty", 1);
  }
  if (trim_cr(raw) != "date,return") {
    throw CsvError("expected header 'date,return'", 1);
  }
  EmpiricalSeries series;
  int line_number = 1;
  while (std::getline(file, raw)) {
    ++line_number;
    const std::string_view line = trim_cr(raw);
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 2) {
      throw CsvError("expected 2 fields, found " + std::to_string(fields.size()),
                     line_number);
    }
    if (fields[0].empty()) {
      throw CsvError("empty date field", line_number);
    }
    series.dates.emplace_back(fields[0]);
    series.returns.push_back(parse_double_field(fields[1], line_number, "return"));
  }
  if (series.returns.empty()) {
    throw CsvError("empirical file has no data rows", line_number);
  }
  return series;
}

void write_empirical_csv(const std::filesystem::path& path, const EmpiricalSeries& series) {
  if (series.dates.size() != series.returns.size()) {
    throw std::invalid_argument("write_empirical_csv: date and return counts differ");
  }
  std::ofstream file = open_for_write(path);
  file << "date,return\n";
  for (std::size_t i = 0; i < series.returns.size(); ++i) {
    file << series.dates[i] << ',' << format_double(series.returns[i]) << '\n';
  }
  finish_write(file, path);
}

std::string sweep_records_header(std::uint64_t config_hash) {
  std::ostringstream out;
  out << "# sweep_config_hash=" << config_hash << '\n'
      << "m,epsilon,rep,stable,m_hat,mean_entropy,entropy_sd,explained_variance,"
         "net_seed,sim_seed\n";
  return out.str();
}

std::string sweep_record_line(const SweepRecord& record) {
  std::ostringstream out;
  out << record.m << ',' << format_double(record.epsilon) << ',' << record.rep << ','
      << (record.stable ? 1 : 0) << ','
      << (record.m_hat ? std::to_string(*record.m_hat) : std::string()) << ','
      << optional_cell(record.mean_entropy) << ',' << optional_cell(record.entropy_sd)
      << ',' << optional_cell(record.explained_variance) << ',' << record.net_seed << ','
      << record.sim_seed << '\n';
  return out.str();
}

void write_sweep_records_csv(const std::filesystem::path& path,
                             const std::vector<SweepRecord>& records,
                             std::uint64_t config_hash) {
  std::ofstream file = open_for_write(path);
  file << sweep_records_header(config_hash);
  for (const SweepRecord& record : records) {
    file << sweep_record_line(record);
  }
  finish_write(file, path);
}

SweepRecordsFile read_sweep_records_csv(const std::filesystem::path& path) {
  std::ifstream file = open_for_read(path);
  SweepRecordsFile result;
  std::string raw;
  if (!std::getline(file, raw)) {
    throw CsvError("sweep records file is empty", 1);
  }
  const std::string_view first = trim_cr(raw);
  constexpr std::string_view prefix = "# sweep_config_hash=";
  if (first.substr(0, prefix.size()) != prefix) {
    throw CsvError("missing sweep_config_hash comment", 1);
  }
  result.config_hash = parse_u64_field(first.substr(prefix.size()), 1, "config hash");
  if (!std::getline(file, raw)) {
    throw CsvError("missing sweep records header", 2);
  }
  int line_number = 2;
  while (std::getline(file, raw)) {
    ++line_number;
    const std::string_view line = trim_cr(raw);
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 10) {
      throw CsvError("expected 10 fields, found " + std::to_string(fields.size()),
                     line_number);
    }
    SweepRecord record;
    record.m = parse_int_field(fields[0], line_number, "m");
    record.epsilon = parse_double_field(fields[1], line_number, "epsilon");
    record.rep = parse_int_field(fields[2], line_number, "rep");
    record.stable = parse_int_field(fields[3], line_number, "stable") != 0;
    if (!fields[4].empty()) {
      record.m_hat = parse_int_field(fields[4], line_number, "m_hat");
    }
    record.mean_entropy = parse_optional_field(fields[5], line_number, "mean_entropy");
    record.entropy_sd = parse_optional_field(fields[6], line_number, "entropy_sd");
    record.explained_variance =
        parse_optional_field(fields[7], line_number, "explained_variance");
    record.net_seed = parse_u64_field(fields[8], line_number, "net_seed");
    record.sim_seed = parse_u64_field(fields[9], line_number, "sim_seed");
    result.records.push_back(std::move(record));
  }
  return result;
}

void write_sweep_summary_csv(const std::filesystem::path& path,
                             const std::vector<EnsembleSummary>& summaries) {
  std::ofstream file = open_for_write(path);
  file << "m,epsilon,n_total,n_stable,n_entropy_defined,mu_mhat,sigma_mhat,"
          "mu_entropy,sigma_entropy,mean_explained_variance\n";
  for (const EnsembleSummary& s : summaries) {
    file << s.m << ',' << format_double(s.epsilon) << ',' << s.n_total << ','
         << s.n_stable << ',' << s.n_entropy_defined << ',' << optional_cell(s.mu_mhat)
         << ',' << optional_cell(s.sigma_mhat) << ',' << optional_cell(s.mu_entropy)
         << ',' << optional_cell(s.sigma_entropy) << ','
         << optional_cell(s.mean_explained_variance) << '\n';
  }
  finish_write(file, path);
}

void write_calibration_csv(const std::filesystem::path& path,
                           const std::vector<CalibrationRow>& rows) {
  std::ofstream file = open_for_write(path);
  file << "r0,gamma,delta,complete,mse,lb_pvalue,dw\n";
  for (const CalibrationRow& row : rows) {
    file << format_double(row.r0) << ',' << format_double(row.gamma) << ','
         << format_double(row.delta) << ',' << (row.complete ? 1 : 0) << ','
         << optional_cell(row.mse) << ',' << optional_cell(row.lb_pvalue) << ','
         << optional_cell(row.dw) << '\n';
  }
  finish_write(file, path);
}

void write_moments_csv(const std::filesystem::path& path,
                       const std::vector<Moments>& samples) {
  std::ofstream file = open_for_write(path);
  file << "series,mean,stddev,skewness,excess_kurtosis\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Moments& m = samples[i];
    file << i << ',' << format_double(m.mean) << ',' << format_double(m.stddev) << ','
         << optional_cell(m.skewness) << ',' << optional_cell(m.excess_kurtosis) << '\n';
  }
  finish_write(file, path);
}

}  // namespace cmfactor::io
