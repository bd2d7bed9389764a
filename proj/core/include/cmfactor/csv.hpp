#pragma once

#include "cmfactor/experiments.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// CSV readers and writers for every on-disk artifact.
//
// All floating-point values are written with the shortest decimal
// representation that round-trips exactly (std::to_chars), so rewriting the
// same results produces byte-identical files and reading them back loses
// nothing.  Optional fields are written as empty cells.

namespace cmfactor::io {

// Parse-level failure: carries the 1-based line number of the offending row.
struct CsvError : std::runtime_error {
  CsvError(const std::string& message, int line_number);
  int line = 0;
};

// Output-level failure (unopenable path, failed write).
struct IoError : std::runtime_error {
  explicit IoError(const std::string& message);
};

// Shortest round-trip decimal form of v.
std::string format_double(double v);
// Strict inverse: the whole field must parse.  Throws std::invalid_argument.
double parse_double(std::string_view field);

// Return panel: header "t,asset_0,...,asset_{K-1}", one row per period.
void write_panel_csv(const std::filesystem::path& path, const Eigen::MatrixXd& returns);
Eigen::MatrixXd read_panel_csv(const std::filesystem::path& path);

// Bare numeric matrix, one row per line (network dumps).
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& matrix);

// Factor scores: header "t,f_0,...,f_{M_hat-1}".
void write_factor_scores_csv(const std::filesystem::path& path,
                             const Eigen::MatrixXd& factors);

// Empirical daily-return series: header "date,return"; dates are carried as
// opaque strings.
struct EmpiricalSeries {
  std::vector<std::string> dates;
  std::vector<double> returns;
};
EmpiricalSeries read_empirical_csv(const std::filesystem::path& path);
void write_empirical_csv(const std::filesystem::path& path, const EmpiricalSeries& series);

// Sweep repetition records.  The first line is a "# sweep_config_hash=..."
// comment binding the file to the configuration that produced it; resuming
// against a different configuration is refused by the caller.
struct SweepRecordsFile {
  std::uint64_t config_hash = 0;
  std::vector<SweepRecord> records;
};
void write_sweep_records_csv(const std::filesystem::path& path,
                             const std::vector<SweepRecord>& records,
                             std::uint64_t config_hash);
SweepRecordsFile read_sweep_records_csv(const std::filesystem::path& path);
// Appends one record to an already-open stream-backed partial file.
std::string sweep_record_line(const SweepRecord& record);
std::string sweep_records_header(std::uint64_t config_hash);

void write_sweep_summary_csv(const std::filesystem::path& path,
                             const std::vector<EnsembleSummary>& summaries);

void write_calibration_csv(const std::filesystem::path& path,
                           const std::vector<CalibrationRow>& rows);

void write_moments_csv(const std::filesystem::path& path,
                       const std::vector<Moments>& samples);

}  // namespace cmfactor::io
