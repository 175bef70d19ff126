#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "ridgepred/estimators.hpp"
#include "ridgepred/simulation.hpp"

namespace ridgepred {

// Dense binary matrix: the 8 bytes "RDGMAT01", uint64 rows, uint64 cols, then
// rows * cols little-endian float64 values in row-major order.
void write_matrix_binary(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_binary(const std::filesystem::path& path);

// One real per line; blank lines and lines starting with '#' are skipped.
std::vector<double> read_reals_text(const std::filesystem::path& path);
void write_reals_text(const std::filesystem::path& path, const std::vector<double>& values);

// Per-study marginal coefficients.  First line: the k study sample sizes,
// optionally preceded by the word "n".  Then p lines of k coefficients.
std::vector<StudySummary> read_summary_panel(const std::filesystem::path& path);
void write_summary_panel(const std::filesystem::path& path, const std::vector<StudySummary>& s);

// Shortest decimal text that parses back to the same double ("nan", "inf" allowed).
std::string format_double(double v);
double parse_double(const std::string& text);

struct SeriesPoint {
  std::string series;
  double x = 0.0;
  double y = 0.0;
  double y_se = 0.0;
};

// Long-format table with header "series,x,y,y_se".
void write_series_csv(const std::filesystem::path& path, const std::vector<SeriesPoint>& pts);
std::vector<SeriesPoint> read_series_csv(const std::filesystem::path& path);

void write_metric_rows_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metric_rows_csv(const std::filesystem::path& path);

void write_comparison_csv(const std::filesystem::path& path, const LimitComparisonReport& report);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace ridgepred
