#pragma once

#include <string>
#include <vector>

#include "ridgepred/io.hpp"
#include "ridgepred/limits.hpp"
#include "ridgepred/spectral.hpp"

namespace ridgepred {

enum class FigureId { Fig1, Fig2, Fig3, Fig5, Fig6 };

// Accepts "Fig1", "fig1" or "1".
FigureId parse_figure_id(const std::string& text);
std::string to_string(FigureId id);
// "limits" for Fig1-3, "simulate" for Fig5-6.
std::string preset_command(FigureId id);
// Complete run configuration for a figure, as INI text.  Simulation presets use
// n = 500 unless full_scale, which restores n = 2000.
std::string preset_config(FigureId id, bool full_scale);

// Limit sweep over (h2, omega, lambda) grids.
struct LimitSweep {
  std::vector<std::string> formulas;  // FormulaTag names, plus "upper_bound" (h2_eta phi^2 / omega)
  std::vector<double> omegas;
  std::vector<double> lambdas;  // needed by ridge_out, ridge_in and mse_ridge
  std::vector<double> h2s;      // sets h2_beta = h2_eta; empty keeps base
  TraitModel base;
  SpectralModel spec = SpectralModel::identity();
  bool x_is_lambda = false;
  double m_sigma = 1.0;  // signal scale for MSE formulas
};

struct LimitRow {
  std::string formula;
  double h2_beta = 0.0;
  double h2_eta = 0.0;
  double phi = 0.0;
  double omega = 0.0;
  double lambda = 0.0;  // NaN when the formula has no penalty
  double value = 0.0;
};

struct SweepSkip {
  std::string formula;
  double h2 = 0.0;
  double omega = 0.0;
  std::string reason;
};

struct SweepResult {
  std::vector<LimitRow> rows;
  std::vector<SeriesPoint> points;
  std::vector<SweepSkip> skipped;  // grid points where the limit is undefined
};

// Throws ConfigError for unknown formulas or missing grids.
SweepResult run_limit_sweep(const LimitSweep& sweep);

void write_limit_rows_csv(const std::filesystem::path& path, const std::vector<LimitRow>& rows);

struct SvgOptions {
  std::string title;
  std::string x_label = "x";
  std::string y_label = "y";
  bool log_x = false;
  int width = 720;
  int height = 480;
};

// Line chart with one polyline per series, in order of first appearance.
// Output depends only on the points and options.
std::string render_svg(const std::vector<SeriesPoint>& points, const SvgOptions& opts);

}  // namespace ridgepred
