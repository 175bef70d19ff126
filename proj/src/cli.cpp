#include "ridgepred/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <json.hpp>
#include <limits>
#include <map>
#include <set>

#include "ridgepred/accuracy.hpp"
#include "ridgepred/errors.hpp"
#include "ridgepred/io.hpp"
#include "ridgepred/simulation.hpp"
#include "ridgepred/spectral.hpp"

namespace ridgepred {

namespace {

namespace fs = std::filesystem;
using Eigen::Index;
using json = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"run", {"command", "seed", "output_dir", "svg", "full_scale"}},
      {"trait", {"h2", "h2_beta", "h2_eta", "phi", "rho"}},
      {"spectrum", {"kind", "eigenvalues", "weights", "block_size", "block_rho"}},
      {"limits", {"formulas", "omega", "lambda", "h2", "x_axis", "m_sigma"}},
      {"simulation",
       {"n", "n_z", "p", "omega", "m_fraction", "m_beta", "m_eta", "m_overlap", "replicates",
        "estimators", "effect_dist", "design_dist", "in_sample", "mse", "meta_split",
        "meta_weighting", "tolerance", "mse_tolerance"}},
      {"estimate",
       {"panel", "panel_matrix", "n_w", "p", "top_removed", "outlier_factor", "x", "z", "n",
        "omega"}},
      {"meta", {"study_ns", "weights", "p", "summary_file", "simulate", "replicates", "n_z",
                "m_fraction", "tolerance"}},
      {"transform", {"omega", "lambda"}},
  };
  return s;
}

// Keys holding input files; resolved and checked before execution.
const std::vector<std::string>& input_path_keys() {
  static const std::vector<std::string> k = {"estimate.panel", "estimate.panel_matrix",
                                             "estimate.x", "estimate.z", "meta.summary_file"};
  return k;
}

int line_of(const IniDocument& doc, const std::string& key) {
  const auto it = doc.entries().find(key);
  return it == doc.entries().end() ? 0 : it->second.line;
}

[[noreturn]] void bad(const IniDocument& doc, const std::string& key, const std::string& what) {
  throw ConfigError(what, line_of(doc, key), key);
}

double positive(const IniDocument& doc, const std::string& key, double fallback) {
  const double v = doc.get_double(key).value_or(fallback);
  if (!(v > 0.0)) bad(doc, key, "must be > 0");
  return v;
}

Index count(const IniDocument& doc, const std::string& key, Index fallback, Index min = 1) {
  const auto v = doc.get_int(key);
  if (!v) return fallback;
  if (*v < min) bad(doc, key, "must be >= " + std::to_string(min));
  return Index(*v);
}

std::string choice(const IniDocument& doc, const std::string& key, const std::string& fallback,
                   const std::set<std::string>& allowed) {
  const std::string v = doc.get_string(key).value_or(fallback);
  if (!allowed.count(v)) {
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    bad(doc, key, "'" + v + "' is not one of: " + list);
  }
  return v;
}

TraitModel trait_from(const IniDocument& doc) {
  TraitModel tm;
  double h2 = doc.get_double("trait.h2").value_or(0.5);
  tm.h2_beta = doc.get_double("trait.h2_beta").value_or(h2);
  tm.h2_eta = doc.get_double("trait.h2_eta").value_or(h2);
  tm.phi = doc.get_double("trait.phi").value_or(1.0);
  tm.rho = doc.get_double("trait.rho");
  for (const char* k : {"trait.h2", "trait.h2_beta", "trait.h2_eta"}) {
    const auto v = doc.get_double(k);
    if (v && !(*v >= 0.0 && *v <= 1.0)) bad(doc, k, "heritability must lie in [0, 1]");
  }
  if (!(tm.phi >= -1.0 && tm.phi <= 1.0)) bad(doc, "trait.phi", "phi must lie in [-1, 1]");
  return tm;
}

struct SpectrumChoice {
  SpectralModel model = SpectralModel::identity();
  std::optional<BlockCorrelation> blocks;
  std::string kind = "identity";
};

SpectrumChoice spectrum_from(const IniDocument& doc) {
  SpectrumChoice s;
  s.kind = choice(doc, "spectrum.kind", "identity", {"identity", "point_masses", "explicit", "block"});
  try {
    if (s.kind == "point_masses") {
      const auto e = doc.get_double_list("spectrum.eigenvalues");
      const auto w = doc.get_double_list("spectrum.weights");
      if (!e) bad(doc, "spectrum.eigenvalues", "point_masses needs eigenvalues");
      if (!w) bad(doc, "spectrum.weights", "point_masses needs weights");
      if (e->size() != w->size()) bad(doc, "spectrum.weights", "needs one weight per eigenvalue");
      std::vector<PointMass> atoms;
      for (std::size_t i = 0; i < e->size(); ++i) atoms.push_back({(*e)[i], (*w)[i]});
      s.model = SpectralModel::point_masses(std::move(atoms));
    } else if (s.kind == "explicit") {
      const auto e = doc.get_double_list("spectrum.eigenvalues");
      if (!e) bad(doc, "spectrum.eigenvalues", "explicit spectrum needs eigenvalues");
      s.model = SpectralModel::explicit_eigenvalues(*e);
    } else if (s.kind == "block") {
      BlockCorrelation b;
      b.block_size = count(doc, "spectrum.block_size", 20);
      b.rho = doc.get_double("spectrum.block_rho").value_or(0.8);
      if (!(b.rho >= 0.0 && b.rho < 1.0)) bad(doc, "spectrum.block_rho", "must lie in [0, 1)");
      s.blocks = b;
      s.model = b.spectrum();
    }
  } catch (const DomainError& e) {
    throw ConfigError(e.what(), line_of(doc, "spectrum.eigenvalues"), "spectrum.eigenvalues");
  } catch (const ContractError& e) {
    throw ConfigError(e.what(), line_of(doc, "spectrum.eigenvalues"), "spectrum.eigenvalues");
  }
  return s;
}

json dispersion_json(const Dispersion& d) {
  return json{{"mean", d.mean}, {"sd", d.sd}, {"se", d.se}, {"count", d.count}};
}

json moments_json(const SpectralMoments& m) { return json{{"b1", m.b1}, {"b2", m.b2}, {"b3", m.b3}}; }

std::optional<double> finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return std::nullopt;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void write_json(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

void emit_curves(const RunConfig& cfg, const std::vector<SeriesPoint>& pts, const SvgOptions& svg,
                 std::ostream& log) {
  const fs::path curves = cfg.output_dir / "curves.csv";
  write_series_csv(curves, pts);
  log << "wrote " << curves.string() << "\n";
  if (cfg.emit_svg) {
    SvgOptions o = svg;
    double lo = HUGE_VAL, hi = -HUGE_VAL;
    for (const auto& p : pts) lo = std::min(lo, p.x), hi = std::max(hi, p.x);
    o.log_x = lo > 0.0 && hi / lo > 50.0;
    const fs::path path = cfg.output_dir / "curves.svg";
    write_text_file(path, render_svg(pts, o));
    log << "wrote " << path.string() << "\n";
  }
}

// ---- limits ---------------------------------------------------------------

void run_limits(const RunConfig& cfg, std::ostream& log) {
  const auto& doc = cfg.doc;
  LimitSweep sw;
  sw.base = trait_from(doc);
  sw.spec = spectrum_from(doc).model;
  sw.formulas = doc.get_string_list("limits.formulas")
                    .value_or(std::vector<std::string>{"marginal_out", "ridge_optimal_out",
                                                       "ridgeless_out"});
  sw.omegas = doc.get_double_list("limits.omega").value_or(std::vector<double>{});
  sw.lambdas = doc.get_double_list("limits.lambda").value_or(std::vector<double>{});
  sw.h2s = doc.get_double_list("limits.h2").value_or(std::vector<double>{});
  for (double h : sw.h2s)
    if (!(h > 0.0 && h <= 1.0)) bad(doc, "limits.h2", "heritability must lie in (0, 1]");
  sw.x_is_lambda = choice(doc, "limits.x_axis", "omega", {"omega", "lambda"}) == "lambda";
  sw.m_sigma = positive(doc, "limits.m_sigma", 1.0);
  SweepResult res;
  try {
    res = run_limit_sweep(sw);
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), line_of(doc, e.key()), e.key());
  }
  write_limit_rows_csv(cfg.output_dir / "limits.csv", res.rows);
  log << "wrote " << (cfg.output_dir / "limits.csv").string() << "\n";
  SvgOptions svg;
  svg.title = cfg.preset ? to_string(*cfg.preset) : "limits";
  svg.x_label = sw.x_is_lambda ? "lambda" : "omega";
  svg.y_label = "limit";
  emit_curves(cfg, res.points, svg, log);

  json skipped = json::array();
  for (const auto& s : res.skipped)
    skipped.push_back({{"formula", s.formula}, {"h2", s.h2}, {"omega", s.omega}, {"reason", s.reason}});
  json j{{"command", "limits"},
         {"preset", cfg.preset ? json(to_string(*cfg.preset)) : json(nullptr)},
         {"formulas", sw.formulas},
         {"rows", res.rows.size()},
         {"skipped", skipped}};
  write_json(cfg.output_dir / "summary.json", j);
}

// ---- simulate -------------------------------------------------------------

std::vector<Index> split_sizes(const IniDocument& doc, const std::string& key, Index n) {
  const auto v = doc.get_double_list(key);
  if (!v) return {};
  std::vector<Index> out;
  const bool fractions = std::all_of(v->begin(), v->end(), [](double f) { return f > 0.0 && f < 1.0; });
  if (fractions) {
    double total = 0.0;
    for (double f : *v) total += f;
    if (std::abs(total - 1.0) > 1e-9) bad(doc, key, "split fractions must add up to 1");
    Index used = 0;
    for (std::size_t i = 0; i + 1 < v->size(); ++i) {
      out.push_back(Index(std::llround((*v)[i] * double(n))));
      used += out.back();
    }
    out.push_back(n - used);
  } else {
    for (double s : *v) {
      if (!(s >= 1.0) || s != std::floor(s)) bad(doc, key, "study sizes must be positive integers");
      out.push_back(Index(s));
    }
  }
  for (Index s : out)
    if (s < 2) bad(doc, key, "every study needs at least 2 samples");
  return out;
}

struct SimPlan {
  SimConfig cfg;
  std::vector<EstimatorToken> tokens;
  double tolerance = 0.03;
  double mse_tolerance = 0.05;
};

std::vector<SimPlan> simulation_plans(const RunConfig& rc) {
  const auto& doc = rc.doc;
  const TraitModel base = trait_from(doc);
  const SpectrumChoice sc = spectrum_from(doc);
  const Index n = count(doc, "simulation.n", 500, 2);
  const Index n_z = count(doc, "simulation.n_z", n, 2);

  std::vector<Index> ps;
  if (doc.has("simulation.p") && doc.has("simulation.omega"))
    bad(doc, "simulation.omega", "give either p or omega, not both");
  if (doc.has("simulation.p")) {
    ps.push_back(count(doc, "simulation.p", 1));
  } else {
    for (double w : doc.get_double_list("simulation.omega").value_or(std::vector<double>{1.0})) {
      if (!(w > 0.0)) bad(doc, "simulation.omega", "omega must be > 0");
      ps.push_back(std::max<Index>(1, Index(std::llround(w * double(n)))));
    }
  }
  const auto tokens = doc.get_string_list("simulation.estimators")
                          .value_or(std::vector<std::string>{"marginal", "ridge:opt"});
  const double m_fraction = doc.get_double("simulation.m_fraction").value_or(0.8);
  if (!(m_fraction > 0.0 && m_fraction <= 1.0))
    bad(doc, "simulation.m_fraction", "must lie in (0, 1]");

  std::vector<SimPlan> plans;
  for (Index p : ps) {
    SimPlan plan;
    SimConfig& c = plan.cfg;
    c.n = n;
    c.n_z = n_z;
    c.p = p;
    c.tm = base;
    c.tm.omega = double(p) / double(n);
    c.tm.omega_z = double(p) / double(n_z);
    const Index m_default = std::max<Index>(1, Index(std::llround(m_fraction * double(p))));
    c.m_beta = count(doc, "simulation.m_beta", m_default);
    c.m_eta = count(doc, "simulation.m_eta", c.m_beta);
    c.m_overlap = count(doc, "simulation.m_overlap", std::min(c.m_beta, c.m_eta), 0);
    c.spec = sc.model;
    c.blocks = sc.blocks;
    c.replicates = int(count(doc, "simulation.replicates", 100));
    c.seed = rc.seed;
    const std::set<std::string> dists = {"gaussian", "rademacher"};
    c.effect_dist = choice(doc, "simulation.effect_dist", "gaussian", dists) == "gaussian"
                        ? Distribution::Gaussian
                        : Distribution::Rademacher;
    c.design_dist = choice(doc, "simulation.design_dist", "gaussian", dists) == "gaussian"
                        ? Distribution::Gaussian
                        : Distribution::Rademacher;
    c.in_sample = doc.get_bool("simulation.in_sample").value_or(true);
    c.mse = doc.get_bool("simulation.mse").value_or(false);
    c.meta_split = split_sizes(doc, "simulation.meta_split", n);
    c.meta_weighting =
        choice(doc, "simulation.meta_weighting", "optimal", {"optimal", "equal"}) == "optimal"
            ? MetaWeighting::Optimal
            : MetaWeighting::Equal;
    plan.tolerance = positive(doc, "simulation.tolerance", 0.03);
    plan.mse_tolerance = positive(doc, "simulation.mse_tolerance", 0.05);
    for (const auto& t : tokens) {
      EstimatorToken et;
      try {
        et = parse_estimator_token(t, n, c.tm);
      } catch (const ConfigError& e) {
        bad(doc, "simulation.estimators", e.what());
      }
      if (et.meta && c.meta_split.empty())
        bad(doc, "simulation.meta_split", "the meta estimator needs meta_split");
      if (!et.meta) c.estimators.push_back(et.kind);
      plan.tokens.push_back(et);
    }
    const bool has_meta = std::any_of(plan.tokens.begin(), plan.tokens.end(),
                                      [](const auto& t) { return t.meta; });
    if (!has_meta) c.meta_split.clear();
    try {
      c.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), 0, "simulation");
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

bool same_param(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
}

const MetricSummary* find_summary(const SimulationResult& r, const EstimatorToken& t) {
  const std::string label = t.meta ? kMetaLabel : t.kind.label();
  const double param = t.meta ? kNaN : (t.kind.tag == EstimatorTag::Ridge || t.kind.tag == EstimatorTag::Blup
                                            ? t.kind.parameter
                                            : kNaN);
  for (const auto& s : r.summary)
    if (s.estimator == label && same_param(s.lambda_or_tau, param)) return &s;
  return nullptr;
}

const LimitComparison* find_limit(const LimitComparisonReport& rep, const MetricSummary& s,
                                  const std::string& metric) {
  for (const auto& e : rep.entries)
    if (e.estimator == s.estimator && same_param(e.lambda_or_tau, s.lambda_or_tau) &&
        e.metric == metric)
      return &e;
  return nullptr;
}

// Runs one plan and returns its JSON summary; adds curve points.
json run_plan(const RunConfig& rc, const SimPlan& plan, const std::string& suffix,
              std::vector<SeriesPoint>& pts, std::ostream& log) {
  const SimConfig& c = plan.cfg;
  const SimulationResult res = run_replicates(c);
  auto opts = comparison_options_for(c);
  opts.r2_tolerance = plan.tolerance;
  opts.mse_relative_tolerance = plan.mse_tolerance;
  const auto report = compare_to_limits(res.rows, c.tm, c.population_spectrum(), opts);

  const fs::path rows = rc.output_dir / ("rows" + suffix + ".csv");
  const fs::path comp = rc.output_dir / ("comparison" + suffix + ".csv");
  write_metric_rows_csv(rows, res.rows);
  write_comparison_csv(comp, report);
  log << "wrote " << rows.string() << "\n" << "wrote " << comp.string() << "\n";

  const double w = c.tm.omega;
  const std::string tag = " omega=" + format_double(w);
  json ests = json::array();
  for (std::size_t k = 0; k < plan.tokens.size(); ++k) {
    const auto& t = plan.tokens[k];
    const double x = double(k + 1);
    const MetricSummary* s = find_summary(res, t);
    json e{{"x", x},
           {"token", t.token},
           {"estimator", t.meta ? kMetaLabel : t.kind.label()},
           {"parameter", t.meta ? json(nullptr) : opt_json(finite_or_null(t.kind.parameter))}};
    if (!s) {
      e["status"] = "no successful replicates";
      ests.push_back(e);
      continue;
    }
    for (const char* metric : {"a2", "e2", "mse"}) {
      const Dispersion& d = std::string(metric) == "a2"   ? s->a2
                            : std::string(metric) == "e2" ? s->e2
                                                          : s->mse_total;
      if (d.count == 0) continue;
      json m = dispersion_json(d);
      const LimitComparison* lc = find_limit(report, *s, metric);
      if (lc) {
        m["limit"] = opt_json(finite_or_null(lc->limit));
        m["status"] = to_string(lc->status);
        if (!lc->note.empty()) m["note"] = lc->note;
      }
      e[metric] = m;
      if (std::string(metric) != "mse") {
        pts.push_back({std::string(metric) + " sim" + tag, x, d.mean, d.se});
        if (lc && std::isfinite(lc->limit))
          pts.push_back({std::string(metric) + " limit" + tag, x, lc->limit, 0.0});
      }
    }
    ests.push_back(e);
  }
  json failures = json::array();
  for (const auto& f : res.failures)
    failures.push_back({{"replicate", f.replicate}, {"estimator", f.estimator}, {"message", f.message}});
  return json{{"omega", w},
              {"n", c.n},
              {"n_z", c.n_z},
              {"p", c.p},
              {"m_beta", c.m_beta},
              {"replicates", c.replicates},
              {"seed", c.seed},
              {"realized_h2_beta", dispersion_json(dispersion(res.realized_h2_beta))},
              {"tolerance", plan.tolerance},
              {"all_pass", report.all_pass()},
              {"rows_file", rows.filename().string()},
              {"comparison_file", comp.filename().string()},
              {"estimators", ests},
              {"failures", failures}};
}

void run_simulate(const RunConfig& rc, std::ostream& log) {
  const auto plans = simulation_plans(rc);
  std::vector<SeriesPoint> pts;
  json configs = json::array();
  for (const auto& plan : plans) {
    const std::string suffix = plans.size() == 1 ? "" : "_omega" + format_double(plan.cfg.tm.omega);
    configs.push_back(run_plan(rc, plan, suffix, pts, log));
  }
  // Contiguous series, in order of first appearance.
  std::map<std::string, std::size_t> first;
  for (std::size_t i = 0; i < pts.size(); ++i) first.emplace(pts[i].series, i);
  std::stable_sort(pts.begin(), pts.end(), [&](const auto& a, const auto& b) {
    return first.at(a.series) < first.at(b.series);
  });
  SvgOptions svg;
  svg.title = rc.preset ? to_string(*rc.preset) : "simulation";
  svg.x_label = "estimator position (x in summary.json)";
  svg.y_label = "R2";
  emit_curves(rc, pts, svg, log);
  write_json(rc.output_dir / "summary.json",
             json{{"command", "simulate"},
                  {"preset", rc.preset ? json(to_string(*rc.preset)) : json(nullptr)},
                  {"configs", configs}});
}

// ---- estimate -------------------------------------------------------------

fs::path path_of(const IniDocument& doc, const std::string& key) { return *doc.get_string(key); }

void run_estimate(const RunConfig& rc, std::ostream& log) {
  const auto& doc = rc.doc;
  TraitModel tm = trait_from(doc);
  json out{{"command", "estimate"}};
  bool any = false;

  const bool has_panel = doc.has("estimate.panel"), has_matrix = doc.has("estimate.panel_matrix");
  if (has_panel && has_matrix) bad(doc, "estimate.panel_matrix", "give either panel or panel_matrix");
  if (has_panel || has_matrix) {
    PanelSummary panel;
    if (has_matrix) {
      panel = panel_from_matrix(read_matrix_binary(path_of(doc, "estimate.panel_matrix")));
    } else {
      panel.eigenvalues = read_reals_text(path_of(doc, "estimate.panel"));
      const auto n_w = doc.get_int("estimate.n_w"), p = doc.get_int("estimate.p");
      if (!n_w) bad(doc, "estimate.n_w", "an eigenvalue panel needs n_w");
      if (!p) bad(doc, "estimate.p", "an eigenvalue panel needs p");
      if (*n_w < 2 || *p < 1) bad(doc, "estimate.n_w", "n_w must be >= 2 and p >= 1");
      panel.n_w = std::size_t(*n_w);
      panel.p = std::size_t(*p);
    }
    const std::string top = doc.get_string("estimate.top_removed").value_or("auto");
    if (top == "auto") {
      panel.top_removed = count_outliers(panel, positive(doc, "estimate.outlier_factor", 10.0));
    } else {
      panel.top_removed = std::size_t(count(doc, "estimate.top_removed", 0, 0));
    }
    if (doc.has("estimate.omega") && doc.has("estimate.n"))
      bad(doc, "estimate.omega", "give either omega or n, not both");
    if (doc.has("estimate.n"))
      tm.omega = double(panel.p) / double(count(doc, "estimate.n", 1));
    else
      tm.omega = positive(doc, "estimate.omega", double(panel.p) / double(panel.n_w));
    tm.omega_z = tm.omega;
    const auto rep = accuracy_from_panel(panel, tm);
    out["panel"] = json{{"n_w", panel.n_w},
                        {"p", panel.p},
                        {"eigenvalues", panel.eigenvalues.size()},
                        {"top_removed", panel.top_removed},
                        {"omega", tm.omega},
                        {"a2_marginal", rep.a2_marginal},
                        {"a2_ridge_optimal", opt_json(rep.a2_ridge_optimal)},
                        {"pre", opt_json(rep.pre)},
                        {"pre_ridge", opt_json(rep.pre_ridge)},
                        {"moments", moments_json(rep.moments)}};
    any = true;
  }
  if (doc.has("estimate.x") != doc.has("estimate.z"))
    bad(doc, doc.has("estimate.x") ? "estimate.z" : "estimate.x",
        "the trace estimator needs both x and z");
  if (doc.has("estimate.x")) {
    const Eigen::MatrixXd x = read_matrix_binary(path_of(doc, "estimate.x"));
    const Eigen::MatrixXd z = read_matrix_binary(path_of(doc, "estimate.z"));
    TraitModel t = tm;
    t.omega = double(x.cols()) / double(x.rows());
    t.omega_z = double(z.cols()) / double(z.rows());
    const auto rep = accuracy_from_traces(x, z, t);
    out["traces"] = json{{"n", x.rows()},
                         {"n_z", z.rows()},
                         {"p", x.cols()},
                         {"omega", t.omega},
                         {"a2_marginal", rep.a2_marginal},
                         {"pre", opt_json(rep.pre)},
                         {"moments", moments_json(rep.moments)}};
    any = true;
  }
  if (!any) throw ConfigError("estimate needs panel, panel_matrix or x and z", 0, "estimate");
  out["trait"] = json{{"h2_beta", tm.h2_beta}, {"h2_eta", tm.h2_eta}, {"phi", tm.phi}};
  write_json(rc.output_dir / "accuracy.json", out);
  log << "wrote " << (rc.output_dir / "accuracy.json").string() << "\n";
}

// ---- meta -----------------------------------------------------------------

void run_meta(const RunConfig& rc, std::ostream& log) {
  const auto& doc = rc.doc;
  TraitModel tm = trait_from(doc);
  const auto pop = spectrum_from(doc).model.moments();
  json out{{"command", "meta"}};

  std::vector<StudySummary> studies;
  if (doc.has("meta.summary_file")) studies = read_summary_panel(path_of(doc, "meta.summary_file"));
  std::vector<double> ns;
  if (const auto v = doc.get_double_list("meta.study_ns")) {
    for (double s : *v)
      if (!(s >= 1.0) || s != std::floor(s)) bad(doc, "meta.study_ns", "study sizes must be positive integers");
    ns = *v;
  } else {
    for (const auto& s : studies) ns.push_back(double(s.n));
  }
  if (ns.empty()) bad(doc, "meta.study_ns", "meta needs study_ns or summary_file");
  if (!studies.empty() && studies.size() != ns.size())
    bad(doc, "meta.study_ns", "study_ns and summary_file list different numbers of studies");

  double p = 0.0;
  if (doc.has("meta.p")) p = double(count(doc, "meta.p", 1));
  else if (!studies.empty()) p = double(studies.front().beta_hat.size());
  else bad(doc, "meta.p", "meta needs p");
  double total = 0.0;
  for (double s : ns) total += s;
  tm.omega = tm.omega_z = p / total;

  // Schemes: d* and equal weights, or the explicit list.
  std::vector<std::pair<std::string, std::vector<double>>> schemes;
  const std::string wtext = doc.get_string("meta.weights").value_or("");
  if (wtext.empty()) {
    schemes.push_back({"optimal", ns});
    schemes.push_back({"equal", std::vector<double>(ns.size(), 1.0)});
  } else if (wtext == "optimal") {
    schemes.push_back({"optimal", ns});
  } else if (wtext == "equal") {
    schemes.push_back({"equal", std::vector<double>(ns.size(), 1.0)});
  } else {
    const auto w = *doc.get_double_list("meta.weights");
    if (w.size() != ns.size()) bad(doc, "meta.weights", "needs one weight per study");
    schemes.push_back({"custom", w});
  }

  std::string csv = "scheme,weights,a2,e2\n";
  json js = json::array();
  for (const auto& [name, w] : schemes) {
    MetaLimits lim;
    try {
      lim = limit_meta(tm, pop, ns, w, p);
    } catch (const DomainError& e) {
      bad(doc, "meta.weights", e.what());
    }
    std::string wl;
    for (double d : w) wl += (wl.empty() ? "" : " ") + format_double(d);
    const double e2 = lim.e2 ? lim.e2->value : kNaN;
    csv += name + "," + wl + "," + format_double(lim.a2.value) + "," + format_double(e2) + "\n";
    js.push_back({{"scheme", name}, {"weights", w}, {"a2", lim.a2.value}, {"e2", opt_json(finite_or_null(e2))}});
  }
  write_text_file(rc.output_dir / "meta.csv", csv);
  log << "wrote " << (rc.output_dir / "meta.csv").string() << "\n";
  out["omega"] = tm.omega;
  out["p"] = p;
  out["study_ns"] = ns;
  out["limits"] = js;

  if (!studies.empty()) {
    SummaryPanel panel;
    panel.studies = studies;
    const auto& w = schemes.front().second;
    panel.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), Index(w.size()));
    const auto fit = meta_aggregate(panel);
    std::vector<double> coef(fit.coefficients.data(), fit.coefficients.data() + fit.coefficients.size());
    write_reals_text(rc.output_dir / "meta_coefficients.txt", coef);
    log << "wrote " << (rc.output_dir / "meta_coefficients.txt").string() << "\n";
    out["aggregated"] = json{{"scheme", schemes.front().first}, {"file", "meta_coefficients.txt"}};
  }

  if (doc.get_bool("meta.simulate").value_or(false)) {
    if (schemes.size() == 1 && schemes.front().first == "custom")
      bad(doc, "meta.weights", "simulation supports optimal or equal weights only");
    SimPlan plan;
    SimConfig& c = plan.cfg;
    c.n = Index(total);
    c.n_z = count(doc, "meta.n_z", c.n, 2);
    c.p = Index(p);
    c.tm = tm;
    c.tm.omega = p / total;
    c.tm.omega_z = p / double(c.n_z);
    const double mf = doc.get_double("meta.m_fraction").value_or(0.8);
    if (!(mf > 0.0 && mf <= 1.0)) bad(doc, "meta.m_fraction", "must lie in (0, 1]");
    c.m_beta = c.m_eta = c.m_overlap = std::max<Index>(1, Index(std::llround(mf * p)));
    const SpectrumChoice sc = spectrum_from(doc);
    c.spec = sc.model;
    c.blocks = sc.blocks;
    c.replicates = int(count(doc, "meta.replicates", 100));
    c.seed = rc.seed;
    c.in_sample = true;
    for (Index k = 0; k < Index(ns.size()); ++k) c.meta_split.push_back(Index(ns[k]));
    c.meta_weighting = schemes.front().first == "equal" ? MetaWeighting::Equal : MetaWeighting::Optimal;
    c.estimators = {EstimatorKind::marginal()};
    plan.tokens = {parse_estimator_token("marginal", c.n, c.tm), parse_estimator_token("meta", c.n, c.tm)};
    plan.tolerance = positive(doc, "meta.tolerance", 0.03);
    try {
      c.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), 0, "meta");
    }
    std::vector<SeriesPoint> pts;
    out["simulation"] = run_plan(rc, plan, "", pts, log);
  }
  write_json(rc.output_dir / "summary.json", out);
}

// ---- spectrum -------------------------------------------------------------

void run_spectrum(const RunConfig& rc, std::ostream& log) {
  const auto& doc = rc.doc;
  const SpectrumChoice sc = spectrum_from(doc);
  if (!doc.has("transform.omega")) bad(doc, "transform.omega", "spectrum needs transform.omega");
  const double w = positive(doc, "transform.omega", 1.0);
  const auto lambdas =
      doc.get_double_list("transform.lambda").value_or(std::vector<double>{0.01, 0.1, 1.0, 10.0, 100.0});
  for (double l : lambdas)
    if (!(l > 0.0)) bad(doc, "transform.lambda", "lambda values must be > 0");

  const auto pop = sc.model.moments();
  const auto sample = moment_map_forward(pop, w);
  json j{{"command", "spectrum"},
         {"kind", sc.kind},
         {"omega", w},
         {"population_moments", moments_json(pop)},
         {"sample_moments", moments_json(sample)},
         {"point_mass_at_zero", mp_point_mass(w)}};
  if (sc.model.is_identity()) {
    const auto [lo, hi] = mp_support(w);
    j["edges"] = {lo, hi};
  } else {
    j["edges"] = nullptr;
  }
  write_json(rc.output_dir / "spectrum.json", j);

  std::string csv = "lambda,g,g_prime,v,v_prime\n";
  for (double l : lambdas) {
    const TransformValue g = sc.model.is_identity() ? mp_stieltjes_closed(w, l)
                                                    : solve_mp_fixed_point(sc.model, w, l);
    const TransformValue v = companion_from_primal(w, g);
    csv += format_double(l) + "," + format_double(g.v) + "," + format_double(g.v_prime) + "," +
           format_double(v.v) + "," + format_double(v.v_prime) + "\n";
  }
  write_text_file(rc.output_dir / "transforms.csv", csv);
  log << "wrote " << (rc.output_dir / "spectrum.json").string() << "\n"
      << "wrote " << (rc.output_dir / "transforms.csv").string() << "\n";
}

const char* error_type(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
  if (dynamic_cast<const PartialFailureError*>(&e)) return "PartialFailureError";
  if (dynamic_cast<const IoError*>(&e)) return "IoError";
  if (dynamic_cast<const NearSingularityError*>(&e)) return "NearSingularityError";
  if (dynamic_cast<const BoundaryError*>(&e)) return "BoundaryError";
  if (dynamic_cast<const ConvergenceError*>(&e)) return "ConvergenceError";
  if (dynamic_cast<const NormalizationError*>(&e)) return "NormalizationError";
  if (dynamic_cast<const InfeasiblePanelError*>(&e)) return "InfeasiblePanelError";
  if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
  if (dynamic_cast<const ContractError*>(&e)) return "ContractError";
  if (dynamic_cast<const NumericalError*>(&e)) return "NumericalError";
  if (dynamic_cast<const Error*>(&e)) return "Error";
  return "InternalError";
}

int report(std::ostream& err, const std::string& command, const std::exception& e, int code) {
  json rec{{"type", error_type(e)}, {"message", e.what()}, {"command", command}, {"exit_code", code}};
  if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) {
    rec["line"] = ce->line() > 0 ? json(ce->line()) : json(nullptr);
    rec["key"] = ce->key().empty() ? json(nullptr) : json(ce->key());
  }
  err << json{{"error", rec}}.dump() << "\n";
  return code;
}

}  // namespace

Command parse_command(const std::string& text) {
  if (text == "limits") return Command::Limits;
  if (text == "simulate") return Command::Simulate;
  if (text == "estimate") return Command::Estimate;
  if (text == "meta") return Command::Meta;
  if (text == "spectrum") return Command::Spectrum;
  throw ConfigError("unknown command '" + text + "'", 0, "run.command");
}

std::string to_string(Command c) {
  switch (c) {
    case Command::Limits: return "limits";
    case Command::Simulate: return "simulate";
    case Command::Estimate: return "estimate";
    case Command::Meta: return "meta";
    case Command::Spectrum: return "spectrum";
  }
  return "unknown";
}

EstimatorToken parse_estimator_token(const std::string& token, Index n, const TraitModel& tm) {
  EstimatorToken t;
  t.token = token;
  if (token == "marginal") return t.kind = EstimatorKind::marginal(), t;
  if (token == "meta") return t.meta = true, t;
  if (token == "ridgeless") return t.kind = EstimatorKind::ridgeless(), t;
  if (token == "blupless") return t.kind = EstimatorKind::blupless(), t;
  if (token == "ols") return t.kind = EstimatorKind::ols(), t;
  const auto colon = token.find(':');
  const std::string head = token.substr(0, colon);
  if (colon == std::string::npos || (head != "ridge" && head != "blup"))
    throw ConfigError("unknown estimator '" + token + "'");
  std::string arg = token.substr(colon + 1);
  double value;
  if (arg.rfind("opt", 0) == 0) {
    const std::string scale = arg.substr(3);
    const double nn = double(n);
    double factor = 1.0;
    if (scale == "*n") factor = nn;
    else if (scale == "*n2") factor = nn * nn;
    else if (scale == "/n") factor = 1.0 / nn;
    else if (scale == "/n2") factor = 1.0 / (nn * nn);
    else if (!scale.empty()) throw ConfigError("unknown penalty scale in '" + token + "'");
    OptimalPenalty opt;
    try {
      opt = optimal_lambda(tm);
    } catch (const Error& e) {
      throw ConfigError("'" + token + "': " + e.what());
    }
    value = (head == "ridge" ? opt.lambda : opt.tau) * factor;
  } else {
    try {
      value = parse_double(arg);
    } catch (const IoError&) {
      throw ConfigError("bad penalty in estimator '" + token + "'");
    }
  }
  try {
    t.kind = head == "ridge" ? EstimatorKind::ridge(value) : EstimatorKind::blup(value);
  } catch (const DomainError& e) {
    throw ConfigError("'" + token + "': " + e.what());
  }
  return t;
}

RunConfig make_run_config(const CliOptions& opts) {
  RunConfig rc;
  rc.command = opts.command;
  rc.full_scale = opts.full_scale;
  IniDocument doc;
  if (opts.preset) {
    rc.preset = parse_figure_id(*opts.preset);
    if (preset_command(*rc.preset) != to_string(opts.command))
      throw ConfigError("preset " + to_string(*rc.preset) + " belongs to the '" +
                            preset_command(*rc.preset) + "' command",
                        0, "preset");
    doc = IniDocument::parse(preset_config(*rc.preset, opts.full_scale));
  }
  std::map<std::string, bool> from_file;
  if (opts.config) {
    const IniDocument file = IniDocument::load(*opts.config);
    file.check_schema(schema());
    doc.merge(file);
    for (const auto& entry : file.entries()) from_file[entry.first] = true;
  }
  for (const auto& o : opts.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' needs section.key=value");
    std::string key = o.substr(0, eq), value = o.substr(eq + 1);
    key.erase(0, key.find_first_not_of(' '));
    key.erase(key.find_last_not_of(' ') + 1);
    value.erase(0, value.find_first_not_of(' '));
    value.erase(value.find_last_not_of(' ') + 1);
    doc.set(key, value);
    from_file[key] = false;
  }
  doc.check_schema(schema());

  if (const auto cmd = doc.get_string("run.command"); cmd && *cmd != to_string(opts.command))
    throw ConfigError("config is for the '" + *cmd + "' command", line_of(doc, "run.command"),
                      "run.command");
  rc.seed = opts.seed ? *opts.seed : doc.get_u64("run.seed").value_or(1);
  rc.emit_svg = opts.svg || doc.get_bool("run.svg").value_or(false);
  rc.full_scale = opts.full_scale || doc.get_bool("run.full_scale").value_or(false);
  if (rc.full_scale && rc.preset && !opts.full_scale) {
    IniDocument full = IniDocument::parse(preset_config(*rc.preset, true));
    for (const auto& [key, entry] : full.entries())
      if (!from_file.count(key)) doc.set(key, entry.value);
  }

  const fs::path base = opts.config ? fs::absolute(*opts.config).parent_path() : fs::current_path();
  auto resolve = [&](const std::string& key) {
    fs::path p = *doc.get_string(key);
    if (p.is_relative()) p = (from_file.count(key) && from_file[key] ? base : fs::current_path()) / p;
    return p.lexically_normal();
  };
  if (opts.out) {
    rc.output_dir = fs::absolute(*opts.out);
  } else if (doc.has("run.output_dir")) {
    rc.output_dir = resolve("run.output_dir");
  } else {
    rc.output_dir = fs::absolute(rc.output_dir);
  }
  for (const auto& key : input_path_keys()) {
    if (!doc.has(key)) continue;
    const fs::path p = resolve(key);
    if (!fs::is_regular_file(p)) throw ConfigError("file not found: " + p.string(), line_of(doc, key), key);
    doc.set(key, p.string());
  }
  rc.doc = std::move(doc);
  return rc;
}

void run(const RunConfig& cfg, std::ostream& log) {
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw IoError("cannot create " + cfg.output_dir.string() + ": " + ec.message());
  switch (cfg.command) {
    case Command::Limits: return run_limits(cfg, log);
    case Command::Simulate: return run_simulate(cfg, log);
    case Command::Estimate: return run_estimate(cfg, log);
    case Command::Meta: return run_meta(cfg, log);
    case Command::Spectrum: return run_spectrum(cfg, log);
  }
}

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ridgepred: prediction accuracy limits and simulations for ridge-type estimators"};
  app.require_subcommand(1);
  CliOptions opts;
  std::string config, out_dir;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  bool svg = false, full = false;
  const std::pair<const char*, const char*> subcommands[] = {
      {"limits", "evaluate asymptotic R2 and MSE limits over omega/lambda grids"},
      {"simulate", "Monte Carlo replicates compared with the limits"},
      {"estimate", "predict accuracy from a reference panel or genotype matrices"},
      {"meta", "aggregate per-study marginal estimates and report meta-analysis limits"},
      {"spectrum", "spectral edges, moments and transforms for a covariance spectrum"}};
  for (const auto& [name, help] : subcommands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--preset", preset, "figure preset: Fig1, Fig2, Fig3, Fig5 or Fig6");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_flag("--svg", svg, "also write an SVG line chart");
    sub->add_flag("--full-scale", full, "figure presets at n = 2000");
    sub->add_option("--set", overrides, "override a key: section.key=value");
  }
  std::string command = "cli";
  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
      throw ConfigError(e.what());
    }
    command = app.get_subcommands().front()->get_name();
    opts.command = parse_command(command);
    if (!config.empty()) opts.config = config;
    if (!out_dir.empty()) opts.out = out_dir;
    opts.preset = preset;
    opts.seed = seed;
    opts.svg = svg;
    opts.full_scale = full;
    opts.overrides = overrides;
    const RunConfig rc = make_run_config(opts);
    run(rc, out);
    return 0;
  } catch (const ConfigError& e) {
    return report(err, command, e, 2);
  } catch (const PartialFailureError& e) {
    return report(err, command, e, 4);
  } catch (const std::exception& e) {
    return report(err, command, e, 3);
  }
}

}  // namespace ridgepred
