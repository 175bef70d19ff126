#include "ridgepred/figures.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "ridgepred/errors.hpp"

namespace ridgepred {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::set<std::string>& lambda_formulas() {
  static const std::set<std::string> s = {"ridge_out", "ridge_in", "mse_ridge"};
  return s;
}

const std::set<std::string>& known_formulas() {
  static const std::set<std::string> s = {
      "marginal_out",  "marginal_in",      "ridge_out",         "ridge_optimal_out",
      "ridgeless_out", "ols_out",          "ridge_in",          "ridge_optimal_in",
      "ridgeless_in",  "ols_in",           "mse_marginal",      "mse_ridge",
      "mse_ridge_optimal", "mse_ridgeless", "mse_ols",          "upper_bound"};
  return s;
}

// Value of one formula; lambda is ignored unless the formula takes it.
double evaluate(const std::string& f, const TraitModel& tm, const SpectralModel& spec,
                double lambda, double m_sigma) {
  const auto pop = spec.moments();
  if (f == "marginal_out") return limit_marginal(tm, pop).a2.value;
  if (f == "marginal_in") return limit_marginal(tm, pop).e2.value;
  if (f == "ridge_out") return limit_ridge_out(tm, spec, lambda).value;
  if (f == "ridge_optimal_out") return limit_ridge_optimal(tm, spec).value;
  if (f == "ridgeless_out") return limit_ridgeless(tm, spec).value;
  if (f == "ols_out") return limit_ols(tm).value;
  if (f == "ridge_in") return limit_ridge_in(tm, spec, lambda).value;
  if (f == "ridge_optimal_in") return limit_ridge_in_optimal(tm, spec).value;
  if (f == "ridgeless_in") return limit_ridgeless_in(tm).value;
  if (f == "ols_in") return limit_ols_in(tm).value;
  if (f == "upper_bound") return tm.h2_eta * tm.phi * tm.phi / tm.omega;
  MseTarget target;
  if (f == "mse_marginal") target = MseTarget::marginal();
  else if (f == "mse_ridge") target = MseTarget::ridge(lambda);
  else if (f == "mse_ridge_optimal") target = MseTarget::ridge_optimal();
  else if (f == "mse_ridgeless") target = MseTarget::ridgeless();
  else if (f == "mse_ols") target = MseTarget::ols();
  else throw ConfigError("unknown formula '" + f + "'");
  return mse_limits(tm, spec, m_sigma, target).total;
}

std::string fmt(double v) { return format_double(v); }

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

FigureId parse_figure_id(const std::string& text) {
  std::string t;
  for (char c : text) t += char(std::tolower(static_cast<unsigned char>(c)));
  if (t.rfind("fig", 0) == 0) t = t.substr(3);
  if (t == "1") return FigureId::Fig1;
  if (t == "2") return FigureId::Fig2;
  if (t == "3") return FigureId::Fig3;
  if (t == "5") return FigureId::Fig5;
  if (t == "6") return FigureId::Fig6;
  throw ConfigError("unknown figure preset '" + text + "' (expected Fig1, Fig2, Fig3, Fig5 or Fig6)",
                    0, "preset");
}

std::string to_string(FigureId id) {
  switch (id) {
    case FigureId::Fig1: return "Fig1";
    case FigureId::Fig2: return "Fig2";
    case FigureId::Fig3: return "Fig3";
    case FigureId::Fig5: return "Fig5";
    case FigureId::Fig6: return "Fig6";
  }
  return "unknown";
}

std::string preset_command(FigureId id) {
  return id == FigureId::Fig5 || id == FigureId::Fig6 ? "simulate" : "limits";
}

std::string preset_config(FigureId id, bool full_scale) {
  std::ostringstream s;
  s << "[run]\ncommand = " << preset_command(id) << "\nseed = 20240601\n\n";
  s << "[trait]\nh2_beta = 0.8\nh2_eta = 0.8\nphi = 1\n\n";
  switch (id) {
    case FigureId::Fig1:
      s << "[spectrum]\nkind = identity\n\n"
        << "[limits]\nformulas = ridge_out, ridgeless_out, marginal_out\n"
        << "h2 = 0.5, 0.8\nomega = 0.5, 2, 4, 8\nlambda = logspace(0.001, 1000, 61)\n"
        << "x_axis = lambda\n";
      break;
    case FigureId::Fig2:
      s << "[spectrum]\nkind = identity\n\n"
        << "[limits]\nformulas = ridge_optimal_out, ridgeless_out, marginal_out, upper_bound\n"
        << "h2 = 0.5, 0.8\nomega = logspace(0.1, 10, 100)\nx_axis = omega\n";
      break;
    case FigureId::Fig3:
      s << "[spectrum]\nkind = identity\n\n"
        << "[limits]\nformulas = ridge_optimal_in, ridgeless_in, ols_in, marginal_in\n"
        << "h2 = 0.5, 0.8\nomega = logspace(0.1, 10, 100)\nx_axis = omega\n";
      break;
    case FigureId::Fig5:
    case FigureId::Fig6: {
      const int n = full_scale ? 2000 : 500;
      if (id == FigureId::Fig5)
        s << "[spectrum]\nkind = identity\n\n";
      else
        s << "[spectrum]\nkind = block\nblock_size = 20\nblock_rho = 0.8\n\n";
      s << "[simulation]\nn = " << n << "\nn_z = " << n << "\n"
        << "omega = " << (id == FigureId::Fig5 ? "1.05, 4" : "1.05, 8") << "\n"
        << "m_fraction = 0.8\nreplicates = 100\n"
        << "estimators = marginal, meta, ridge:opt/n2, ridge:opt/n, ridge:opt, ridge:opt*n, "
           "ridge:opt*n2\n"
        << "meta_split = 0.2, 0.8\nin_sample = true\n"
        << "tolerance = " << (full_scale ? "0.03" : "0.05") << "\n";
      break;
    }
  }
  return s.str();
}

SweepResult run_limit_sweep(const LimitSweep& sweep) {
  if (sweep.formulas.empty()) throw ConfigError("no formulas requested", 0, "limits.formulas");
  if (sweep.omegas.empty()) throw ConfigError("no omega grid", 0, "limits.omega");
  bool needs_lambda = sweep.x_is_lambda;
  for (const auto& f : sweep.formulas) {
    if (!known_formulas().count(f))
      throw ConfigError("unknown formula '" + f + "'", 0, "limits.formulas");
    needs_lambda = needs_lambda || lambda_formulas().count(f);
  }
  if (needs_lambda && sweep.lambdas.empty())
    throw ConfigError("the requested formulas need a lambda grid", 0, "limits.lambda");
  for (double w : sweep.omegas)
    if (!(w > 0.0)) throw ConfigError("omega values must be > 0", 0, "limits.omega");
  for (double l : sweep.lambdas)
    if (!(l > 0.0)) throw ConfigError("lambda values must be > 0", 0, "limits.lambda");

  const std::vector<double> h2s = sweep.h2s.empty() ? std::vector<double>{kNaN} : sweep.h2s;
  SweepResult out;
  for (double h2 : h2s) {
    TraitModel tm = sweep.base;
    if (!std::isnan(h2)) tm.h2_beta = tm.h2_eta = h2;
    const std::string h2_tag = " h2=" + fmt(tm.h2_beta);
    for (const auto& f : sweep.formulas) {
      const bool uses_lambda = lambda_formulas().count(f) > 0;
      const bool optimal = f.find("optimal") != std::string::npos;
      for (double w : sweep.omegas) {
        tm.omega = tm.omega_z = w;
        if (f.rfind("mse_", 0) == 0 && tm.h2_beta > 0.0)
          tm.sigma_eps = std::sqrt(sweep.m_sigma * (1.0 - tm.h2_beta) / tm.h2_beta);
        const std::vector<double> lambdas = uses_lambda ? sweep.lambdas : std::vector<double>{kNaN};
        for (double lam : lambdas) {
          double value;
          try {
            tm.validate();
            value = evaluate(f, tm, sweep.spec, lam, sweep.m_sigma);
          } catch (const ConfigError&) {
            throw;
          } catch (const Error& e) {
            out.skipped.push_back({f, tm.h2_beta, w, e.what()});
            continue;
          }
          const double row_lambda = optimal ? optimal_lambda(tm).lambda : lam;
          out.rows.push_back({f, tm.h2_beta, tm.h2_eta, tm.phi, w, row_lambda, value});
          if (sweep.x_is_lambda) {
            const std::string series = f + h2_tag + " omega=" + fmt(w);
            if (uses_lambda) {
              out.points.push_back({series, lam, value, 0.0});
            } else {
              for (double x : sweep.lambdas) out.points.push_back({series, x, value, 0.0});
            }
          } else {
            std::string series = f + h2_tag;
            if (uses_lambda && sweep.lambdas.size() > 1) series += " lambda=" + fmt(lam);
            out.points.push_back({series, w, value, 0.0});
          }
        }
      }
    }
  }
  // Group points by series so every polyline is contiguous; stable keeps x order.
  std::map<std::string, std::size_t> first;
  for (std::size_t i = 0; i < out.points.size(); ++i) first.emplace(out.points[i].series, i);
  std::stable_sort(out.points.begin(), out.points.end(), [&](const auto& a, const auto& b) {
    return first.at(a.series) < first.at(b.series);
  });
  return out;
}

void write_limit_rows_csv(const std::filesystem::path& path, const std::vector<LimitRow>& rows) {
  std::ostringstream s;
  s << "formula_tag,h2_beta,h2_eta,phi,omega,lambda,value\n";
  for (const auto& r : rows)
    s << r.formula << ',' << fmt(r.h2_beta) << ',' << fmt(r.h2_eta) << ',' << fmt(r.phi) << ','
      << fmt(r.omega) << ',' << fmt(r.lambda) << ',' << fmt(r.value) << '\n';
  write_text_file(path, s.str());
}

std::string render_svg(const std::vector<SeriesPoint>& points, const SvgOptions& opts) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::vector<std::string> order;
  std::map<std::string, std::vector<const SeriesPoint*>> by_series;
  double x0 = HUGE_VAL, x1 = -HUGE_VAL, y0 = HUGE_VAL, y1 = -HUGE_VAL;
  auto tx = [&](double x) { return opts.log_x ? std::log10(x) : x; };
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || (opts.log_x && !(p.x > 0.0))) continue;
    if (!by_series.count(p.series)) order.push_back(p.series);
    by_series[p.series].push_back(&p);
    x0 = std::min(x0, tx(p.x));
    x1 = std::max(x1, tx(p.x));
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  if (order.empty()) x0 = y0 = 0.0, x1 = y1 = 1.0;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const double left = 70, right = 220, top = 40, bottom = 60;
  const double pw = opts.width - left - right, ph = opts.height - top - bottom;
  auto px = [&](double x) { return left + (tx(x) - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opts.width << "\" height=\""
    << opts.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << num(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << xml_escape(opts.title) << "</text>\n";
  s << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw)
    << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
    const double sx = left + pw * k / 4.0, sy = top + ph * (1.0 - k / 4.0);
    s << "<text x=\"" << num(sx) << "\" y=\"" << num(top + ph + 18)
      << "\" text-anchor=\"middle\">" << tick_label(opts.log_x ? std::pow(10.0, fx) : fx)
      << "</text>\n";
    s << "<text x=\"" << num(left - 6) << "\" y=\"" << num(sy + 4) << "\" text-anchor=\"end\">"
      << tick_label(fy) << "</text>\n";
  }
  s << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(opts.height - 15)
    << "\" text-anchor=\"middle\">" << xml_escape(opts.x_label) << "</text>\n";
  s << "<text x=\"16\" y=\"" << num(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << num(top + ph / 2) << ")\">" << xml_escape(opts.y_label) << "</text>\n";

  for (std::size_t i = 0; i < order.size(); ++i) {
    const char* color = palette[i % 10];
    const auto& pts = by_series[order[i]];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < pts.size(); ++k)
      s << (k ? " " : "") << num(px(pts[k]->x)) << ',' << num(py(pts[k]->y));
    s << "\"/>\n";
    for (const auto* p : pts)
      if (p->y_se > 0.0 && std::isfinite(p->y_se))
        s << "<line x1=\"" << num(px(p->x)) << "\" y1=\"" << num(py(p->y - 2 * p->y_se))
          << "\" x2=\"" << num(px(p->x)) << "\" y2=\"" << num(py(p->y + 2 * p->y_se))
          << "\" stroke=\"" << color << "\"/>\n";
    const double ly = top + 14.0 * double(i) + 6;
    s << "<line x1=\"" << num(left + pw + 10) << "\" y1=\"" << num(ly) << "\" x2=\""
      << num(left + pw + 30) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << num(left + pw + 35) << "\" y=\"" << num(ly + 4) << "\" font-size=\"10\">"
      << xml_escape(order[i]) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace ridgepred
