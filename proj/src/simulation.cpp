#include "ridgepred/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "ridgepred/errors.hpp"
#include "ridgepred/metrics.hpp"

namespace ridgepred {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum Stream : std::uint64_t {
  kEffects = 0,
  kDesignX = 1,
  kDesignZ = 2,
  kNoiseY = 3,
  kNoiseZ = 4,
  kCausalOrder = 5,
  kMetaSplit = 6,
};

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Unit-variance draws.
class Sampler {
 public:
  Sampler(std::mt19937_64 rng, Distribution dist) : rng_(std::move(rng)), dist_(dist) {}
  double operator()() {
    if (dist_ == Distribution::Rademacher) {
      if (bits_left_ == 0) {
        bits_ = rng_();
        bits_left_ = 64;
      }
      const double s = (bits_ & 1ULL) ? 1.0 : -1.0;
      bits_ >>= 1;
      --bits_left_;
      return s;
    }
    return normal_(rng_);
  }
  void fill(MatrixXd& m) {
    double* d = m.data();
    for (Index k = 0; k < m.size(); ++k) d[k] = (*this)();
  }
  VectorXd vector(Index size) {
    VectorXd v(size);
    for (Index k = 0; k < size; ++k) v(k) = (*this)();
    return v;
  }

 private:
  std::mt19937_64 rng_;
  Distribution dist_;
  std::normal_distribution<double> normal_;
  std::uint64_t bits_ = 0;
  int bits_left_ = 0;
};

bool needs_shuffled_causals(const SimConfig& cfg) {
  return cfg.blocks.has_value() || !cfg.spec.is_identity();
}

bool same_parameter(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

double parameter_of(const EstimatorKind& k) {
  return (k.tag == EstimatorTag::Ridge || k.tag == EstimatorTag::Blup) ? k.parameter : kNaN;
}

// Correlation layouts (identity, blocks) are standardized.  A diagonal layout
// with unequal eigenvalues is only centered: rescaling it would erase Sigma.
bool standardized_layout(const SimConfig& cfg) {
  return cfg.blocks.has_value() || cfg.spec.is_identity();
}

MarginalForm marginal_form(const SimConfig& cfg) {
  return standardized_layout(cfg) ? MarginalForm::ExactDiagonal : MarginalForm::Shortcut;
}

MatrixXd design(const SimConfig& cfg, Index rows, std::mt19937_64 rng) {
  MatrixXd x(rows, cfg.p);
  Sampler(std::move(rng), cfg.design_dist).fill(x);
  apply_sigma_half(cfg, x);
  if (standardized_layout(cfg))
    standardize_columns_inplace(x);
  else
    x.rowwise() -= x.colwise().mean();
  return x;
}

MatrixXd take_rows(const MatrixXd& x, const std::vector<Index>& idx) {
  MatrixXd out(idx.size(), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(i) = x.row(idx[i]);
  return out;
}

VectorXd take(const VectorXd& v, const std::vector<Index>& idx) {
  VectorXd out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out(i) = v(idx[i]);
  return out;
}

EstimatorFit meta_fit(const SimConfig& cfg, const Dataset& d, int replicate) {
  std::vector<Index> order(cfg.n);
  std::iota(order.begin(), order.end(), Index{0});
  auto rng = replicate_stream(cfg.seed, replicate, kMetaSplit);
  std::shuffle(order.begin(), order.end(), rng);
  SummaryPanel panel;
  panel.use_optimal_weights = cfg.meta_weighting == MetaWeighting::Optimal;
  panel.weights = VectorXd::Ones(cfg.meta_split.size());
  std::size_t start = 0;
  for (Index size : cfg.meta_split) {
    const std::vector<Index> idx(order.begin() + start, order.begin() + start + size);
    start += size;
    const MatrixXd xs = take_rows(d.x, idx);
    panel.studies.push_back({fit_marginal(xs, take(d.y, idx), MarginalForm::Shortcut).coefficients,
                             size});
  }
  return meta_aggregate(panel);
}

struct ReplicateOutput {
  std::vector<MetricRow> rows;
  std::vector<ReplicateFailure> failures;
  double realized_h2 = kNaN;
  bool failed = false;
};

MetricRow evaluate(const SimConfig& cfg, const Dataset& d, const EstimatorFit& f,
                   const std::string& label, double param, int replicate) {
  MetricRow row{label, param, replicate, 0.0, kNaN, kNaN, kNaN, kNaN};
  row.a2 = r2_out_of_sample(f, d.z, d.y_z).r2;
  if (cfg.in_sample) row.e2 = r2_in_sample(f, d.x, d.y).r2;
  return row;
}

ReplicateOutput run_one(const SimConfig& cfg, int r) {
  ReplicateOutput out;
  Dataset d;
  try {
    d = generate_dataset(cfg, r);
  } catch (const std::exception& e) {
    out.failed = true;
    out.failures.push_back({r, "dataset", e.what()});
    return out;
  }
  out.realized_h2 = d.realized_h2_beta;

  std::optional<RidgeSolver> solver;
  for (const auto& kind : cfg.estimators) {
    try {
      EstimatorFit f;
      if (kind.tag == EstimatorTag::Ridge || kind.tag == EstimatorTag::Blup) {
        if (!solver) solver.emplace(d.x, d.y);
        f = solver->solve(kind);
      } else if (kind.tag == EstimatorTag::Marginal) {
        f = fit_marginal(d.x, d.y, marginal_form(cfg));
      } else {
        f = fit(kind, d.x, d.y);
      }
      MetricRow row = evaluate(cfg, d, f, kind.label(), parameter_of(kind), r);
      if (cfg.mse && !cfg.blocks) {
        const auto m = mse_decomposition(kind, d.x, d.beta_true, d.sigma_eps, cfg.spec,
                                          marginal_form(cfg));
        row.mse_total = m.total;
        row.bias_sq = m.bias_sq;
        row.variance = m.variance;
      }
      out.rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      out.failed = true;
      out.failures.push_back({r, kind.label(), e.what()});
    }
  }
  if (!cfg.meta_split.empty()) {
    try {
      out.rows.push_back(evaluate(cfg, d, meta_fit(cfg, d, r), kMetaLabel, kNaN, r));
    } catch (const std::exception& e) {
      out.failed = true;
      out.failures.push_back({r, kMetaLabel, e.what()});
    }
  }
  return out;
}

std::optional<MseTarget> mse_target_for(const std::string& label, double param, double omega) {
  if (label == "marginal") return MseTarget::marginal();
  if (label == "ridge") return MseTarget::ridge(param);
  if (label == "blup") return MseTarget::ridge(param * omega);
  if (label == "ridgeless" || label == "blupless") return MseTarget::ridgeless();
  if (label == "ols") return MseTarget::ols();
  return std::nullopt;
}

FormulaTag mse_tag(MseBranch b) {
  switch (b) {
    case MseBranch::Marginal: return FormulaTag::MseMarginal;
    case MseBranch::Ridge: return FormulaTag::MseRidge;
    case MseBranch::RidgeOptimal: return FormulaTag::MseRidgeOptimal;
    case MseBranch::Ridgeless: return FormulaTag::MseRidgeless;
    case MseBranch::Ols: return FormulaTag::MseOls;
  }
  return FormulaTag::MseMarginal;
}

}  // namespace

SpectralModel BlockCorrelation::spectrum() const {
  if (block_size < 1) throw DomainError("block size must be positive");
  if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("block correlation must be in [0, 1)");
  const double b = static_cast<double>(block_size);
  if (block_size == 1 || rho == 0.0) return SpectralModel::identity();
  return SpectralModel::point_masses({{1.0 + (b - 1.0) * rho, 1.0 / b}, {1.0 - rho, (b - 1.0) / b}});
}

SpectralModel BlockCorrelation::spectrum(Index p) const {
  const Index full = p / block_size, rest = p % block_size;
  if (rest == 0) return spectrum();
  if (rho == 0.0) return SpectralModel::identity();
  const double b = double(block_size), pp = double(p);
  std::vector<PointMass> atoms;
  if (full > 0) atoms.push_back({1.0 + (b - 1.0) * rho, double(full) / pp});
  atoms.push_back({1.0 + double(rest - 1) * rho, 1.0 / pp});
  const double small = double(full) * (b - 1.0) + double(rest - 1);
  if (small > 0.0) atoms.push_back({1.0 - rho, small / pp});
  return SpectralModel::point_masses(std::move(atoms));
}

SpectralModel SimConfig::population_spectrum() const {
  return blocks ? blocks->spectrum(p) : spec;
}

double SimConfig::effect_correlation() const {
  if (tm.rho) return *tm.rho;
  if (m_overlap == 0) return 0.0;
  return tm.phi * std::sqrt(double(m_beta) * double(m_eta)) / double(m_overlap);
}

void SimConfig::validate() const {
  if (n < 2 || n_z < 2 || p < 1) throw ConfigError("n and n_z must be >= 2 and p >= 1");
  if (m_beta < 1 || m_eta < 1)
    throw ConfigError("heritability is infeasible without causal features (m_beta, m_eta >= 1)");
  if (m_beta > p || m_eta > p) throw ConfigError("m_beta and m_eta must not exceed p");
  if (m_overlap < 0 || m_overlap > std::min(m_beta, m_eta))
    throw ConfigError("m_overlap must lie in [0, min(m_beta, m_eta)]");
  if (m_beta + m_eta - m_overlap > p)
    throw ConfigError("causal sets need m_beta + m_eta - m_overlap <= p");
  try {
    tm.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (!(tm.h2_beta > 0.0) || !(tm.h2_eta > 0.0))
    throw ConfigError("simulation needs positive heritabilities");
  const double w = double(p) / double(n);
  if (std::abs(w - tm.omega) > 1e-9 * std::max(1.0, w))
    throw ConfigError("omega = " + std::to_string(tm.omega) + " does not match p/n = " +
                      std::to_string(w));
  if (replicates < 1) throw ConfigError("replicates must be >= 1");
  const double rho = effect_correlation();
  if (!(std::abs(rho) <= 1.0 + 1e-12))
    throw ConfigError("phi is not attainable with the given causal overlap");
  if (m_overlap == 0 && tm.phi != 0.0 && !tm.rho)
    throw ConfigError("nonzero phi needs overlapping causal features");
  if (blocks) {
    if (blocks->block_size < 1) throw ConfigError("block size must be positive");
    if (!(blocks->rho >= 0.0 && blocks->rho < 1.0))
      throw ConfigError("block correlation must be in [0, 1)");
  } else if (spec.kind() == SpectralKind::Explicit && spec.atoms().size() != std::size_t(p)) {
    throw ConfigError("explicit spectrum size does not match p");
  }
  if (!meta_split.empty()) {
    Index total = 0;
    for (Index s : meta_split) {
      if (s < 1) throw ConfigError("meta study sizes must be positive");
      total += s;
    }
    if (total != n) throw ConfigError("meta study sizes must add up to n");
  }
}

std::mt19937_64 replicate_stream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t stream) {
  std::uint64_t s = seed;
  std::uint64_t k = splitmix64(s);
  s = k ^ (replicate * 0xd1b54a32d192ed03ULL);
  k = splitmix64(s);
  s = k ^ (stream * 0x8cb92ba72f3d8dd7ULL);
  std::seed_seq seq{splitmix64(s), splitmix64(s), splitmix64(s), splitmix64(s)};
  return std::mt19937_64(seq);
}

double noise_sd_for_heritability(double h2, Index m, Index p) {
  if (m < 1) throw ConfigError("heritability is infeasible without causal features");
  if (!(h2 > 0.0 && h2 <= 1.0)) throw ConfigError("heritability must be in (0, 1]");
  return std::sqrt(double(m) / double(p) * (1.0 - h2) / h2);
}

void apply_sigma_half(const SimConfig& cfg, MatrixXd& x) {
  if (cfg.blocks) {
    const double rho = cfg.blocks->rho;
    const double a = std::sqrt(1.0 - rho);
    for (Index s = 0; s < x.cols(); s += cfg.blocks->block_size) {
      const Index b = std::min(cfg.blocks->block_size, x.cols() - s);
      const double c = (std::sqrt(1.0 + (b - 1) * rho) - a) / double(b);
      auto blk = x.middleCols(s, b);
      const VectorXd rs = blk.rowwise().sum();
      blk *= a;
      blk.colwise() += c * rs;
    }
    return;
  }
  if (cfg.spec.is_identity()) return;
  const auto d = cfg.spec.expand(x.cols());
  for (Index j = 0; j < x.cols(); ++j) x.col(j) *= std::sqrt(d[j]);
}

VectorXd apply_sigma(const SimConfig& cfg, const VectorXd& v) {
  if (cfg.blocks) {
    const double rho = cfg.blocks->rho;
    VectorXd out(v.size());
    for (Index s = 0; s < v.size(); s += cfg.blocks->block_size) {
      const Index b = std::min(cfg.blocks->block_size, v.size() - s);
      out.segment(s, b) = ((1.0 - rho) * v.segment(s, b)).array() + rho * v.segment(s, b).sum();
    }
    return out;
  }
  if (cfg.spec.is_identity()) return v;
  const auto d = cfg.spec.expand(v.size());
  return v.cwiseProduct(Eigen::Map<const VectorXd>(d.data(), v.size()));
}

Dataset generate_dataset(const SimConfig& cfg, int replicate_index) {
  cfg.validate();
  const Index p = cfg.p;
  const std::uint64_t r = static_cast<std::uint64_t>(replicate_index);

  std::vector<Index> order(p);
  std::iota(order.begin(), order.end(), Index{0});
  if (needs_shuffled_causals(cfg)) {
    auto rng = replicate_stream(cfg.seed, r, kCausalOrder);
    std::shuffle(order.begin(), order.end(), rng);
  }
  const Index only_beta = cfg.m_beta - cfg.m_overlap;
  const Index only_eta = cfg.m_eta - cfg.m_overlap;
  const double rho = std::clamp(cfg.effect_correlation(), -1.0, 1.0);
  const double scale = 1.0 / std::sqrt(double(p));

  Dataset d;
  d.beta_true = VectorXd::Zero(p);
  d.eta_true = VectorXd::Zero(p);
  Sampler eff(replicate_stream(cfg.seed, r, kEffects), cfg.effect_dist);
  for (Index k = 0; k < cfg.m_beta; ++k) d.beta_true(order[k]) = scale * eff();
  for (Index k = only_beta; k < cfg.m_beta; ++k) {
    const double b = eff();
    d.eta_true(order[k]) = rho * d.beta_true(order[k]) + std::sqrt(1.0 - rho * rho) * scale * b;
  }
  for (Index k = cfg.m_beta; k < cfg.m_beta + only_eta; ++k) d.eta_true(order[k]) = scale * eff();

  d.sigma_eps = noise_sd_for_heritability(cfg.tm.h2_beta, cfg.m_beta, p);
  d.sigma_eps_z = noise_sd_for_heritability(cfg.tm.h2_eta, cfg.m_eta, p);

  d.x = design(cfg, cfg.n, replicate_stream(cfg.seed, r, kDesignX));
  d.z = design(cfg, cfg.n_z, replicate_stream(cfg.seed, r, kDesignZ));
  d.y = d.x * d.beta_true +
        d.sigma_eps * Sampler(replicate_stream(cfg.seed, r, kNoiseY), Distribution::Gaussian)
                          .vector(cfg.n);
  d.y_z = d.z * d.eta_true +
          d.sigma_eps_z * Sampler(replicate_stream(cfg.seed, r, kNoiseZ), Distribution::Gaussian)
                              .vector(cfg.n_z);

  const VectorXd sb = apply_sigma(cfg, d.beta_true);
  const VectorXd se = apply_sigma(cfg, d.eta_true);
  const double vb = d.beta_true.dot(sb), ve = d.eta_true.dot(se);
  d.realized_h2_beta = vb / (vb + d.sigma_eps * d.sigma_eps);
  d.realized_h2_eta = ve / (ve + d.sigma_eps_z * d.sigma_eps_z);
  d.realized_phi = (vb > 0.0 && ve > 0.0) ? d.beta_true.dot(se) / std::sqrt(vb * ve) : 0.0;
  return d;
}

Dispersion dispersion(const std::vector<double>& values) {
  Dispersion out;
  double sum = 0.0;
  for (double v : values)
    if (!std::isnan(v)) {
      sum += v;
      ++out.count;
    }
  if (out.count == 0) {
    out.mean = out.sd = out.se = kNaN;
    return out;
  }
  out.mean = sum / out.count;
  double ss = 0.0;
  for (double v : values)
    if (!std::isnan(v)) ss += (v - out.mean) * (v - out.mean);
  out.sd = out.count > 1 ? std::sqrt(ss / (out.count - 1)) : 0.0;
  out.se = out.sd / std::sqrt(double(out.count));
  return out;
}

std::vector<MetricSummary> summarize(const std::vector<MetricRow>& rows) {
  struct Group {
    std::string estimator;
    double param;
    std::vector<double> a2, e2, mse, bias, var;
  };
  std::vector<Group> groups;
  for (const auto& row : rows) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.estimator == row.estimator && same_parameter(g.param, row.lambda_or_tau);
    });
    if (it == groups.end()) {
      groups.push_back({row.estimator, row.lambda_or_tau, {}, {}, {}, {}, {}});
      it = groups.end() - 1;
    }
    it->a2.push_back(row.a2);
    it->e2.push_back(row.e2);
    it->mse.push_back(row.mse_total);
    it->bias.push_back(row.bias_sq);
    it->var.push_back(row.variance);
  }
  std::vector<MetricSummary> out;
  for (const auto& g : groups)
    out.push_back({g.estimator, g.param, dispersion(g.a2), dispersion(g.e2), dispersion(g.mse),
                   dispersion(g.bias), dispersion(g.var)});
  return out;
}

unsigned worker_threads() {
  if (const char* env = std::getenv("RIDGEPRED_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

SimulationResult run_replicates(const SimConfig& cfg) {
  cfg.validate();
  SimulationResult result;
  if (cfg.estimators.empty() && cfg.meta_split.empty()) return result;

  std::vector<ReplicateOutput> outputs(cfg.replicates);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < cfg.replicates; r = next++) outputs[r] = run_one(cfg, r);
  };
  const unsigned threads = std::min<unsigned>(worker_threads(), cfg.replicates);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  int failed = 0;
  for (auto& o : outputs) {
    failed += o.failed ? 1 : 0;
    result.realized_h2_beta.push_back(o.realized_h2);
    for (auto& row : o.rows) result.rows.push_back(std::move(row));
    for (auto& f : o.failures) result.failures.push_back(std::move(f));
  }
  if (10 * failed > cfg.replicates) {
    std::string msg = std::to_string(failed) + " of " + std::to_string(cfg.replicates) +
                      " replicates failed";
    if (!result.failures.empty()) msg += "; first failure: " + result.failures.front().message;
    throw PartialFailureError(msg);
  }
  result.summary = summarize(result.rows);
  return result;
}

bool LimitComparisonReport::all_pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const LimitComparison& e) {
    return e.status != ComparisonStatus::Fail;
  });
}

std::string to_string(ComparisonStatus s) {
  switch (s) {
    case ComparisonStatus::Pass: return "pass";
    case ComparisonStatus::Fail: return "fail";
    case ComparisonStatus::NotApplicable: return "n/a";
  }
  return "unknown";
}

ComparisonOptions comparison_options_for(const SimConfig& cfg) {
  ComparisonOptions o;
  if (cfg.mse) o.m_sigma = double(cfg.m_beta) / double(cfg.p);
  for (Index s : cfg.meta_split) o.meta_study_ns.push_back(double(s));
  if (cfg.meta_weighting == MetaWeighting::Optimal)
    o.meta_weights = o.meta_study_ns;
  else
    o.meta_weights.assign(cfg.meta_split.size(), 1.0);
  o.p = double(cfg.p);
  return o;
}

LimitComparisonReport compare_to_limits(const std::vector<MetricRow>& rows, const TraitModel& tm,
                                        const SpectralModel& spec, const ComparisonOptions& opts) {
  if (rows.empty()) throw ContractError("no metric rows to compare");
  TraitModel t = tm;
  if (opts.m_sigma) t.sigma_eps = std::sqrt(*opts.m_sigma * (1.0 - t.h2_beta) / t.h2_beta);

  LimitComparisonReport report;
  auto add = [&](const MetricSummary& s, const std::string& metric, const Dispersion& emp,
                 auto&& limit_fn, bool relative) {
    if (emp.count == 0) return;
    LimitComparison c;
    c.estimator = s.estimator;
    c.lambda_or_tau = s.lambda_or_tau;
    c.metric = metric;
    c.empirical_mean = emp.mean;
    c.empirical_se = emp.se;
    c.tolerance = relative ? opts.mse_relative_tolerance : opts.r2_tolerance;
    try {
      const std::optional<LimitValue> lv = limit_fn();
      if (!lv) {
        c.limit = kNaN;
        c.status = ComparisonStatus::NotApplicable;
        c.note = "no limit for this estimator";
      } else {
        c.limit = lv->value;
        c.gap = std::abs(emp.mean - c.limit);
        if (relative) c.gap /= std::abs(c.limit);
        c.status = c.gap < c.tolerance ? ComparisonStatus::Pass : ComparisonStatus::Fail;
        if (lv->extrapolated) c.note = "extrapolated";
      }
    } catch (const Error& e) {
      c.limit = kNaN;
      c.gap = kNaN;
      c.status = ComparisonStatus::NotApplicable;
      c.note = e.what();
    }
    report.entries.push_back(std::move(c));
  };

  const auto pop = spec.moments();
  for (const auto& s : summarize(rows)) {
    const std::string& e = s.estimator;
    const double lam = s.lambda_or_tau;
    add(s, "a2", s.a2, [&]() -> std::optional<LimitValue> {
      if (e == "marginal") return limit_marginal(t, pop).a2;
      if (e == "ridge") return limit_ridge_out(t, spec, lam);
      if (e == "blup") return limit_blup_out(t, spec, lam);
      if (e == "ridgeless" || e == "blupless") return limit_ridgeless(t, spec);
      if (e == "ols") return limit_ols(t);
      if (e == kMetaLabel)
        return limit_meta(t, pop, opts.meta_study_ns, opts.meta_weights, opts.p).a2;
      return std::nullopt;
    }, false);
    add(s, "e2", s.e2, [&]() -> std::optional<LimitValue> {
      if (e == "marginal") return limit_marginal(t, pop).e2;
      if (e == "ridge") return limit_ridge_in(t, spec, lam);
      if (e == "blup") return limit_ridge_in(t, spec, lam * t.omega);
      if (e == "ridgeless" || e == "blupless") return limit_ridgeless_in(t);
      if (e == "ols") return limit_ols_in(t);
      if (e == kMetaLabel)
        return limit_meta(t, pop, opts.meta_study_ns, opts.meta_weights, opts.p).e2;
      return std::nullopt;
    }, false);
    if (opts.m_sigma) {
      add(s, "mse", s.mse_total, [&]() -> std::optional<LimitValue> {
        const auto target = mse_target_for(e, lam, t.omega);
        if (!target) return std::nullopt;
        const auto m = mse_limits(t, spec, *opts.m_sigma, *target);
        return LimitValue{m.total, mse_tag(target->branch), std::nullopt, false};
      }, true);
    }
  }
  return report;
}

}  // namespace ridgepred
