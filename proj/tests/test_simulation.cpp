#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "ridgepred/errors.hpp"
#include "ridgepred/simulation.hpp"

using namespace ridgepred;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

SimConfig small_config(Eigen::Index n, Eigen::Index p, double h2 = 0.8) {
  SimConfig c;
  c.n = n;
  c.n_z = n;
  c.p = p;
  c.m_beta = c.m_eta = c.m_overlap = (4 * p) / 5;
  c.tm.h2_beta = c.tm.h2_eta = h2;
  c.tm.phi = 1.0;
  c.tm.omega = c.tm.omega_z = double(p) / double(n);
  c.replicates = 10;
  c.seed = 42;
  return c;
}

bool identical(const MatrixXd& a, const MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

struct ThreadsEnv {
  explicit ThreadsEnv(const char* v) { setenv("RIDGEPRED_THREADS", v, 1); }
  ~ThreadsEnv() { unsetenv("RIDGEPRED_THREADS"); }
};

}  // namespace

TEST_CASE("generate_dataset is deterministic per (seed, replicate)") {
  auto c = small_config(60, 90);
  const auto a = generate_dataset(c, 3), b = generate_dataset(c, 3), other = generate_dataset(c, 4);
  CHECK(identical(a.x, b.x));
  CHECK(identical(a.z, b.z));
  CHECK(identical(a.y, b.y));
  CHECK(identical(a.y_z, b.y_z));
  CHECK(identical(a.beta_true, b.beta_true));
  CHECK_FALSE(identical(a.x, other.x));
  c.seed = 43;
  CHECK_FALSE(identical(a.x, generate_dataset(c, 3).x));

  // Columns standardized, same-trait effects coincide.
  CHECK(a.x.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
  CHECK(((a.z.colwise().squaredNorm() / 60.0).array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(identical(a.beta_true, a.eta_true));
  CHECK((a.beta_true.head(72).array() != 0.0).all());
  CHECK(a.beta_true.tail(18).isZero(0.0));
}

TEST_CASE("realized heritability and effect overlap") {
  auto c = small_config(50, 500);
  std::vector<double> h2;
  for (int r = 0; r < 100; ++r) h2.push_back(generate_dataset(c, r).realized_h2_beta);
  const auto d = dispersion(h2);
  CHECK(std::abs(d.mean - 0.8) < 0.02);
  CHECK(std::abs(d.mean - 0.8) < 3.0 * d.se + 0.005);

  c.m_beta = 100;
  c.m_eta = 80;
  c.m_overlap = 30;
  c.tm.phi = 0.3;
  c.spec = SpectralModel::point_masses({{0.5, 0.5}, {1.5, 0.5}});
  std::vector<double> phi;
  for (int r = 0; r < 60; ++r) {
    const auto ds = generate_dataset(c, r);
    const auto both = (ds.beta_true.array() != 0.0 && ds.eta_true.array() != 0.0).count();
    CHECK(both == 30);
    CHECK((ds.beta_true.array() != 0.0).count() == 100);
    CHECK((ds.eta_true.array() != 0.0).count() == 80);
    phi.push_back(ds.realized_phi);
  }
  CHECK(std::abs(dispersion(phi).mean - 0.3) < 0.05);
  c.tm.phi = 0.9;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("block correlation square root") {
  SimConfig c = small_config(40, 40);
  c.blocks = BlockCorrelation{20, 0.8};
  MatrixXd s = MatrixXd::Identity(40, 40);
  apply_sigma_half(c, s);
  MatrixXd sigma = MatrixXd::Identity(40, 40);
  for (int b = 0; b < 2; ++b)
    sigma.block(20 * b, 20 * b, 20, 20) = 0.2 * MatrixXd::Identity(20, 20) +
                                          0.8 * MatrixXd::Ones(20, 20);
  CHECK((s - s.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((s * s - sigma).cwiseAbs().maxCoeff() < 1e-12);
  const VectorXd v = VectorXd::LinSpaced(40, -1.0, 2.0);
  CHECK((apply_sigma(c, v) - sigma * v).cwiseAbs().maxCoeff() < 1e-12);

  const auto sp = c.population_spectrum();
  CHECK(sp.moments().b1 == doctest::Approx(1.0));
  CHECK(sp.moments().b2 == doctest::Approx(sigma.squaredNorm() / 40.0));

  // Trailing partial block.
  c.p = c.n = 50;
  c.tm.omega = c.tm.omega_z = 1.0;
  MatrixXd s50 = MatrixXd::Identity(50, 50);
  apply_sigma_half(c, s50);
  MatrixXd sigma50 = MatrixXd::Identity(50, 50);
  for (int b = 0; b < 3; ++b) {
    const int len = b < 2 ? 20 : 10;
    sigma50.block(20 * b, 20 * b, len, len) =
        0.2 * MatrixXd::Identity(len, len) + 0.8 * MatrixXd::Ones(len, len);
  }
  CHECK((s50 * s50 - sigma50).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sigma50);
  std::vector<double> eig(es.eigenvalues().data(), es.eigenvalues().data() + 50);
  const auto m = esd_moments_from_eigenvalues(eig);
  const auto pm = c.population_spectrum().moments();
  CHECK(pm.b1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pm.b2 == doctest::Approx(m.b2).epsilon(1e-10));
  CHECK(pm.b3 == doctest::Approx(m.b3).epsilon(1e-10));
  c.blocks->rho = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("quadratic-form concentration at n = p = 1000") {
  auto c = small_config(1000, 1000);
  c.m_beta = c.m_eta = c.m_overlap = 1000;
  c.n_z = 2;
  // Gaussian effects add chi-square noise in ||beta||^2 (relative sd sqrt(4/p) = 0.063),
  // which alone puts ~12% of ratios outside the band; Rademacher effects give sd 0.045.
  c.effect_dist = Distribution::Rademacher;
  int inside = 0;
  for (int r = 0; r < 100; ++r) {
    const auto d = generate_dataset(c, r);
    const double quad = (d.x * d.beta_true).squaredNorm() / 1000.0;
    const double trace = d.x.squaredNorm() / 1000.0 / 1000.0;  // sigma_beta^2 tr(Sigma_hat)
    const double ratio = quad / trace;
    inside += (ratio >= 0.9 && ratio <= 1.1) ? 1 : 0;
  }
  CHECK(inside >= 95);
}

TEST_CASE("config validation") {
  auto c = small_config(100, 200);
  CHECK_NOTHROW(c.validate());
  auto bad = c;
  bad.tm.omega = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.m_beta = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(noise_sd_for_heritability(0.5, 0, 100), ConfigError);
  bad = c;
  bad.m_overlap = 170;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.m_beta = 200;
  bad.m_eta = 200;
  bad.m_overlap = 100;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.meta_split = {30, 60};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(noise_sd_for_heritability(0.8, 80, 100) == doctest::Approx(std::sqrt(0.8 * 0.25)));
}

TEST_CASE("run_replicates") {
  SUBCASE("no estimators") {
    auto c = small_config(50, 100);
    const auto r = run_replicates(c);
    CHECK(r.rows.empty());
    CHECK(r.summary.empty());
  }
  SUBCASE("marginal limit at omega = 4 and thread invariance") {
    auto c = small_config(400, 1600);
    c.replicates = 12;
    c.estimators = {EstimatorKind::marginal(), EstimatorKind::ridge(1.0)};
    SimulationResult serial, parallel;
    {
      ThreadsEnv env("1");
      serial = run_replicates(c);
    }
    {
      ThreadsEnv env("3");
      parallel = run_replicates(c);
    }
    REQUIRE(serial.rows.size() == 24);
    REQUIRE(parallel.rows.size() == 24);
    for (std::size_t k = 0; k < serial.rows.size(); ++k) {
      CHECK(serial.rows[k].replicate == int(k / 2));
      CHECK(serial.rows[k].estimator == parallel.rows[k].estimator);
      CHECK(serial.rows[k].a2 == parallel.rows[k].a2);
      CHECK(serial.rows[k].e2 == parallel.rows[k].e2);
    }
    REQUIRE(serial.summary.size() == 2);
    CHECK(serial.summary[0].estimator == "marginal");
    CHECK(std::isnan(serial.summary[0].lambda_or_tau));
    CHECK(serial.summary[1].lambda_or_tau == 1.0);
    CHECK(serial.summary[0].a2.count == 12);

    const auto report =
        compare_to_limits(serial.rows, c.tm, c.population_spectrum(), comparison_options_for(c));
    REQUIRE(report.entries.size() == 4);
    for (const auto& e : report.entries) {
      INFO(e.estimator, " ", e.metric, " ", e.empirical_mean, " vs ", e.limit);
      CHECK(e.status == ComparisonStatus::Pass);
    }
    CHECK(report.entries[0].limit == doctest::Approx(0.64 / 4.8));
    ComparisonOptions zero;
    zero.r2_tolerance = 0.0;
    for (const auto& e : compare_to_limits(serial.rows, c.tm, c.spec, zero).entries)
      CHECK(e.status == ComparisonStatus::Fail);
  }
  SUBCASE("ridge-less interpolates in sample") {
    auto c = small_config(150, 300, 0.5);
    c.replicates = 4;
    c.estimators = {EstimatorKind::ridgeless()};
    const auto r = run_replicates(c);
    CHECK(r.summary.at(0).e2.mean > 0.999);
  }
  SUBCASE("meta rows equal the pooled marginal rows under d*") {
    auto c = small_config(100, 300);
    c.replicates = 3;
    c.estimators = {EstimatorKind::marginal()};
    c.meta_split = {20, 80};
    const auto r = run_replicates(c);
    REQUIRE(r.rows.size() == 6);
    for (int k = 0; k < 3; ++k) {
      CHECK(r.rows[2 * k + 1].estimator == kMetaLabel);
      CHECK(std::abs(r.rows[2 * k].a2 - r.rows[2 * k + 1].a2) < 1e-10);
    }
    c.meta_weighting = MetaWeighting::Equal;
    const auto eq = run_replicates(c);
    CHECK(std::abs(eq.rows[0].a2 - eq.rows[1].a2) > 1e-8);
  }
  SUBCASE("failures above 10% abort the run") {
    auto c = small_config(50, 100);
    c.estimators = {EstimatorKind::ols()};
    CHECK_THROWS_AS(run_replicates(c), PartialFailureError);
  }
  SUBCASE("MSE rows against their limits") {
    auto c = small_config(400, 200, 0.5);
    c.replicates = 4;
    c.mse = true;
    c.in_sample = false;
    c.estimators = {EstimatorKind::marginal(), EstimatorKind::ols(), EstimatorKind::ridge(0.5)};
    const auto r = run_replicates(c);
    const auto report =
        compare_to_limits(r.rows, c.tm, c.spec, comparison_options_for(c));
    int mse_entries = 0;
    for (const auto& e : report.entries) {
      if (e.metric != "mse") continue;
      ++mse_entries;
      INFO(e.estimator, " ", e.empirical_mean, " vs ", e.limit);
      CHECK(e.status == ComparisonStatus::Pass);
    }
    CHECK(mse_entries == 3);
  }
}

TEST_CASE("compare_to_limits marks missing branches not applicable") {
  TraitModel tm;
  tm.h2_beta = tm.h2_eta = 0.8;
  tm.omega = tm.omega_z = 2.0;
  std::vector<MetricRow> rows{{"ols", std::nan(""), 0, 0.1, std::nan(""), std::nan(""),
                               std::nan(""), std::nan("")}};
  const auto rep = compare_to_limits(rows, tm, SpectralModel::identity());
  REQUIRE(rep.entries.size() == 1);
  CHECK(rep.entries[0].status == ComparisonStatus::NotApplicable);
  CHECK(rep.all_pass());
  CHECK_THROWS_AS(compare_to_limits({}, tm, SpectralModel::identity()), ContractError);
}
