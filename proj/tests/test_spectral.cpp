#include <doctest.h>

#include <chrono>
#include <cmath>

#include "oracles.hpp"
#include "ridgepred/errors.hpp"
#include "ridgepred/spectral.hpp"

using namespace ridgepred;

namespace {

SpectralModel two_point() { return SpectralModel::point_masses({{0.5, 0.5}, {1.5, 0.5}}); }

const double kOmegas[] = {0.1, 0.5, 1.0, 2.0, 8.0};
const double kLambdas[] = {0.01, 0.1, 1.0, 10.0};

}  // namespace

TEST_CASE("closed form at omega=1, lambda=1 is the golden ratio conjugate") {
  const auto t = mp_stieltjes_closed(1.0, 1.0);
  CHECK(t.v == doctest::Approx((std::sqrt(5.0) - 1.0) / 2.0).epsilon(1e-15));
  CHECK(t.at == -1.0);
  CHECK(t.aspect == Aspect::Primal);
}

TEST_CASE("closed form degenerates to a point mass as omega -> 0") {
  CHECK(mp_stieltjes_closed(1e-10, 1.0).v == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(mp_stieltjes_closed(1e-10, 1.0).v_prime == doctest::Approx(0.25).epsilon(1e-8));
}

TEST_CASE("closed form agrees with a simulated Wishart trace") {
  std::mt19937_64 rng(11);
  const auto x = oracle::gaussian_matrix(2000, 2000, rng);
  const auto eig = oracle::sample_cov_eigenvalues(x);
  const double mc = (1.0 / (eig.array() + 1.0)).mean();
  CHECK(std::abs(mc - mp_stieltjes_closed(1.0, 1.0).v) < 1e-2);
}

TEST_CASE("closed-form derivative matches finite differences") {
  for (double w : kOmegas)
    for (double l : kLambdas) {
      const double h = 1e-5 * l;
      const double fd = (mp_stieltjes_closed(w, l - h).v - mp_stieltjes_closed(w, l + h).v) / (2 * h);
      CHECK(mp_stieltjes_closed(w, l).v_prime == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(mp_stieltjes_closed(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(mp_stieltjes_closed(1.0, -1.0), DomainError);
  CHECK_THROWS_AS(mp_density(1.0, -0.1), DomainError);
  CHECK_THROWS_AS(esd_moments_from_eigenvalues({}), DomainError);
  CHECK_THROWS_AS(SpectralModel::point_masses({{0.5, 0.5}, {1.5, 0.4}}), DomainError);
  CHECK_THROWS_AS(SpectralModel::point_masses({{2.0, 1.0}}), DomainError);
  CHECK_THROWS_AS(SpectralModel::explicit_eigenvalues({1.0, -1.0}), DomainError);
}

TEST_CASE("companion relation") {
  SUBCASE("omega = 1 collapses") {
    const auto g = mp_stieltjes_closed(1.0, 0.7);
    const auto v = companion_from_primal(1.0, g);
    CHECK(v.v == doctest::Approx(g.v).epsilon(1e-15));
    CHECK(v.v_prime == doctest::Approx(g.v_prime).epsilon(1e-15));
    CHECK(v.aspect == Aspect::Companion);
  }
  SUBCASE("plug-in example") {
    TransformValue g;
    g.v = 0.5;
    g.at = -1.0;
    CHECK(companion_from_primal(2.0, g).v == doctest::Approx(0.0));
  }
  SUBCASE("wrong aspect") {
    auto v = companion_from_primal(2.0, mp_stieltjes_closed(2.0, 1.0));
    CHECK_THROWS_AS(companion_from_primal(2.0, v), ContractError);
  }
  SUBCASE("closed form satisfies the companion M-P equation") {
    for (double w : {0.3, 1.0, 2.0, 8.0})
      for (double l : {0.1, 1.0, 10.0}) {
        const auto v = companion_from_primal(w, mp_stieltjes_closed(w, l));
        // Identity law: 1/v = lambda + omega/(1+v).
        CHECK(std::abs(1.0 / v.v - l - w / (1.0 + v.v)) * v.v < 1e-12);
        const auto st = companion_state(SpectralModel::identity(), w, l);
        CHECK(st.v == doctest::Approx(v.v).epsilon(1e-12));
        CHECK(st.v_prime == doctest::Approx(v.v_prime).epsilon(1e-9));
      }
  }
  SUBCASE("Monte-Carlo trace at omega = 4") {
    std::mt19937_64 rng(5);
    const auto x = oracle::gaussian_matrix(500, 2000, rng);
    const auto eig = oracle::sample_cov_eigenvalues(x);  // 500 companion eigenvalues
    const double mc = (1.0 / (eig.array() + 1.0)).mean();
    const auto v = companion_from_primal(4.0, mp_stieltjes_closed(4.0, 1.0));
    CHECK(std::abs(mc - v.v) < 2e-2);
  }
}

TEST_CASE("fixed-point solver reproduces the closed form on a 20-point grid") {
  const auto start = std::chrono::steady_clock::now();
  for (double w : kOmegas)
    for (double l : kLambdas) {
      const auto c = mp_stieltjes_closed(w, l);
      const auto f = solve_mp_fixed_point(SpectralModel::identity(), w, l);
      const auto pm = solve_mp_fixed_point(SpectralModel::point_masses({{1.0, 1.0}}), w, l);
      CHECK(std::abs(f.v - c.v) <= 1e-10 * c.v);
      CHECK(std::abs(f.v_prime - c.v_prime) <= 1e-10 * c.v_prime);
      CHECK(pm.v == doctest::Approx(f.v).epsilon(1e-14));
      CHECK(f.residual < 1e-10);
      CHECK_FALSE(f.derivative_by_finite_difference);
    }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(secs < 1.0);
}

TEST_CASE("fixed-point solver on a two-point law") {
  const auto h = two_point();
  SUBCASE("agrees with plain damped iteration where that contracts") {
    const std::vector<std::pair<double, double>> atoms = {{0.5, 0.5}, {1.5, 0.5}};
    for (double w : {0.1, 0.5})
      for (double l : {0.1, 1.0, 10.0}) {
        const double ref = oracle::damped_fixed_point(atoms, w, l);
        CHECK(solve_mp_fixed_point(h, w, l).v == doctest::Approx(ref).epsilon(1e-12));
      }
  }
  SUBCASE("derivative matches finite differences of the solver") {
    for (double w : {0.5, 2.0, 8.0})
      for (double l : {0.01, 1.0}) {
        const double d = 1e-5 * l;
        const double fd =
            (solve_mp_fixed_point(h, w, l - d).v - solve_mp_fixed_point(h, w, l + d).v) / (2 * d);
        CHECK(solve_mp_fixed_point(h, w, l).v_prime == doctest::Approx(fd).epsilon(1e-6));
      }
  }
  SUBCASE("Monte-Carlo trace at n=1000, p=2000, lambda=0.5") {
    std::mt19937_64 rng(17);
    auto x = oracle::gaussian_matrix(1000, 2000, rng);
    for (Eigen::Index j = 0; j < 1000; ++j) x.col(j) *= std::sqrt(0.5);
    for (Eigen::Index j = 1000; j < 2000; ++j) x.col(j) *= std::sqrt(1.5);
    const auto eig = oracle::sample_cov_eigenvalues(x);
    const double lambda = 0.5;
    const double mc = ((1.0 / (eig.array() + lambda)).sum() + (2000 - 1000) / lambda) / 2000.0;
    CHECK(std::abs(mc - solve_mp_fixed_point(h, 2.0, lambda).v) < 2e-2);
  }
  SUBCASE("companion relation holds within tolerance") {
    for (double w : {0.3, 1.0, 2.0, 8.0})
      for (double l : {0.1, 1.0, 10.0}) {
        const auto g = solve_mp_fixed_point(h, w, l);
        const auto st = companion_state(h, w, l);
        const auto v = companion_from_primal(w, g);
        CHECK(std::abs(v.v - st.v) <= 1e-10 * (1.0 + 1.0 / l));
      }
  }
}

TEST_CASE("v(0+) by direct solve matches Richardson extrapolation") {
  for (const auto& h : {SpectralModel::identity(), two_point()})
    for (double w : {2.0, 4.0, 8.0}) {
      const auto z = companion_state(h, w, 0.0);
      auto v_at = [&](double l) { return companion_state(h, w, l).v; };
      // Second-order Richardson over lambda in {4e-4, 2e-4, 1e-4}.
      const double a = v_at(4e-4), b = v_at(2e-4), c = v_at(1e-4);
      const double r1 = 2 * b - a, r2 = 2 * c - b;
      const double rich = (4 * r2 - r1) / 3;
      CHECK(z.v == doctest::Approx(rich).epsilon(1e-8));
      if (h.is_identity()) {
        CHECK(z.v == doctest::Approx(1.0 / (w - 1.0)).epsilon(1e-14));
        CHECK(z.v_prime == doctest::Approx(w / std::pow(w - 1.0, 3)).epsilon(1e-12));
      }
    }
  CHECK_THROWS_AS(companion_state(SpectralModel::identity(), 0.5, 0.0), DomainError);
}

TEST_CASE("g(-lambda) is strictly decreasing in lambda") {
  for (const auto& h : {SpectralModel::identity(), two_point()})
    for (double w : {0.5, 1.0, 4.0}) {
      double prev = INFINITY;
      for (double l = 1e-3; l < 1e3; l *= 1.5) {
        const double g = solve_mp_fixed_point(h, w, l).v;
        CHECK(g < prev);
        prev = g;
      }
    }
}

TEST_CASE("M-P density") {
  CHECK(mp_support(1.0).first == doctest::Approx(0.0));
  CHECK(mp_support(1.0).second == doctest::Approx(4.0));
  CHECK(mp_support(4.0).first == doctest::Approx(1.0));
  CHECK(mp_support(4.0).second == doctest::Approx(9.0));
  CHECK(mp_point_mass(4.0) == doctest::Approx(0.75));
  CHECK(mp_point_mass(1.0) == 0.0);
  CHECK(mp_density(2.0, 10.0) == 0.0);
  CHECK(mp_density(2.0, 0.1) == 0.0);
  for (double w : {0.5, 2.0, 8.0}) {
    const auto [lo, hi] = mp_support(w);
    // x = lo + (hi-lo)(1-cos th)/2 removes the square-root edge behaviour.
    const double mass = oracle::integrate(
        [&](double th) {
          const double x = lo + (hi - lo) * (1.0 - std::cos(th)) / 2.0;
          return mp_density(w, x) * (hi - lo) * std::sin(th) / 2.0;
        },
        0.0, M_PI, 400);
    CHECK(std::abs(mass + mp_point_mass(w) - 1.0) < 1e-6);
  }
}

TEST_CASE("moment maps") {
  const SpectralMoments id{1, 1, 1, MomentSource::Population};
  const auto s = moment_map_forward(id, 2.0);
  CHECK(s.b1 == 1.0);
  CHECK(s.b2 == doctest::Approx(3.0));
  CHECK(s.b3 == doctest::Approx(11.0));
  CHECK(s.source == MomentSource::Sample);
  const auto s2 = moment_map_forward({1, 1.2, 1.6, MomentSource::Population}, 1.0);
  CHECK(s2.b2 == doctest::Approx(2.2));
  CHECK(s2.b3 == doctest::Approx(6.2));
  const auto s0 = moment_map_forward({1, 1.2, 1.6, MomentSource::Population}, 0.0);
  CHECK(s0.b3 == doctest::Approx(1.6));

  const auto back = moment_map_inverse(s, 2.0);
  CHECK(back.b2 == doctest::Approx(1.0));
  CHECK(back.b3 == doctest::Approx(1.0));
  CHECK_THROWS_AS(moment_map_inverse(id, 2.0), ContractError);
  CHECK_THROWS_AS(moment_map_forward(s, 2.0), ContractError);
  CHECK_THROWS_AS(moment_map_inverse({1, 1.5, 3, MomentSource::Sample}, 2.0),
                  InfeasiblePanelError);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    SpectralMoments p{1.0, 1.0 + u(rng), 0, MomentSource::Population};
    p.b3 = p.b2 * p.b2 * (1.0 + u(rng));
    const double w = 10.0 * u(rng);
    const auto r = moment_map_inverse(moment_map_forward(p, w), w);
    CHECK(std::abs(r.b2 - p.b2) < 1e-12 * (1 + w * w));
    CHECK(std::abs(r.b3 - p.b3) < 1e-12 * (1 + w * w * w));
  }
}

TEST_CASE("simulated sample moments follow the forward map") {
  std::mt19937_64 rng(23);
  auto x = oracle::gaussian_matrix(1000, 2000, rng);
  auto check = [](const Eigen::VectorXd& eig, const SpectralMoments& target) {
    std::vector<double> e(eig.data(), eig.data() + eig.size());
    e.resize(2000, 0.0);
    const auto m = esd_moments_from_eigenvalues(e);
    CHECK(m.b1 == doctest::Approx(target.b1).epsilon(0.02));
    CHECK(m.b2 == doctest::Approx(target.b2).epsilon(0.02));
    CHECK(m.b3 == doctest::Approx(target.b3).epsilon(0.02));
  };
  check(oracle::sample_cov_eigenvalues(x), moment_map_forward(SpectralModel::identity().moments(), 2.0));
  for (Eigen::Index j = 0; j < 1000; ++j) x.col(j) *= std::sqrt(0.5);
  for (Eigen::Index j = 1000; j < 2000; ++j) x.col(j) *= std::sqrt(1.5);
  check(oracle::sample_cov_eigenvalues(x), moment_map_forward(two_point().moments(), 2.0));
}

TEST_CASE("empirical spectral moments") {
  auto m = esd_moments_from_eigenvalues({1, 1, 1, 1});
  CHECK(m.b2 == 1.0);
  m = esd_moments_from_eigenvalues({0.5, 1.5});
  CHECK(m.b1 == 1.0);
  CHECK(m.b2 == 1.25);
  CHECK(m.b3 == 1.75);
  m = esd_moments_from_eigenvalues({2, 0, 0, 2});
  CHECK(m.b2 == 2.0);
  CHECK(m.b3 == 4.0);
  CHECK(m.source == MomentSource::Sample);
}

TEST_CASE("spectral model") {
  const auto h = two_point();
  const auto m = h.moments();
  CHECK(m.b2 == doctest::Approx(1.25));
  CHECK(m.b3 == doctest::Approx(1.75));
  CHECK(m.satisfies_ordering());
  CHECK(SpectralModel::point_masses({{1.0, 1.0}}).is_identity());
  CHECK_FALSE(h.is_identity());
  const auto d = h.expand(5);
  REQUIRE(d.size() == 5);
  CHECK(d[0] == 0.5);
  CHECK(d[4] == 1.5);
  CHECK_THROWS_AS(SpectralModel::explicit_eigenvalues({0.5, 1.5}).expand(3), UnsupportedSigmaError);
  CHECK(SpectralModel::explicit_eigenvalues({0.5, 1.5}).dimension_hint().value() == 2);
}
