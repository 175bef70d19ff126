#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "ridgepred/accuracy.hpp"
#include "ridgepred/cli.hpp"
#include "ridgepred/errors.hpp"
#include "ridgepred/io.hpp"
#include "ridgepred/simulation.hpp"

using namespace ridgepred;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ridgepred");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  CliResult r;
  r.code = main_entry(int(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ridgepred_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json load_json(const fs::path& p) { return json::parse(read_text_file(p)); }

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = read_text_file(e.path());
  return out;
}

const json& estimator(const json& config, const std::string& token) {
  for (const auto& e : config["estimators"])
    if (e["token"] == token) return e;
  throw std::runtime_error("missing estimator " + token);
}

}  // namespace

TEST_CASE("estimator tokens") {
  TraitModel tm;
  tm.h2_beta = tm.h2_eta = 0.8;
  tm.omega = tm.omega_z = 4.0;
  CHECK(parse_estimator_token("marginal", 500, tm).kind == EstimatorKind::marginal());
  CHECK(parse_estimator_token("meta", 500, tm).meta);
  CHECK(parse_estimator_token("ridge:opt", 500, tm).kind.parameter == doctest::Approx(1.0));
  CHECK(parse_estimator_token("ridge:opt*n2", 500, tm).kind.parameter == doctest::Approx(250000.0));
  CHECK(parse_estimator_token("ridge:opt/n", 500, tm).kind.parameter == doctest::Approx(0.002));
  CHECK(parse_estimator_token("blup:opt", 500, tm).kind ==
        EstimatorKind::blup(optimal_lambda(tm).tau));
  CHECK(parse_estimator_token("ridge:0.3", 500, tm).kind == EstimatorKind::ridge(0.3));
  CHECK(parse_estimator_token("ols", 500, tm).kind == EstimatorKind::ols());
  CHECK_THROWS_AS(parse_estimator_token("ridge:opt*n3", 500, tm), ConfigError);
  CHECK_THROWS_AS(parse_estimator_token("ridge:-1", 500, tm), ConfigError);
  CHECK_THROWS_AS(parse_estimator_token("lasso", 500, tm), ConfigError);
  tm.h2_beta = 1.0;
  CHECK_THROWS_AS(parse_estimator_token("ridge:opt", 500, tm), ConfigError);
}

TEST_CASE("spectrum subcommand") {
  const auto dir = scratch("spectrum");
  SUBCASE("identity, omega = 4") {
    const auto r = cli({"spectrum", "--set", "transform.omega=4", "--out", dir.string()});
    REQUIRE(r.code == 0);
    const auto j = load_json(dir / "spectrum.json");
    CHECK(j["edges"][0].get<double>() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(j["edges"][1].get<double>() == doctest::Approx(9.0).epsilon(1e-14));
    CHECK(j["point_mass_at_zero"].get<double>() == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(j["sample_moments"]["b2"].get<double>() == doctest::Approx(5.0));
    const auto csv = read_text_file(dir / "transforms.csv");
    CHECK(csv.rfind("lambda,g,g_prime,v,v_prime\n", 0) == 0);
  }
  SUBCASE("omega = 1 has no point mass") {
    REQUIRE(cli({"spectrum", "--set", "transform.omega=1", "--out", dir.string()}).code == 0);
    const auto j = load_json(dir / "spectrum.json");
    CHECK(j["edges"][0].get<double>() == 0.0);
    CHECK(j["edges"][1].get<double>() == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(j["point_mass_at_zero"].get<double>() == 0.0);
  }
  SUBCASE("two-point spectrum echoes the forward moment map") {
    REQUIRE(cli({"spectrum", "--set", "spectrum.kind=point_masses", "--set",
                 "spectrum.eigenvalues=0.5, 1.5", "--set", "spectrum.weights=0.5, 0.5", "--set",
                 "transform.omega=2", "--out", dir.string()})
                .code == 0);
    const auto j = load_json(dir / "spectrum.json");
    const auto pop = SpectralModel::point_masses({{0.5, 0.5}, {1.5, 0.5}}).moments();
    const auto fwd = moment_map_forward(pop, 2.0);
    CHECK(j["sample_moments"]["b2"].get<double>() == fwd.b2);
    CHECK(j["sample_moments"]["b3"].get<double>() == fwd.b3);
    CHECK(j["edges"].is_null());
  }
}

TEST_CASE("configuration errors") {
  const auto dir = scratch("errors");
  write_text_file(dir / "bad.ini", "[trait]\nh2 = 0.5\n\n[simulation]\nrepilcates = 10\n");
  auto r = cli({"simulate", "--config", (dir / "bad.ini").string(), "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  const auto rec = json::parse(r.err)["error"];
  CHECK(rec["type"] == "ConfigError");
  CHECK(rec["key"] == "simulation.repilcates");
  CHECK(rec["line"] == 5);
  CHECK(rec["command"] == "simulate");

  write_text_file(dir / "range.ini", "[trait]\nh2_beta = 1.5\n");
  r = cli({"limits", "--config", (dir / "range.ini").string(), "--set", "limits.omega=1"});
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["error"]["key"] == "trait.h2_beta");

  CHECK(cli({"limits", "--preset", "Fig9"}).code == 2);
  CHECK(cli({"simulate", "--preset", "Fig1"}).code == 2);
  CHECK(cli({"limits", "--bogus"}).code == 2);
  CHECK(cli({}).code == 2);
  CHECK(cli({"limits", "--set", "limits.omega"}).code == 2);
  r = cli({"simulate", "--set", "simulation.estimators=marginal, meta", "--set",
           "simulation.replicates=2", "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["error"]["key"] == "simulation.meta_split");
  r = cli({"estimate", "--set", "estimate.panel=does_not_exist.txt", "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["error"]["key"] == "estimate.panel");

  // Numerical failures and the replicate-failure threshold.
  write_text_file(dir / "eig.txt", "5\n4\n3\n");
  r = cli({"estimate", "--set", "estimate.panel=" + (dir / "eig.txt").string(), "--set",
           "estimate.n_w=10", "--set", "estimate.p=3", "--set", "estimate.top_removed=0", "--out",
           (dir / "o").string()});
  CHECK(r.code == 3);
  CHECK(json::parse(r.err)["error"]["type"] == "NormalizationError");
  r = cli({"simulate", "--set", "simulation.n=40", "--set", "simulation.p=80", "--set",
           "simulation.estimators=ols", "--set", "simulation.replicates=3", "--out",
           (dir / "o").string()});
  CHECK(r.code == 4);
  CHECK(json::parse(r.err)["error"]["type"] == "PartialFailureError");
}

TEST_CASE("installed binary reports bad keys") {
  const char* bin = std::getenv("RIDGEPRED_BIN");
  if (!bin) {
    MESSAGE("RIDGEPRED_BIN not set; skipping");
    return;
  }
  const auto dir = scratch("binary");
  write_text_file(dir / "bad.ini", "[spectrum]\nkind = identity\nunknown_setting = 1\n");
  const std::string cmd = std::string("\"") + bin + "\" spectrum --config \"" +
                          (dir / "bad.ini").string() + "\" --out \"" + (dir / "o").string() +
                          "\" 2> \"" + (dir / "err.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 2);
  const auto err = read_text_file(dir / "err.txt");
  CHECK(err.find("spectrum.unknown_setting") != std::string::npos);

  write_text_file(dir / "ok.ini", "[transform]\nomega = 4\n");
  const std::string ok = std::string("\"") + bin + "\" spectrum --config \"" +
                         (dir / "ok.ini").string() + "\" --out \"" + (dir / "o").string() +
                         "\" > /dev/null";
  const int s2 = std::system(ok.c_str());
  REQUIRE(WIFEXITED(s2));
  CHECK(WEXITSTATUS(s2) == 0);
  CHECK(fs::exists(dir / "o" / "spectrum.json"));
}

TEST_CASE("limits presets") {
  const auto dir = scratch("limits");
  const auto r = cli({"limits", "--preset", "Fig2", "--out", dir.string(), "--svg"});
  REQUIRE(r.code == 0);
  const auto pts = read_series_csv(dir / "curves.csv");
  std::map<std::string, std::vector<SeriesPoint>> by;
  for (const auto& p : pts) by[p.series].push_back(p);
  for (const char* s : {"ridge_optimal_out h2=0.8", "ridgeless_out h2=0.8", "marginal_out h2=0.8",
                        "upper_bound h2=0.8"}) {
    REQUIRE(by.count(s));
    CHECK(by[s].size() == 100);
    CHECK(by[s].front().x == 0.1);
    CHECK(by[s].back().x == 10.0);
  }
  TraitModel tm;
  tm.h2_beta = tm.h2_eta = 0.8;
  for (const auto& p : by["ridge_optimal_out h2=0.8"]) {
    tm.omega = tm.omega_z = p.x;
    CHECK(p.y == limit_ridge_optimal(tm, SpectralModel::identity()).value);
  }
  for (const auto& p : by["upper_bound h2=0.8"]) CHECK(p.y == doctest::Approx(0.8 / p.x));
  // The optimal ridge dominates the marginal estimator and sits below h2 and the bound.
  for (std::size_t k = 0; k < 100; ++k) {
    CHECK(by["ridge_optimal_out h2=0.8"][k].y >= by["marginal_out h2=0.8"][k].y - 1e-12);
    CHECK(by["ridge_optimal_out h2=0.8"][k].y <= std::min(0.8, by["upper_bound h2=0.8"][k].y) + 1e-12);
  }
  CHECK(fs::exists(dir / "curves.svg"));

  // Every emitted data file round-trips.
  const auto text = read_text_file(dir / "curves.csv");
  write_series_csv(dir / "again.csv", pts);
  CHECK(read_text_file(dir / "again.csv") == text);
  std::istringstream lim(read_text_file(dir / "limits.csv"));
  std::string line;
  std::getline(lim, line);
  CHECK(line == "formula_tag,h2_beta,h2_eta,phi,omega,lambda,value");
  int rows = 0;
  while (std::getline(lim, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) f.push_back(c);
    REQUIRE(f.size() == 7);
    for (std::size_t i = 1; i < 7; ++i) CHECK(format_double(parse_double(f[i])) == f[i]);
    ++rows;
  }
  CHECK(rows == 800);

  for (const char* fig : {"Fig1", "Fig3"}) {
    const auto d = scratch(fig);
    REQUIRE(cli({"limits", "--preset", fig, "--out", d.string()}).code == 0);
    CHECK(read_series_csv(d / "curves.csv").size() > 100);
  }
}

TEST_CASE("Fig5 preset at n = 500") {
  const auto dir = scratch("fig5");
  const auto r = cli({"simulate", "--preset", "Fig5", "--out", dir.string()});
  REQUIRE(r.code == 0);
  const auto j = load_json(dir / "summary.json");
  REQUIRE(j["configs"].size() == 2);
  auto a2 = [](const json& c, const char* t) { return estimator(c, t)["a2"]["mean"].get<double>(); };
  const json& near1 = j["configs"][0];
  const json& w4 = j["configs"][1];
  CHECK(near1["omega"].get<double>() == doctest::Approx(1.05));
  CHECK(w4["p"] == 2000);
  CHECK(near1["all_pass"] == true);
  CHECK(w4["all_pass"] == true);
  // omega = 1.05: optimal ridge beats marginal; tiny penalties collapse; huge ones match marginal.
  CHECK(a2(near1, "ridge:opt") - a2(near1, "marginal") > 0.05);
  CHECK(a2(near1, "ridge:opt/n2") < a2(near1, "marginal"));
  CHECK(std::abs(a2(near1, "ridge:opt*n2") - a2(near1, "marginal")) < 0.01);
  CHECK(std::abs(a2(near1, "meta") - a2(near1, "marginal")) < 0.01);
  // omega = 4: everything is close.
  for (const char* t : {"meta", "ridge:opt/n2", "ridge:opt/n", "ridge:opt", "ridge:opt*n", "ridge:opt*n2"})
    CHECK(std::abs(a2(w4, t) - a2(w4, "marginal")) < 0.05);
  const auto rows = read_metric_rows_csv(dir / "rows_omega4.csv");
  CHECK(rows.size() == 700);
}

TEST_CASE("presets are deterministic") {
  const auto a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
  for (const auto& d : {a, b})
    REQUIRE(cli({"simulate", "--preset", "Fig6", "--set", "simulation.replicates=3", "--out",
                 d.string(), "--svg"})
                .code == 0);
  const auto fa = dir_contents(a), fb = dir_contents(b);
  CHECK(fa.size() == 7);
  CHECK(fa == fb);
  REQUIRE(cli({"simulate", "--preset", "Fig6", "--set", "simulation.replicates=3", "--seed", "99",
               "--out", c.string()})
              .code == 0);
  CHECK(dir_contents(c).at("rows_omega8.csv") != fa.at("rows_omega8.csv"));
}

TEST_CASE("estimate subcommand") {
  const auto dir = scratch("estimate");
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd w = standardize_columns(oracle::gaussian_matrix(2000, 1000, rng));
  std::vector<double> eig = panel_from_matrix(w).eigenvalues;
  write_reals_text(dir / "panel.txt", eig);
  write_matrix_binary(dir / "w.bin", w);
  // Paths in the config resolve against the config's directory.
  write_text_file(dir / "est.ini",
                  "[trait]\nh2 = 0.8\n\n[estimate]\npanel = panel.txt\nn_w = 2000\np = 1000\nomega = 4\n");
  auto r = cli({"estimate", "--config", (dir / "est.ini").string(), "--out", (dir / "o").string()});
  REQUIRE(r.code == 0);
  auto j = load_json(dir / "o" / "accuracy.json");
  CHECK(j["panel"]["top_removed"] == 0);
  CHECK(std::abs(j["panel"]["a2_marginal"].get<double>() - 0.64 / 4.8) < 0.01);
  CHECK(std::abs(j["panel"]["a2_ridge_optimal"].get<double>() - 0.8 * (4.8 - std::sqrt(12.8)) / 6.4) <
        0.01);

  r = cli({"estimate", "--set", "trait.h2=0.8", "--set", "estimate.panel_matrix=" + (dir / "w.bin").string(),
           "--set", "estimate.n=250", "--out", (dir / "o2").string()});
  REQUIRE(r.code == 0);
  const auto j2 = load_json(dir / "o2" / "accuracy.json");
  CHECK(j2["panel"]["omega"].get<double>() == 4.0);
  CHECK(j2["panel"]["a2_marginal"].get<double>() == doctest::Approx(j["panel"]["a2_marginal"].get<double>()).epsilon(1e-9));

  const Eigen::MatrixXd x = standardize_columns(oracle::gaussian_matrix(500, 1000, rng));
  const Eigen::MatrixXd z = standardize_columns(oracle::gaussian_matrix(400, 1000, rng));
  write_matrix_binary(dir / "x.bin", x);
  write_matrix_binary(dir / "z.bin", z);
  r = cli({"estimate", "--set", "trait.h2=0.5", "--set", "estimate.x=" + (dir / "x.bin").string(),
           "--set", "estimate.z=" + (dir / "z.bin").string(), "--out", (dir / "o3").string()});
  REQUIRE(r.code == 0);
  const auto j3 = load_json(dir / "o3" / "accuracy.json");
  TraitModel tm;
  tm.h2_beta = tm.h2_eta = 0.5;
  tm.omega = 2.0;
  tm.omega_z = 2.5;
  CHECK(j3["traces"]["a2_marginal"].get<double>() ==
        doctest::Approx(accuracy_from_traces(x, z, tm).a2_marginal).epsilon(1e-12));
}

TEST_CASE("meta subcommand") {
  const auto dir = scratch("meta");
  std::vector<StudySummary> s(2);
  s[0] = {Eigen::VectorXd::LinSpaced(50, -1.0, 1.0), 100};
  s[1] = {Eigen::VectorXd::LinSpaced(50, 0.5, 2.0), 300};
  write_summary_panel(dir / "panel.txt", s);
  auto r = cli({"meta", "--set", "trait.h2=0.8", "--set", "meta.summary_file=" + (dir / "panel.txt").string(),
                "--out", (dir / "o").string()});
  REQUIRE(r.code == 0);
  SummaryPanel panel;
  panel.studies = s;
  panel.weights = Eigen::Vector2d(100.0, 300.0);
  const auto ref = meta_aggregate(panel).coefficients;
  const auto got = read_reals_text(dir / "o" / "meta_coefficients.txt");
  REQUIRE(got.size() == 50);
  for (int k = 0; k < 50; ++k) CHECK(got[k] == ref(k));
  const auto j = load_json(dir / "o" / "summary.json");
  CHECK(j["limits"][0]["scheme"] == "optimal");
  CHECK(j["limits"][1]["scheme"] == "equal");
  CHECK(j["limits"][1]["a2"].get<double>() < j["limits"][0]["a2"].get<double>());

  r = cli({"meta", "--set", "trait.h2=0.8", "--set", "meta.study_ns=100, 300", "--set", "meta.p=800",
           "--set", "meta.simulate=true", "--set", "meta.replicates=20", "--out", (dir / "s").string()});
  REQUIRE(r.code == 0);
  const auto js = load_json(dir / "s" / "summary.json");
  const auto& sim = js["simulation"];
  CHECK(std::abs(estimator(sim, "meta")["a2"]["mean"].get<double>() -
                 estimator(sim, "marginal")["a2"]["mean"].get<double>()) < 0.01);
  CHECK(sim["all_pass"] == true);
}
