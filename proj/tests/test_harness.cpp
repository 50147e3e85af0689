#include "doctest.h"

#include "srkmax/config.hpp"
#include "srkmax/diagnostics.hpp"
#include "srkmax/harness.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace srkmax;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const Problem> small_problem(DriftSpec drift = LinearDamping{0.5, 0.5}) {
  auto op = build_maxwell_1d(Grid1D::uniform(16, 1.0, 1.0, 1.0));
  const PointSet& pts = op->sample_points();
  return make_problem(op, std::move(drift), sine_covariance(pts, 4, 2.0, 1.0),
                      constant_profile(pts, 1.0, 0.0), single_mode_state(*op, 1, 1.0), 1.0);
}

StepperConfig config(const char* tableau, double tau) {
  StepperConfig c;
  c.tableau = builtin(tableau);
  c.tau = tau;
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("srkmax_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& file) {
  std::ifstream in(file);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("worker pool") {
  CHECK(resolve_workers(3) == 3);
  CHECK(resolve_workers(0) >= 1);
  std::vector<int> hits(100, 0);
  parallel_for(100, 4, [&](Index k) { hits[std::size_t(k)] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  std::atomic<int> calls{0};
  CHECK_THROWS_WITH_AS(parallel_for(50, 3,
                                    [&](Index k) {
                                      ++calls;
                                      if (k == 7 || k == 30) throw ConfigError("item " + std::to_string(k));
                                    }),
                       "item 7", ConfigError);
}

TEST_CASE("Monte Carlo runs") {
  auto p = small_problem();
  const StepperConfig cfg = config("midpoint", 1.0 / 32);
  const auto one = mc_run(p, cfg, {1, 11, 1, 1});
  const Trajectory direct = integrate(cfg, p, sample_path(11, 32, 1.0 / 32, p->covariance, 0));
  REQUIRE(one.size() == 1);
  for (std::size_t n = 0; n < direct.states.size(); ++n)
    CHECK((one[0].states[n].array() == direct.states[n].array()).all());

  const auto w1 = energy_law_residual(mc_run(p, cfg, {16, 5, 1, 1}), *p).mean_energy;
  for (int w : {2, 4}) {
    const auto ww = energy_law_residual(mc_run(p, cfg, {16, 5, w, 1}), *p).mean_energy;
    for (std::size_t n = 0; n < w1.size(); ++n) {
      CHECK(ww.values[n] == w1.values[n]);
      CHECK(ww.stderrs[n] == w1.stderrs[n]);
    }
  }

  const double se200 = energy_law_residual(mc_run(p, cfg, {200, 1, 0, 1}), *p).mean_energy.stderrs.back();
  const double se400 = energy_law_residual(mc_run(p, cfg, {400, 2, 0, 1}), *p).mean_energy.stderrs.back();
  CHECK(se400 / se200 == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.2));

  CustomDrift bad;
  bad.f = [](double, const Vector& u) -> Vector { return 1e3 * u.array().sin().matrix(); };
  bad.lipschitz = 1e3;
  auto q = small_problem(bad);
  CHECK_THROWS_AS(mc_run(q, config("midpoint", 1.0 / 32), {2, 1, 1, 1}), FixedPointDivergence);
}

TEST_CASE("convergence study") {
  auto p = small_problem();
  StudyOptions so;
  so.tau_levels = {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64};
  so.ref_refinement = 8;
  so.replicas = 40;
  so.seed = 3;
  so.workers = 1;
  const ConvergenceReport a = convergence_study(p, builtin("midpoint"), so);
  REQUIRE(a.levels.size() == 4);
  CHECK(a.slope_available());
  CHECK(a.tau_ref == doctest::Approx(1.0 / 512));
  int inversions = 0;
  for (std::size_t l = 1; l < a.levels.size(); ++l)
    if (a.levels[l].error > a.levels[l - 1].error) {
      ++inversions;
      CHECK(a.levels[l].error - a.levels[l - 1].error <=
            a.levels[l].error_se + a.levels[l - 1].error_se);
    }
  CHECK(inversions <= 1);
  for (const auto& l : a.levels) CHECK(l.error_mean_of_max >= l.error * (1.0 - 1e-12));

  so.workers = 3;
  const ConvergenceReport b = convergence_study(p, builtin("midpoint"), so);
  for (std::size_t l = 0; l < a.levels.size(); ++l) CHECK(b.levels[l].error == a.levels[l].error);
  CHECK(b.slope == a.slope);

  SUBCASE("self comparison collapses at the reference step") {
    StudyOptions self = so;
    self.ref_refinement = 1;
    const ConvergenceReport r = convergence_study(p, builtin("midpoint"), self);
    CHECK(r.levels.back().error <= 1e-12 * 64.0);
  }
  SUBCASE("report files") {
    const fs::path dir = scratch("report");
    write_report(a, (dir / "r.csv").string(), (dir / "r.json").string());
    const auto rows = read_csv(dir / "r.csv");
    REQUIRE(rows.size() == 1 + a.levels.size());
    CHECK(rows[0][0] == "tau");
    // Independent least-squares slope from the CSV rows.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(rows.size() - 1);
    for (std::size_t k = 1; k < rows.size(); ++k) {
      const double x = std::log2(std::stod(rows[k][0])), y = std::log2(std::stod(rows[k][1]));
      sx += x, sy += y, sxx += x * x, sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    std::ifstream js(dir / "r.json");
    const Json j = Json::parse(js);
    CHECK(std::abs(j.at("slope").get<double>() - slope) <= 1e-12);
    CHECK(j.at("pass").get<bool>() == a.pass());
    CHECK(j.at("levels").size() == a.levels.size());
    fs::remove_all(dir);
  }
  SUBCASE("precondition failures are level specific") {
    CustomDrift stiff;
    stiff.f = [](double, const Vector& u) -> Vector { return -16.0 * u.array().sin().matrix(); };
    stiff.jacobian = [](double, const Vector& u, const Vector& d) -> Vector {
      return -16.0 * (u.array().cos() * d.array()).matrix();
    };
    stiff.lipschitz = 16.0;
    auto q = small_problem(stiff);
    StudyOptions s2 = so;
    s2.replicas = 8;
    const ConvergenceReport r = convergence_study(q, builtin("midpoint"), s2);
    CHECK(r.levels[0].failed);
    CHECK(r.levels[0].failure.find("contraction") != std::string::npos);
    for (std::size_t l = 1; l < r.levels.size(); ++l) {
      INFO(r.levels[l].failure);
      CHECK_FALSE(r.levels[l].failed);
    }
    CHECK(r.slope_available());
  }
  SUBCASE("invalid studies") {
    StudyOptions two = so;
    two.tau_levels = {1.0 / 8, 1.0 / 16};
    CHECK_THROWS_AS(convergence_study(p, builtin("midpoint"), two), ConfigError);
    StudyOptions odd = so;
    odd.tau_levels = {1.0 / 8, 1.0 / 16, 1.0 / 24};
    odd.ref_refinement = 1;
    CHECK_THROWS_AS(convergence_study(p, builtin("midpoint"), odd), ConfigError);
    Tableau t = builtin("midpoint");
    t.b *= 2.0;
    CHECK_THROWS_AS(convergence_study(p, t, so), ConfigError);
  }
}

TEST_CASE("config round trip") {
  Config c = default_study_config();
  c.backend.kind = "maxwell2d_tm";
  c.backend.nx = 12;
  c.drift.sigma_e = 0.125;
  c.study.slope_lo = 0.8;
  c.scheme.tableau = Json::parse(R"({"A": [["1/2"]], "b": [1]})");
  CHECK(config_from_json(config_to_json(c)) == c);

  const fs::path dir = scratch("config");
  save_config(c, (dir / "c.json").string());
  CHECK(load_config((dir / "c.json").string()) == c);
  fs::remove_all(dir);

  CHECK_THROWS_AS(parse_config_text(R"({"backend": {"kind": "maxwell1d", "m": 8, "bogus": 1}})"),
                  ConfigError);
  try {
    parse_config_text("{\n  \"T\": 1,\n  \"backend\": {\n    \"m\": ,\n  }\n}");
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
}

TEST_CASE("problems built from configs") {
  for (const char* kind : {"maxwell1d", "maxwell2d_tm", "spectral"}) {
    Config c;
    c.backend.kind = kind;
    c.backend.m = 16;
    c.backend.nx = c.backend.ny = 6;
    c.backend.modes = 8;
    c.initial.kind = "gaussian_bump";
    c.noise.modes = 5;
    auto p = build_problem(c);
    CHECK(p->diffusion->modes() == 5);
    CHECK(p->op->norm_sq(p->u0) > 0.0);
    const StepperConfig sc = build_stepper_config(c);
    CHECK(sc.tableau.name == "midpoint");
  }
  Config bad;
  bad.backend.kind = "maxwell3d";
  CHECK_THROWS_AS(build_problem(bad), ConfigError);
  Config ham;
  ham.backend.kind = "spectral";
  ham.drift.kind = "hamiltonian_sine";
  ham.drift.kappa = 0.5;
  CHECK(is_hamiltonian(build_problem(ham)->drift));
}
