#include "grampa/harness.hpp"
#include "grampa/io.hpp"

#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace grampa;
using namespace grampa::harness;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({
  "schema_version": 1,
  "name": "t",
  "kind": "bg-fd",
  "trials": 3,
  "seed_base": 5,
  "problem": {"n": 40, "sparsity_rate": 0.1, "snr_db": 40},
  "grid": [{"m_over_n": 0.5}, {"m_over_n": 0.7}],
  "tuning": {"grid": [0, 2, 4]},
  "solver": {"beta0": 0.7, "t_max": 60, "eps": 1e-6}
})";

nlohmann::json minimal() { return nlohmann::json::parse(kMinimal); }

ExperimentSpec parse(const nlohmann::json& j) { return parse_experiment(j.dump()); }

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("parse a minimal config") {
  const auto spec = parse(minimal());
  CHECK(spec.kind == ExperimentKind::bg_fd);
  CHECK(spec.trials == 3);
  CHECK(spec.grid.size() == 2);
  CHECK(spec.grid[1].m_over_n == 0.7);
  CHECK(spec.problem.snr_db == 40.0);
  CHECK(spec.solver.beta0 == 0.7);
  CHECK(spec.solver.mode == denoisers::Flavor::mmse);
  CHECK(spec.tuning.mode == TuningMode::per_trial);
  CHECK(spec.workers == 1);
}

TEST_CASE("config errors") {
  auto j = minimal();
  j["surprise"] = 1;
  CHECK_THROWS_AS(parse(j), ConfigError);

  j = minimal();
  j["problem"]["colour"] = "red";
  CHECK_THROWS_AS(parse(j), ConfigError);

  j = minimal();
  j["schema_version"] = 2;
  CHECK_THROWS_AS(parse(j), ConfigError);

  j = minimal();
  j.erase("schema_version");
  CHECK_THROWS_AS(parse(j), ConfigError);

  j = minimal();
  j["trials"] = "three";
  CHECK_THROWS_AS(parse(j), ConfigError);

  j = minimal();
  j["trials"] = 0;
  CHECK_THROWS_AS(parse(j), ConfigError);

  j = minimal();
  j["kind"] = "sudoku";
  CHECK_THROWS_AS(parse(j), ConfigError);

  j = minimal();
  j["tuning"]["grid"] = nlohmann::json::array();
  CHECK_THROWS_AS(parse(j), ConfigError);

  j = minimal();
  j["solver"]["beta0"] = 1.5;
  CHECK_THROWS_AS(parse(j), ConfigError);

  j = minimal();
  j["problem"]["sparsity_rate"] = 1.0;
  CHECK_THROWS_AS(parse(j), ConfigError);

  j = minimal();
  j["ptc"] = {{"deltas", {0.5}}, {"d_over_n", {1.2}}, {"rho_grid", {0.5}}};
  CHECK_THROWS_AS(parse(j), ConfigError);

  CHECK_THROWS_AS(parse_experiment("{not json"), ConfigError);
  CHECK_THROWS_AS(load_experiment("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("noiseless and l1 settings") {
  auto j = minimal();
  j["problem"]["snr_db"] = nullptr;
  CHECK_FALSE(parse(j).problem.snr_db.has_value());
  j["problem"]["snr_db"] = "inf";
  CHECK_FALSE(parse(j).problem.snr_db.has_value());
  j["problem"]["analysis_reg"] = "l1";
  CHECK(parse(j).solver.mode == denoisers::Flavor::map);
  j["tuning"]["grid"] = {-1.0};
  CHECK_THROWS_AS(parse(j), ConfigError);
}

TEST_CASE("shipped configs parse") {
  for (const char* name : {"bg_fd.json", "ptc.json", "phantom.json"}) {
    CHECK_NOTHROW(load_experiment(fs::path(GRAMPA_CONFIG_DIR) / name));
  }
}

TEST_CASE("trial seeds") {
  SweepPoint a;
  a.m_over_n = 0.5;
  SweepPoint b;
  b.m_over_n = 0.7;
  CHECK(trial_seed(1, ExperimentKind::bg_fd, a, 0) == trial_seed(1, ExperimentKind::bg_fd, a, 0));
  CHECK(trial_seed(1, ExperimentKind::bg_fd, a, 0) != trial_seed(1, ExperimentKind::bg_fd, a, 1));
  CHECK(trial_seed(1, ExperimentKind::bg_fd, a, 0) != trial_seed(1, ExperimentKind::bg_fd, b, 0));
  CHECK(trial_seed(1, ExperimentKind::bg_fd, a, 0) != trial_seed(2, ExperimentKind::bg_fd, a, 0));
  CHECK((trial_seed(1, ExperimentKind::bg_fd, a, 3) ^ trial_seed(9, ExperimentKind::bg_fd, a, 3)) == (1ULL ^ 9ULL));
}

TEST_CASE("median") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(median({inf, inf, 1.0}) == inf);
  CHECK(median({std::nan(""), 1.0, 2.0}) == 1.0);
}

TEST_CASE("selection by median") {
  const std::vector<double> grid{1.0, 2.0, 3.0};
  // Ties go to the smaller grid value.
  CHECK(select_by_median({{5.0, 7.0, 7.0}, {5.0, 7.0, 7.0}}, grid) == 1);
  // Monotone decreasing profile picks the first value.
  CHECK(select_by_median({{9.0, 8.0, 7.0}, {9.5, 8.5, 7.5}, {8.0, 7.0, 6.0}}, grid) == 0);
  CHECK(select_by_median({{1.0, 2.0, 3.0}}, grid) == 2);
}

TEST_CASE("tune_param") {
  const auto spec = parse(minimal());
  const std::vector<double> one{3.5};
  CHECK(tune_param(spec, spec.grid[0], one, 2, 1) == 3.5);
  CHECK_THROWS_AS(tune_param(spec, spec.grid[0], std::span<const double>(), 2, 1), std::invalid_argument);
  const std::vector<double> grid{0.0, 2.0, 4.0};
  const double best = tune_param(spec, spec.grid[0], grid, 2, 1);
  CHECK(std::find(grid.begin(), grid.end(), best) != grid.end());
  CHECK(tune_param(spec, spec.grid[0], grid, 2, 1) == best);
}

TEST_CASE("bracket crossing") {
  SUBCASE("all success") {
    const auto r = bracket_crossing({{0.1, 1.0}, {0.5, 1.0}, {0.9, 0.8}});
    CHECK(r.boundary);
    CHECK(r.rho50 == 1.0);
    CHECK(r.rho_lo == 0.9);
    CHECK(r.rho_hi == 1.0);
  }
  SUBCASE("all failure") {
    const auto r = bracket_crossing({{0.2, 0.1}, {0.5, 0.0}});
    CHECK(r.boundary);
    CHECK(r.rho50 == 0.2);
    CHECK(r.rho_lo == 0.0);
    CHECK(r.rho_hi == 0.2);
  }
  SUBCASE("single crossing interpolates") {
    const auto r = bracket_crossing({{0.1, 1.0}, {0.3, 0.8}, {0.5, 0.2}, {0.7, 0.0}});
    CHECK_FALSE(r.boundary);
    CHECK_FALSE(r.non_monotone);
    CHECK(r.rho_lo == 0.3);
    CHECK(r.rho_hi == 0.5);
    CHECK(r.rho50 == doctest::Approx(0.4));
  }
  SUBCASE("several crossings") {
    const auto r = bracket_crossing({{0.1, 1.0}, {0.3, 0.2}, {0.5, 0.9}, {0.7, 0.0}});
    CHECK(r.non_monotone);
    CHECK(r.rho_lo == 0.1);
    CHECK(r.rho_hi == 0.7);
    CHECK(r.rho50 == doctest::Approx(0.4));
  }
}

TEST_CASE("results do not depend on the worker count") {
  auto spec = parse(minimal());
  spec.workers = 1;
  const auto a = run_experiment(spec);
  spec.workers = 3;
  const auto b = run_experiment(spec);
  REQUIRE(a.trials.size() == 6);
  REQUIRE(b.trials.size() == 6);
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(a.trials[k].seed == b.trials[k].seed);
    CHECK(a.trials[k].tuned_param == b.trials[k].tuned_param);
    CHECK(a.trials[k].nsnr_db == b.trials[k].nsnr_db);
    CHECK(a.trials[k].iterations == b.trials[k].iterations);
  }
  CHECK(a.points.size() == 2);
}

TEST_CASE("per-point tuning shares one value per point") {
  auto j = minimal();
  j["tuning"]["mode"] = "per_point";
  const auto r = run_experiment(parse(j));
  for (const auto& p : r.points) {
    for (double v : p.tuned_params) CHECK(v == p.tuned_params.front());
  }
}

TEST_CASE("experiment outputs") {
  const auto spec = parse(minimal());
  const auto result = run_experiment(spec);
  const auto dir = fs::temp_directory_path() / "grampa_harness_out";
  fs::remove_all(dir);
  write_experiment_outputs(dir, spec, result);
  const std::string csv = slurp(dir / "results.csv");
  CHECK(csv.rfind("kind,m_over_n,seed,tuned_param,nsnr_db,success,iterations,wall_time_s\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(summary["points"].size() == 2);
  CHECK(fs::exists(dir / "curve_median_nsnr_db.dat"));
  CHECK(fs::exists(dir / "curve_success_rate.dat"));

  write_curve(dir / "c.dat", {{1.0, 2.0}, {3.0, 4.5}});
  CHECK(slurp(dir / "c.dat") == "1 2\n3 4.5\n");
}

TEST_CASE("phantom trial generation") {
  const auto spec = load_experiment(fs::path(GRAMPA_CONFIG_DIR) / "phantom.json");
  const auto t = generate_trial(spec, spec.grid.front(), 1);
  CHECK(t.image_side == spec.problem.n);
  CHECK(t.x.size() == spec.problem.n * spec.problem.n);
  CHECK(t.problem.phi.kernel() == linops::Kernel::partial_fourier_realified);
  CHECK(t.problem.pixel_reg == analysis::PixelRegularizer::nonneg);
}

TEST_CASE("ptc trial generation") {
  const auto spec = load_experiment(fs::path(GRAMPA_CONFIG_DIR) / "ptc.json");
  SweepPoint p;
  p.delta = 0.5;
  p.rho = 0.5;
  p.d_over_n = 1.2;
  const auto t = generate_trial(spec, p, 3);
  const int n = spec.problem.n;
  CHECK(t.problem.phi.rows() == n / 2);
  CHECK(t.problem.omega.rows() == static_cast<Eigen::Index>(std::lround(1.2 * n)));
  const Eigen::VectorXd u = t.problem.omega.forward(t.x);
  const auto l = n - std::lround(0.5 * (n / 2));
  CHECK((u.array().abs() <= 1e-10).count() >= l);
}
