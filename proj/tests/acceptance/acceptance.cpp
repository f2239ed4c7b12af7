#include "grampa/analysis.hpp"
#include "grampa/denoisers.hpp"
#include "grampa/gamp.hpp"
#include "grampa/harness.hpp"
#include "grampa/rng.hpp"
#include "oracle.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

using namespace grampa;
using linops::Vector;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

harness::ExperimentSpec load(const char* name) {
  return harness::load_experiment(fs::path(GRAMPA_CONFIG_DIR) / name);
}

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double scale) {
  Rng rng(seed);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

Vector gaussian_vector(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  Vector v(n);
  for (auto& e : v) e = rng.normal();
  return v;
}

double max_rel_diff(const Vector& a, const Vector& b) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    worst = std::max(worst, std::abs(a[k] - b[k]) / std::max(1.0, std::abs(b[k])));
  }
  return worst;
}

// ---------------------------------------------------------------------------

Verdict table_fidelity() {
  const auto start = Clock::now();
  const Eigen::MatrixXd a = gaussian(6, 4, 17, 0.5);
  const auto op = linops::make_dense(a);
  denoisers::DenoiserLayout out{{6, denoisers::make_awgn_output(gaussian_vector(6, 18), 0.05)}};
  denoisers::DenoiserLayout in{{4, denoisers::make_bernoulli_gaussian({0.4, 1.0})}};
  const Vector x0 = Vector::Zero(4);
  const Vector nu0 = Vector::Constant(4, 0.4);
  double worst = 0.0;
  for (double beta0 : {1.0, 0.5}) {
    const auto bounds = gamp::resolve_bounds(gamp::GampConfig{}, nu0);
    const auto ref = oracle::dense_gamp_reference(a, out, in, x0, nu0, {beta0, 10, bounds.floor, bounds.ceiling});
    auto s = gamp::GampState::initial(6, x0, nu0);
    for (int t = 0; t < 10; ++t) {
      s = gamp::gamp_step(s, op, out, in, bounds, beta0);
      const auto& r = ref[static_cast<std::size_t>(t)];
      for (const auto& [mine, theirs] :
           {std::pair{&s.x_hat, &r.x_hat}, {&s.nu_x, &r.nu_x}, {&s.x_tilde, &r.x_tilde}, {&s.s_hat, &r.s_hat},
            {&s.nu_s, &r.nu_s}, {&s.p_hat, &r.p_hat}, {&s.nu_p, &r.nu_p}, {&s.z_hat, &r.z_hat},
            {&s.nu_z, &r.nu_z}, {&s.r_hat, &r.r_hat}, {&s.nu_r, &r.nu_r}}) {
        worst = std::max(worst, max_rel_diff(*mine, *theirs));
      }
    }
  }
  const double elapsed = seconds_since(start);
  return {worst <= 1e-12 && elapsed < 1.0, fmt("max elementwise diff %.3g, %.3f s", worst, elapsed)};
}

// ---------------------------------------------------------------------------

struct CalculusTally {
  double value_err = 0.0;
  double deriv_err = 0.0;
  double fd_err = 0.0;
  int points = 0;
};

void check_fd(CalculusTally& tally, const std::function<denoisers::DenoiserEval(double)>& f, double x, double h) {
  const double fd = oracle::central_difference([&](double v) { return f(v).value; }, x, h);
  const double d = f(x).derivative;
  tally.fd_err = std::max(tally.fd_err, std::abs(d - fd) / std::max(std::abs(fd), 1e-6));
}

Verdict denoiser_calculus() {
  using namespace denoisers;
  const auto start = Clock::now();
  CalculusTally mmse, map;
  const double inf = std::numeric_limits<double>::infinity();

  for (double nu : {0.3, 1.0, 3.0}) {
    const double sd = std::sqrt(nu);
    for (int k = 0; k < 100; ++k) {
      const double r = -5.0 + 10.0 * (k + 0.5) / 100.0;
      const double h = 1e-5 * sd;
      const auto cmp = [&](const DenoiserEval& e, const DenoiserEval& q) {
        mmse.value_err = std::max(mmse.value_err, std::abs(e.value - q.value) / std::max(1.0, std::abs(q.value)));
        mmse.deriv_err =
            std::max(mmse.deriv_err, std::abs(e.derivative - q.derivative) / std::max(1.0, std::abs(q.derivative)));
        ++mmse.points;
      };

      for (double om : {-1.0, 1.0, 3.0}) {
        cmp(snipe(r, nu, {om}),
            quadrature_mmse([](double) { return 0.0; }, r, nu, {{0.0, std::exp(om) * std::sqrt(2.0 * std::numbers::pi * nu)}}));
        check_fd(mmse, [&](double v) { return snipe(v, nu, {om}); }, r, h);
      }

      const AwgnChannelParams ch{0.7, 0.4};
      cmp(awgn_output_mmse(r, nu, ch),
          quadrature_mmse([&](double z) { return 0.5 * (ch.y - z) * (ch.y - z) / ch.noise_var; }, r, nu));
      check_fd(mmse, [&](double v) { return awgn_output_mmse(v, nu, ch); }, r, h);

      for (const BernoulliGaussianParams p : {BernoulliGaussianParams{0.1, 1.0}, BernoulliGaussianParams{0.5, 4.0}}) {
        const double s2 = p.sigma_sq;
        // Slab density normalized so that the atom weight is (1 - beta) / beta.
        cmp(bernoulli_gaussian_mmse(r, nu, p),
            quadrature_mmse([s2](double x) { return 0.5 * x * x / s2 + 0.5 * std::log(2.0 * std::numbers::pi * s2); },
                            r, nu, {{0.0, (1.0 - p.beta) / p.beta}}));
        check_fd(mmse, [&](double v) { return bernoulli_gaussian_mmse(v, nu, p); }, r, h);
      }

      cmp(nonneg_mmse(r, nu), quadrature_mmse([inf](double x) { return x < 0.0 ? inf : 0.0; }, r, nu, {}, {0.0}));
      check_fd(mmse, [&](double v) { return nonneg_mmse(v, nu); }, r, h);

      Vector value(1), deriv(1);
      make_gaussian_prior(0.5, 2.0)->denoise(Vector::Constant(1, r), Vector::Constant(1, nu), value, deriv);
      cmp({value[0], deriv[0]}, quadrature_mmse([](double x) { return 0.25 * (x - 0.5) * (x - 0.5); }, r, nu));

      // MAP flavors: dense 1-D search. Finite differences stay off the kinks.
      const double lam = 0.8;
      const auto st = soft_threshold_map(r, nu, lam);
      const double st_ref = oracle::map_by_search([lam](double x) { return lam * std::abs(x); }, r, nu, {0.0});
      map.value_err = std::max(map.value_err, std::abs(st.value - st_ref));
      if (std::abs(std::abs(r) - lam * nu) > 10.0 * h) check_fd(map, [&](double v) { return soft_threshold_map(v, nu, lam); }, r, h);
      const auto nn = nonneg_map(r, nu);
      const double nn_ref = oracle::map_by_search([inf](double x) { return x < 0.0 ? inf : 0.0; }, r, nu, {0.0});
      map.value_err = std::max(map.value_err, std::abs(nn.value - nn_ref));
      if (std::abs(r) > 10.0 * h) check_fd(map, [&](double v) { return nonneg_map(v, nu); }, r, h);
      map.points += 2;
    }
  }
  const double elapsed = seconds_since(start);
  const double fd = std::max(mmse.fd_err, map.fd_err);
  const bool pass = mmse.value_err <= 1e-8 && mmse.deriv_err <= 1e-8 && map.value_err <= 1e-6 && fd <= 1e-4 &&
                    elapsed < 10.0;
  return {pass, fmt("mmse |value| %.2g |deriv| %.2g, map %.2g, finite-diff rel %.2g, %d points, %.2f s",
                    mmse.value_err, mmse.deriv_err, map.value_err, fd, mmse.points + map.points, elapsed)};
}

// ---------------------------------------------------------------------------

Verdict snipe_limit() {
  const auto start = Clock::now();
  double worst = 0.0;
  int count = 0;
  for (double nu : {0.1, 1.0, 10.0}) {
    for (double om : {-2.0, 0.0, 2.0, 5.0}) {
      for (int k = 0; k <= 200; ++k) {
        const double q = -10.0 + 0.1 * k;
        worst = std::max(worst, std::abs(denoisers::snipe_from_slab_limit(q, nu, om, 1e6) -
                                         denoisers::snipe(q, nu, {om}).value));
        ++count;
      }
    }
  }
  const double elapsed = seconds_since(start);
  return {worst <= 1e-3 && elapsed < 30.0, fmt("max |diff| %.3g over %d points, %.2f s", worst, count, elapsed)};
}

// ---------------------------------------------------------------------------

Verdict map_convex_equivalence() {
  const auto start = Clock::now();
  auto spec = harness::parse_experiment(R"({
    "schema_version": 1, "name": "map-equivalence", "kind": "ptc", "trials": 1, "seed_base": 4401,
    "problem": {"n": 80, "snr_db": 40, "analysis_reg": "l1"},
    "grid": [{"delta": 0.5, "rho": 0.5, "d_over_n": 1.2}],
    "tuning": {"grid": [1]},
    "solver": {"beta0": 0.5, "t_max": 20000, "eps": 1e-13}
  })");
  const auto& point = spec.grid.front();
  double worst_obj = 0.0;
  double worst_res = 0.0;
  int unconverged = 0;
  for (int i = 0; i < 20; ++i) {
    auto trial = harness::generate_trial(spec, point, harness::trial_seed(spec.seed_base, spec.kind, point, i));
    auto& p = trial.problem;
    const Eigen::MatrixXd phi = p.phi.dense();
    const Eigen::MatrixXd om = p.omega.dense();
    // lambda sigma^2 at a tenth of the level that zeroes every analysis coefficient.
    const double lambda = 0.1 * (phi.transpose() * p.y).cwiseAbs().maxCoeff() / p.noise_var /
                          std::sqrt(static_cast<double>(om.rows()));
    harness::set_tuned_param(p, lambda);

    const auto assembled = analysis::assemble(p);
    const auto init = analysis::default_initialization(p, assembled);
    const auto r = gamp::gamp_run(assembled.a, assembled.output, assembled.input, init.x, init.nu_x, spec.solver);
    if (!r.converged) ++unconverged;
    const double cost = oracle::l1_objective(phi, om, p.y, lambda, p.noise_var, r.x_hat);
    const auto ref = oracle::prox_gradient_l1(phi, om, p.y, lambda, p.noise_var);
    worst_obj = std::max(worst_obj, std::abs(cost - ref.objective) / std::abs(ref.objective));

    const Vector g0 = -r.final_state.s_hat.tail(om.rows()) / lambda;
    const double tol = 1e-7 * std::max(1.0, (om * r.x_hat).cwiseAbs().maxCoeff());
    worst_res = std::max(worst_res,
                         oracle::l1_subgradient_residual(phi, om, p.y, lambda, p.noise_var, r.x_hat, tol, g0));
  }
  const double elapsed = seconds_since(start);
  return {worst_obj <= 1e-4 && worst_res <= 1e-5 && elapsed < 120.0,
          fmt("max objective gap %.3g, max subgradient residual %.3g, %d unconverged, %.1f s", worst_obj, worst_res,
              unconverged, elapsed)};
}

// ---------------------------------------------------------------------------

Verdict phase_transition() {
  const auto start = Clock::now();
  auto spec = load("ptc.json");
  std::string detail;
  bool pass = true;

  harness::SweepPoint easy{0.0, 0.9, 0.5, 1.2, 0};
  harness::SweepPoint hard{0.0, 0.1, 0.99, 1.2, 0};
  const double easy_rate = harness::success_rate(spec, easy, 50);
  const double hard_rate = harness::success_rate(spec, hard, 50);
  pass = pass && easy_rate >= 0.9 && hard_rate <= 0.1;
  detail += fmt("success %.2f at (0.9, 0.5), %.2f at (0.1, 0.99)", easy_rate, hard_rate);

  const auto rho50 = [&](double dn, double delta) {
    auto s = spec;
    s.ptc->d_over_n = {dn};
    s.ptc->deltas = {delta};
    return harness::estimate_ptc(s).front().rho50;
  };
  const double r03 = rho50(1.2, 0.3);
  const double r09 = rho50(1.2, 0.9);
  const double r10 = rho50(1.0, 0.5);
  const double r20 = rho50(2.0, 0.5);
  pass = pass && r09 > r03 && r10 > r20;
  const double elapsed = seconds_since(start);
  pass = pass && elapsed < 1800.0;
  detail += fmt("; rho50 D/N=1.2: %.3f (delta 0.3) < %.3f (delta 0.9); delta 0.5: %.3f (D/N 1.0) > %.3f (D/N 2.0); %.0f s",
                r03, r09, r10, r20, elapsed);
  return {pass, detail};
}

// ---------------------------------------------------------------------------

std::string medians(const harness::ExperimentResult& r) {
  std::string s;
  for (const auto& p : r.points) s += fmt("%s%.2f", s.empty() ? "" : ", ", p.median_nsnr_db);
  return s;
}

Verdict bg_fd_reproduction() {
  const auto start = Clock::now();
  const auto spec = load("bg_fd.json");
  const auto r = harness::run_experiment(spec);
  bool increasing = true;
  for (std::size_t k = 1; k < r.points.size(); ++k) {
    increasing = increasing && r.points[k].median_nsnr_db > r.points[k - 1].median_nsnr_db;
  }
  const double last = r.points.back().median_nsnr_db;
  const double elapsed = seconds_since(start);
  return {increasing && last > 40.0 && r.points.back().point.m_over_n == 0.7 && elapsed < 1200.0,
          fmt("median NSNR dB over M/N {0.3, 0.5, 0.7}: %s; %.0f s", medians(r).c_str(), elapsed)};
}

Verdict phantom_reproduction() {
  const auto start = Clock::now();
  const auto spec = load("phantom.json");
  const auto r = harness::run_experiment(spec);
  bool nondecreasing = true;
  for (std::size_t k = 1; k < r.points.size(); ++k) {
    nondecreasing = nondecreasing && r.points[k].median_nsnr_db >= r.points[k - 1].median_nsnr_db;
  }
  std::vector<double> times;
  for (const auto& t : r.trials) times.push_back(t.wall_time_s);
  const double median_time = harness::median(times);
  const double last = r.points.back().median_nsnr_db;
  const double elapsed = seconds_since(start);
  return {nondecreasing && last >= 30.0 && median_time < 28.0 && elapsed < 900.0,
          fmt("median NSNR dB over lines {8, 12, 16, 22}: %s; median solve %.2f s; %.0f s", medians(r).c_str(),
              median_time, elapsed)};
}

// ---------------------------------------------------------------------------

std::vector<std::string> csv_rows_without_time(const fs::path& path) {
  std::ifstream f(path);
  std::vector<std::string> rows;
  std::string line;
  while (std::getline(f, line)) {
    const auto cut = line.rfind(',');
    rows.push_back(line.substr(0, cut));
  }
  return rows;
}

Verdict determinism() {
  const auto start = Clock::now();
  auto spec = load("bg_fd.json");
  const auto dir = fs::temp_directory_path() / "grampa_acceptance_determinism";
  fs::remove_all(dir);
  spec.workers = 1;
  harness::write_experiment_outputs(dir / "a", spec, harness::run_experiment(spec));
  spec.workers = 2;
  harness::write_experiment_outputs(dir / "b", spec, harness::run_experiment(spec));
  const auto a = csv_rows_without_time(dir / "a" / "results.csv");
  const auto b = csv_rows_without_time(dir / "b" / "results.csv");
  std::size_t differing = a.size() == b.size() ? 0 : std::max(a.size(), b.size());
  for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) differing += a[k] != b[k];
  const double elapsed = seconds_since(start);
  return {differing == 0 && a.size() > 1,
          fmt("%zu rows compared, %zu differ (wall_time_s excluded); %.0f s", a.size(), differing, elapsed)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GrAMPA acceptance checks"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-8); default all")->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"table fidelity", table_fidelity},
      {"denoiser calculus", denoiser_calculus},
      {"snipe slab limit", snipe_limit},
      {"map/convex equivalence", map_convex_equivalence},
      {"phase transition", phase_transition},
      {"bg-fd reproduction", bg_fd_reproduction},
      {"phantom reproduction", phantom_reproduction},
      {"determinism", determinism},
  };
  bool all = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (only != 0 && static_cast<int>(k) + 1 != only) continue;
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %zu (%s): %s - %s\n", k + 1, criteria[k].first, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
