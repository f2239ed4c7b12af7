#include "grampa/harness.hpp"

#include "grampa/problems.hpp"
#include "grampa/rng.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

namespace grampa::harness {

using linops::LinearOperator;
using linops::Vector;

std::uint64_t trial_seed(std::uint64_t seed_base, ExperimentKind kind, const SweepPoint& point, int trial) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(kind) + 1);
  for (double v : sweep_field_values(kind, point)) h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
  h = mix64(h ^ static_cast<std::uint64_t>(trial));
  return seed_base ^ h;
}

namespace {

std::uint64_t stream(std::uint64_t seed, std::uint64_t k) { return mix64(seed + k); }

double noise_variance(const Vector& z, const std::optional<double>& snr_db, const Vector& y) {
  return snr_db ? problems::awgn_variance(z, *snr_db) : analysis::noiseless_variance(y);
}

Vector measure(const Vector& z, const std::optional<double>& snr_db, std::uint64_t seed) {
  return snr_db ? problems::add_awgn(z, *snr_db, seed) : z;
}

analysis::AnalysisRegularizer initial_reg(const ProblemSettings& p) {
  if (p.analysis_reg == "l1") return analysis::L1Reg{1.0};
  if (p.analysis_reg == "bg") return analysis::BernoulliGaussianReg{{0.1, p.bg_sigma_sq}};
  return analysis::SnipeReg{0.0};
}

}  // namespace

TrialProblem generate_trial(const ExperimentSpec& spec, const SweepPoint& point, std::uint64_t seed) {
  const ProblemSettings& p = spec.problem;
  const std::int64_t n = p.n;
  TrialProblem out{Vector(), {linops::make_identity(1), linops::make_identity(1), Vector::Zero(1)}, 0};
  LinearOperator phi = linops::make_identity(1);
  LinearOperator omega = linops::make_identity(1);
  switch (spec.kind) {
    case ExperimentKind::bg_fd: {
      const auto m = static_cast<std::int64_t>(std::llround(point.m_over_n * static_cast<double>(n)));
      out.x = problems::gen_bg_fd_signal(n, p.sparsity_rate, stream(seed, 1));
      phi = problems::gen_gaussian_matrix(m, n, stream(seed, 2));
      omega = linops::make_fd1d(n);
      break;
    }
    case ExperimentKind::ptc: {
      const auto m = static_cast<std::int64_t>(std::llround(point.delta * static_cast<double>(n)));
      const auto l = n - static_cast<std::int64_t>(std::llround(point.rho * static_cast<double>(m)));
      const auto d = static_cast<std::int64_t>(std::llround(point.d_over_n * static_cast<double>(n)));
      omega = problems::gen_tight_frame(n, d, stream(seed, 3)).omega;
      out.x = problems::gen_cosparse_signal(omega, l, stream(seed, 1));
      phi = problems::gen_gaussian_matrix(m, n, stream(seed, 2));
      break;
    }
    case ExperimentKind::phantom:
      out.x = problems::shepp_logan(n);
      out.image_side = n;
      phi = linops::make_partial_fourier_radial(n, point.lines, stream(seed, 2));
      omega = linops::make_fd2d(n, n, p.directions);
      break;
  }
  const Vector z = phi.forward(out.x);
  Vector y = measure(z, p.snr_db, stream(seed, 4));
  const double noise_var = noise_variance(z, p.snr_db, y);
  out.problem = analysis::AnalysisProblem{std::move(phi), std::move(omega), std::move(y), noise_var,
                                          initial_reg(p), p.pixel_reg, spec.solver.mode};
  return out;
}

void set_tuned_param(analysis::AnalysisProblem& problem, double value) {
  std::visit(
      [value](auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, analysis::SnipeReg>) r.omega = value;
        if constexpr (std::is_same_v<T, analysis::L1Reg>) r.lambda = value;
        if constexpr (std::is_same_v<T, analysis::BernoulliGaussianReg>) r.params.beta = value;
      },
      problem.analysis_reg);
}

RunOutcome run_once(const ExperimentSpec& spec, const TrialProblem& trial, double param, Vector* x_hat) {
  analysis::AnalysisProblem problem = trial.problem;
  set_tuned_param(problem, param);
  RunOutcome out;
  out.param = param;
  const auto start = std::chrono::steady_clock::now();
  Vector estimate;
  try {
    gamp::GampResult r = analysis::solve(problem, spec.solver);
    out.iterations = r.iterations;
    out.converged = r.converged;
    estimate = std::move(r.x_hat);
  } catch (const gamp::DivergenceError& e) {
    out.diverged = true;
    out.iterations = e.last_finite().t - 1;
    estimate = e.last_finite().x_hat;
  } catch (const denoisers::NumericFailure&) {
    out.diverged = true;
    estimate = Vector::Zero(trial.x.size());
  }
  out.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double err = (estimate - trial.x).squaredNorm();
  out.nsnr_db = std::isfinite(err) ? problems::nsnr_db(trial.x, estimate) : -std::numeric_limits<double>::infinity();
  if (x_hat) *x_hat = std::move(estimate);
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  for (double& v : values) {
    if (std::isnan(v)) v = -std::numeric_limits<double>::infinity();
  }
  std::sort(values.begin(), values.end());
  const std::size_t k = values.size() / 2;
  if (values.size() % 2 == 1) return values[k];
  const double a = values[k - 1];
  const double b = values[k];
  if (a == b) return a;
  if (std::isinf(a) || std::isinf(b)) return std::isinf(a) ? a : b;
  return a + (b - a) / 2.0;
}

std::size_t select_by_median(const std::vector<std::vector<double>>& nsnr_db, std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("tuning grid is empty");
  if (nsnr_db.empty()) throw std::invalid_argument("no tuning trials");
  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return grid[a] < grid[b]; });
  std::size_t best = order.front();
  double best_score = -std::numeric_limits<double>::infinity();
  bool first = true;
  for (std::size_t g : order) {
    std::vector<double> column;
    for (const auto& row : nsnr_db) column.push_back(row.at(g));
    const double score = median(std::move(column));
    if (first || score > best_score) {
      best = g;
      best_score = score;
      first = false;
    }
  }
  return best;
}

namespace {

/// Runs `count` independent jobs on up to `workers` threads; job i writes only slot i.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& job) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, count); ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

struct CellRuns {
  std::uint64_t seed = 0;
  std::vector<RunOutcome> runs;  // one per tuning grid value
  std::vector<Vector> estimates;  // kept only when requested
};

CellRuns run_cell(const ExperimentSpec& spec, const SweepPoint& point, std::uint64_t seed, bool keep) {
  CellRuns cell;
  cell.seed = seed;
  const TrialProblem trial = generate_trial(spec, point, seed);
  for (double param : spec.tuning.grid) {
    Vector est;
    cell.runs.push_back(run_once(spec, trial, param, keep ? &est : nullptr));
    if (keep) cell.estimates.push_back(std::move(est));
  }
  return cell;
}

std::size_t best_in_trial(const std::vector<RunOutcome>& runs, std::span<const double> grid) {
  std::vector<std::vector<double>> row{{}};
  for (const auto& r : runs) row[0].push_back(r.nsnr_db);
  return select_by_median(row, grid);
}

/// Evaluates every (point, trial) cell and applies the tuning rule. `keep` marks points whose
/// trial-0 estimates are retained.
ExperimentResult evaluate(const ExperimentSpec& spec, std::uint64_t seed_base, int trials, bool keep_trial0) {
  const std::size_t points = spec.grid.size();
  const auto per_point = static_cast<std::size_t>(trials);
  std::vector<CellRuns> cells(points * per_point);
  parallel_for(cells.size(), spec.workers, [&](std::size_t i) {
    const std::size_t pi = i / per_point;
    const int t = static_cast<int>(i % per_point);
    cells[i] = run_cell(spec, spec.grid[pi], trial_seed(seed_base, spec.kind, spec.grid[pi], t), keep_trial0 && t == 0);
  });

  ExperimentResult result;
  const std::span<const double> grid(spec.tuning.grid);
  for (std::size_t pi = 0; pi < points; ++pi) {
    std::size_t shared_choice = 0;
    if (spec.tuning.mode == TuningMode::per_point) {
      std::vector<std::vector<double>> matrix;
      for (std::size_t t = 0; t < per_point; ++t) {
        std::vector<double> row;
        for (const auto& r : cells[pi * per_point + t].runs) row.push_back(r.nsnr_db);
        matrix.push_back(std::move(row));
      }
      shared_choice = select_by_median(matrix, grid);
    }
    PointSummary summary;
    summary.point = spec.grid[pi];
    std::vector<double> nsnr, iters, times;
    int successes = 0;
    for (std::size_t t = 0; t < per_point; ++t) {
      CellRuns& cell = cells[pi * per_point + t];
      const std::size_t g =
          spec.tuning.mode == TuningMode::per_point ? shared_choice : best_in_trial(cell.runs, grid);
      const RunOutcome& r = cell.runs[g];
      TrialResult tr;
      tr.point_index = pi;
      tr.point = spec.grid[pi];
      tr.trial = static_cast<int>(t);
      tr.seed = cell.seed;
      tr.tuned_param = r.param;
      tr.nsnr_db = r.nsnr_db;
      tr.success = r.nsnr_db >= 10.0 * std::log10(spec.problem.success_nsnr);
      tr.iterations = r.iterations;
      tr.wall_time_s = r.wall_time_s;
      tr.diverged = r.diverged;
      result.trials.push_back(tr);
      nsnr.push_back(tr.nsnr_db);
      iters.push_back(tr.iterations);
      times.push_back(tr.wall_time_s);
      summary.tuned_params.push_back(tr.tuned_param);
      successes += tr.success ? 1 : 0;
      summary.diverged += tr.diverged ? 1 : 0;
      if (!cell.estimates.empty()) result.images.emplace_back(pi, std::move(cell.estimates[g]));
    }
    summary.median_nsnr_db = median(nsnr);
    summary.median_iterations = median(iters);
    summary.median_wall_time_s = median(times);
    summary.success_rate = static_cast<double>(successes) / static_cast<double>(per_point);
    result.points.push_back(std::move(summary));
  }
  return result;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  return evaluate(spec, spec.seed_base, spec.trials, spec.kind == ExperimentKind::phantom);
}

double tune_param(const ExperimentSpec& spec, const SweepPoint& point, std::span<const double> grid, int trials,
                  std::uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("tune_param: empty grid");
  if (trials < 1) throw std::invalid_argument("tune_param: trials must be >= 1");
  if (grid.size() == 1) return grid.front();
  ExperimentSpec local = spec;
  local.tuning.grid.assign(grid.begin(), grid.end());
  std::vector<std::vector<double>> matrix(static_cast<std::size_t>(trials));
  parallel_for(matrix.size(), spec.workers, [&](std::size_t t) {
    const CellRuns cell = run_cell(local, point, trial_seed(seed, spec.kind, point, static_cast<int>(t)), false);
    for (const auto& r : cell.runs) matrix[t].push_back(r.nsnr_db);
  });
  return grid[select_by_median(matrix, grid)];
}

double success_rate(const ExperimentSpec& spec, const SweepPoint& point, int trials) {
  ExperimentSpec local = spec;
  local.grid = {point};
  local.trials = trials;
  local.validate();
  return evaluate(local, spec.seed_base, trials, false).points.front().success_rate;
}

PtcRow bracket_crossing(const std::vector<std::pair<double, double>>& probes) {
  if (probes.empty()) throw std::invalid_argument("bracket_crossing: no probes");
  PtcRow row;
  row.probes = probes;
  const auto above = [](double rate) { return rate >= 0.5; };
  std::vector<std::size_t> crossings;
  for (std::size_t i = 0; i + 1 < probes.size(); ++i) {
    if (above(probes[i].second) != above(probes[i + 1].second)) crossings.push_back(i);
  }
  if (crossings.empty()) {
    row.boundary = true;
    if (above(probes.front().second)) {
      row.rho50 = 1.0;
      row.rho_lo = probes.back().first;
      row.rho_hi = 1.0;
    } else {
      row.rho50 = probes.front().first;
      row.rho_lo = 0.0;
      row.rho_hi = probes.front().first;
    }
    return row;
  }
  const std::size_t first = crossings.front();
  const std::size_t last = crossings.back();
  row.rho_lo = probes[first].first;
  row.rho_hi = probes[last + 1].first;
  if (crossings.size() == 1 && above(probes[first].second)) {
    const auto [r0, s0] = probes[first];
    const auto [r1, s1] = probes[first + 1];
    row.rho50 = r0 + (s0 - 0.5) / (s0 - s1) * (r1 - r0);
  } else {
    row.non_monotone = true;
    row.rho50 = 0.5 * (row.rho_lo + row.rho_hi);
  }
  return row;
}

std::vector<PtcRow> estimate_ptc(const ExperimentSpec& spec) {
  if (spec.kind != ExperimentKind::ptc || !spec.ptc) throw ConfigError("estimate_ptc needs a ptc experiment with a ptc section");
  spec.validate();
  const PtcSpec& ptc = *spec.ptc;
  std::vector<double> rhos = ptc.rho_grid;
  std::sort(rhos.begin(), rhos.end());
  rhos.erase(std::unique(rhos.begin(), rhos.end()), rhos.end());

  std::vector<PtcRow> rows;
  for (double dn : ptc.d_over_n) {
    for (double delta : ptc.deltas) {
      const auto rate_at = [&](double rho) {
        return success_rate(spec, SweepPoint{0.0, delta, rho, dn, 0}, ptc.trials_per_probe);
      };
      std::vector<std::pair<double, double>> probes;
      for (double rho : rhos) probes.emplace_back(rho, rate_at(rho));
      PtcRow row = bracket_crossing(probes);
      if (!row.boundary && !row.non_monotone) {
        double lo = row.rho_lo;
        double hi = row.rho_hi;
        double s_lo = 0.0, s_hi = 0.0;
        for (const auto& [r, s] : probes) {
          if (r == lo) s_lo = s;
          if (r == hi) s_hi = s;
        }
        for (int step = 0; step < ptc.refine_steps; ++step) {
          const double mid = 0.5 * (lo + hi);
          const double s = rate_at(mid);
          probes.emplace_back(mid, s);
          if (s >= 0.5) {
            lo = mid;
            s_lo = s;
          } else {
            hi = mid;
            s_hi = s;
          }
        }
        std::sort(probes.begin(), probes.end());
        row.probes = probes;
        row.rho_lo = lo;
        row.rho_hi = hi;
        row.rho50 = lo + (s_lo - 0.5) / (s_lo - s_hi) * (hi - lo);
      }
      row.d_over_n = dn;
      row.delta = delta;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace grampa::harness
