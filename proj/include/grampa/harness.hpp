#pragma once

#include "grampa/analysis.hpp"
#include "grampa/gamp.hpp"
#include "grampa/linops.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace grampa::harness {

inline constexpr int kSchemaVersion = 1;

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { bg_fd, ptc, phantom };

std::string to_string(ExperimentKind kind);

/// One sweep coordinate. Which fields are meaningful depends on the experiment kind:
/// bg-fd uses m_over_n; ptc uses delta, rho, d_over_n; phantom uses lines.
struct SweepPoint {
  double m_over_n = 0.0;
  double delta = 0.0;
  double rho = 0.0;
  double d_over_n = 0.0;
  int lines = 0;
};

std::vector<std::string> sweep_field_names(ExperimentKind kind);
std::vector<double> sweep_field_values(ExperimentKind kind, const SweepPoint& point);

struct ProblemSettings {
  int n = 0;                         // signal length (bg-fd, ptc) or image side (phantom)
  double sparsity_rate = 0.05;       // bg-fd
  std::optional<double> snr_db;      // unset: noiseless
  std::string analysis_reg = "snipe";  // snipe | l1 | bg
  double bg_sigma_sq = 1.0;          // slab variance when analysis_reg = bg
  analysis::PixelRegularizer pixel_reg = analysis::PixelRegularizer::none;
  std::vector<linops::Direction> directions;  // phantom
  double success_nsnr = 1e6;
};

enum class TuningMode {
  per_trial,  // best grid value per trial, by that trial's NSNR
  per_point,  // one grid value per sweep point, maximizing the median NSNR over its trials
};

struct TuningSpec {
  std::vector<double> grid;  // omega (snipe), lambda (l1) or beta (bg)
  TuningMode mode = TuningMode::per_trial;
};

/// Settings for `ptc`: one success-rate column per (d_over_n, delta).
struct PtcSpec {
  std::vector<double> deltas;
  std::vector<double> d_over_n;
  std::vector<double> rho_grid;
  int trials_per_probe = 10;
  int refine_steps = 2;
};

struct ExperimentSpec {
  std::string name;
  ExperimentKind kind = ExperimentKind::bg_fd;
  ProblemSettings problem;
  std::vector<SweepPoint> grid;
  int trials = 1;
  TuningSpec tuning;
  gamp::GampConfig solver;
  std::uint64_t seed_base = 0;
  int workers = 1;
  std::optional<PtcSpec> ptc;

  void validate() const;
};

/// Parses a versioned JSON experiment document. Unknown keys are errors.
ExperimentSpec parse_experiment(const std::string& json_text);
ExperimentSpec load_experiment(const std::filesystem::path& path);

/// seed_base xor a hash of (sweep point, trial index).
std::uint64_t trial_seed(std::uint64_t seed_base, ExperimentKind kind, const SweepPoint& point, int trial);

/// Everything one trial needs: ground truth plus the problem template (regularizer
/// parameter filled in per grid value).
struct TrialProblem {
  linops::Vector x;
  analysis::AnalysisProblem problem;
  std::int64_t image_side = 0;  // phantom only
};

TrialProblem generate_trial(const ExperimentSpec& spec, const SweepPoint& point, std::uint64_t seed);

/// Sets the tunable parameter of `problem` (omega, lambda or beta).
void set_tuned_param(analysis::AnalysisProblem& problem, double value);

struct RunOutcome {
  double param = 0.0;
  double nsnr_db = 0.0;
  int iterations = 0;
  double wall_time_s = 0.0;
  bool diverged = false;
  bool converged = false;
};

/// Solves `trial` once with `param`. Divergence is caught and scored from the last finite
/// iterate. When `x_hat` is given it receives the estimate.
RunOutcome run_once(const ExperimentSpec& spec, const TrialProblem& trial, double param,
                    linops::Vector* x_hat = nullptr);

struct TrialResult {
  std::size_t point_index = 0;
  SweepPoint point;
  int trial = 0;
  std::uint64_t seed = 0;
  double tuned_param = 0.0;
  double nsnr_db = 0.0;
  bool success = false;
  int iterations = 0;
  double wall_time_s = 0.0;
  bool diverged = false;
};

struct PointSummary {
  SweepPoint point;
  double median_nsnr_db = 0.0;
  double success_rate = 0.0;
  double median_iterations = 0.0;
  double median_wall_time_s = 0.0;
  int diverged = 0;
  std::vector<double> tuned_params;
};

struct ExperimentResult {
  std::vector<TrialResult> trials;   // ordered by (point index, trial)
  std::vector<PointSummary> points;  // one per sweep point
  /// Phantom runs keep the trial-0 reconstruction of each sweep point.
  std::vector<std::pair<std::size_t, linops::Vector>> images;
};

/// Runs every (sweep point, trial) cell, tuning over spec.tuning.grid. Trials run on
/// spec.workers threads; results do not depend on the worker count.
ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Grid value with the highest median NSNR over `trials` trials seeded from `seed`.
/// Ties go to the smaller value.
double tune_param(const ExperimentSpec& spec, const SweepPoint& point, std::span<const double> grid, int trials,
                  std::uint64_t seed);

/// Index of the best column of a (trial x grid) NSNR matrix by median; ties to the smaller
/// grid value.
std::size_t select_by_median(const std::vector<std::vector<double>>& nsnr_db, std::span<const double> grid);

double median(std::vector<double> values);

struct PtcRow {
  double d_over_n = 0.0;
  double delta = 0.0;
  double rho50 = 0.0;
  double rho_lo = 0.0;  // bracketing interval for the 50% crossing
  double rho_hi = 0.0;
  bool boundary = false;      // no crossing inside the grid
  bool non_monotone = false;  // several crossings; [rho_lo, rho_hi] spans all of them
  std::vector<std::pair<double, double>> probes;  // (rho, success rate)
};

/// Empirical success rate of GrAMPA at one (delta, rho, d_over_n) point.
double success_rate(const ExperimentSpec& spec, const SweepPoint& point, int trials);

/// Locates the 50%-success level of rho for every (d_over_n, delta) column of spec.ptc.
std::vector<PtcRow> estimate_ptc(const ExperimentSpec& spec);

/// Crossing analysis of a success profile sorted by rho; `probes` must be nonempty.
PtcRow bracket_crossing(const std::vector<std::pair<double, double>>& probes);

// Output writers.
void write_results_csv(const std::filesystem::path& path, const ExperimentSpec& spec,
                       const std::vector<TrialResult>& trials);
void write_summary_json(const std::filesystem::path& path, const ExperimentSpec& spec,
                        const ExperimentResult& result);
void write_curve(const std::filesystem::path& path, const std::vector<std::pair<double, double>>& xy);
void write_ptc_csv(const std::filesystem::path& path, const std::vector<PtcRow>& rows);
void write_ptc_summary_json(const std::filesystem::path& path, const ExperimentSpec& spec,
                            const std::vector<PtcRow>& rows);

/// Writes results.csv, summary.json, curve_*.dat and (phantom) PGM images into `out_dir`.
void write_experiment_outputs(const std::filesystem::path& out_dir, const ExperimentSpec& spec,
                              const ExperimentResult& result);
void write_ptc_outputs(const std::filesystem::path& out_dir, const ExperimentSpec& spec,
                       const std::vector<PtcRow>& rows);

}  // namespace grampa::harness
