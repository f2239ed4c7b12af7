#pragma once

#include "grampa/denoisers.hpp"
#include "grampa/linops.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace grampa::gamp {

using denoisers::DenoiserLayout;
using denoisers::Flavor;
using linops::LinearOperator;
using linops::Vector;
using linops::VectorRef;

struct GampConfig {
  double beta0 = 1.0;  // damping, in (0, 1]
  int t_max = 500;
  double eps = 1e-6;   // stop when ||x(t) - x(t+1)|| / ||x(t+1)|| < eps
  /// Absolute variance clamps. Unset means 1e-14 and 1e14 times the largest initial nu_x.
  std::optional<double> variance_floor;
  std::optional<double> variance_ceiling;
  Flavor mode = Flavor::mmse;
  bool record_trace = false;

  void validate() const;
};

struct VarianceBounds {
  double floor = 0.0;
  double ceiling = 0.0;
};

VarianceBounds resolve_bounds(const GampConfig& config, const VectorRef& init_nu_x);

/// Every iterate of the damped iteration. Before step t runs, x_hat/nu_x hold x(t), nu_x(t)
/// and the remaining vectors hold their t-1 values (zero when t = 1).
struct GampState {
  Vector x_hat, nu_x, x_tilde;
  Vector s_hat, nu_s, p_hat, nu_p, z_hat, nu_z;
  Vector r_hat, nu_r;
  int t = 1;

  static GampState initial(Eigen::Index rows, const VectorRef& init_x, const VectorRef& init_nu_x);
  bool all_finite() const;
};

struct TraceEntry {
  int t = 0;
  double beta = 1.0;
  double relative_change = 0.0;
};

struct GampResult {
  Vector x_hat;
  Vector nu_x;
  int iterations = 0;
  bool converged = false;
  std::vector<TraceEntry> trace;
  GampState final_state;
};

/// Thrown when an iterate turns non-finite; carries the last fully finite state.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, GampState last_finite)
      : std::runtime_error(what), last_finite_(std::move(last_finite)) {}
  const GampState& last_finite() const { return last_finite_; }

 private:
  GampState last_finite_;
};

/// Damping factor used at iteration t: 1 on the first iteration, beta0 afterwards.
inline double damping_at(int t, double beta0) { return t == 1 ? 1.0 : beta0; }

/// One sweep of the damped GAMP recursion, taking x(t) to x(t+1).
GampState gamp_step(const GampState& state, const LinearOperator& op, const DenoiserLayout& output,
                    const DenoiserLayout& input, const VarianceBounds& bounds, double beta0);

GampResult gamp_run(const LinearOperator& op, const DenoiserLayout& output, const DenoiserLayout& input,
                    const VectorRef& init_x, const VectorRef& init_nu_x, const GampConfig& config);

/// sum_i f_i([A x]_i) + sum_n g_n(x_n) from the denoisers' penalties.
double map_cost(const LinearOperator& op, const DenoiserLayout& output, const DenoiserLayout& input,
                const VectorRef& x);

/// Checks block sizes against the operator and every denoiser against `mode`.
void validate_layouts(const LinearOperator& op, const DenoiserLayout& output, const DenoiserLayout& input,
                      Flavor mode);

}  // namespace grampa::gamp
