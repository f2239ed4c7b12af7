#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace grampa::denoisers {

using Vector = Eigen::VectorXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

/// Raised when a quadrature does not converge or meets a non-finite integrand.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Denoised estimate and its derivative with respect to the (first) mean argument.
struct DenoiserEval {
  double value = 0.0;
  double derivative = 0.0;
};

struct SnipeParams {
  double omega = 0.0;
};

struct BernoulliGaussianParams {
  double beta = 0.1;      // probability of a nonzero
  double sigma_sq = 1.0;  // slab variance
};

struct AwgnChannelParams {
  double y = 0.0;
  double noise_var = 0.0;
};

// ---------------------------------------------------------------------------
// Scalar denoisers
// ---------------------------------------------------------------------------

/// Posterior mean of a spike-and-slab variable in the infinite-variance-slab limit:
/// q / (1 + exp(omega - q^2 / (2 nu))).
DenoiserEval snipe(double q_hat, double nu_q, SnipeParams params);

/// Finite-slab version of snipe, evaluated by quadrature with a standard normal slab shape
/// and the sparsity rate tied to sigma so that sigma -> inf recovers snipe(). Test oracle.
double snipe_from_slab_limit(double q_hat, double nu_q, double omega, double sigma);

/// Posterior mean of z ~ N(p_hat, nu_p) observed through y = z + N(0, noise_var).
DenoiserEval awgn_output_mmse(double p_hat, double nu_p, AwgnChannelParams params);

/// argmin_x lambda |x| + (x - r)^2 / (2 nu).
DenoiserEval soft_threshold_map(double r_hat, double nu_r, double lambda);

/// Posterior mean under (1 - beta) delta(x) + beta N(x; 0, sigma_sq).
DenoiserEval bernoulli_gaussian_mmse(double r_hat, double nu_r, BernoulliGaussianParams params);

/// Projection onto [0, inf). The derivative at r_hat = 0 is 0.
DenoiserEval nonneg_map(double r_hat, double nu_r);

/// Mean of N(r_hat, nu_r) truncated to [0, inf).
DenoiserEval nonneg_mmse(double r_hat, double nu_r);

/// Point mass `weight * delta(x - location)` added to a quadrature prior.
struct Atom {
  double location = 0.0;
  double weight = 0.0;
};

/// Penalty g(x) for the quadrature oracle; may return +inf (zero density).
using Penalty = std::function<double(double)>;

/// Posterior mean and d(mean)/d(center) under prior exp(-penalty(x)) + sum of atoms and a
/// N(center, variance) likelihood, by adaptive Gauss-Kronrod quadrature over
/// center +- 12 sqrt(variance). `breakpoints` split the range at known discontinuities.
DenoiserEval quadrature_mmse(const Penalty& penalty, double center, double variance,
                             const std::vector<Atom>& atoms = {},
                             const std::vector<double>& breakpoints = {});

// ---------------------------------------------------------------------------
// Vectorized denoisers used by the GAMP iteration, one per contiguous block.
// ---------------------------------------------------------------------------

enum class Flavor { map, mmse };

std::string to_string(Flavor flavor);

class ScalarDenoiser {
 public:
  virtual ~ScalarDenoiser() = default;

  virtual std::string name() const = 0;
  virtual bool supports(Flavor flavor) const = 0;

  /// Elementwise (value, derivative) for the block; all spans have the block's length.
  virtual void denoise(const VectorRef& mean, const VectorRef& var, Eigen::Ref<Vector> value,
                       Eigen::Ref<Vector> derivative) const = 0;

  /// Scalar penalty f_i or g_n at `v` for the block-local index; +inf outside the support.
  /// Posterior-mean-only denoisers have no penalty and throw std::logic_error.
  virtual double penalty(Eigen::Index index, double v) const;

  /// Prior variance when the denoiser encodes a proper prior.
  virtual std::optional<double> prior_variance() const { return std::nullopt; }
};

using DenoiserPtr = std::shared_ptr<const ScalarDenoiser>;

/// A contiguous run of rows (outputs) or columns (inputs) sharing one denoiser.
struct DenoiserBlock {
  Eigen::Index size = 0;
  DenoiserPtr denoiser;
};

using DenoiserLayout = std::vector<DenoiserBlock>;

Eigen::Index layout_size(const DenoiserLayout& layout);

/// y = z + AWGN, one measurement per row of the block.
DenoiserPtr make_awgn_output(Vector y, double noise_var);
DenoiserPtr make_snipe(SnipeParams params);
DenoiserPtr make_soft_threshold(double lambda);
DenoiserPtr make_bernoulli_gaussian(BernoulliGaussianParams params);
DenoiserPtr make_nonneg(Flavor flavor);
/// G(r) = r, G' = 1 (flat prior).
DenoiserPtr make_identity_denoiser();
/// G(r) = 0, G' = 0.
DenoiserPtr make_fixed_zero();
/// Gaussian prior N(mean, var); MAP and MMSE coincide.
DenoiserPtr make_gaussian_prior(double mean, double var);

}  // namespace grampa::denoisers
