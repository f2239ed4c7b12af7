#include "grampa/denoisers.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace grampa::denoisers {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Returns (s, 1 - s) for s = 1 / (1 + exp(a)) without overflow.
std::pair<double, double> logistic_pair(double a) {
  if (a > 0.0) {
    const double e = std::exp(-a);
    return {e / (1.0 + e), 1.0 / (1.0 + e)};
  }
  const double e = std::exp(a);
  return {1.0 / (1.0 + e), e / (1.0 + e)};
}

double log_normal_pdf(double x, double var) {
  return -0.5 * x * x / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw std::invalid_argument(std::string(what) + " must be positive");
}

}  // namespace

DenoiserEval snipe(double q_hat, double nu_q, SnipeParams params) {
  require_positive(nu_q, "snipe: nu_q");
  const double snr = q_hat * q_hat / nu_q;
  const auto [s, one_minus_s] = logistic_pair(params.omega - 0.5 * snr);
  return {q_hat * s, s * (1.0 + snr * one_minus_s)};
}

double snipe_from_slab_limit(double q_hat, double nu_q, double omega, double sigma) {
  require_positive(nu_q, "snipe_from_slab_limit: nu_q");
  require_positive(sigma, "snipe_from_slab_limit: sigma");
  using boost::math::quadrature::gauss_kronrod;

  const double p0_at_zero = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const auto slab = [&](double u) {
    const double t = u / sigma;
    return p0_at_zero * std::exp(-0.5 * t * t);
  };
  const auto likelihood = [&](double u) {
    const double d = u - q_hat;
    return std::exp(-0.5 * d * d / nu_q) / std::sqrt(2.0 * std::numbers::pi * nu_q);
  };

  // The slab-times-likelihood product is Gaussian; integrate over its +-12 sd window.
  const double s2 = sigma * sigma;
  const double center = q_hat * s2 / (s2 + nu_q);
  const double half = 12.0 * std::sqrt(s2 * nu_q / (s2 + nu_q));
  double err_num = 0.0;
  double err_den = 0.0;
  const double num = gauss_kronrod<double, 15>::integrate(
      [&](double u) { return u * slab(u) * likelihood(u); }, center - half, center + half, 25, 1e-13, &err_num);
  const double den_slab = gauss_kronrod<double, 15>::integrate(
      [&](double u) { return slab(u) * likelihood(u); }, center - half, center + half, 25, 1e-13, &err_den);
  if (!std::isfinite(num) || !std::isfinite(den_slab)) {
    throw NumericFailure("snipe_from_slab_limit: non-finite integral");
  }
  if (err_den > 1e-8 * std::abs(den_slab) + 1e-300) {
    throw NumericFailure("snipe_from_slab_limit: quadrature did not converge");
  }

  // beta = sigma / (sigma + p0(0) sqrt(2 pi nu) e^omega), so sigma (1 - beta) / beta reduces to
  // p0(0) sqrt(2 pi nu) e^omega exactly.
  const double spike_weight = p0_at_zero * std::sqrt(2.0 * std::numbers::pi * nu_q) * std::exp(omega);
  const double den = den_slab + spike_weight * likelihood(0.0);
  if (!(den > 0.0)) throw NumericFailure("snipe_from_slab_limit: vanishing evidence");
  return num / den;
}

DenoiserEval awgn_output_mmse(double p_hat, double nu_p, AwgnChannelParams params) {
  require_positive(nu_p, "awgn_output_mmse: nu_p");
  if (!(params.noise_var >= 0.0)) throw std::invalid_argument("awgn_output_mmse: negative noise variance");
  const double total = nu_p + params.noise_var;
  return {p_hat + nu_p / total * (params.y - p_hat), params.noise_var / total};
}

DenoiserEval soft_threshold_map(double r_hat, double nu_r, double lambda) {
  require_positive(nu_r, "soft_threshold_map: nu_r");
  const double t = lambda * nu_r;
  const double mag = std::abs(r_hat) - t;
  if (mag > 0.0) return {std::copysign(mag, r_hat), 1.0};
  return {0.0, 0.0};
}

DenoiserEval bernoulli_gaussian_mmse(double r_hat, double nu_r, BernoulliGaussianParams params) {
  require_positive(nu_r, "bernoulli_gaussian_mmse: nu_r");
  if (!(params.beta > 0.0 && params.beta <= 1.0)) {
    throw std::invalid_argument("bernoulli_gaussian_mmse: beta must be in (0, 1]");
  }
  require_positive(params.sigma_sq, "bernoulli_gaussian_mmse: sigma_sq");

  const double slab_total = params.sigma_sq + nu_r;
  const double log_spike = std::log1p(-params.beta) + log_normal_pdf(r_hat, nu_r);
  const double log_slab = std::log(params.beta) + log_normal_pdf(r_hat, slab_total);
  // pi = P(nonzero | r) = 1 / (1 + exp(log_spike - log_slab))
  const auto [pi, one_minus_pi] = logistic_pair(log_spike - log_slab);

  const double gain = params.sigma_sq / slab_total;
  const double gamma = r_hat * gain;
  const double slab_var = gain * nu_r;
  const double posterior_var = pi * slab_var + pi * one_minus_pi * gamma * gamma;
  return {pi * gamma, posterior_var / nu_r};
}

DenoiserEval nonneg_map(double r_hat, double nu_r) {
  require_positive(nu_r, "nonneg_map: nu_r");
  if (r_hat > 0.0) return {r_hat, 1.0};
  return {0.0, 0.0};
}

DenoiserEval nonneg_mmse(double r_hat, double nu_r) {
  require_positive(nu_r, "nonneg_mmse: nu_r");
  const double sd = std::sqrt(nu_r);
  const double alpha = -r_hat / sd;

  if (alpha > 5.0) {
    // Deep in the truncated tail phi/Phi_c and the variance both lose precision through
    // cancellation; use the Mills-ratio continued fraction
    //   lambda = alpha + 1/D1,  D_k = alpha + (k+1)/D_{k+1}.
    constexpr int kTerms = 200;
    double d_next = alpha;
    for (int k = kTerms; k >= 2; --k) d_next = alpha + static_cast<double>(k + 1) / d_next;
    const double d2 = d_next;
    const double d1 = alpha + 2.0 / d2;
    const double e = 2.0 / d2;
    // Var/nu = 1 - lambda (lambda - alpha) = (e D1 - 1) / D1^2
    const double derivative = (e * d1 - 1.0) / (d1 * d1);
    return {sd / d1, std::clamp(derivative, 0.0, 1.0)};
  }

  // lambda = phi(alpha) / Phi_c(alpha) = sqrt(2/pi) / erfcx(alpha / sqrt 2)
  const double x = alpha / std::numbers::sqrt2;
  const double erfcx = std::exp(x * x) * std::erfc(x);
  const double lambda = std::isinf(erfcx) ? 0.0 : std::sqrt(2.0 / std::numbers::pi) / erfcx;
  const double derivative = 1.0 + alpha * lambda - lambda * lambda;
  return {std::max(r_hat + sd * lambda, 0.0), std::clamp(derivative, 0.0, 1.0)};
}

DenoiserEval quadrature_mmse(const Penalty& penalty, double center, double variance,
                             const std::vector<Atom>& atoms, const std::vector<double>& breakpoints) {
  require_positive(variance, "quadrature_mmse: variance");
  using boost::math::quadrature::gauss_kronrod;

  const double sd = std::sqrt(variance);
  const double lo = center - 12.0 * sd;
  const double hi = center + 12.0 * sd;
  std::vector<double> edges{lo};
  for (double b : breakpoints) {
    if (b > lo && b < hi) edges.push_back(b);
  }
  edges.push_back(hi);
  std::sort(edges.begin(), edges.end());

  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * variance);
  const auto weight = [&](double x) {
    const double g = penalty(x);
    if (std::isnan(g) || g == -kInf) throw NumericFailure("quadrature_mmse: non-finite penalty");
    if (g == kInf) return 0.0;
    const double d = x - center;
    return std::exp(-g - 0.5 * d * d / variance) * norm;
  };
  const auto integrate = [&](auto&& f) {
    // Fixed panels set the scale; each panel is then bisected against an absolute tolerance
    // derived from it. Boost's own adaptive mode derives that tolerance from a single
    // first-pass estimate, which recurses without bound when the posterior is narrow.
    constexpr int kPanels = 48;
    std::vector<std::pair<double, double>> panels;
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
      const int count = std::max(1, static_cast<int>(std::ceil(kPanels * (edges[k + 1] - edges[k]) / (hi - lo))));
      const double step = (edges[k + 1] - edges[k]) / count;
      for (int j = 0; j < count; ++j) {
        panels.emplace_back(edges[k] + step * j, j + 1 == count ? edges[k + 1] : edges[k] + step * (j + 1));
      }
    }
    double l1_total = 0.0;
    for (const auto& [a, b] : panels) {
      double l1 = 0.0;
      gauss_kronrod<double, 15>::integrate(f, a, b, 0, 0.0, nullptr, &l1);
      l1_total += l1;
    }
    const double tol = 1e-13 * l1_total;
    double total = 0.0;
    double err_total = 0.0;
    const std::function<double(double, double, double, int)> refine = [&](double a, double b, double abs_tol,
                                                                          int depth) {
      double err = 0.0;
      const double v = gauss_kronrod<double, 15>::integrate(f, a, b, 0, 0.0, &err);
      err *= 0.5 * (b - a);  // reported on the reference interval [-1, 1]
      if (err <= abs_tol || depth == 0) {
        err_total += err;
        return v;
      }
      const double mid = 0.5 * (a + b);
      return refine(a, mid, 0.5 * abs_tol, depth - 1) + refine(mid, b, 0.5 * abs_tol, depth - 1);
    };
    for (const auto& [a, b] : panels) total += refine(a, b, tol, 20);
    if (!std::isfinite(total)) throw NumericFailure("quadrature_mmse: non-finite integral");
    if (err_total > 1e-10 * l1_total + 1e-300) throw NumericFailure("quadrature_mmse: quadrature did not converge");
    return total;
  };
  const auto atom_weight = [&](const Atom& a) {
    const double d = a.location - center;
    return a.weight * std::exp(-0.5 * d * d / variance) * norm;
  };

  double mass = integrate(weight);
  double first = integrate([&](double x) { return (x - center) * weight(x); });
  for (const auto& a : atoms) {
    const double w = atom_weight(a);
    mass += w;
    first += (a.location - center) * w;
  }
  if (!(mass > 0.0)) throw NumericFailure("quadrature_mmse: zero posterior mass");
  const double mean = center + first / mass;

  double second = integrate([&](double x) {
    const double d = x - mean;
    return d * d * weight(x);
  });
  for (const auto& a : atoms) {
    const double d = a.location - mean;
    second += d * d * atom_weight(a);
  }
  return {mean, second / mass / variance};
}

// ---------------------------------------------------------------------------

std::string to_string(Flavor flavor) { return flavor == Flavor::map ? "map" : "mmse"; }

double ScalarDenoiser::penalty(Eigen::Index, double) const {
  throw std::logic_error(name() + ": posterior-mean denoiser has no scalar penalty");
}

Eigen::Index layout_size(const DenoiserLayout& layout) {
  Eigen::Index total = 0;
  for (const auto& b : layout) total += b.size;
  return total;
}

namespace {

template <class F>
void apply_elementwise(const VectorRef& mean, const VectorRef& var, Eigen::Ref<Vector> value,
                       Eigen::Ref<Vector> derivative, F&& f) {
  for (Eigen::Index k = 0; k < mean.size(); ++k) {
    const DenoiserEval e = f(k, mean[k], var[k]);
    value[k] = e.value;
    derivative[k] = e.derivative;
  }
}

class AwgnOutput final : public ScalarDenoiser {
 public:
  AwgnOutput(Vector y, double noise_var) : y_(std::move(y)), noise_var_(noise_var) {
    if (!(noise_var_ >= 0.0)) throw std::invalid_argument("awgn output: noise variance must be >= 0");
  }
  std::string name() const override { return "awgn"; }
  bool supports(Flavor) const override { return true; }
  void denoise(const VectorRef& mean, const VectorRef& var, Eigen::Ref<Vector> value,
               Eigen::Ref<Vector> derivative) const override {
    if (mean.size() != y_.size()) throw std::invalid_argument("awgn output: block size mismatch");
    apply_elementwise(mean, var, value, derivative, [&](Eigen::Index k, double p, double v) {
      return awgn_output_mmse(p, v, {y_[k], noise_var_});
    });
  }
  double penalty(Eigen::Index index, double v) const override {
    const double d = y_[index] - v;
    if (noise_var_ == 0.0) return d == 0.0 ? 0.0 : kInf;
    return 0.5 * d * d / noise_var_;
  }

 private:
  Vector y_;
  double noise_var_;
};

class SnipeDenoiser final : public ScalarDenoiser {
 public:
  explicit SnipeDenoiser(SnipeParams p) : p_(p) {
    if (!std::isfinite(p_.omega)) throw std::invalid_argument("snipe: omega must be finite");
  }
  std::string name() const override { return "snipe"; }
  bool supports(Flavor f) const override { return f == Flavor::mmse; }
  void denoise(const VectorRef& mean, const VectorRef& var, Eigen::Ref<Vector> value,
               Eigen::Ref<Vector> derivative) const override {
    apply_elementwise(mean, var, value, derivative,
                      [&](Eigen::Index, double q, double v) { return snipe(q, v, p_); });
  }

 private:
  SnipeParams p_;
};

class SoftThreshold final : public ScalarDenoiser {
 public:
  explicit SoftThreshold(double lambda) : lambda_(lambda) {
    if (!(lambda_ >= 0.0)) throw std::invalid_argument("soft threshold: lambda must be >= 0");
  }
  std::string name() const override { return "l1"; }
  bool supports(Flavor f) const override { return f == Flavor::map; }
  void denoise(const VectorRef& mean, const VectorRef& var, Eigen::Ref<Vector> value,
               Eigen::Ref<Vector> derivative) const override {
    apply_elementwise(mean, var, value, derivative,
                      [&](Eigen::Index, double r, double v) { return soft_threshold_map(r, v, lambda_); });
  }
  double penalty(Eigen::Index, double v) const override { return lambda_ * std::abs(v); }

 private:
  double lambda_;
};

class BernoulliGaussian final : public ScalarDenoiser {
 public:
  explicit BernoulliGaussian(BernoulliGaussianParams p) : p_(p) {
    if (!(p_.beta > 0.0 && p_.beta <= 1.0) || !(p_.sigma_sq > 0.0)) {
      throw std::invalid_argument("bernoulli-gaussian: need beta in (0,1] and sigma_sq > 0");
    }
  }
  std::string name() const override { return "bg"; }
  bool supports(Flavor f) const override { return f == Flavor::mmse; }
  void denoise(const VectorRef& mean, const VectorRef& var, Eigen::Ref<Vector> value,
               Eigen::Ref<Vector> derivative) const override {
    apply_elementwise(mean, var, value, derivative,
                      [&](Eigen::Index, double r, double v) { return bernoulli_gaussian_mmse(r, v, p_); });
  }
  std::optional<double> prior_variance() const override { return p_.beta * p_.sigma_sq; }

 private:
  BernoulliGaussianParams p_;
};

class Nonneg final : public ScalarDenoiser {
 public:
  explicit Nonneg(Flavor f) : flavor_(f) {}
  std::string name() const override { return "nonneg-" + to_string(flavor_); }
  bool supports(Flavor f) const override { return f == flavor_; }
  void denoise(const VectorRef& mean, const VectorRef& var, Eigen::Ref<Vector> value,
               Eigen::Ref<Vector> derivative) const override {
    if (flavor_ == Flavor::map) {
      apply_elementwise(mean, var, value, derivative,
                        [](Eigen::Index, double r, double v) { return nonneg_map(r, v); });
    } else {
      apply_elementwise(mean, var, value, derivative,
                        [](Eigen::Index, double r, double v) { return nonneg_mmse(r, v); });
    }
  }
  double penalty(Eigen::Index, double v) const override { return v >= 0.0 ? 0.0 : kInf; }

 private:
  Flavor flavor_;
};

class IdentityDenoiser final : public ScalarDenoiser {
 public:
  std::string name() const override { return "none"; }
  bool supports(Flavor) const override { return true; }
  void denoise(const VectorRef& mean, const VectorRef&, Eigen::Ref<Vector> value,
               Eigen::Ref<Vector> derivative) const override {
    value = mean;
    derivative.setOnes();
  }
  double penalty(Eigen::Index, double) const override { return 0.0; }
};

class FixedZero final : public ScalarDenoiser {
 public:
  std::string name() const override { return "fixed-zero"; }
  bool supports(Flavor) const override { return true; }
  void denoise(const VectorRef&, const VectorRef&, Eigen::Ref<Vector> value,
               Eigen::Ref<Vector> derivative) const override {
    value.setZero();
    derivative.setZero();
  }
  double penalty(Eigen::Index, double v) const override { return v == 0.0 ? 0.0 : kInf; }
};

class GaussianPrior final : public ScalarDenoiser {
 public:
  GaussianPrior(double mean, double var) : mean_(mean), var_(var) {
    require_positive(var_, "gaussian prior: variance");
  }
  std::string name() const override { return "gaussian"; }
  bool supports(Flavor) const override { return true; }
  void denoise(const VectorRef& mean, const VectorRef& var, Eigen::Ref<Vector> value,
               Eigen::Ref<Vector> derivative) const override {
    for (Eigen::Index k = 0; k < mean.size(); ++k) {
      const double gain = var_ / (var_ + var[k]);
      value[k] = mean_ + gain * (mean[k] - mean_);
      derivative[k] = gain;
    }
  }
  double penalty(Eigen::Index, double v) const override {
    const double d = v - mean_;
    return 0.5 * d * d / var_;
  }
  std::optional<double> prior_variance() const override { return var_; }

 private:
  double mean_;
  double var_;
};

}  // namespace

DenoiserPtr make_awgn_output(Vector y, double noise_var) {
  return std::make_shared<AwgnOutput>(std::move(y), noise_var);
}
DenoiserPtr make_snipe(SnipeParams params) { return std::make_shared<SnipeDenoiser>(params); }
DenoiserPtr make_soft_threshold(double lambda) { return std::make_shared<SoftThreshold>(lambda); }
DenoiserPtr make_bernoulli_gaussian(BernoulliGaussianParams params) {
  return std::make_shared<BernoulliGaussian>(params);
}
DenoiserPtr make_nonneg(Flavor flavor) { return std::make_shared<Nonneg>(flavor); }
DenoiserPtr make_identity_denoiser() { return std::make_shared<IdentityDenoiser>(); }
DenoiserPtr make_fixed_zero() { return std::make_shared<FixedZero>(); }
DenoiserPtr make_gaussian_prior(double mean, double var) { return std::make_shared<GaussianPrior>(mean, var); }

}  // namespace grampa::denoisers
