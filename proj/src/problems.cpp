#include "grampa/problems.hpp"
#include "grampa/rng.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace grampa::problems {

Vector gen_bg_fd_signal(std::int64_t n, double sparsity_rate, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("gen_bg_fd_signal: n must be >= 2");
  if (!(sparsity_rate > 0.0 && sparsity_rate < 1.0)) {
    throw std::invalid_argument("gen_bg_fd_signal: sparsity rate must be in (0, 1)");
  }
  Rng rng(seed);
  Vector x(n);
  x[0] = rng.normal();
  for (std::int64_t k = 1; k < n; ++k) {
    const double u = rng.bernoulli(sparsity_rate) ? rng.normal() : 0.0;
    x[k] = x[k - 1] + u;
  }
  return x;
}

TightFrame gen_tight_frame(std::int64_t n, std::int64_t d, std::uint64_t seed) {
  if (n < 1 || d < n) throw std::invalid_argument("gen_tight_frame: need d >= n >= 1");
  Rng rng(seed);
  Eigen::MatrixXd w(d, n);
  for (std::int64_t r = 0; r < d; ++r) {
    for (std::int64_t c = 0; c < n; ++c) w(r, c) = rng.normal();
  }
  const double tight_scale = std::sqrt(static_cast<double>(d) / static_cast<double>(n));

  constexpr int kRounds = 20;
  for (int round = 0; round < kRounds; ++round) {
    // Polar factor W (W^T W)^{-1/2}, scaled so the columns have squared norm d/n.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w.transpose() * w);
    const Eigen::VectorXd inv_sqrt = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    w = tight_scale * (w * (eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose()));
    w.rowwise().normalize();
  }

  const Eigen::VectorXd row_norms = w.rowwise().norm();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gram(w.transpose() * w, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd sv = gram.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  TightFrame out{linops::make_dense(w, linops::Kernel::frame),
                 (row_norms.array() - 1.0).abs().maxCoeff(),
                 (sv.array() / tight_scale - 1.0).abs().maxCoeff()};
  return out;
}

Vector gen_cosparse_signal(const LinearOperator& omega, std::int64_t l, std::uint64_t seed) {
  const std::int64_t d = omega.rows();
  const std::int64_t n = omega.cols();
  if (l < 0 || l > d) throw std::invalid_argument("gen_cosparse_signal: need 0 <= l <= D");
  Rng rng(seed);
  const Eigen::MatrixXd full = omega.dense();

  constexpr int kMaxTries = 100;
  for (int attempt = 0; attempt <= kMaxTries; ++attempt) {
    const auto cosupport = rng.sample_without_replacement(d, l);
    Vector z(n);
    for (std::int64_t k = 0; k < n; ++k) z[k] = rng.normal();
    if (l == 0) return z.normalized();

    Eigen::MatrixXd rows_t(n, l);
    for (std::int64_t k = 0; k < l; ++k) rows_t.col(k) = full.row(cosupport[k]).transpose();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(rows_t);
    const auto rank = qr.rank();
    if (rank >= n) continue;  // only the zero vector satisfies the constraints

    // Remove the component of z in the row space of Omega_Lambda.
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, rank);
    Vector x = z - q * (q.transpose() * z);
    const double norm = x.norm();
    if (!(norm > 1e-8)) continue;
    x /= norm;

    double worst = 0.0;
    for (std::int64_t k = 0; k < l; ++k) worst = std::max(worst, std::abs(full.row(cosupport[k]).dot(x)));
    if (worst <= 1e-10) return x;
  }
  throw std::runtime_error("gen_cosparse_signal: no nontrivial cosparse signal found after retries");
}

LinearOperator gen_gaussian_matrix(std::int64_t m, std::int64_t n, std::uint64_t seed) {
  if (m < 1 || n < 1) throw std::invalid_argument("gen_gaussian_matrix: dimensions must be positive");
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  Eigen::MatrixXd a(m, n);
  for (std::int64_t r = 0; r < m; ++r) {
    for (std::int64_t c = 0; c < n; ++c) a(r, c) = scale * rng.normal();
  }
  return linops::make_dense(std::move(a), linops::Kernel::iid_gaussian);
}

Vector shepp_logan(std::int64_t n) {
  if (n < 8) throw std::invalid_argument("shepp_logan: n must be >= 8");
  struct Ellipse {
    double intensity, a, b, x0, y0, phi_deg;
  };
  static constexpr Ellipse kTable[] = {
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},          {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},  {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
      {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},     {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},     {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
      {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},   {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
  };
  // Pixel centers span [-1, 1]; row 0 is the top (y = +1).
  const double half = (static_cast<double>(n) - 1.0) / 2.0;
  Vector img = Vector::Zero(n * n);
  for (std::int64_t r = 0; r < n; ++r) {
    const double y = (half - static_cast<double>(r)) / half;
    for (std::int64_t c = 0; c < n; ++c) {
      const double x = (static_cast<double>(c) - half) / half;
      double v = 0.0;
      for (const auto& e : kTable) {
        const double phi = e.phi_deg * std::numbers::pi / 180.0;
        const double dx = x - e.x0;
        const double dy = y - e.y0;
        const double u = dx * std::cos(phi) + dy * std::sin(phi);
        const double w = dy * std::cos(phi) - dx * std::sin(phi);
        if (u * u / (e.a * e.a) + w * w / (e.b * e.b) <= 1.0) v += e.intensity;
      }
      img[r * n + c] = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

double awgn_variance(const Vector& z, double snr_db) {
  if (z.size() == 0) throw std::invalid_argument("awgn_variance: empty signal");
  if (std::isinf(snr_db) && snr_db > 0.0) return 0.0;
  return z.squaredNorm() / (static_cast<double>(z.size()) * std::pow(10.0, snr_db / 10.0));
}

Vector add_awgn(const Vector& z, double snr_db, std::uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0.0) return z;
  if (std::isnan(snr_db)) throw std::invalid_argument("add_awgn: snr_db is NaN");
  if (!(z.squaredNorm() > 0.0)) throw std::invalid_argument("add_awgn: zero signal has no SNR");
  Rng rng(seed);
  Vector w(z.size());
  for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = rng.normal();
  const double target = z.squaredNorm() / std::pow(10.0, snr_db / 10.0);
  w *= std::sqrt(target / w.squaredNorm());
  return z + w;
}

double nsnr(const Vector& x, const Vector& x_hat) {
  if (x.size() != x_hat.size()) throw std::invalid_argument("nsnr: length mismatch");
  const double signal = x.squaredNorm();
  if (!(signal > 0.0)) throw std::invalid_argument("nsnr: reference signal is zero");
  const double err = (x_hat - x).squaredNorm();
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return signal / err;
}

double nsnr_db(const Vector& x, const Vector& x_hat) { return 10.0 * std::log10(nsnr(x, x_hat)); }

}  // namespace grampa::problems
