#pragma once

#include "grampa/linops.hpp"

#include <cstdint>
#include <vector>

namespace grampa::problems {

using linops::LinearOperator;
using linops::Vector;

/// x[0] ~ N(0, 1), x[k] = x[k-1] + u[k-1] with u i.i.d. Bernoulli(rate) * N(0, 1),
/// so fd1d(x) == u.
Vector gen_bg_fd_signal(std::int64_t n, double sparsity_rate, std::uint64_t seed);

struct TightFrame {
  LinearOperator omega;          // d x n
  double max_row_norm_error;     // max |‖row‖ - 1|
  double max_singular_error;     // max |s_k / sqrt(d/n) - 1|
};

/// Random almost-uniform, almost-tight frame: 20 rounds alternating a polar-factor projection
/// (Omega^T Omega = (d/n) I) and row normalization, starting from an i.i.d. Gaussian d x n.
TightFrame gen_tight_frame(std::int64_t n, std::int64_t d, std::uint64_t seed);

/// Unit-norm x with Omega x exactly zero on a uniformly random cosupport of size l.
Vector gen_cosparse_signal(const LinearOperator& omega, std::int64_t l, std::uint64_t seed);

/// Dense m x n with i.i.d. N(0, 1/m) entries.
LinearOperator gen_gaussian_matrix(std::int64_t m, std::int64_t n, std::uint64_t seed);

/// Modified (high-contrast) Shepp-Logan phantom on an n x n grid, row-major, values in [0, 1].
Vector shepp_logan(std::int64_t n);

/// z + w with w Gaussian, rescaled so ||z||^2 / ||w||^2 equals 10^(snr_db/10) exactly.
/// snr_db = +inf returns z unchanged.
Vector add_awgn(const Vector& z, double snr_db, std::uint64_t seed);

/// Per-entry variance of the noise add_awgn adds: ||z||^2 / (len * 10^(snr_db/10)).
double awgn_variance(const Vector& z, double snr_db);

/// ||x||^2 / ||x_hat - x||^2; +inf when they are equal.
double nsnr(const Vector& x, const Vector& x_hat);
double nsnr_db(const Vector& x, const Vector& x_hat);

}  // namespace grampa::problems
