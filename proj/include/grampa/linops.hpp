#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace grampa::linops {

using Vector = Eigen::VectorXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

enum class Kernel { dense, stacked, fd1d, fd2d, partial_fourier_realified, iid_gaussian, frame };

std::string to_string(Kernel kernel);

/// How the entrywise-squared applications (|A|.^2 v and |A|.^2' w) are evaluated.
///
/// `uniform_scalar` replaces every |a_in|^2 by frobenius_norm_sq / (rows * cols), which keeps
/// the total squared mass of the operator but forgets where it sits.
struct SquaredApplicationMode {
  enum class Mode { exact, uniform_scalar };
  Mode mode = Mode::exact;
  double frobenius_norm_sq = 0.0;

  static SquaredApplicationMode exact() { return {}; }
  static SquaredApplicationMode uniform(double frobenius_norm_sq) {
    return {Mode::uniform_scalar, frobenius_norm_sq};
  }
};

namespace detail {

// Implementation interface behind LinearOperator. Outputs are preallocated to the right size.
class OperatorKernel {
 public:
  OperatorKernel(std::int64_t rows, std::int64_t cols) : rows_(rows), cols_(cols) {}
  virtual ~OperatorKernel() = default;

  std::int64_t rows() const { return rows_; }
  std::int64_t cols() const { return cols_; }

  virtual Kernel tag() const = 0;
  virtual void forward(const VectorRef& v, Eigen::Ref<Vector> out) const = 0;
  virtual void adjoint(const VectorRef& w, Eigen::Ref<Vector> out) const = 0;
  virtual void squared_forward(const VectorRef& v, Eigen::Ref<Vector> out) const = 0;
  virtual void squared_adjoint(const VectorRef& w, Eigen::Ref<Vector> out) const = 0;
  virtual double frobenius_norm_sq() const = 0;

 private:
  std::int64_t rows_;
  std::int64_t cols_;
};

}  // namespace detail

/// Immutable matrix-free linear map R^cols -> R^rows.
///
/// Copies share the underlying kernel. All applications are const and may be called
/// concurrently.
class LinearOperator {
 public:
  LinearOperator(std::shared_ptr<const detail::OperatorKernel> kernel, SquaredApplicationMode mode);
  explicit LinearOperator(std::shared_ptr<const detail::OperatorKernel> kernel);

  std::int64_t rows() const { return kernel_->rows(); }
  std::int64_t cols() const { return kernel_->cols(); }
  Kernel kernel() const { return kernel_->tag(); }
  const SquaredApplicationMode& squared_mode() const { return mode_; }

  Vector forward(const VectorRef& v) const;
  Vector adjoint(const VectorRef& w) const;
  Vector squared_forward(const VectorRef& v) const;
  Vector squared_adjoint(const VectorRef& w) const;

  /// Sum of all |a_in|^2, from the kernel's closed form (independent of the squared mode).
  double frobenius_norm_sq() const { return kernel_->frobenius_norm_sq(); }

  /// Same kernel, different squared-application mode.
  LinearOperator with_squared_mode(SquaredApplicationMode mode) const;
  /// Shorthand for uniform mode using this operator's own Frobenius norm.
  LinearOperator with_uniform_squares() const;

  /// Column-by-column materialization through forward(e_n). Meant for small operators.
  Eigen::MatrixXd dense() const;

  const detail::OperatorKernel& impl() const { return *kernel_; }
  std::shared_ptr<const detail::OperatorKernel> impl_ptr() const { return kernel_; }

 private:
  std::shared_ptr<const detail::OperatorKernel> kernel_;
  SquaredApplicationMode mode_;
};

LinearOperator make_dense(Eigen::MatrixXd matrix, Kernel tag = Kernel::dense);
LinearOperator make_identity(std::int64_t n);

/// Vertical concatenation [top; bottom]. Both must have the same number of columns.
LinearOperator stack(const LinearOperator& top, const LinearOperator& bottom);

/// (n-1) x n first-difference operator, row k = e_{k+1} - e_k.
LinearOperator make_fd1d(std::int64_t n);

enum class Direction { horizontal, vertical, diagonal, antidiagonal };

/// Valid-region finite differences over a row-major h x w image, one block per direction,
/// stacked in the order given. Each row is +1 on a pixel and -1 on its neighbor; pairs that
/// leave the image are omitted.
LinearOperator make_fd2d(std::int64_t h, std::int64_t w, const std::vector<Direction>& directions);

/// Frequency index on an n x n DFT grid, both coordinates in [0, n).
struct Frequency {
  std::int64_t ky;
  std::int64_t kx;
  friend bool operator==(const Frequency&, const Frequency&) = default;
};

/// Nearest-grid-point rasterization of `lines` equally-angled lines through DC.
/// Angles are pi * (k + offset) / lines; the offset in [0, 1) is drawn from `seed`
/// (seed 0 gives offset 0). Duplicates are removed; order is first-hit.
std::vector<Frequency> radial_line_frequencies(std::int64_t n, std::int64_t lines,
                                               std::uint64_t seed);

/// Largest line count accepted by make_partial_fourier_radial for an n x n grid.
std::int64_t radial_line_capacity(std::int64_t n);

/// Realified partial 2D DFT: rows are Re then Im of the selected coefficients of
/// fft2(x) / n, x a row-major n x n real image. Defaults to uniform squared mode.
LinearOperator make_partial_fourier(std::int64_t n, std::vector<Frequency> frequencies);
LinearOperator make_partial_fourier_radial(std::int64_t n, std::int64_t lines, std::uint64_t seed);

}  // namespace grampa::linops
