#include "grampa/linops.hpp"

#include <stdexcept>
#include <utility>

namespace grampa::linops {

std::string to_string(Kernel kernel) {
  switch (kernel) {
    case Kernel::dense: return "dense";
    case Kernel::stacked: return "stacked";
    case Kernel::fd1d: return "fd1d";
    case Kernel::fd2d: return "fd2d";
    case Kernel::partial_fourier_realified: return "partial-fourier-realified";
    case Kernel::iid_gaussian: return "iid-gaussian";
    case Kernel::frame: return "frame";
  }
  return "unknown";
}

namespace {

void require_length(Eigen::Index got, std::int64_t want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": expected length " + std::to_string(want) +
                                ", got " + std::to_string(got));
  }
}

class DenseKernel final : public detail::OperatorKernel {
 public:
  DenseKernel(Eigen::MatrixXd m, Kernel tag)
      : OperatorKernel(m.rows(), m.cols()), m_(std::move(m)), sq_(m_.cwiseAbs2()), tag_(tag) {}

  Kernel tag() const override { return tag_; }
  void forward(const VectorRef& v, Eigen::Ref<Vector> out) const override { out.noalias() = m_ * v; }
  void adjoint(const VectorRef& w, Eigen::Ref<Vector> out) const override {
    out.noalias() = m_.transpose() * w;
  }
  void squared_forward(const VectorRef& v, Eigen::Ref<Vector> out) const override {
    out.noalias() = sq_ * v;
  }
  void squared_adjoint(const VectorRef& w, Eigen::Ref<Vector> out) const override {
    out.noalias() = sq_.transpose() * w;
  }
  double frobenius_norm_sq() const override { return sq_.sum(); }

 private:
  Eigen::MatrixXd m_;
  Eigen::MatrixXd sq_;
  Kernel tag_;
};

class StackedKernel final : public detail::OperatorKernel {
 public:
  StackedKernel(LinearOperator top, LinearOperator bottom)
      : OperatorKernel(top.rows() + bottom.rows(), top.cols()),
        top_(std::move(top)),
        bottom_(std::move(bottom)) {}

  Kernel tag() const override { return Kernel::stacked; }

  void forward(const VectorRef& v, Eigen::Ref<Vector> out) const override {
    out.head(top_.rows()) = top_.forward(v);
    out.tail(bottom_.rows()) = bottom_.forward(v);
  }
  void adjoint(const VectorRef& w, Eigen::Ref<Vector> out) const override {
    out = top_.adjoint(w.head(top_.rows()));
    out += bottom_.adjoint(w.tail(bottom_.rows()));
  }
  // Each block keeps its own squared mode.
  void squared_forward(const VectorRef& v, Eigen::Ref<Vector> out) const override {
    out.head(top_.rows()) = top_.squared_forward(v);
    out.tail(bottom_.rows()) = bottom_.squared_forward(v);
  }
  void squared_adjoint(const VectorRef& w, Eigen::Ref<Vector> out) const override {
    out = top_.squared_adjoint(w.head(top_.rows()));
    out += bottom_.squared_adjoint(w.tail(bottom_.rows()));
  }
  double frobenius_norm_sq() const override {
    return top_.frobenius_norm_sq() + bottom_.frobenius_norm_sq();
  }

 private:
  LinearOperator top_;
  LinearOperator bottom_;
};

class Fd1dKernel final : public detail::OperatorKernel {
 public:
  explicit Fd1dKernel(std::int64_t n) : OperatorKernel(n - 1, n) {}

  Kernel tag() const override { return Kernel::fd1d; }
  void forward(const VectorRef& v, Eigen::Ref<Vector> out) const override {
    const auto m = rows();
    out = v.tail(m) - v.head(m);
  }
  void adjoint(const VectorRef& w, Eigen::Ref<Vector> out) const override {
    const auto m = rows();
    out.setZero();
    out.head(m) -= w;
    out.tail(m) += w;
  }
  void squared_forward(const VectorRef& v, Eigen::Ref<Vector> out) const override {
    const auto m = rows();
    out = v.tail(m) + v.head(m);
  }
  void squared_adjoint(const VectorRef& w, Eigen::Ref<Vector> out) const override {
    const auto m = rows();
    out.setZero();
    out.head(m) += w;
    out.tail(m) += w;
  }
  double frobenius_norm_sq() const override { return 2.0 * static_cast<double>(rows()); }
};

// One row per (pixel, neighbor) pair, value x[neighbor] - x[pixel].
class Fd2dKernel final : public detail::OperatorKernel {
 public:
  Fd2dKernel(std::int64_t h, std::int64_t w, std::vector<std::pair<std::int64_t, std::int64_t>> pairs)
      : OperatorKernel(static_cast<std::int64_t>(pairs.size()), h * w), pairs_(std::move(pairs)) {}

  Kernel tag() const override { return Kernel::fd2d; }
  void forward(const VectorRef& v, Eigen::Ref<Vector> out) const override {
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      out[k] = v[pairs_[k].second] - v[pairs_[k].first];
    }
  }
  void adjoint(const VectorRef& w, Eigen::Ref<Vector> out) const override {
    out.setZero();
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      out[pairs_[k].first] -= w[k];
      out[pairs_[k].second] += w[k];
    }
  }
  void squared_forward(const VectorRef& v, Eigen::Ref<Vector> out) const override {
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      out[k] = v[pairs_[k].second] + v[pairs_[k].first];
    }
  }
  void squared_adjoint(const VectorRef& w, Eigen::Ref<Vector> out) const override {
    out.setZero();
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      out[pairs_[k].first] += w[k];
      out[pairs_[k].second] += w[k];
    }
  }
  double frobenius_norm_sq() const override { return 2.0 * static_cast<double>(rows()); }

 private:
  std::vector<std::pair<std::int64_t, std::int64_t>> pairs_;
};

}  // namespace

LinearOperator::LinearOperator(std::shared_ptr<const detail::OperatorKernel> kernel,
                               SquaredApplicationMode mode)
    : kernel_(std::move(kernel)), mode_(mode) {
  if (!kernel_) throw std::invalid_argument("LinearOperator: null kernel");
  if (kernel_->rows() <= 0 || kernel_->cols() <= 0) {
    throw std::invalid_argument("LinearOperator: dimensions must be positive");
  }
  if (mode_.mode == SquaredApplicationMode::Mode::uniform_scalar && !(mode_.frobenius_norm_sq >= 0.0)) {
    throw std::invalid_argument("LinearOperator: frobenius_norm_sq must be nonnegative");
  }
}

LinearOperator::LinearOperator(std::shared_ptr<const detail::OperatorKernel> kernel)
    : LinearOperator(std::move(kernel), SquaredApplicationMode::exact()) {}

Vector LinearOperator::forward(const VectorRef& v) const {
  require_length(v.size(), cols(), "forward");
  Vector out(rows());
  kernel_->forward(v, out);
  return out;
}

Vector LinearOperator::adjoint(const VectorRef& w) const {
  require_length(w.size(), rows(), "adjoint");
  Vector out(cols());
  kernel_->adjoint(w, out);
  return out;
}

Vector LinearOperator::squared_forward(const VectorRef& v) const {
  require_length(v.size(), cols(), "squared_forward");
  if (mode_.mode == SquaredApplicationMode::Mode::uniform_scalar) {
    const double scale = mode_.frobenius_norm_sq / static_cast<double>(rows() * cols());
    return Vector::Constant(rows(), scale * v.sum());
  }
  Vector out(rows());
  kernel_->squared_forward(v, out);
  return out;
}

Vector LinearOperator::squared_adjoint(const VectorRef& w) const {
  require_length(w.size(), rows(), "squared_adjoint");
  if (mode_.mode == SquaredApplicationMode::Mode::uniform_scalar) {
    const double scale = mode_.frobenius_norm_sq / static_cast<double>(rows() * cols());
    return Vector::Constant(cols(), scale * w.sum());
  }
  Vector out(cols());
  kernel_->squared_adjoint(w, out);
  return out;
}

LinearOperator LinearOperator::with_squared_mode(SquaredApplicationMode mode) const {
  return LinearOperator(kernel_, mode);
}

LinearOperator LinearOperator::with_uniform_squares() const {
  return with_squared_mode(SquaredApplicationMode::uniform(frobenius_norm_sq()));
}

Eigen::MatrixXd LinearOperator::dense() const {
  Eigen::MatrixXd m(rows(), cols());
  Vector e = Vector::Zero(cols());
  for (std::int64_t n = 0; n < cols(); ++n) {
    e[n] = 1.0;
    m.col(n) = forward(e);
    e[n] = 0.0;
  }
  return m;
}

LinearOperator make_dense(Eigen::MatrixXd matrix, Kernel tag) {
  if (matrix.rows() == 0 || matrix.cols() == 0) {
    throw std::invalid_argument("make_dense: empty matrix");
  }
  return LinearOperator(std::make_shared<DenseKernel>(std::move(matrix), tag));
}

LinearOperator make_identity(std::int64_t n) {
  if (n <= 0) throw std::invalid_argument("make_identity: n must be positive");
  return make_dense(Eigen::MatrixXd::Identity(n, n));
}

LinearOperator stack(const LinearOperator& top, const LinearOperator& bottom) {
  if (top.cols() != bottom.cols()) {
    throw std::invalid_argument("stack: column mismatch (" + std::to_string(top.cols()) + " vs " +
                                std::to_string(bottom.cols()) + ")");
  }
  return LinearOperator(std::make_shared<StackedKernel>(top, bottom));
}

LinearOperator make_fd1d(std::int64_t n) {
  if (n < 2) throw std::invalid_argument("make_fd1d: n must be >= 2");
  return LinearOperator(std::make_shared<Fd1dKernel>(n));
}

LinearOperator make_fd2d(std::int64_t h, std::int64_t w, const std::vector<Direction>& directions) {
  if (h < 2 || w < 2) throw std::invalid_argument("make_fd2d: h and w must be >= 2");
  if (directions.empty()) throw std::invalid_argument("make_fd2d: no directions");

  std::vector<std::pair<std::int64_t, std::int64_t>> pairs;
  for (Direction d : directions) {
    std::int64_t dr = 0;
    std::int64_t dc = 0;
    switch (d) {
      case Direction::horizontal: dc = 1; break;
      case Direction::vertical: dr = 1; break;
      case Direction::diagonal: dr = 1; dc = 1; break;
      case Direction::antidiagonal: dr = 1; dc = -1; break;
    }
    for (std::int64_t r = 0; r < h; ++r) {
      for (std::int64_t c = 0; c < w; ++c) {
        const std::int64_t r2 = r + dr;
        const std::int64_t c2 = c + dc;
        if (r2 < 0 || r2 >= h || c2 < 0 || c2 >= w) continue;
        pairs.emplace_back(r * w + c, r2 * w + c2);
      }
    }
  }
  return LinearOperator(std::make_shared<Fd2dKernel>(h, w, std::move(pairs)));
}

}  // namespace grampa::linops
