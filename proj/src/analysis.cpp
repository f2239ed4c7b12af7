#include "grampa/analysis.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <stdexcept>

namespace grampa::analysis {

std::string to_string(const AnalysisRegularizer& reg) {
  return std::visit(
      [](const auto& r) -> std::string {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, SnipeReg>) return "snipe";
        if constexpr (std::is_same_v<T, L1Reg>) return "l1";
        return "bg";
      },
      reg);
}

std::string to_string(PixelRegularizer reg) {
  switch (reg) {
    case PixelRegularizer::none: return "none";
    case PixelRegularizer::nonneg: return "nonneg";
    case PixelRegularizer::fixed_zero: return "fixed-zero";
  }
  return "unknown";
}

void AnalysisProblem::validate() const {
  if (phi.cols() != omega.cols()) {
    throw std::invalid_argument("AnalysisProblem: Phi and Omega must have the same number of columns");
  }
  if (y.size() != phi.rows()) throw std::invalid_argument("AnalysisProblem: y length must equal Phi rows");
  if (!(noise_var >= 0.0)) throw std::invalid_argument("AnalysisProblem: noise_var must be >= 0");
  const bool l1 = std::holds_alternative<L1Reg>(analysis_reg);
  if (mode == Flavor::map && !l1) {
    throw std::invalid_argument("AnalysisProblem: " + to_string(analysis_reg) +
                                " is a posterior-mean penalty and needs MMSE mode");
  }
  if (mode == Flavor::mmse && l1) {
    throw std::invalid_argument("AnalysisProblem: l1 regularization is only available in MAP mode");
  }
}

namespace {

// Total order on doubles by value, then by bit pattern (separates -0.0 from 0.0).
bool less_total(double a, double b) {
  if (a != b) return a < b;
  return std::bit_cast<std::int64_t>(a) < std::bit_cast<std::int64_t>(b);
}

std::pair<LinearOperator, Vector> canonical_rows(const LinearOperator& phi, const Vector& y) {
  if (phi.kernel() != linops::Kernel::dense && phi.kernel() != linops::Kernel::iid_gaussian) return {phi, y};
  const Eigen::MatrixXd m = phi.dense();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (y[a] != y[b] || std::bit_cast<std::int64_t>(y[a]) != std::bit_cast<std::int64_t>(y[b])) {
      return less_total(y[a], y[b]);
    }
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(a, j) != m(b, j)) return m(a, j) < m(b, j);
    }
    return false;
  });
  Eigen::MatrixXd sorted(m.rows(), m.cols());
  Vector y_sorted(y.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    sorted.row(i) = m.row(order[static_cast<std::size_t>(i)]);
    y_sorted[i] = y[order[static_cast<std::size_t>(i)]];
  }
  LinearOperator out = linops::make_dense(std::move(sorted), phi.kernel());
  if (phi.squared_mode().mode == linops::SquaredApplicationMode::Mode::uniform_scalar) {
    out = out.with_uniform_squares();
  } else {
    out = out.with_squared_mode(linops::SquaredApplicationMode::exact());
  }
  return {std::move(out), std::move(y_sorted)};
}

}  // namespace

AssembledProblem assemble(const AnalysisProblem& problem) {
  problem.validate();
  auto [phi, y] = canonical_rows(problem.phi, problem.y);
  AssembledProblem out{linops::stack(phi, problem.omega), phi, y, {}, {}, problem.phi.rows()};

  out.output.push_back({problem.phi.rows(), denoisers::make_awgn_output(out.y, problem.noise_var)});
  const denoisers::DenoiserPtr reg = std::visit(
      [](const auto& r) -> denoisers::DenoiserPtr {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, SnipeReg>) return denoisers::make_snipe({r.omega});
        if constexpr (std::is_same_v<T, L1Reg>) return denoisers::make_soft_threshold(r.lambda);
        if constexpr (std::is_same_v<T, BernoulliGaussianReg>) return denoisers::make_bernoulli_gaussian(r.params);
      },
      problem.analysis_reg);
  out.output.push_back({problem.omega.rows(), reg});

  denoisers::DenoiserPtr pixel;
  switch (problem.pixel_reg) {
    case PixelRegularizer::none: pixel = denoisers::make_identity_denoiser(); break;
    case PixelRegularizer::nonneg: pixel = denoisers::make_nonneg(problem.mode); break;
    case PixelRegularizer::fixed_zero: pixel = denoisers::make_fixed_zero(); break;
  }
  out.input.push_back({problem.phi.cols(), pixel});
  return out;
}

Initialization default_initialization(const AnalysisProblem& problem, const AssembledProblem& assembled) {
  const auto n = problem.phi.cols();
  double var = 0.0;
  if (auto prior = assembled.input.front().denoiser->prior_variance()) {
    var = *prior;
  } else {
    const double frob = assembled.phi.frobenius_norm_sq();
    const double m = static_cast<double>(assembled.phi.rows());
    if (frob > 0.0) var = assembled.y.squaredNorm() * static_cast<double>(n) / (m * frob);
  }
  if (!(var > 0.0) || !std::isfinite(var)) var = 1.0;
  return {Vector::Zero(n), Vector::Constant(n, var)};
}

gamp::GampResult solve(const AnalysisProblem& problem, gamp::GampConfig config) {
  const AssembledProblem assembled = assemble(problem);
  const Initialization init = default_initialization(problem, assembled);
  config.mode = problem.mode;
  return gamp::gamp_run(assembled.a, assembled.output, assembled.input, init.x, init.nu_x, config);
}

double noiseless_variance(const Vector& y) {
  std::vector<double> sq(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) sq[static_cast<std::size_t>(i)] = y[i] * y[i];
  std::sort(sq.begin(), sq.end());
  const double ms = sq.empty() ? 0.0 : std::accumulate(sq.begin(), sq.end(), 0.0) / static_cast<double>(sq.size());
  return ms > 0.0 ? 1e-12 * ms : 1e-12;
}

}  // namespace grampa::analysis
