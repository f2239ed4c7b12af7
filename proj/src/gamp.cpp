#include "grampa/gamp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace grampa::gamp {

void GampConfig::validate() const {
  if (!(beta0 > 0.0 && beta0 <= 1.0)) throw std::invalid_argument("GampConfig: beta0 must be in (0, 1]");
  if (t_max < 1) throw std::invalid_argument("GampConfig: t_max must be >= 1");
  if (!(eps >= 0.0)) throw std::invalid_argument("GampConfig: eps must be >= 0");
  if (variance_floor && !(*variance_floor > 0.0)) {
    throw std::invalid_argument("GampConfig: variance_floor must be positive");
  }
  if (variance_floor && variance_ceiling && !(*variance_floor < *variance_ceiling)) {
    throw std::invalid_argument("GampConfig: variance_floor must be below variance_ceiling");
  }
}

VarianceBounds resolve_bounds(const GampConfig& config, const VectorRef& init_nu_x) {
  const double scale = init_nu_x.size() > 0 ? init_nu_x.maxCoeff() : 1.0;
  VarianceBounds b{config.variance_floor.value_or(1e-14 * scale),
                   config.variance_ceiling.value_or(1e14 * scale)};
  if (!(b.floor > 0.0 && b.floor < b.ceiling)) {
    throw std::invalid_argument("GAMP: invalid variance bounds");
  }
  return b;
}

GampState GampState::initial(Eigen::Index rows, const VectorRef& init_x, const VectorRef& init_nu_x) {
  const Eigen::Index n = init_x.size();
  GampState s;
  s.x_hat = init_x;
  s.nu_x = init_nu_x;
  s.x_tilde = Vector::Zero(n);
  s.r_hat = Vector::Zero(n);
  s.nu_r = Vector::Zero(n);
  s.s_hat = Vector::Zero(rows);
  s.nu_s = Vector::Zero(rows);
  s.p_hat = Vector::Zero(rows);
  s.nu_p = Vector::Zero(rows);
  s.z_hat = Vector::Zero(rows);
  s.nu_z = Vector::Zero(rows);
  s.t = 1;
  return s;
}

bool GampState::all_finite() const {
  for (const Vector* v : {&x_hat, &nu_x, &x_tilde, &s_hat, &nu_s, &p_hat, &nu_p, &z_hat, &nu_z, &r_hat, &nu_r}) {
    if (!v->allFinite()) return false;
  }
  return true;
}

namespace {

void apply_layout(const DenoiserLayout& layout, const Vector& mean, const Vector& var, Vector& value,
                  Vector& derivative) {
  Eigen::Index offset = 0;
  for (const auto& block : layout) {
    block.denoiser->denoise(mean.segment(offset, block.size), var.segment(offset, block.size),
                            value.segment(offset, block.size), derivative.segment(offset, block.size));
    offset += block.size;
  }
}

void clamp(Vector& v, const VarianceBounds& b) { v = v.cwiseMax(b.floor).cwiseMin(b.ceiling); }

}  // namespace

void validate_layouts(const LinearOperator& op, const DenoiserLayout& output, const DenoiserLayout& input,
                      Flavor mode) {
  if (denoisers::layout_size(output) != op.rows()) {
    throw std::invalid_argument("GAMP: output denoisers cover " + std::to_string(denoisers::layout_size(output)) +
                                " rows, operator has " + std::to_string(op.rows()));
  }
  if (denoisers::layout_size(input) != op.cols()) {
    throw std::invalid_argument("GAMP: input denoisers cover " + std::to_string(denoisers::layout_size(input)) +
                                " columns, operator has " + std::to_string(op.cols()));
  }
  for (const auto* layout : {&output, &input}) {
    for (const auto& block : *layout) {
      if (!block.denoiser) throw std::invalid_argument("GAMP: null denoiser");
      if (block.size < 0) throw std::invalid_argument("GAMP: negative block size");
      if (!block.denoiser->supports(mode)) {
        throw std::invalid_argument("GAMP: denoiser '" + block.denoiser->name() + "' does not support " +
                                    denoisers::to_string(mode) + " mode");
      }
    }
  }
}

GampState gamp_step(const GampState& state, const LinearOperator& op, const DenoiserLayout& output,
                    const DenoiserLayout& input, const VarianceBounds& bounds, double beta0) {
  const double beta = damping_at(state.t, beta0);
  const double keep = 1.0 - beta;
  const Eigen::Index rows = op.rows();
  const Eigen::Index cols = op.cols();

  GampState next;
  next.t = state.t + 1;

  // Output side.
  next.nu_p = beta * op.squared_forward(state.nu_x) + keep * state.nu_p;
  clamp(next.nu_p, bounds);
  next.p_hat = op.forward(state.x_hat) - next.nu_p.cwiseProduct(state.s_hat);

  Vector dz(rows);
  next.z_hat.resize(rows);
  apply_layout(output, next.p_hat, next.nu_p, next.z_hat, dz);
  next.nu_z = next.nu_p.cwiseProduct(dz);

  Vector nu_s_new(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double shrink = 1.0 - next.nu_z[i] / next.nu_p[i];
    nu_s_new[i] = shrink < 0.0 ? bounds.floor : shrink / next.nu_p[i];
  }
  next.nu_s = beta * nu_s_new + keep * state.nu_s;
  clamp(next.nu_s, bounds);
  next.s_hat = beta * (next.z_hat - next.p_hat).cwiseQuotient(next.nu_p) + keep * state.s_hat;

  // Input side.
  next.x_tilde = beta * state.x_hat + keep * state.x_tilde;
  next.nu_r = beta * op.squared_adjoint(next.nu_s).cwiseInverse() + keep * state.nu_r;
  clamp(next.nu_r, bounds);
  next.r_hat = next.x_tilde + next.nu_r.cwiseProduct(op.adjoint(next.s_hat));

  Vector dx(cols);
  next.x_hat.resize(cols);
  apply_layout(input, next.r_hat, next.nu_r, next.x_hat, dx);
  next.nu_x = next.nu_r.cwiseProduct(dx);
  clamp(next.nu_x, bounds);

  if (!next.all_finite()) {
    throw DivergenceError("GAMP diverged at iteration " + std::to_string(state.t), state);
  }
  return next;
}

GampResult gamp_run(const LinearOperator& op, const DenoiserLayout& output, const DenoiserLayout& input,
                    const VectorRef& init_x, const VectorRef& init_nu_x, const GampConfig& config) {
  config.validate();
  validate_layouts(op, output, input, config.mode);
  if (init_x.size() != op.cols() || init_nu_x.size() != op.cols()) {
    throw std::invalid_argument("GAMP: initialization length does not match operator columns");
  }
  if (!(init_nu_x.array() > 0.0).all()) throw std::invalid_argument("GAMP: init_nu_x must be positive");

  const VarianceBounds bounds = resolve_bounds(config, init_nu_x);
  GampState state = GampState::initial(op.rows(), init_x, init_nu_x);
  if (!state.all_finite()) throw std::invalid_argument("GAMP: non-finite initialization");

  GampResult result;
  for (int iter = 0; iter < config.t_max; ++iter) {
    const double beta = damping_at(state.t, config.beta0);
    GampState next = gamp_step(state, op, output, input, bounds, config.beta0);
    const double denom = next.x_hat.norm();
    const double change = denom > 0.0 ? (state.x_hat - next.x_hat).norm() / denom
                                      : std::numeric_limits<double>::infinity();
    if (config.record_trace) result.trace.push_back({state.t, beta, change});
    state = std::move(next);
    ++result.iterations;
    if (change < config.eps) {
      result.converged = true;
      break;
    }
  }
  result.x_hat = state.x_hat;
  result.nu_x = state.nu_x;
  result.final_state = std::move(state);
  return result;
}

double map_cost(const LinearOperator& op, const DenoiserLayout& output, const DenoiserLayout& input,
                const VectorRef& x) {
  if (denoisers::layout_size(output) != op.rows() || denoisers::layout_size(input) != op.cols()) {
    throw std::invalid_argument("map_cost: layout does not match operator");
  }
  const Vector z = op.forward(x);
  double cost = 0.0;
  const auto accumulate = [&cost](const DenoiserLayout& layout, const Vector& v) {
    Eigen::Index offset = 0;
    for (const auto& block : layout) {
      for (Eigen::Index k = 0; k < block.size; ++k) cost += block.denoiser->penalty(k, v[offset + k]);
      offset += block.size;
    }
  };
  accumulate(output, z);
  accumulate(input, x);
  return cost;
}

}  // namespace grampa::gamp
