#pragma once

#include "grampa/denoisers.hpp"
#include "grampa/gamp.hpp"
#include "grampa/linops.hpp"

#include <string>
#include <variant>

namespace grampa::analysis {

using denoisers::Flavor;
using linops::LinearOperator;
using linops::Vector;

struct SnipeReg {
  double omega = 0.0;
};
struct L1Reg {
  double lambda = 1.0;
};
struct BernoulliGaussianReg {
  denoisers::BernoulliGaussianParams params;
};

/// Penalty h_d on the analysis coefficients u = Omega x.
using AnalysisRegularizer = std::variant<SnipeReg, L1Reg, BernoulliGaussianReg>;

/// Penalty g_n on the pixels.
enum class PixelRegularizer { none, nonneg, fixed_zero };

std::string to_string(const AnalysisRegularizer& reg);
std::string to_string(PixelRegularizer reg);

/// y = Phi x + w with Omega x cosparse. Every measurement row shares one AWGN variance.
struct AnalysisProblem {
  LinearOperator phi;
  LinearOperator omega;
  Vector y;
  double noise_var = 0.0;
  AnalysisRegularizer analysis_reg = SnipeReg{};
  PixelRegularizer pixel_reg = PixelRegularizer::none;
  Flavor mode = Flavor::mmse;

  void validate() const;
};

/// The GAMP instance for A = [Phi; Omega]: rows [0, M) carry the AWGN loss, rows
/// [M, M + D) the analysis penalty.
struct AssembledProblem {
  LinearOperator a;
  LinearOperator phi;  // Phi as stacked into `a`; dense Phi rows are in canonical order
  Vector y;            // y in the same row order as `phi`
  denoisers::DenoiserLayout output;
  denoisers::DenoiserLayout input;
  Eigen::Index measurement_rows = 0;
};

/// Rows of an explicitly stored Phi (with their y values) are sorted into a canonical order, so
/// the estimate does not depend on how the measurements were listed.
AssembledProblem assemble(const AnalysisProblem& problem);

struct Initialization {
  Vector x;
  Vector nu_x;
};

/// x = 0; nu_x = the input prior variance if it has one, otherwise
/// ||y||^2 N / (M ||Phi||_F^2), with 1 as a fallback for y = 0.
Initialization default_initialization(const AnalysisProblem& problem, const AssembledProblem& assembled);

/// Assemble and run GAMP in the problem's mode.
gamp::GampResult solve(const AnalysisProblem& problem, gamp::GampConfig config);

/// AWGN variance used for noiseless measurements: 1e-12 times the mean of y^2 (summed in
/// sorted order, so it does not depend on the order of y).
double noiseless_variance(const Vector& y);

}  // namespace grampa::analysis
