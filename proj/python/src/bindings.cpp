#include "grampa/analysis.hpp"
#include "grampa/denoisers.hpp"
#include "grampa/harness.hpp"
#include "grampa/io.hpp"
#include "grampa/linops.hpp"
#include "grampa/problems.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace grampa;
using linops::Vector;

namespace {

std::pair<double, double> as_pair(const denoisers::DenoiserEval& e) { return {e.value, e.derivative}; }

analysis::AnalysisRegularizer make_reg(const std::string& name, double param, double bg_sigma_sq) {
  if (name == "snipe") return analysis::SnipeReg{param};
  if (name == "l1") return analysis::L1Reg{param};
  if (name == "bg") return analysis::BernoulliGaussianReg{{param, bg_sigma_sq}};
  throw std::invalid_argument("unknown analysis regularizer '" + name + "' (snipe, l1 or bg)");
}

analysis::PixelRegularizer make_pixel(const std::string& name) {
  if (name == "none") return analysis::PixelRegularizer::none;
  if (name == "nonneg") return analysis::PixelRegularizer::nonneg;
  if (name == "fixed-zero") return analysis::PixelRegularizer::fixed_zero;
  throw std::invalid_argument("unknown pixel regularizer '" + name + "' (none, nonneg or fixed-zero)");
}

linops::Direction make_direction(const std::string& name) {
  if (name == "horizontal") return linops::Direction::horizontal;
  if (name == "vertical") return linops::Direction::vertical;
  if (name == "diagonal") return linops::Direction::diagonal;
  if (name == "antidiagonal") return linops::Direction::antidiagonal;
  throw std::invalid_argument("unknown direction '" + name + "'");
}

py::dict trial_dict(const harness::ExperimentSpec& spec, const harness::TrialResult& t) {
  py::dict d;
  const auto names = harness::sweep_field_names(spec.kind);
  const auto values = harness::sweep_field_values(spec.kind, t.point);
  for (std::size_t k = 0; k < names.size(); ++k) d[py::str(names[k])] = values[k];
  d["trial"] = t.trial;
  d["seed"] = t.seed;
  d["tuned_param"] = t.tuned_param;
  d["nsnr_db"] = t.nsnr_db;
  d["success"] = t.success;
  d["iterations"] = t.iterations;
  d["wall_time_s"] = t.wall_time_s;
  d["diverged"] = t.diverged;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Generalized AMP for analysis compressive sensing";

  py::class_<linops::LinearOperator>(m, "LinearOperator")
      .def_property_readonly("rows", &linops::LinearOperator::rows)
      .def_property_readonly("cols", &linops::LinearOperator::cols)
      .def_property_readonly("kernel", [](const linops::LinearOperator& op) { return linops::to_string(op.kernel()); })
      .def("forward", [](const linops::LinearOperator& op, const Vector& v) { return op.forward(v); })
      .def("adjoint", [](const linops::LinearOperator& op, const Vector& w) { return op.adjoint(w); })
      .def("squared_forward", [](const linops::LinearOperator& op, const Vector& v) { return op.squared_forward(v); })
      .def("squared_adjoint", [](const linops::LinearOperator& op, const Vector& w) { return op.squared_adjoint(w); })
      .def("frobenius_norm_sq", &linops::LinearOperator::frobenius_norm_sq)
      .def("with_uniform_squares", &linops::LinearOperator::with_uniform_squares)
      .def("dense", &linops::LinearOperator::dense)
      .def("__repr__", [](const linops::LinearOperator& op) {
        return "<LinearOperator " + linops::to_string(op.kernel()) + " " + std::to_string(op.rows()) + "x" +
               std::to_string(op.cols()) + ">";
      });

  m.def("make_dense", [](Eigen::MatrixXd a) { return linops::make_dense(std::move(a)); }, py::arg("matrix"));
  m.def("make_identity", &linops::make_identity, py::arg("n"));
  m.def("make_fd1d", &linops::make_fd1d, py::arg("n"));
  m.def(
      "make_fd2d",
      [](std::int64_t h, std::int64_t w, const std::vector<std::string>& dirs) {
        std::vector<linops::Direction> d;
        for (const auto& s : dirs) d.push_back(make_direction(s));
        return linops::make_fd2d(h, w, d);
      },
      py::arg("h"), py::arg("w"),
      py::arg("directions") = std::vector<std::string>{"horizontal", "vertical", "diagonal", "antidiagonal"});
  m.def("make_partial_fourier_radial", &linops::make_partial_fourier_radial, py::arg("n"), py::arg("lines"),
        py::arg("seed") = 0);
  m.def("stack", &linops::stack, py::arg("top"), py::arg("bottom"));

  m.def("snipe", [](double q, double nu, double omega) { return as_pair(denoisers::snipe(q, nu, {omega})); },
        py::arg("q_hat"), py::arg("nu_q"), py::arg("omega"));
  m.def("snipe_from_slab_limit", &denoisers::snipe_from_slab_limit, py::arg("q_hat"), py::arg("nu_q"),
        py::arg("omega"), py::arg("sigma"));
  m.def(
      "awgn_output_mmse",
      [](double p, double nu, double y, double noise_var) {
        return as_pair(denoisers::awgn_output_mmse(p, nu, {y, noise_var}));
      },
      py::arg("p_hat"), py::arg("nu_p"), py::arg("y"), py::arg("noise_var"));
  m.def("soft_threshold_map",
        [](double r, double nu, double lam) { return as_pair(denoisers::soft_threshold_map(r, nu, lam)); },
        py::arg("r_hat"), py::arg("nu_r"), py::arg("lam"));
  m.def(
      "bernoulli_gaussian_mmse",
      [](double r, double nu, double beta, double sigma_sq) {
        return as_pair(denoisers::bernoulli_gaussian_mmse(r, nu, {beta, sigma_sq}));
      },
      py::arg("r_hat"), py::arg("nu_r"), py::arg("beta"), py::arg("sigma_sq") = 1.0);
  m.def("nonneg_map", [](double r, double nu) { return as_pair(denoisers::nonneg_map(r, nu)); }, py::arg("r_hat"),
        py::arg("nu_r"));
  m.def("nonneg_mmse", [](double r, double nu) { return as_pair(denoisers::nonneg_mmse(r, nu)); }, py::arg("r_hat"),
        py::arg("nu_r"));

  m.def("gen_bg_fd_signal", &problems::gen_bg_fd_signal, py::arg("n"), py::arg("sparsity_rate"), py::arg("seed"));
  m.def(
      "gen_tight_frame",
      [](std::int64_t n, std::int64_t d, std::uint64_t seed) {
        auto f = problems::gen_tight_frame(n, d, seed);
        return py::make_tuple(f.omega, f.max_row_norm_error, f.max_singular_error);
      },
      py::arg("n"), py::arg("d"), py::arg("seed"));
  m.def("gen_cosparse_signal", &problems::gen_cosparse_signal, py::arg("omega"), py::arg("l"), py::arg("seed"));
  m.def("gen_gaussian_matrix", &problems::gen_gaussian_matrix, py::arg("m"), py::arg("n"), py::arg("seed"));
  m.def("shepp_logan", &problems::shepp_logan, py::arg("n"));
  m.def("add_awgn", &problems::add_awgn, py::arg("z"), py::arg("snr_db"), py::arg("seed"));
  m.def("awgn_variance", &problems::awgn_variance, py::arg("z"), py::arg("snr_db"));
  m.def("nsnr", &problems::nsnr, py::arg("x"), py::arg("x_hat"));
  m.def("nsnr_db", &problems::nsnr_db, py::arg("x"), py::arg("x_hat"));
  m.def("noiseless_variance", &analysis::noiseless_variance, py::arg("y"));

  m.def(
      "solve",
      [](const linops::LinearOperator& phi, const linops::LinearOperator& omega, const Vector& y, double noise_var,
         const std::string& reg, double param, double bg_sigma_sq, const std::string& pixel_reg, double beta0,
         int t_max, double eps) {
        analysis::AnalysisProblem p{phi, omega, y, noise_var, make_reg(reg, param, bg_sigma_sq), make_pixel(pixel_reg),
                                    reg == "l1" ? denoisers::Flavor::map : denoisers::Flavor::mmse};
        gamp::GampConfig c;
        c.beta0 = beta0;
        c.t_max = t_max;
        c.eps = eps;
        gamp::GampResult r;
        {
          py::gil_scoped_release release;
          r = analysis::solve(p, c);
        }
        py::dict out;
        out["x_hat"] = r.x_hat;
        out["nu_x"] = r.nu_x;
        out["iterations"] = r.iterations;
        out["converged"] = r.converged;
        return out;
      },
      py::arg("phi"), py::arg("omega"), py::arg("y"), py::arg("noise_var"), py::arg("reg") = "snipe",
      py::arg("param") = 0.0, py::arg("bg_sigma_sq") = 1.0, py::arg("pixel_reg") = "none", py::arg("beta0") = 1.0,
      py::arg("t_max") = 500, py::arg("eps") = 1e-6,
      "Runs GrAMPA on y = phi x + w with analysis operator omega. `param` is omega (snipe), lambda (l1) "
      "or beta (bg).");

  py::register_exception<harness::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<io::IoError>(m, "IoError", PyExc_OSError);

  m.def(
      "run_experiment",
      [](const std::string& config_json, std::optional<int> workers) {
        auto spec = harness::parse_experiment(config_json);
        if (workers) spec.workers = *workers;
        spec.validate();
        harness::ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = harness::run_experiment(spec);
        }
        py::list trials;
        for (const auto& t : r.trials) trials.append(trial_dict(spec, t));
        py::list points;
        for (const auto& p : r.points) {
          py::dict d;
          const auto names = harness::sweep_field_names(spec.kind);
          const auto values = harness::sweep_field_values(spec.kind, p.point);
          for (std::size_t k = 0; k < names.size(); ++k) d[py::str(names[k])] = values[k];
          d["median_nsnr_db"] = p.median_nsnr_db;
          d["success_rate"] = p.success_rate;
          d["median_iterations"] = p.median_iterations;
          d["diverged"] = p.diverged;
          points.append(d);
        }
        py::dict out;
        out["trials"] = trials;
        out["points"] = points;
        return out;
      },
      py::arg("config_json"), py::arg("workers") = py::none(), "Runs a JSON experiment config in memory.");
  m.def(
      "run_to_dir",
      [](const std::string& config_json, const std::filesystem::path& out_dir) {
        const auto spec = harness::parse_experiment(config_json);
        py::gil_scoped_release release;
        harness::write_experiment_outputs(out_dir, spec, harness::run_experiment(spec));
      },
      py::arg("config_json"), py::arg("out_dir"), "Runs a config and writes results.csv, summary.json and curves.");
}
