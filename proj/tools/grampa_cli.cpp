#include "grampa/harness.hpp"
#include "grampa/io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

constexpr int kConfigError = 2;
constexpr int kIoError = 3;
constexpr int kRuntimeError = 4;

using grampa::harness::ExperimentSpec;

void print_summary(const ExperimentSpec& spec, const grampa::harness::ExperimentResult& result) {
  const auto names = grampa::harness::sweep_field_names(spec.kind);
  for (const auto& p : result.points) {
    const auto values = grampa::harness::sweep_field_values(spec.kind, p.point);
    std::string point;
    for (std::size_t i = 0; i < names.size(); ++i) point += (i ? " " : "") + names[i] + "=" + std::to_string(values[i]);
    std::printf("%s  median_nsnr_db=%.3f  success_rate=%.3f  diverged=%d\n", point.c_str(), p.median_nsnr_db,
                p.success_rate, p.diverged);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GrAMPA cosparse recovery experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<int> workers;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "Run a Monte-Carlo sweep");
  run->add_option("--config", config_path, "Experiment JSON")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--trials", trials, "Override the trial count")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Override seed_base");

  auto* ptc = app.add_subcommand("ptc", "Estimate the phase-transition curve");
  ptc->add_option("--config", config_path, "Experiment JSON")->required();
  ptc->add_option("--out", out_dir, "Output directory")->required();
  ptc->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentSpec spec = grampa::harness::load_experiment(config_path);
    if (workers) spec.workers = *workers;
    if (trials) spec.trials = *trials;
    if (seed) spec.seed_base = *seed;
    spec.validate();

    if (run->parsed()) {
      const auto result = grampa::harness::run_experiment(spec);
      grampa::harness::write_experiment_outputs(out_dir, spec, result);
      print_summary(spec, result);
    } else {
      if (spec.kind != grampa::harness::ExperimentKind::ptc || !spec.ptc) {
        throw grampa::harness::ConfigError("ptc needs kind \"ptc\" and a \"ptc\" section");
      }
      const auto rows = grampa::harness::estimate_ptc(spec);
      grampa::harness::write_ptc_outputs(out_dir, spec, rows);
      for (const auto& r : rows) {
        std::printf("d_over_n=%g delta=%g rho50=%.4f [%.4f, %.4f]%s%s\n", r.d_over_n, r.delta, r.rho50, r.rho_lo,
                    r.rho_hi, r.boundary ? " boundary" : "", r.non_monotone ? " non-monotone" : "");
      }
    }
  } catch (const grampa::harness::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const grampa::io::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}
