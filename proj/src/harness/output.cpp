#include "grampa/harness.hpp"

#include "grampa/io.hpp"
#include "grampa/problems.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace grampa::harness {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// JSON has no infinities; non-finite values are written as strings.
json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

std::ofstream open(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io::IoError("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw io::IoError("failed writing " + path.string());
}

json solver_json(const gamp::GampConfig& c) {
  json j{{"beta0", c.beta0}, {"t_max", c.t_max}, {"eps", c.eps}, {"mode", denoisers::to_string(c.mode)}};
  if (c.variance_floor) j["variance_floor"] = *c.variance_floor;
  if (c.variance_ceiling) j["variance_ceiling"] = *c.variance_ceiling;
  return j;
}

json spec_json(const ExperimentSpec& spec) {
  const auto& p = spec.problem;
  json problem{{"n", p.n},
               {"analysis_reg", p.analysis_reg},
               {"pixel_reg", analysis::to_string(p.pixel_reg)},
               {"success_nsnr", p.success_nsnr}};
  problem["snr_db"] = p.snr_db ? json(*p.snr_db) : json(nullptr);
  if (spec.kind == ExperimentKind::bg_fd) problem["sparsity_rate"] = p.sparsity_rate;
  if (p.analysis_reg == "bg") problem["bg_sigma_sq"] = p.bg_sigma_sq;
  return json{{"schema_version", kSchemaVersion},
              {"name", spec.name},
              {"kind", to_string(spec.kind)},
              {"trials", spec.trials},
              {"seed_base", spec.seed_base},
              {"problem", problem},
              {"tuning",
               {{"grid", spec.tuning.grid},
                {"mode", spec.tuning.mode == TuningMode::per_trial ? "per_trial" : "per_point"}}},
              {"solver", solver_json(spec.solver)}};
}

std::string tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

void write_results_csv(const std::filesystem::path& path, const ExperimentSpec& spec,
                       const std::vector<TrialResult>& trials) {
  auto out = open(path);
  out << "kind";
  for (const auto& name : sweep_field_names(spec.kind)) out << ',' << name;
  out << ",seed,tuned_param,nsnr_db,success,iterations,wall_time_s\n";
  for (const auto& t : trials) {
    out << to_string(spec.kind);
    for (double v : sweep_field_values(spec.kind, t.point)) out << ',' << fmt(v);
    out << ',' << t.seed << ',' << fmt(t.tuned_param) << ',' << fmt(t.nsnr_db) << ',' << (t.success ? 1 : 0) << ','
        << t.iterations << ',' << fmt(t.wall_time_s) << '\n';
  }
  finish(out, path);
}

void write_summary_json(const std::filesystem::path& path, const ExperimentSpec& spec,
                        const ExperimentResult& result) {
  json points = json::array();
  const auto names = sweep_field_names(spec.kind);
  for (const auto& s : result.points) {
    json p;
    const auto values = sweep_field_values(spec.kind, s.point);
    for (std::size_t i = 0; i < names.size(); ++i) p[names[i]] = values[i];
    p["median_nsnr_db"] = number(s.median_nsnr_db);
    p["success_rate"] = s.success_rate;
    p["median_iterations"] = s.median_iterations;
    p["median_wall_time_s"] = s.median_wall_time_s;
    p["diverged"] = s.diverged;
    p["tuned_params"] = s.tuned_params;
    points.push_back(std::move(p));
  }
  json doc = spec_json(spec);
  doc["points"] = std::move(points);
  auto out = open(path);
  out << doc.dump(2) << '\n';
  finish(out, path);
}

void write_curve(const std::filesystem::path& path, const std::vector<std::pair<double, double>>& xy) {
  auto out = open(path);
  for (const auto& [x, y] : xy) out << fmt(x) << ' ' << fmt(y) << '\n';
  finish(out, path);
}

void write_ptc_csv(const std::filesystem::path& path, const std::vector<PtcRow>& rows) {
  auto out = open(path);
  out << "d_over_n,delta,rho50,rho_lo,rho_hi,boundary,non_monotone\n";
  for (const auto& r : rows) {
    out << fmt(r.d_over_n) << ',' << fmt(r.delta) << ',' << fmt(r.rho50) << ',' << fmt(r.rho_lo) << ','
        << fmt(r.rho_hi) << ',' << (r.boundary ? 1 : 0) << ',' << (r.non_monotone ? 1 : 0) << '\n';
  }
  finish(out, path);
}

void write_ptc_summary_json(const std::filesystem::path& path, const ExperimentSpec& spec,
                            const std::vector<PtcRow>& rows) {
  json doc = spec_json(spec);
  const auto& ptc = *spec.ptc;
  doc["ptc"] = {{"deltas", ptc.deltas},
                {"d_over_n", ptc.d_over_n},
                {"rho_grid", ptc.rho_grid},
                {"trials_per_probe", ptc.trials_per_probe},
                {"refine_steps", ptc.refine_steps}};
  json curve = json::array();
  for (const auto& r : rows) {
    json probes = json::array();
    for (const auto& [rho, rate] : r.probes) probes.push_back({{"rho", rho}, {"success_rate", rate}});
    curve.push_back({{"d_over_n", r.d_over_n},
                     {"delta", r.delta},
                     {"rho50", r.rho50},
                     {"rho_lo", r.rho_lo},
                     {"rho_hi", r.rho_hi},
                     {"boundary", r.boundary},
                     {"non_monotone", r.non_monotone},
                     {"probes", probes}});
  }
  doc["curve"] = std::move(curve);
  auto out = open(path);
  out << doc.dump(2) << '\n';
  finish(out, path);
}

void write_experiment_outputs(const std::filesystem::path& out_dir, const ExperimentSpec& spec,
                              const ExperimentResult& result) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw io::IoError("cannot create " + out_dir.string() + ": " + ec.message());
  write_results_csv(out_dir / "results.csv", spec, result.trials);
  write_summary_json(out_dir / "summary.json", spec, result);

  switch (spec.kind) {
    case ExperimentKind::bg_fd:
    case ExperimentKind::phantom: {
      std::vector<std::pair<double, double>> median_curve, success_curve;
      for (const auto& s : result.points) {
        const double x = sweep_field_values(spec.kind, s.point).front();
        median_curve.emplace_back(x, s.median_nsnr_db);
        success_curve.emplace_back(x, s.success_rate);
      }
      write_curve(out_dir / "curve_median_nsnr_db.dat", median_curve);
      write_curve(out_dir / "curve_success_rate.dat", success_curve);
      break;
    }
    case ExperimentKind::ptc: {
      std::map<std::pair<double, double>, std::vector<std::pair<double, double>>> groups;
      for (const auto& s : result.points) {
        groups[{s.point.d_over_n, s.point.delta}].emplace_back(s.point.rho, s.success_rate);
      }
      for (auto& [key, xy] : groups) {
        std::sort(xy.begin(), xy.end());
        write_curve(out_dir / ("curve_success_dn" + tag(key.first) + "_delta" + tag(key.second) + ".dat"), xy);
      }
      break;
    }
  }

  if (spec.kind == ExperimentKind::phantom) {
    const std::int64_t n = spec.problem.n;
    io::write_pgm16(out_dir / "truth.pgm", {n, n, problems::shepp_logan(n)});
    for (const auto& [pi, x_hat] : result.images) {
      io::write_pgm16(out_dir / ("recon_lines" + std::to_string(spec.grid[pi].lines) + ".pgm"), {n, n, x_hat});
    }
  }
}

void write_ptc_outputs(const std::filesystem::path& out_dir, const ExperimentSpec& spec,
                       const std::vector<PtcRow>& rows) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw io::IoError("cannot create " + out_dir.string() + ": " + ec.message());
  write_ptc_csv(out_dir / "ptc.csv", rows);
  write_ptc_summary_json(out_dir / "summary.json", spec, rows);
  std::map<double, std::vector<std::pair<double, double>>> curves;
  for (const auto& r : rows) {
    curves[r.d_over_n].emplace_back(r.delta, r.rho50);
    write_curve(out_dir / ("probes_dn" + tag(r.d_over_n) + "_delta" + tag(r.delta) + ".dat"), r.probes);
  }
  for (auto& [dn, xy] : curves) {
    std::sort(xy.begin(), xy.end());
    write_curve(out_dir / ("curve_rho50_dn" + tag(dn) + ".dat"), xy);
  }
}

}  // namespace grampa::harness
