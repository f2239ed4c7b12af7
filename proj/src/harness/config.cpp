#include "grampa/harness.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace grampa::harness {

using nlohmann::json;

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::bg_fd: return "bg-fd";
    case ExperimentKind::ptc: return "ptc";
    case ExperimentKind::phantom: return "phantom";
  }
  return "unknown";
}

std::vector<std::string> sweep_field_names(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::bg_fd: return {"m_over_n"};
    case ExperimentKind::ptc: return {"delta", "rho", "d_over_n"};
    case ExperimentKind::phantom: return {"lines"};
  }
  return {};
}

std::vector<double> sweep_field_values(ExperimentKind kind, const SweepPoint& point) {
  switch (kind) {
    case ExperimentKind::bg_fd: return {point.m_over_n};
    case ExperimentKind::ptc: return {point.delta, point.rho, point.d_over_n};
    case ExperimentKind::phantom: return {static_cast<double>(point.lines)};
  }
  return {};
}

namespace {

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!keys.contains(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

double get_number(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return v.get<double>();
}

int get_int(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  return v.get<int>();
}

std::string get_string(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

std::vector<double> get_numbers(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(where + "." + key + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(where + "." + key + ": expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

ExperimentKind parse_kind(const std::string& s) {
  if (s == "bg-fd") return ExperimentKind::bg_fd;
  if (s == "ptc") return ExperimentKind::ptc;
  if (s == "phantom") return ExperimentKind::phantom;
  throw ConfigError("kind: expected one of bg-fd, ptc, phantom; got '" + s + "'");
}

analysis::PixelRegularizer parse_pixel_reg(const std::string& s) {
  if (s == "none") return analysis::PixelRegularizer::none;
  if (s == "nonneg") return analysis::PixelRegularizer::nonneg;
  if (s == "fixed-zero") return analysis::PixelRegularizer::fixed_zero;
  throw ConfigError("problem.pixel_reg: expected none, nonneg or fixed-zero; got '" + s + "'");
}

linops::Direction parse_direction(const std::string& s) {
  if (s == "horizontal") return linops::Direction::horizontal;
  if (s == "vertical") return linops::Direction::vertical;
  if (s == "diagonal") return linops::Direction::diagonal;
  if (s == "antidiagonal") return linops::Direction::antidiagonal;
  throw ConfigError("problem.directions: unknown direction '" + s + "'");
}

int default_n(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::bg_fd: return 500;
    case ExperimentKind::ptc: return 200;
    case ExperimentKind::phantom: return 64;
  }
  return 0;
}

ProblemSettings parse_problem(const json& j, ExperimentKind kind) {
  const std::string w = "problem";
  reject_unknown(j, w,
                 {"n", "sparsity_rate", "snr_db", "analysis_reg", "bg_sigma_sq", "pixel_reg", "directions",
                  "success_nsnr"});
  ProblemSettings p;
  p.n = j.contains("n") ? get_int(j, "n", w) : default_n(kind);
  if (j.contains("sparsity_rate")) p.sparsity_rate = get_number(j, "sparsity_rate", w);
  if (j.contains("snr_db")) {
    const json& v = j.at("snr_db");
    if (v.is_null() || (v.is_string() && v.get<std::string>() == "inf")) {
      p.snr_db.reset();
    } else if (v.is_number()) {
      p.snr_db = v.get<double>();
    } else {
      throw ConfigError("problem.snr_db: expected a number, \"inf\" or null");
    }
  }
  if (j.contains("analysis_reg")) p.analysis_reg = get_string(j, "analysis_reg", w);
  if (j.contains("bg_sigma_sq")) p.bg_sigma_sq = get_number(j, "bg_sigma_sq", w);
  if (j.contains("pixel_reg")) p.pixel_reg = parse_pixel_reg(get_string(j, "pixel_reg", w));
  if (j.contains("directions")) {
    const json& v = j.at("directions");
    if (!v.is_array()) throw ConfigError("problem.directions: expected an array of strings");
    for (const auto& e : v) {
      if (!e.is_string()) throw ConfigError("problem.directions: expected an array of strings");
      p.directions.push_back(parse_direction(e.get<std::string>()));
    }
  } else {
    p.directions = {linops::Direction::horizontal, linops::Direction::vertical, linops::Direction::diagonal,
                    linops::Direction::antidiagonal};
  }
  if (j.contains("success_nsnr")) p.success_nsnr = get_number(j, "success_nsnr", w);
  return p;
}

SweepPoint parse_point(const json& j, ExperimentKind kind, std::size_t index) {
  const std::string w = "grid[" + std::to_string(index) + "]";
  SweepPoint pt;
  switch (kind) {
    case ExperimentKind::bg_fd:
      reject_unknown(j, w, {"m_over_n"});
      pt.m_over_n = get_number(j, "m_over_n", w);
      break;
    case ExperimentKind::ptc:
      reject_unknown(j, w, {"delta", "rho", "d_over_n"});
      pt.delta = get_number(j, "delta", w);
      pt.rho = get_number(j, "rho", w);
      pt.d_over_n = get_number(j, "d_over_n", w);
      break;
    case ExperimentKind::phantom:
      reject_unknown(j, w, {"lines"});
      pt.lines = get_int(j, "lines", w);
      break;
  }
  return pt;
}

gamp::GampConfig parse_solver(const json& j) {
  const std::string w = "solver";
  reject_unknown(j, w, {"beta0", "t_max", "eps", "variance_floor", "variance_ceiling"});
  gamp::GampConfig c;
  if (j.contains("beta0")) c.beta0 = get_number(j, "beta0", w);
  if (j.contains("t_max")) c.t_max = get_int(j, "t_max", w);
  if (j.contains("eps")) c.eps = get_number(j, "eps", w);
  if (j.contains("variance_floor")) c.variance_floor = get_number(j, "variance_floor", w);
  if (j.contains("variance_ceiling")) c.variance_ceiling = get_number(j, "variance_ceiling", w);
  return c;
}

PtcSpec parse_ptc(const json& j) {
  const std::string w = "ptc";
  reject_unknown(j, w, {"deltas", "d_over_n", "rho_grid", "trials_per_probe", "refine_steps"});
  PtcSpec p;
  p.deltas = get_numbers(j, "deltas", w);
  p.d_over_n = get_numbers(j, "d_over_n", w);
  p.rho_grid = get_numbers(j, "rho_grid", w);
  if (j.contains("trials_per_probe")) p.trials_per_probe = get_int(j, "trials_per_probe", w);
  if (j.contains("refine_steps")) p.refine_steps = get_int(j, "refine_steps", w);
  return p;
}

struct Sizes {
  std::int64_t m, l, d;
};

Sizes ptc_sizes(int n, const SweepPoint& pt) {
  const auto m = static_cast<std::int64_t>(std::llround(pt.delta * n));
  const auto l = n - static_cast<std::int64_t>(std::llround(pt.rho * static_cast<double>(m)));
  const auto d = static_cast<std::int64_t>(std::llround(pt.d_over_n * n));
  return {m, l, d};
}

void validate_ptc_point(int n, const SweepPoint& pt, const std::string& where) {
  if (!(pt.delta > 0.0 && pt.delta <= 1.0)) throw ConfigError(where + ": delta must be in (0, 1]");
  if (!(pt.rho > 0.0 && pt.rho <= 1.0)) throw ConfigError(where + ": rho must be in (0, 1]");
  if (!(pt.d_over_n > 0.0)) throw ConfigError(where + ": d_over_n must be positive");
  const Sizes s = ptc_sizes(n, pt);
  if (s.m < 1) throw ConfigError(where + ": delta * n rounds to zero measurements");
  if (s.l < 0 || s.l >= n) throw ConfigError(where + ": cosparsity must lie in [0, n)");
  if (s.l > s.d) throw ConfigError(where + ": cosparsity exceeds the number of frame rows");
}

}  // namespace

void ExperimentSpec::validate() const {
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (grid.empty()) throw ConfigError("grid must be nonempty");
  if (tuning.grid.empty()) throw ConfigError("tuning.grid must be nonempty");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  try {
    solver.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("solver: ") + e.what());
  }
  const auto& p = problem;
  if (p.analysis_reg != "snipe" && p.analysis_reg != "l1" && p.analysis_reg != "bg") {
    throw ConfigError("problem.analysis_reg: expected snipe, l1 or bg; got '" + p.analysis_reg + "'");
  }
  if (p.snr_db && !std::isfinite(*p.snr_db)) throw ConfigError("problem.snr_db must be finite (use null for noiseless)");
  if (!(p.bg_sigma_sq > 0.0)) throw ConfigError("problem.bg_sigma_sq must be positive");
  if (!(p.success_nsnr > 0.0)) throw ConfigError("problem.success_nsnr must be positive");
  if (p.analysis_reg == "l1") {
    for (double v : tuning.grid) {
      if (!(v >= 0.0)) throw ConfigError("tuning.grid: l1 weights must be >= 0");
    }
  }
  if (p.analysis_reg == "bg") {
    for (double v : tuning.grid) {
      if (!(v > 0.0 && v <= 1.0)) throw ConfigError("tuning.grid: bg sparsity rates must be in (0, 1]");
    }
  }
  switch (kind) {
    case ExperimentKind::bg_fd:
      if (p.n < 2) throw ConfigError("problem.n must be >= 2");
      if (!(p.sparsity_rate > 0.0 && p.sparsity_rate < 1.0)) {
        throw ConfigError("problem.sparsity_rate must be in (0, 1)");
      }
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const double m = std::llround(grid[i].m_over_n * p.n);
        if (!(grid[i].m_over_n > 0.0) || m < 1) {
          throw ConfigError("grid[" + std::to_string(i) + "]: m_over_n must give at least one measurement");
        }
      }
      break;
    case ExperimentKind::ptc:
      if (p.n < 2) throw ConfigError("problem.n must be >= 2");
      for (std::size_t i = 0; i < grid.size(); ++i) validate_ptc_point(p.n, grid[i], "grid[" + std::to_string(i) + "]");
      if (ptc) {
        if (ptc->deltas.empty() || ptc->d_over_n.empty() || ptc->rho_grid.empty()) {
          throw ConfigError("ptc: deltas, d_over_n and rho_grid must be nonempty");
        }
        if (ptc->trials_per_probe < 1) throw ConfigError("ptc.trials_per_probe must be >= 1");
        if (ptc->refine_steps < 0) throw ConfigError("ptc.refine_steps must be >= 0");
        for (double dn : ptc->d_over_n) {
          for (double delta : ptc->deltas) {
            for (double rho : ptc->rho_grid) validate_ptc_point(p.n, {0.0, delta, rho, dn, 0}, "ptc");
          }
        }
      }
      break;
    case ExperimentKind::phantom:
      if (p.n < 8) throw ConfigError("problem.n must be >= 8 for the phantom");
      if (p.directions.empty()) throw ConfigError("problem.directions must be nonempty");
      for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i].lines < 1 || grid[i].lines > linops::radial_line_capacity(p.n)) {
          throw ConfigError("grid[" + std::to_string(i) + "]: lines must be in [1, " +
                            std::to_string(linops::radial_line_capacity(p.n)) + "]");
        }
      }
      break;
  }
  if (kind != ExperimentKind::ptc && ptc) throw ConfigError("ptc section is only valid for kind ptc");
}

ExperimentSpec parse_experiment(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  const std::string w = "config";
  reject_unknown(j, w,
                 {"schema_version", "name", "kind", "trials", "seed_base", "workers", "problem", "grid", "tuning",
                  "solver", "ptc"});
  try {
    if (!j.contains("schema_version")) throw ConfigError("schema_version is required");
    if (get_int(j, "schema_version", w) != kSchemaVersion) {
      throw ConfigError("unsupported schema_version; expected " + std::to_string(kSchemaVersion));
    }
    ExperimentSpec spec;
    spec.kind = parse_kind(get_string(j, "kind", w));
    if (j.contains("name")) spec.name = get_string(j, "name", w);
    if (j.contains("trials")) spec.trials = get_int(j, "trials", w);
    if (j.contains("seed_base")) {
      const json& v = j.at("seed_base");
      if (!v.is_number_integer()) throw ConfigError("seed_base: expected a nonnegative integer");
      if (v.is_number_unsigned()) {
        spec.seed_base = v.get<std::uint64_t>();
      } else {
        if (v.get<std::int64_t>() < 0) throw ConfigError("seed_base: expected a nonnegative integer");
        spec.seed_base = static_cast<std::uint64_t>(v.get<std::int64_t>());
      }
    }
    if (j.contains("workers")) spec.workers = get_int(j, "workers", w);
    spec.problem = parse_problem(j.contains("problem") ? j.at("problem") : json::object(), spec.kind);
    const json& grid = j.at("grid");
    if (!grid.is_array()) throw ConfigError("grid: expected an array");
    for (std::size_t i = 0; i < grid.size(); ++i) spec.grid.push_back(parse_point(grid[i], spec.kind, i));
    const json& tuning = j.at("tuning");
    reject_unknown(tuning, "tuning", {"grid", "mode"});
    spec.tuning.grid = get_numbers(tuning, "grid", "tuning");
    if (tuning.contains("mode")) {
      const std::string mode = get_string(tuning, "mode", "tuning");
      if (mode == "per_trial") {
        spec.tuning.mode = TuningMode::per_trial;
      } else if (mode == "per_point") {
        spec.tuning.mode = TuningMode::per_point;
      } else {
        throw ConfigError("tuning.mode: expected per_trial or per_point");
      }
    }
    if (j.contains("solver")) spec.solver = parse_solver(j.at("solver"));
    spec.solver.mode = spec.problem.analysis_reg == "l1" ? denoisers::Flavor::map : denoisers::Flavor::mmse;
    if (j.contains("ptc")) spec.ptc = parse_ptc(j.at("ptc"));
    spec.validate();
    return spec;
  } catch (const json::out_of_range& e) {
    throw ConfigError(std::string("missing required key: ") + e.what());
  } catch (const json::type_error& e) {
    throw ConfigError(std::string("wrong value type: ") + e.what());
  }
}

ExperimentSpec load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_experiment(text.str());
}

}  // namespace grampa::harness
