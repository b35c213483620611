#pragma once

// Flat dotted `key = value` configuration files.
//
//   # comment
//   problem = abs
//   schedule.gamma = 0.75
//
// Keys are unique per file; unknown keys are errors. Lists are
// comma-separated; integer lists also accept ranges `a..b` (inclusive).
// Precedence, lowest first: built-in defaults, file, TAMESG_OUTPUT_DIR
// (output directory only), command-line flags.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tamesg/harness.hpp"
#include "tamesg/noise.hpp"
#include "tamesg/schedules.hpp"
#include "tamesg/solvers.hpp"
#include "tamesg/testbed.hpp"

namespace tamesg {

class ConfigError : public ContractViolation {
public:
  using ContractViolation::ContractViolation;
};

inline constexpr const char *kOutputDirEnv = "TAMESG_OUTPUT_DIR";

struct KvEntry {
  std::string value;
  std::size_t line = 0;
};

struct KvFile {
  std::string source;
  std::map<std::string, KvEntry> entries;
};

namespace cfg {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = s.find(',', start);
    auto item = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] inline void fail(const std::string &key, const std::string &value,
                              const std::string &what) {
  throw ConfigError(key + " = '" + value + "': " + what);
}

inline double to_double(const std::string &key, const std::string &v) {
  double out = 0.0;
  const auto *end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) fail(key, v, "expected a number");
  return out;
}

inline std::uint64_t to_uint(const std::string &key, const std::string &v) {
  std::uint64_t out = 0;
  const auto *end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) {
    // Accept integral values written in exponent form, e.g. 1e5.
    const double d = to_double(key, v);
    if (!(d >= 0.0 && d <= 9.0e18 && std::floor(d) == d)) fail(key, v, "expected a nonnegative integer");
    return static_cast<std::uint64_t>(d);
  }
  return out;
}

inline std::vector<double> to_doubles(const std::string &key, const std::string &v) {
  std::vector<double> out;
  for (const auto &item : split_list(v)) out.push_back(to_double(key, item));
  if (out.empty()) fail(key, v, "empty list");
  return out;
}

inline std::vector<std::uint64_t> to_uints(const std::string &key, const std::string &v) {
  std::vector<std::uint64_t> out;
  for (const auto &item : split_list(v)) {
    if (const auto dots = item.find(".."); dots != std::string::npos) {
      const auto a = to_uint(key, trim(item.substr(0, dots)));
      const auto b = to_uint(key, trim(item.substr(dots + 2)));
      if (b < a) fail(key, v, "descending range");
      for (auto i = a; i <= b; ++i) out.push_back(i);
    } else {
      out.push_back(to_uint(key, item));
    }
  }
  if (out.empty()) fail(key, v, "empty list");
  return out;
}

inline ScheduleForm to_form(const std::string &key, const std::string &v) {
  const auto f = parse_schedule_form(v);
  if (!f) fail(key, v, "expected polynomial | constant-then-decay | table");
  return *f;
}

inline NoiseKind to_noise(const std::string &key, const std::string &v) {
  const auto k = parse_noise_kind(v);
  if (!k) fail(key, v, "expected zero | gaussian | bounded-uniform | state-scaled-gaussian");
  return *k;
}

} // namespace cfg

inline KvFile parse_kv(std::istream &in, std::string source = "<config>") {
  KvFile out;
  out.source = std::move(source);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = cfg::trim(raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto where = out.source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = cfg::trim(line.substr(0, eq));
    const std::string value = cfg::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (out.entries.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    out.entries[key] = {value, lineno};
  }
  return out;
}

inline KvFile read_kv_file(const std::filesystem::path &file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  return parse_kv(in, file.string());
}

namespace cfg {

inline void reject_unknown(const KvFile &f, const std::vector<std::string> &known) {
  for (const auto &[key, e] : f.entries)
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError(f.source + ":" + std::to_string(e.line) + ": unknown key '" + key + "'");
}

} // namespace cfg

// ---------------------------------------------------------------------------
// Single-run settings (run / flow commands)

/// Defaults: problem abs, polynomial schedule c = 0.5, gamma = 0.75,
/// Gaussian noise sigma = 0.1, K = 1000, seed 0, x0 = problem preset,
/// output dir "out", guard radius 1e6, log stride 100, dense tail 1000,
/// flow horizon T = 1 with step h = 1e-4.
struct RunSettings {
  std::string problem = "abs";
  ScheduleForm schedule_form = ScheduleForm::polynomial;
  double c = 0.5;
  double gamma = 0.75;
  std::size_t k0 = 0;
  NoiseKind noise = NoiseKind::gaussian;
  double noise_scale = 0.1;
  std::size_t K = 1000;
  std::uint64_t seed = 0;
  /// "default" (problem preset), "zero", or a comma-separated vector.
  std::string x0 = "default";
  std::string output_dir = "out";
  /// 0 disables the guard.
  double guard_radius = 1e6;
  std::size_t log_stride = 100;
  std::size_t log_tail = 1000;
  double flow_T = 1.0;
  double flow_h = 1e-4;
  std::string campaign;
};

inline const std::vector<std::string> &run_keys() {
  static const std::vector<std::string> keys{
      "problem", "schedule.form", "schedule.c", "schedule.gamma", "schedule.k0",
      "noise.kind", "noise.scale", "K", "seed", "x0", "output.dir", "guard.radius",
      "log.stride", "log.tail", "flow.T", "flow.h", "campaign"};
  return keys;
}

/// Applies one key; throws ConfigError on unknown keys or bad values.
inline void set_run_key(RunSettings &s, const std::string &key, const std::string &v) {
  using namespace cfg;
  if (key == "problem") s.problem = v;
  else if (key == "schedule.form") s.schedule_form = to_form(key, v);
  else if (key == "schedule.c") s.c = to_double(key, v);
  else if (key == "schedule.gamma") s.gamma = to_double(key, v);
  else if (key == "schedule.k0") s.k0 = to_uint(key, v);
  else if (key == "noise.kind") s.noise = to_noise(key, v);
  else if (key == "noise.scale") s.noise_scale = to_double(key, v);
  else if (key == "K") s.K = to_uint(key, v);
  else if (key == "seed") s.seed = to_uint(key, v);
  else if (key == "x0") s.x0 = v;
  else if (key == "output.dir") s.output_dir = v;
  else if (key == "guard.radius") s.guard_radius = to_double(key, v);
  else if (key == "log.stride") s.log_stride = to_uint(key, v);
  else if (key == "log.tail") s.log_tail = to_uint(key, v);
  else if (key == "flow.T") s.flow_T = to_double(key, v);
  else if (key == "flow.h") s.flow_h = to_double(key, v);
  else if (key == "campaign") s.campaign = v;
  else throw ConfigError("unknown key '" + key + "'");
}

inline void apply(RunSettings &s, const KvFile &f) {
  cfg::reject_unknown(f, run_keys());
  for (const auto &[key, e] : f.entries) {
    try {
      set_run_key(s, key, e.value);
    } catch (const ConfigError &err) {
      throw ConfigError(f.source + ":" + std::to_string(e.line) + ": " + err.what());
    }
  }
}

inline void apply_environment(RunSettings &s) {
  if (const char *dir = std::getenv(kOutputDirEnv); dir && *dir) s.output_dir = dir;
}

/// Every key with its effective value; parses back to the same settings.
inline std::string to_text(const RunSettings &s) {
  std::ostringstream os;
  os << "problem = " << s.problem << "\n"
     << "schedule.form = " << to_string(s.schedule_form) << "\n"
     << "schedule.c = " << fmt_double(s.c) << "\n"
     << "schedule.gamma = " << fmt_double(s.gamma) << "\n"
     << "schedule.k0 = " << s.k0 << "\n"
     << "noise.kind = " << to_string(s.noise) << "\n"
     << "noise.scale = " << fmt_double(s.noise_scale) << "\n"
     << "K = " << s.K << "\n"
     << "seed = " << s.seed << "\n"
     << "x0 = " << s.x0 << "\n"
     << "output.dir = " << s.output_dir << "\n"
     << "guard.radius = " << fmt_double(s.guard_radius) << "\n"
     << "log.stride = " << s.log_stride << "\n"
     << "log.tail = " << s.log_tail << "\n"
     << "flow.T = " << fmt_double(s.flow_T) << "\n"
     << "flow.h = " << fmt_double(s.flow_h) << "\n";
  if (!s.campaign.empty()) os << "campaign = " << s.campaign << "\n";
  return os.str();
}

inline Point resolve_x0(const std::string &spec, const TestProblem &p) {
  if (spec == "default") return p.default_x0;
  if (spec == "zero") return Point::Zero(static_cast<Eigen::Index>(p.dim()));
  const auto vals = cfg::to_doubles("x0", spec);
  if (vals.size() != p.dim())
    throw ConfigError("x0 = '" + spec + "': problem '" + p.name + "' has dimension " +
                      std::to_string(p.dim()));
  return to_point(vals);
}

inline StepSchedule make_schedule(ScheduleForm form, double c, double gamma, std::size_t k0) {
  if (form == ScheduleForm::table)
    throw ConfigError("schedule.form = table is only available through the library API");
  return StepSchedule({form, c, gamma, k0, {}});
}

/// Throws ConfigError, UnknownProblem, or InvalidSchedule.
inline RunConfig to_run_config(const RunSettings &s, const TestProblem &p) {
  RunConfig rc;
  rc.x0 = resolve_x0(s.x0, p);
  rc.schedule = make_schedule(s.schedule_form, s.c, s.gamma, s.k0);
  rc.noise = NoiseModel(s.noise, s.noise_scale);
  rc.K = s.K;
  rc.seed = s.seed;
  rc.log_stride = s.log_stride;
  rc.dense_tail = s.log_tail;
  if (s.guard_radius > 0.0) rc.guard_radius = s.guard_radius;
  else rc.guard_radius.reset();
  rc.label = p.name;
  return rc;
}

// ---------------------------------------------------------------------------
// Campaign files (verify command)

inline const std::vector<std::string> &campaign_keys() {
  static const std::vector<std::string> keys{
      "problems", "checks", "schedule.form", "schedule.c", "schedule.gamma", "schedule.k0",
      "noise.kind", "noise.scale", "seeds", "K", "tail.fraction", "log.stride", "log.tail",
      "guard.radius", "flow.T", "flow.h", "flow.starts", "gap.window", "thresholds.file",
      "threshold.criticality", "threshold.chain_rule", "threshold.descent_factor",
      "threshold.gap_factor", "threshold.critical_value_tol", "threshold.bounded_growth",
      "threshold.majority", "output.dir", "parallel"};
  return keys;
}

/// Builds a campaign. Grids: schedules = form x c-list x gamma-list, noises =
/// kind-list x scale-list (the zero kind appears once). A relative
/// thresholds.file is resolved against `base_dir`. An explicit
/// threshold.criticality replaces every calibrated criticality threshold.
inline Campaign parse_campaign(const KvFile &f, const std::filesystem::path &base_dir = {}) {
  using namespace cfg;
  reject_unknown(f, campaign_keys());
  const auto get = [&](const std::string &key) -> const std::string * {
    const auto it = f.entries.find(key);
    return it == f.entries.end() ? nullptr : &it->second.value;
  };

  Campaign c;
  try {
    if (const auto *v = get("problems")) c.problems = split_list(*v);
    else c.problems = problem_names();
    for (const auto &p : c.problems) (void)find_problem(p);

    if (const auto *v = get("checks")) {
      for (const auto &item : split_list(*v)) {
        if (item == "none") continue;
        if (item == "all") {
          c.checks.assign(std::begin(kAllChecks), std::end(kAllChecks));
          continue;
        }
        const auto ch = parse_check(item);
        if (!ch) fail("checks", *v, "unknown check '" + item + "'");
        if (std::find(c.checks.begin(), c.checks.end(), *ch) == c.checks.end())
          c.checks.push_back(*ch);
      }
    } else {
      c.checks.assign(std::begin(kAllChecks), std::end(kAllChecks));
    }

    const ScheduleForm form = get("schedule.form") ? to_form("schedule.form", *get("schedule.form"))
                                                   : ScheduleForm::polynomial;
    const auto cs = get("schedule.c") ? to_doubles("schedule.c", *get("schedule.c"))
                                      : std::vector<double>{0.5};
    const auto gs = get("schedule.gamma") ? to_doubles("schedule.gamma", *get("schedule.gamma"))
                                          : std::vector<double>{0.75};
    const std::size_t k0 = get("schedule.k0") ? to_uint("schedule.k0", *get("schedule.k0")) : 0;
    c.schedules.clear();
    for (double cc : cs)
      for (double g : gs) c.schedules.push_back(make_schedule(form, cc, g, k0));

    std::vector<NoiseKind> kinds{NoiseKind::gaussian};
    if (const auto *v = get("noise.kind")) {
      kinds.clear();
      for (const auto &item : split_list(*v)) kinds.push_back(to_noise("noise.kind", item));
    }
    const auto scales = get("noise.scale") ? to_doubles("noise.scale", *get("noise.scale"))
                                           : std::vector<double>{0.1};
    c.noises.clear();
    for (auto k : kinds) {
      if (k == NoiseKind::zero) {
        c.noises.push_back(NoiseModel::zero());
        continue;
      }
      for (double s : scales) c.noises.push_back(NoiseModel(k, s));
    }

    if (const auto *v = get("seeds")) c.seeds = to_uints("seeds", *v);
    if (const auto *v = get("K")) {
      c.budgets.clear();
      for (auto K : to_uints("K", *v)) c.budgets.push_back(static_cast<std::size_t>(K));
    }
    if (const auto *v = get("tail.fraction")) c.tail_fraction = to_double("tail.fraction", *v);
    if (const auto *v = get("log.stride")) c.log_stride = to_uint("log.stride", *v);
    if (const auto *v = get("log.tail")) c.dense_tail = to_uint("log.tail", *v);
    if (const auto *v = get("guard.radius")) c.guard_radius = to_double("guard.radius", *v);
    if (const auto *v = get("flow.T")) c.flow_T = to_double("flow.T", *v);
    if (const auto *v = get("flow.h")) c.flow_h = to_double("flow.h", *v);
    if (const auto *v = get("flow.starts")) c.flow_starts = to_uint("flow.starts", *v);
    if (const auto *v = get("gap.window")) c.gap_window = to_double("gap.window", *v);
    if (const auto *v = get("output.dir")) c.output_dir = *v;
    if (const auto *v = get("parallel")) c.max_parallel = to_uint("parallel", *v);

    auto &th = c.thresholds;
    if (const auto *v = get("thresholds.file")) {
      std::filesystem::path file = *v;
      if (file.is_relative() && !base_dir.empty()) file = base_dir / file;
      load_thresholds(th, file);
    }
    if (const auto *v = get("threshold.criticality")) {
      th.criticality.clear();
      th.criticality_default = to_double("threshold.criticality", *v);
    }
    if (const auto *v = get("threshold.chain_rule")) th.chain_rule = to_double("threshold.chain_rule", *v);
    if (const auto *v = get("threshold.descent_factor"))
      th.descent_factor = to_double("threshold.descent_factor", *v);
    if (const auto *v = get("threshold.gap_factor")) th.gap_factor = to_double("threshold.gap_factor", *v);
    if (const auto *v = get("threshold.critical_value_tol"))
      th.critical_value_tol = to_double("threshold.critical_value_tol", *v);
    if (const auto *v = get("threshold.bounded_growth"))
      th.bounded_growth = to_double("threshold.bounded_growth", *v);
    if (const auto *v = get("threshold.majority")) th.majority = to_double("threshold.majority", *v);
  } catch (const HarnessIoError &e) {
    throw ConfigError(f.source + ": " + e.what());
  }
  validate(c);
  return c;
}

inline Campaign read_campaign(const std::filesystem::path &file) {
  return parse_campaign(read_kv_file(file), file.parent_path());
}

} // namespace tamesg
