// tamesg: run, flow, verify, calibrate, list.
//
// Settings precedence: built-in defaults < --config file < TAMESG_OUTPUT_DIR
// (output directory only) < command-line flags.
//
// Exit codes: 0 ok, 1 I/O failure, 2 config error, 3 unbounded iterates,
// 4 unsupported operation (no prox for the pair, or no hull for a flow),
// 5 failed verdict.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "tamesg/tamesg.hpp"

namespace fs = std::filesystem;
using namespace tamesg;

namespace {

enum Exit : int { ok = 0, io = 1, config = 2, unbounded = 3, unsupported = 4, failed = 5 };

class IoFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

void write_file(const fs::path &file, const std::string &text) {
  std::error_code ec;
  if (file.has_parent_path()) fs::create_directories(file.parent_path(), ec);
  std::ofstream out(file, std::ios::binary);
  if (out) out << text;
  if (!out) throw IoFailure("cannot write " + file.string());
}

std::string point_text(const Point &x) {
  std::string s;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += (i ? "," : "") + fmt_double(x[i]);
  return s;
}

// Flags that map onto run keys. Only flags actually given are applied.
struct RunFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::vector<std::string> sets;

  void bind(CLI::App &app, const std::string &flag, const std::string &key,
            const std::string &help) {
    app.add_option_function<std::string>(
        flag, [this, key](const std::string &v) { values[key] = v; }, help + " [" + key + "]");
  }

  RunSettings resolve() const {
    RunSettings s;
    if (!config_file.empty()) apply(s, read_kv_file(config_file));
    apply_environment(s);
    for (const auto &kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      set_run_key(s, cfg::trim(kv.substr(0, eq)), cfg::trim(kv.substr(eq + 1)));
    }
    for (const auto &[k, v] : values) set_run_key(s, k, v);
    return s;
  }
};

void bind_common(CLI::App &app, RunFlags &f) {
  app.add_option("--config", f.config_file, "key = value settings file")->check(CLI::ExistingFile);
  app.add_option("--set", f.sets, "override any key: --set schedule.gamma=0.8 (repeatable)");
  f.bind(app, "--problem", "problem", "testbed problem name");
  f.bind(app, "--output,-o", "output.dir", "artifact directory");
}

int cmd_run(const RunFlags &flags, bool print_config) {
  const RunSettings s = flags.resolve();
  const TestProblem p = find_problem(s.problem);
  const RunConfig rc = to_run_config(s, p);
  if (print_config) std::cout << to_text(s);
  const RunLog log = p.composite ? run_prox_sgm(*p.composite, rc) : run_sgm(p.f, rc);

  const fs::path out = s.output_dir;
  std::ostringstream csv;
  write_csv(log, csv);
  write_file(out / "run.csv", csv.str());
  nlohmann::json summary = summary_json(log);
  summary["problem"] = p.name;
  summary["schedule"] = rc.schedule.describe();
  summary["noise"] = rc.noise.describe();
  write_file(out / "summary.json", summary.dump(2) + "\n");
  write_file(out / "config.effective", to_text(s));

  const auto &fin = log.records.back();
  std::printf("%s: status=%s iterations=%zu final=(%s) value=%s residual=%s hash=%s\n",
              p.name.c_str(), to_string(log.status), log.iterations, point_text(fin.x).c_str(),
              fmt_double(fin.phi).c_str(), fmt_double(fin.crit_residual).c_str(),
              log.config_hash.c_str());
  if (log.composite)
    std::printf("prox bound violations=%zu infeasible iterates=%zu\n", log.prox_bound_violations,
                log.infeasible_iterates);
  std::printf("artifacts in %s\n", out.string().c_str());
  if (log.status == RunStatus::unbounded_iterates) {
    std::fprintf(stderr, "error: iterates left the guard ball (radius %s); boundedness of the "
                         "iterates is an assumption, not a conclusion\n",
                 fmt_double(rc.guard_radius.value_or(0.0)).c_str());
    return unbounded;
  }
  return ok;
}

int cmd_flow(const RunFlags &flags) {
  const RunSettings s = flags.resolve();
  const TestProblem p = find_problem(s.problem);
  const Point z0 = resolve_x0(s.x0, p);
  Trajectory tr;
  if (p.composite) {
    tr = integrate_composite_flow(*p.composite, p.composite->X().project(z0), s.flow_T, s.flow_h);
  } else {
    tr = integrate_flow(p.f, z0, s.flow_T, s.flow_h);
  }
  const RunLog log = as_run_log(tr, p.f);

  const fs::path out = s.output_dir;
  write_file(out / "trajectory.csv", csv_body(log));
  nlohmann::json summary;
  summary["problem"] = p.name;
  summary["status"] = to_string(tr.status);
  summary["z0"] = to_vector(tr.points.front());
  summary["terminal"] = to_vector(tr.points.back());
  summary["horizon"] = tr.horizon();
  summary["h"] = tr.h;
  summary["nodes"] = tr.size();
  summary["terminal_value"] = json_number(tr.values.back());

  std::printf("%s: status=%s t=%s terminal=(%s) value=%s\n", p.name.c_str(),
              to_string(tr.status), fmt_double(tr.horizon()).c_str(),
              point_text(tr.points.back()).c_str(), fmt_double(tr.values.back()).c_str());
  if (!p.composite) {
    const DescentReport d = check_descent_identity(p.f, tr);
    const ChainRuleReport c = check_chain_rule(p.f, tr);
    summary["descent"] = {{"drop", d.drop}, {"integral", d.integral},
                          {"residual", d.residual}, {"monotone", d.monotone}};
    summary["chain_rule"] = {{"max_violation", c.max_violation},
                             {"checked", c.checked}, {"skipped", c.skipped}};
    std::printf("descent identity: drop=%s integral=%s residual=%s\n",
                fmt_double(d.drop).c_str(), fmt_double(d.integral).c_str(),
                fmt_double(d.residual).c_str());
    std::printf("chain rule: max violation=%s checked=%zu skipped=%zu\n",
                fmt_double(c.max_violation).c_str(), c.checked, c.skipped);
  }
  write_file(out / "summary.json", summary.dump(2) + "\n");
  write_file(out / "config.effective", to_text(s));
  std::printf("artifacts in %s\n", out.string().c_str());
  return ok;
}

int cmd_verify(std::string campaign_file, const std::string &output, const std::string &config_file) {
  if (campaign_file.empty() && !config_file.empty()) {
    RunSettings s;
    apply(s, read_kv_file(config_file));
    campaign_file = s.campaign;
  }
  if (campaign_file.empty()) throw ConfigError("verify: no campaign file given");
  if (!fs::exists(campaign_file)) throw ConfigError("verify: no such campaign file '" + campaign_file + "'");
  Campaign c = read_campaign(campaign_file);
  if (const char *dir = std::getenv(kOutputDirEnv); dir && *dir) c.output_dir = dir;
  if (!output.empty()) c.output_dir = output;

  CampaignResult res;
  int code = ok;
  try {
    res = run_campaign(c);
  } catch (const CampaignIoError &e) {
    std::fprintf(stderr, "%s\n", e.what());
    res = e.partial();
    code = io;
  }
  std::cout << verdict_table(res.verdicts);
  std::size_t pass = 0, fail = 0, skip = 0;
  for (const auto &v : res.verdicts)
    (v.status == VerdictStatus::pass ? pass : v.status == VerdictStatus::fail ? fail : skip)++;
  std::printf("%zu pass, %zu fail, %zu skipped\n", pass, fail, skip);
  if (c.output_dir) std::printf("artifacts in %s\n", c.output_dir->string().c_str());
  if (fail) return failed;
  return code;
}

int cmd_calibrate(const std::vector<std::string> &problems, const std::vector<std::string> &Ks,
                  const std::vector<std::string> &seeds, double safety, const std::string &out) {
  CalibrationOptions opt;
  if (!Ks.empty()) {
    opt.budgets.clear();
    for (const auto &k : Ks) opt.budgets.push_back(cfg::to_uint("K", k));
  }
  if (!seeds.empty()) {
    opt.seeds.clear();
    for (const auto &s : seeds)
      for (auto v : cfg::to_uints("seeds", s)) opt.seeds.push_back(v);
  }
  opt.safety = safety;
  for (const auto &p : problems) (void)find_problem(p);
  const auto j = calibrate(problems.empty() ? problem_names() : problems, opt);
  if (out.empty()) std::cout << j.dump(2) << "\n";
  else write_file(out, j.dump(2) + "\n");
  return ok;
}

int cmd_list() {
  for (const auto &p : catalog()) {
    std::string tags;
    for (auto t : p.tags) tags += (tags.empty() ? "" : ",") + std::string(to_string(t));
    std::printf("%-18s d=%-3zu %-40s [%s]%s\n", p.name.c_str(), p.dim(), p.description.c_str(),
                tags.c_str(), p.has_hull() ? "" : " (no hull oracle)");
  }
  return ok;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Stochastic subgradient experiments on tame nonsmooth problems"};
  app.require_subcommand(1);

  RunFlags run_flags;
  bool print_config = false;
  auto *run = app.add_subcommand("run", "run the (proximal) stochastic subgradient method");
  bind_common(*run, run_flags);
  run_flags.bind(*run, "--form", "schedule.form", "step form: polynomial | constant-then-decay");
  run_flags.bind(*run, "--c", "schedule.c", "step scale");
  run_flags.bind(*run, "--gamma", "schedule.gamma", "step exponent, in (1/2, 1]");
  run_flags.bind(*run, "--k0", "schedule.k0", "constant phase length");
  run_flags.bind(*run, "--noise", "noise.kind", "zero | gaussian | bounded-uniform | state-scaled-gaussian");
  run_flags.bind(*run, "--sigma", "noise.scale", "noise scale (sigma or radius)");
  run_flags.bind(*run, "--K", "K", "iteration budget");
  run_flags.bind(*run, "--seed", "seed", "RNG seed");
  run_flags.bind(*run, "--x0", "x0", "default | zero | comma-separated vector");
  run_flags.bind(*run, "--guard", "guard.radius", "guard radius (0 disables)");
  run_flags.bind(*run, "--log-stride", "log.stride", "log every n-th iterate");
  run_flags.bind(*run, "--log-tail", "log.tail", "always log the last n iterates");
  run->add_flag("--print-config", print_config, "print the effective settings");

  RunFlags flow_flags;
  auto *flow = app.add_subcommand("flow", "integrate the subgradient flow");
  flow->set_help_flag("--help", "print this help message and exit");  // frees -h for --h
  bind_common(*flow, flow_flags);
  flow_flags.bind(*flow, "--z0", "x0", "start: default | zero | comma-separated vector");
  flow_flags.bind(*flow, "--T", "flow.T", "horizon");
  flow_flags.bind(*flow, "--h", "flow.h", "step");

  std::string campaign_file, verify_out, verify_config;
  auto *verify = app.add_subcommand("verify", "run a verification campaign");
  verify->add_option("campaign", campaign_file, "campaign file");
  verify->add_option("--config", verify_config, "settings file whose 'campaign' key names the campaign");
  verify->add_option("--output,-o", verify_out, "artifact directory");

  std::vector<std::string> cal_problems, cal_K, cal_seeds;
  double cal_safety = CalibrationOptions{}.safety;
  std::string cal_out;
  auto *cal = app.add_subcommand("calibrate", "freeze criticality thresholds by K refinement");
  cal->add_option("--problems", cal_problems, "problems (default: all)")->delimiter(',');
  cal->add_option("--K", cal_K, "budgets (default 1000,10000,100000)")->delimiter(',');
  cal->add_option("--seeds", cal_seeds, "seeds (default 101..110)")->delimiter(',');
  cal->add_option("--safety", cal_safety, "threshold = safety x worst residual at the largest K");
  cal->add_option("--out", cal_out, "write JSON here instead of stdout");

  auto *list = app.add_subcommand("list", "list testbed problems");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : config;
  }

  try {
    if (*run) return cmd_run(run_flags, print_config);
    if (*flow) return cmd_flow(flow_flags);
    if (*verify) return cmd_verify(campaign_file, verify_out, verify_config);
    if (*cal) return cmd_calibrate(cal_problems, cal_K, cal_seeds, cal_safety, cal_out);
    if (*list) return cmd_list();
  } catch (const UnsupportedProx &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return unsupported;
  } catch (const HullUnavailable &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return unsupported;
  } catch (const ContractViolation &e) {
    // ConfigError, InvalidSchedule, UnknownProblem and bad parameters.
    std::fprintf(stderr, "error: %s\n", e.what());
    return config;
  } catch (const IoFailure &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return io;
  } catch (const HarnessIoError &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return io;
  }
  return ok;
}
