#pragma once

// Per-iteration records of a solver run, with CSV / JSON serialization.
//
// CSV layout (one row per logged iterate):
//   # seed=<u64> config_hash=<hex16> source=<name>
//   k,t,x0..x{d-1},y0..y{d-1},f,phi,crit_residual
// Numbers are written with 17 significant digits so bodies are
// byte-reproducible and round-trip exactly.

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tamesg/core.hpp"

namespace tamesg {

enum class RunStatus { completed, unbounded_iterates };

inline const char *to_string(RunStatus s) {
  return s == RunStatus::completed ? "completed" : "unbounded-iterates";
}

struct RunRecord {
  std::size_t k = 0;
  double t = 0.0;      // sum of steps before iteration k
  double alpha = 0.0;  // step taken from x_k (0 for the final record)
  Point x;
  Point y;             // selected subgradient / velocity at x_k
  Point noise;         // perturbation used at step k
  double f = 0.0;
  double phi = 0.0;
  double crit_residual = 0.0;
};

struct RunLog {
  std::string source;  // problem or trajectory name
  std::uint64_t seed = 0;
  std::string config_hash;
  std::size_t dim = 0;
  std::size_t budget = 0;      // requested iterations K
  std::size_t iterations = 0;  // iterations actually executed
  RunStatus status = RunStatus::completed;
  bool composite = false;
  double max_norm = 0.0;  // sup_k |x_k| over every iterate, logged or not
  std::size_t prox_bound_checks = 0;
  std::size_t prox_bound_violations = 0;
  double max_prox_bound_ratio = 0.0;
  std::size_t infeasible_iterates = 0;
  std::vector<RunRecord> records;

  bool empty() const { return records.empty(); }
  const RunRecord &final_record() const { return records.back(); }
};

struct TailStatistics {
  double value_oscillation = 0.0;   // max - min of phi (= f unless composite) over the tail
  double min_residual = 0.0;        // min criticality residual over the tail
  double mean_step_norm = 0.0;      // mean |x_{k+1} - x_k| per iteration
  std::size_t records = 0;
};

class InsufficientRecords : public ContractViolation {
public:
  using ContractViolation::ContractViolation;
};

/// Statistics over records with k >= K - ceil(fraction * K), K being the
/// last logged index. Needs at least `min_records` tail records.
inline TailStatistics tail_statistics(const RunLog &log, double fraction,
                                      std::size_t min_records = 10) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ContractViolation("tail_statistics: fraction must lie in (0,1)");
  if (log.records.empty()) throw InsufficientRecords("tail_statistics: empty log");
  const std::size_t K = log.records.back().k;
  const auto span = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(K)));
  const std::size_t start = K >= span ? K - span : 0;

  TailStatistics s;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double minres = lo;
  double step_sum = 0.0;
  std::size_t step_cnt = 0;
  const RunRecord *prev = nullptr;
  for (const auto &r : log.records) {
    if (r.k < start) continue;
    ++s.records;
    lo = std::min(lo, r.phi);
    hi = std::max(hi, r.phi);
    minres = std::min(minres, r.crit_residual);
    if (prev && r.k > prev->k) {
      step_sum += (r.x - prev->x).norm() / static_cast<double>(r.k - prev->k);
      ++step_cnt;
    }
    prev = &r;
  }
  if (s.records < min_records)
    throw InsufficientRecords("tail_statistics: " + std::to_string(s.records) +
                              " tail records, need " + std::to_string(min_records));
  s.value_oscillation = hi - lo;
  s.min_residual = minres;
  s.mean_step_norm = step_cnt ? step_sum / static_cast<double>(step_cnt) : 0.0;
  return s;
}

inline std::string csv_header_line(std::size_t dim) {
  std::string h = "k,t";
  for (std::size_t i = 0; i < dim; ++i) h += ",x" + std::to_string(i);
  for (std::size_t i = 0; i < dim; ++i) h += ",y" + std::to_string(i);
  return h + ",f,phi,crit_residual";
}

/// Column header plus rows; excludes the provenance comment line.
inline std::string csv_body(const RunLog &log) {
  std::string out = csv_header_line(log.dim) + "\n";
  for (const auto &r : log.records) {
    out += std::to_string(r.k);
    out += ',';
    out += fmt_double(r.t);
    for (Eigen::Index i = 0; i < r.x.size(); ++i) (out += ',') += fmt_double(r.x[i]);
    for (Eigen::Index i = 0; i < r.y.size(); ++i) (out += ',') += fmt_double(r.y[i]);
    (out += ',') += fmt_double(r.f);
    (out += ',') += fmt_double(r.phi);
    (out += ',') += fmt_double(r.crit_residual);
    out += '\n';
  }
  return out;
}

inline void write_csv(const RunLog &log, std::ostream &os) {
  os << "# seed=" << log.seed << " config_hash=" << log.config_hash
     << " source=" << log.source << "\n"
     << csv_body(log);
}

/// Parses a CSV produced by write_csv (records only; header fields restored
/// from the comment line when present).
inline RunLog read_csv(std::istream &is) {
  RunLog log;
  std::string line;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string tok;
      while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const auto key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "seed") log.seed = std::stoull(val);
        else if (key == "config_hash") log.config_hash = val;
        else if (key == "source") log.source = val;
      }
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!have_header) {
      if (cells.size() < 5 || (cells.size() - 5) % 2 != 0)
        throw ContractViolation("read_csv: malformed header");
      log.dim = (cells.size() - 5) / 2;
      have_header = true;
      continue;
    }
    if (cells.size() != 2 * log.dim + 5) throw ContractViolation("read_csv: malformed row");
    RunRecord r;
    r.k = std::stoull(cells[0]);
    r.t = std::stod(cells[1]);
    r.x.resize(static_cast<Eigen::Index>(log.dim));
    r.y.resize(static_cast<Eigen::Index>(log.dim));
    for (std::size_t i = 0; i < log.dim; ++i) {
      r.x[static_cast<Eigen::Index>(i)] = std::stod(cells[2 + i]);
      r.y[static_cast<Eigen::Index>(i)] = std::stod(cells[2 + log.dim + i]);
    }
    r.f = std::stod(cells[2 + 2 * log.dim]);
    r.phi = std::stod(cells[3 + 2 * log.dim]);
    r.crit_residual = std::stod(cells[4 + 2 * log.dim]);
    log.records.push_back(std::move(r));
  }
  if (!log.records.empty()) log.iterations = log.budget = log.records.back().k;
  return log;
}

inline nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

/// Summary: final iterate, tail oscillation, min residual, status, seed.
inline nlohmann::json summary_json(const RunLog &log, double tail_fraction = 0.1) {
  nlohmann::json j;
  j["source"] = log.source;
  j["seed"] = log.seed;
  j["config_hash"] = log.config_hash;
  j["status"] = to_string(log.status);
  j["budget"] = log.budget;
  j["iterations"] = log.iterations;
  j["max_norm"] = json_number(log.max_norm);
  if (!log.records.empty()) {
    const auto &fin = log.records.back();
    j["final_iterate"] = to_vector(fin.x);
    j["final_f"] = json_number(fin.f);
    j["final_phi"] = json_number(fin.phi);
    double minres = std::numeric_limits<double>::infinity();
    for (const auto &r : log.records) minres = std::min(minres, r.crit_residual);
    j["min_residual"] = json_number(minres);
  }
  try {
    const auto ts = tail_statistics(log, tail_fraction, 1);
    j["tail_oscillation"] = json_number(ts.value_oscillation);
    j["tail_min_residual"] = json_number(ts.min_residual);
    j["tail_mean_step"] = json_number(ts.mean_step_norm);
  } catch (const InsufficientRecords &) {
    j["tail_oscillation"] = nullptr;
  }
  if (log.composite) {
    j["prox_bound_checks"] = log.prox_bound_checks;
    j["prox_bound_violations"] = log.prox_bound_violations;
    j["max_prox_bound_ratio"] = json_number(log.max_prox_bound_ratio);
    j["infeasible_iterates"] = log.infeasible_iterates;
  }
  return j;
}

} // namespace tamesg
