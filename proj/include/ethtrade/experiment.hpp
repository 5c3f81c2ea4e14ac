#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ethtrade/avgobs.hpp"
#include "ethtrade/csv.hpp"
#include "ethtrade/error.hpp"
#include "ethtrade/measures.hpp"
#include "ethtrade/reduced.hpp"
#include "ethtrade/spectral.hpp"
#include "ethtrade/spinchain.hpp"

namespace ethtrade {

enum class EnsembleChoice { uniform, canonical, mc_zero, mc_beta, pure };

struct EnsembleSpec {
  EnsembleChoice choice = EnsembleChoice::uniform;
  std::optional<double> beta;  // canonical / mc_beta; falls back to RunConfig::beta
  std::size_t pure_index = 0;

  std::string label() const {
    switch (choice) {
      case EnsembleChoice::uniform: return "uniform";
      case EnsembleChoice::canonical: return "canonical";
      case EnsembleChoice::mc_zero: return "mc_zero";
      case EnsembleChoice::mc_beta: return "mc_beta";
      case EnsembleChoice::pure: return "pure";
    }
    return "unknown";
  }
};

// Tokens: uniform | canonical[:beta] | mc-zero | mc-beta[:beta] | pure:<index>
inline EnsembleSpec parse_ensemble(std::string token) {
  token.erase(0, token.find_first_not_of(" \t"));
  token.erase(token.find_last_not_of(" \t") + 1);
  const auto colon = token.find(':');
  std::string name = token.substr(0, colon);
  std::replace(name.begin(), name.end(), '_', '-');
  const std::string arg = colon == std::string::npos ? "" : token.substr(colon + 1);
  EnsembleSpec out;
  if (name == "uniform") {
    out.choice = EnsembleChoice::uniform;
  } else if (name == "canonical") {
    out.choice = EnsembleChoice::canonical;
    if (!arg.empty()) out.beta = csv::parse_double(arg);
  } else if (name == "mc-zero" || name == "microcanonical") {
    out.choice = EnsembleChoice::mc_zero;
  } else if (name == "mc-beta") {
    out.choice = EnsembleChoice::mc_beta;
    if (!arg.empty()) out.beta = csv::parse_double(arg);
  } else if (name == "pure") {
    out.choice = EnsembleChoice::pure;
    require(!arg.empty(), ErrorCode::InvalidSpec, "pure ensemble needs an index, e.g. pure:0");
    out.pure_index = static_cast<std::size_t>(std::stoull(arg));
  } else {
    fail(ErrorCode::InvalidSpec, "unknown ensemble '" + token + "'");
  }
  return out;
}

enum class WidthMode { per_site, absolute };

struct RunConfig {
  std::vector<int> n_list;
  double g = 1.05;
  double h = 0.1;
  int n_b1 = 1;
  double beta = 0.1;
  std::vector<EnsembleSpec> ensembles;
  double shell_width = 0.2;  // Delta E = shell_width * N (per_site) or shell_width (absolute)
  WidthMode width_mode = WidthMode::per_site;
  RankPolicy rank_policy = RankPolicy::strict;
  std::string output_dir;
  int workers = 1;
  bool allow_residual = false;
  bool averaged = true;
  bool allow_large = false;
  bool verbose = false;

  double width_for(int n) const { return width_mode == WidthMode::per_site ? shell_width * n : shell_width; }

  void validate() const {
    require(!n_list.empty(), ErrorCode::InvalidSpec, "no chain lengths given");
    for (int n : n_list) {
      ChainSpec{n, g, h, allow_large}.validate();
    }
    require(shell_width > 0.0, ErrorCode::InvalidSpec, "shell width must be positive");
    require(n_b1 >= 1, ErrorCode::InvalidSpec, "block size must be positive");
    require(workers >= 1, ErrorCode::InvalidSpec, "workers must be >= 1");
  }
};

inline std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& part : csv::split(text, ',')) {
    if (part.empty()) continue;
    const auto dots = part.find("..");
    if (dots != std::string::npos) {
      const int lo = std::stoi(part.substr(0, dots));
      const int hi = std::stoi(part.substr(dots + 2));
      for (int n = lo; n <= hi; ++n) out.push_back(n);
    } else {
      out.push_back(std::stoi(part));
    }
  }
  return out;
}

// Applies one key=value setting.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  try {
    if (key == "n") cfg.n_list = parse_int_list(value);
    else if (key == "g") cfg.g = csv::parse_double(value);
    else if (key == "h") cfg.h = csv::parse_double(value);
    else if (key == "nb1") cfg.n_b1 = std::stoi(value);
    else if (key == "beta") cfg.beta = csv::parse_double(value);
    else if (key == "ensemble" || key == "ensembles") {
      cfg.ensembles.clear();
      for (const auto& tok : csv::split(value, ','))
        if (!tok.empty()) cfg.ensembles.push_back(parse_ensemble(tok));
    } else if (key == "shell_width") cfg.shell_width = csv::parse_double(value);
    else if (key == "width_mode") {
      if (value == "per_site" || value == "per-site") cfg.width_mode = WidthMode::per_site;
      else if (value == "absolute") cfg.width_mode = WidthMode::absolute;
      else fail(ErrorCode::InvalidSpec, "width_mode must be per_site or absolute");
    } else if (key == "rank_policy") {
      if (value == "strict") cfg.rank_policy = RankPolicy::strict;
      else if (value == "pseudo") cfg.rank_policy = RankPolicy::pseudo;
      else fail(ErrorCode::InvalidSpec, "rank_policy must be strict or pseudo");
    } else if (key == "out") cfg.output_dir = value;
    else if (key == "workers") cfg.workers = std::stoi(value);
    else if (key == "allow_residual") cfg.allow_residual = value == "true" || value == "1";
    else if (key == "averaged") cfg.averaged = value == "true" || value == "1";
    else if (key == "allow_large") cfg.allow_large = value == "true" || value == "1";
    else fail(ErrorCode::InvalidSpec, "unknown config key '" + key + "'");
  } catch (const std::logic_error&) {
    fail(ErrorCode::InvalidSpec, "bad value for '" + key + "': " + value);
  }
}

// Flat key=value file; blank lines and '#' comments are ignored.
inline void load_config(RunConfig& cfg, std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::InvalidSpec, "config line without '=': " + line);
    apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

inline void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::InvalidSpec, "cannot open config " + path);
  load_config(cfg, in);
}

// An ensemble realized on a spectrum, with the shell its statistics use and
// the eigenstates that get per-state rows.
struct PreparedEnsemble {
  EnsembleSpec spec;
  EnsembleState state;
  EnergyShell shell;
  std::vector<std::size_t> rows;
  double beta = std::nan("");
};

inline PreparedEnsemble prepare_ensemble(const Spectrum& s, const EnsembleSpec& spec, const RunConfig& cfg) {
  PreparedEnsemble out;
  out.spec = spec;
  const double width = cfg.width_for(s.sites);
  const double beta = spec.beta.value_or(cfg.beta);
  switch (spec.choice) {
    case EnsembleChoice::uniform: {
      // the shell is the whole spectrum, like the support of the mc ensembles
      out.state = make_ensemble(Uniform{}, s);
      out.rows.resize(s.dim());
      for (std::size_t i = 0; i < s.dim(); ++i) out.rows[i] = i;
      out.shell = EnergyShell{mean_energy(s, out.state), s.max_energy() - s.min_energy(), out.rows};
      break;
    }
    case EnsembleChoice::canonical: {
      out.beta = beta;
      out.state = make_ensemble(Canonical{beta}, s);
      out.shell = energy_shell(s, mean_energy(s, out.state), width);
      out.rows = out.shell.members;
      break;
    }
    case EnsembleChoice::mc_zero: {
      out.shell = energy_shell(s, 0.0, width);
      out.state = make_ensemble(Microcanonical{out.shell}, s);
      out.rows = out.shell.members;
      break;
    }
    case EnsembleChoice::mc_beta: {
      out.beta = beta;
      out.shell = energy_shell(s, canonical_energy(s, beta), width);
      out.state = make_ensemble(Microcanonical{out.shell}, s);
      out.rows = out.shell.members;
      break;
    }
    case EnsembleChoice::pure: {
      require(spec.pure_index < s.dim(), ErrorCode::InvalidSpec, "pure index out of range");
      out.state = make_ensemble(Pure{spec.pure_index}, s);
      out.shell = EnergyShell{s.energy(spec.pure_index), 0.0, {spec.pure_index}};
      out.rows = {spec.pure_index};
      break;
    }
  }
  return out;
}

struct RecordRow {
  int n = 0;
  std::string ensemble;
  double beta = 0.0;
  double shell_center = 0.0;
  double shell_width = 0.0;
  MeasureRecord record;
};

struct SummaryRow {
  int n = 0;
  std::string ensemble;
  double beta = 0.0;
  double shell_center = 0.0;
  double shell_width = 0.0;
  std::size_t shell_size = 0;
  double tradeoff_rhs = 0.0;
  double max_tradeoff_residual = 0.0;
  Typicality typ;
  ShellStats shell;
  double avg_corr_term = std::nan("");
  double avg_rhs_local = std::nan("");
  ShellStats avg_shell;
  bool has_avg = false;
  AvgTypicality avg_typ;
  double avg_max_tradeoff_residual = std::nan("");
};

struct SweepResult {
  RunConfig config;
  std::vector<RecordRow> records;
  std::vector<SummaryRow> summaries;
};

inline const char* kRecordColumns =
    "N,g,h,ensemble,beta,shell_center,shell_width,i,E_i,v_dg,v_off_sum,v_off_avg,f_ratio,d2_dg,tradeoff_lhs,"
    "tradeoff_rhs,tradeoff_residual";

inline const char* kSummaryColumns =
    "N,g,h,ensemble,beta,shell_center,shell_width,shell_size,tradeoff_rhs,max_tradeoff_residual,typ_residual,"
    "vbar_dg,vbar_off,v_dg_max,v_off_max,avg_corr_term,typ_dg,typ_off,avg_rhs_local,avg_vbar_dg,avg_vbar_off,"
    "avg_v_dg_max,avg_v_off_max,avg_typ_dg,avg_typ_off,avg_max_tradeoff_residual,avg_typ_residual";

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Everything the sweep needs for one (spectrum, ensemble) pair.
inline SummaryRow evaluate_ensemble(const Spectrum& s, const PreparedEnsemble& prep, const RunConfig& cfg,
                                    std::vector<RecordRow>* records) {
  const BlockSpec base = BlockSpec::contiguous(1, cfg.n_b1, s.sites);
  MeasureOptions mopt;
  mopt.rank_policy = cfg.rank_policy;
  mopt.sweep.workers = cfg.workers;
  const TransitionSweep sweep = local_sweep(s, prep.state, base, mopt);

  std::vector<std::size_t> eval = prep.rows;
  const auto support = support_of(prep.state);
  eval.insert(eval.end(), support.begin(), support.end());
  eval.insert(eval.end(), prep.shell.members.begin(), prep.shell.members.end());
  std::sort(eval.begin(), eval.end());
  eval.erase(std::unique(eval.begin(), eval.end()), eval.end());
  const auto all_rows = sweep.rows(eval);
  auto pick = [&](const std::vector<std::size_t>& which) {
    std::vector<SweepRow> out;
    out.reserve(which.size());
    for (std::size_t i : which) {
      const auto it = std::lower_bound(eval.begin(), eval.end(), i);
      out.push_back(all_rows[static_cast<std::size_t>(it - eval.begin())]);
    }
    return out;
  };

  SummaryRow sum;
  sum.n = s.sites;
  sum.ensemble = prep.spec.label();
  sum.beta = prep.beta;
  sum.shell_center = prep.shell.center;
  sum.shell_width = prep.shell.width;
  sum.shell_size = prep.shell.size();
  sum.tradeoff_rhs = sweep.rhs();

  const auto row_set = pick(prep.rows);
  for (const auto& rec : measure_records(sweep, row_set)) {
    sum.max_tradeoff_residual = std::max(sum.max_tradeoff_residual, std::abs(rec.tradeoff.residual));
    if (!cfg.allow_residual && !rec.tradeoff.holds()) {
      fail(ErrorCode::IdentityFailure, "trade-off residual " + csv::format(rec.tradeoff.residual) + " at N=" +
                                           std::to_string(s.sites) + " i=" + std::to_string(rec.i));
    }
    if (records) records->push_back({s.sites, sum.ensemble, prep.beta, prep.shell.center, prep.shell.width, rec});
  }
  sum.typ = make_typicality(prep.state, pick(support), sweep.rhs());
  sum.shell = make_shell_stats(pick(prep.shell.members), s.dim(), &prep.state, ShellWeighting::uniform);

  if (cfg.averaged) {
    AveragedOptions aopt;
    aopt.measure = mopt;
    std::optional<TransitionSweep> avg;
    try {
      avg.emplace(averaged_sweep(s, prep.state, cfg.n_b1, aopt));
    } catch (const Error& e) {
      // Non-invariant ensembles (typically a degenerate pure state) have no averaged columns.
      if (e.code() != ErrorCode::InvalidSpec || prep.spec.choice != EnsembleChoice::pure) throw;
    }
    if (avg) {
      sum.has_avg = true;
      const CorrelationEvaluator corr(s, avg->frames(), avg->reference());
      const double c = static_cast<double>(avg->frames().size());
      sum.avg_rhs_local = avg->rhs() / c;
      sum.avg_corr_term = corr.for_ensemble(prep.state.weights, CorrelationPath::by_separation);
      const auto arows = avg->rows(eval);
      auto apick = [&](const std::vector<std::size_t>& which) {
        std::vector<SweepRow> out;
        for (std::size_t i : which) {
          const auto it = std::lower_bound(eval.begin(), eval.end(), i);
          out.push_back(arows[static_cast<std::size_t>(it - eval.begin())]);
        }
        return out;
      };
      const auto shell_rows = apick(prep.shell.members);
      sum.avg_shell = make_shell_stats(shell_rows, s.dim(), &prep.state, ShellWeighting::uniform);
      sum.avg_typ = make_avg_typicality(prep.state, apick(support), sum.avg_rhs_local, sum.avg_corr_term);
      sum.avg_max_tradeoff_residual = 0.0;
      for (const auto& row : shell_rows) {
        const auto rep = make_avg_tradeoff(row, sum.avg_rhs_local, corr.for_state(row.i));
        sum.avg_max_tradeoff_residual = std::max(sum.avg_max_tradeoff_residual, std::abs(rep.residual));
        if (!cfg.allow_residual && !rep.holds()) {
          fail(ErrorCode::IdentityFailure, "averaged trade-off residual " + csv::format(rep.residual) +
                                               " at N=" + std::to_string(s.sites) + " i=" + std::to_string(row.i));
        }
      }
    }
  }
  if (!cfg.allow_residual && std::abs(sum.typ.residual) > identity_tolerance(sum.tradeoff_rhs)) {
    fail(ErrorCode::IdentityFailure, "typicality residual " + csv::format(sum.typ.residual));
  }
  return sum;
}

inline SweepResult compute_sweep(const RunConfig& cfg) {
  cfg.validate();
  require(!cfg.ensembles.empty(), ErrorCode::InvalidSpec, "no ensembles selected");
  SweepResult out;
  out.config = cfg;
  for (int n : cfg.n_list) {
    Stopwatch clock;
    const Spectrum s = diagonalize(ChainSpec{n, cfg.g, cfg.h, cfg.allow_large});
    if (cfg.verbose) std::cerr << "N=" << n << " diagonalized in " << clock.seconds() << " s\n";
    for (const auto& spec : cfg.ensembles) {
      const auto prep = prepare_ensemble(s, spec, cfg);
      out.summaries.push_back(evaluate_ensemble(s, prep, cfg, &out.records));
      if (cfg.verbose) std::cerr << "N=" << n << " " << spec.label() << " done at " << clock.seconds() << " s\n";
    }
  }
  return out;
}

inline void write_metadata(std::ostream& out, const RunConfig& cfg, const char* what) {
  out << "# ethtrade " << what << "\n";
  out << "# g=" << csv::format(cfg.g) << " h=" << csv::format(cfg.h) << " nb1=" << cfg.n_b1
      << " beta=" << csv::format(cfg.beta) << "\n";
  out << "# shell_width=" << csv::format(cfg.shell_width)
      << " width_mode=" << (cfg.width_mode == WidthMode::per_site ? "per_site" : "absolute")
      << " rank_policy=" << (cfg.rank_policy == RankPolicy::strict ? "strict" : "pseudo") << "\n";
}

inline std::string records_csv(const SweepResult& r) {
  std::ostringstream out;
  write_metadata(out, r.config, "per-eigenstate records");
  out << kRecordColumns << "\n";
  for (const auto& row : r.records) {
    const auto& m = row.record;
    csv::Row line;
    line << row.n << r.config.g << r.config.h << row.ensemble << row.beta << row.shell_center << row.shell_width
         << m.i << m.energy << m.v_dg << m.v_off_sum << m.v_off_avg << m.f_ratio << m.d2 << m.tradeoff.lhs
         << m.tradeoff.rhs << m.tradeoff.residual;
    out << line.str() << "\n";
  }
  return out.str();
}

inline std::string summary_csv(const SweepResult& r) {
  std::ostringstream out;
  write_metadata(out, r.config, "per-ensemble summary");
  out << kSummaryColumns << "\n";
  const double nan = std::nan("");
  for (const auto& row : r.summaries) {
    csv::Row line;
    line << row.n << r.config.g << r.config.h << row.ensemble << row.beta << row.shell_center << row.shell_width
         << row.shell_size << row.tradeoff_rhs << row.max_tradeoff_residual << row.typ.residual << row.shell.vbar_dg
         << row.shell.vbar_off << row.shell.v_dg_max << row.shell.v_off_max << row.avg_corr_term << row.typ.mean_dg
         << row.typ.mean_off << row.avg_rhs_local << (row.has_avg ? row.avg_shell.vbar_dg : nan)
         << (row.has_avg ? row.avg_shell.vbar_off : nan) << (row.has_avg ? row.avg_shell.v_dg_max : nan)
         << (row.has_avg ? row.avg_shell.v_off_max : nan) << (row.has_avg ? row.avg_typ.mean_dg : nan)
         << (row.has_avg ? row.avg_typ.mean_off : nan) << row.avg_max_tradeoff_residual
         << (row.has_avg ? row.avg_typ.residual : nan);
    out << line.str() << "\n";
  }
  return out.str();
}

// Writes `content` to `path` through a temporary file so a failed run never
// leaves a truncated output behind.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::InvalidSpec, "cannot write " + tmp.string());
    out << content;
    require(static_cast<bool>(out), ErrorCode::InvalidSpec, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

struct SweepFiles {
  std::filesystem::path records;
  std::filesystem::path summary;
};

inline SweepFiles run_sweep(const RunConfig& cfg) {
  require(!cfg.output_dir.empty(), ErrorCode::InvalidSpec, "sweep needs an output directory");
  const SweepResult result = compute_sweep(cfg);
  std::filesystem::create_directories(cfg.output_dir);
  SweepFiles files{std::filesystem::path(cfg.output_dir) / "records.csv",
                   std::filesystem::path(cfg.output_dir) / "summary.csv"};
  const auto records = records_csv(result);
  const auto summary = summary_csv(result);
  try {
    write_file_atomic(files.records, records);
    write_file_atomic(files.summary, summary);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(files.records, ec);
    std::filesystem::remove(files.summary, ec);
    throw;
  }
  return files;
}

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<std::pair<double, double>> points;
};

// Least squares of ln(value) against N.
inline FitResult fit_decay(const std::vector<std::pair<double, double>>& points) {
  require(points.size() >= 3, ErrorCode::InvalidSpec, "decay fit needs at least 3 points");
  for (const auto& [x, y] : points) {
    require(y > 0.0 && std::isfinite(y), ErrorCode::InvalidSpec, "decay fit needs positive values");
  }
  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : points) {
    mx += x;
    my += std::log(y);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [x, y] : points) {
    const double dx = x - mx;
    const double dy = std::log(y) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  require(sxx > 0.0, ErrorCode::InvalidSpec, "decay fit needs distinct N values");
  FitResult out;
  out.points = points;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  double ss_res = 0.0;
  for (const auto& [x, y] : points) {
    const double r = std::log(y) - (out.intercept + out.slope * x);
    ss_res += r * r;
  }
  out.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return out;
}

// Selects (N, column) pairs from a summary table, keeping rows whose
// `filters` columns match exactly.
inline std::vector<std::pair<double, double>> select_points(const csv::Table& table, const std::string& column,
                                                            const std::map<std::string, std::string>& filters) {
  const std::size_t ncol = table.column("N");
  const std::size_t vcol = table.column(column);
  std::vector<std::pair<std::size_t, std::string>> f;
  for (const auto& [k, v] : filters) f.emplace_back(table.column(k), v);
  std::vector<std::pair<double, double>> out;
  for (const auto& row : table.rows) {
    bool keep = true;
    for (const auto& [c, v] : f) {
      if (row[c] == v) continue;
      // numeric columns compare by value so "0.1" matches "1e-1"
      try {
        keep = keep && csv::parse_double(row[c]) == csv::parse_double(v);
      } catch (const Error&) {
        keep = false;
      }
    }
    if (keep) out.emplace_back(csv::parse_double(row[ncol]), csv::parse_double(row[vcol]));
  }
  return out;
}

struct IdentityCheck {
  std::string identity;
  int n = 0;
  std::string ensemble;
  double max_abs_residual = 0.0;
  double threshold = 0.0;
  std::string verdict;  // pass | fail | expected_error
  std::string note;
};

struct IdentityReport {
  std::vector<IdentityCheck> checks;

  bool passed() const {
    return std::none_of(checks.begin(), checks.end(), [](const auto& c) { return c.verdict == "fail"; });
  }

  std::string to_csv() const {
    std::ostringstream out;
    out << "identity,N,ensemble,max_abs_residual,threshold,verdict,note\n";
    for (const auto& c : checks) {
      csv::Row line;
      line << c.identity << c.n << c.ensemble << c.max_abs_residual << c.threshold << c.verdict << c.note;
      out << line.str() << "\n";
    }
    return out.str();
  }
};

inline void add_check(IdentityReport& report, std::string name, int n, std::string ens, double residual,
                      double threshold) {
  report.checks.push_back({std::move(name), n, std::move(ens), residual, threshold,
                           residual <= threshold ? "pass" : "fail", ""});
}

inline void add_expected_error(IdentityReport& report, std::string name, int n, std::string ens, const Error& e) {
  report.checks.push_back({std::move(name), n, std::move(ens), std::nan(""), 0.0, "expected_error",
                           std::string(to_string(e.code()))});
}

// Evaluates every exact identity and inequality for each configured N and
// ensemble. Singular local states are recorded, not thrown.
inline IdentityReport check_identities(const RunConfig& cfg) {
  cfg.validate();
  IdentityReport report;
  std::vector<EnsembleSpec> ensembles = cfg.ensembles;
  if (ensembles.empty()) {
    ensembles = {parse_ensemble("uniform"), parse_ensemble("canonical"), parse_ensemble("mc-zero")};
  }
  for (int n : cfg.n_list) {
    const Spectrum s = diagonalize(ChainSpec{n, cfg.g, cfg.h, cfg.allow_large});
    const BlockSpec base = BlockSpec::contiguous(1, cfg.n_b1, n);
    MeasureOptions mopt;
    mopt.rank_policy = cfg.rank_policy;
    mopt.sweep.workers = cfg.workers;
    for (const auto& spec : ensembles) {
      const std::string label = spec.label();
      try {
        const auto prep = prepare_ensemble(s, spec, cfg);
        const TransitionSweep sweep = local_sweep(s, prep.state, base, mopt);
        const double tol = identity_tolerance(sweep.rhs());
        std::vector<std::size_t> all(s.dim());
        for (std::size_t i = 0; i < s.dim(); ++i) all[i] = i;
        const auto rows = sweep.rows(all);

        double worst = 0.0;
        for (const auto& row : rows) worst = std::max(worst, std::abs(make_tradeoff(row, sweep.rhs()).residual));
        add_check(report, "tradeoff", n, label, worst, tol);

        const auto typ = make_typicality(prep.state, rows, sweep.rhs());
        add_check(report, "typicality", n, label, std::abs(typ.residual), tol);

        // Hoelder chain 2 d2 <= d3 on every (i, j) with i in the shell and a spread of j.
        const SiteLayout layout(base.sites, n);
        const LocalReference& ref = sweep.reference();
        double violation = 0.0;
        const std::size_t stride = std::max<std::size_t>(1, s.dim() / 64);
        for (std::size_t i : prep.shell.members) {
          for (std::size_t j = i % stride; j < s.dim(); j += stride) {
            const Matrix sigma = transition_matrix(layout, s, i, j);
            const double d2 = d2_measure(sigma, ref.rho, i == j);
            const double d3 = d3_measure(variance_closed_form(sigma, ref, i == j));
            violation = std::max(violation, 2.0 * d2 - d3);
          }
        }
        add_check(report, "holder_d2_d3", n, label, std::max(0.0, violation), 1e-10);

        if (n % cfg.n_b1 == 0) {
          AveragedOptions aopt;
          aopt.measure = mopt;
          const TransitionSweep avg = averaged_sweep(s, prep.state, cfg.n_b1, aopt);
          const CorrelationEvaluator corr(s, avg.frames(), avg.reference());
          const double c = static_cast<double>(avg.frames().size());
          const double local = avg.rhs() / c;
          const auto arows = avg.rows(all);
          double aworst = 0.0;
          for (std::size_t i : prep.shell.members) {
            const auto rep = make_avg_tradeoff(arows[i], local, corr.for_state(i));
            aworst = std::max(aworst, std::abs(rep.residual));
          }
          const double corr_term = corr.for_ensemble(prep.state.weights, CorrelationPath::naive);
          add_check(report, "avg_tradeoff", n, label, aworst, identity_tolerance(local + corr_term));
          const auto atyp = make_avg_typicality(prep.state, arows, local, corr_term);
          add_check(report, "avg_typicality", n, label, std::abs(atyp.residual),
                    identity_tolerance(local + corr_term));
          const double fast = corr.for_ensemble(prep.state.weights, CorrelationPath::by_separation);
          add_check(report, "corr_separation_path", n, label, std::abs(fast - corr_term), 1e-10);

          if (n <= 8) {
            double diff = 0.0;
            // sigma_z on the first site of the block
            const Eigen::Index bd = Eigen::Index(1) << cfg.n_b1;
            CMatrix a = CMatrix::Zero(bd, bd);
            for (Eigen::Index k = 0; k < bd; ++k) a(k, k) = k < bd / 2 ? 1.0 : -1.0;
            const std::size_t picks[] = {0, s.dim() / 3, s.dim() / 2, s.dim() - 1};
            for (std::size_t i : picks)
              for (std::size_t j : picks) diff = std::max(diff, d1_avg_equality_check(s, prep.state, i, j, a, cfg.n_b1, aopt).diff);
            add_check(report, "sdti_d1_average", n, label, diff, 1e-10);
          }
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::SingularLocalState) throw;
        add_expected_error(report, "tradeoff", n, label, e);
      }
    }
    // Pure-state identity on a few eigenstates.
    const std::size_t picks[] = {0, s.dim() / 2, s.dim() - 1};
    for (std::size_t i : picks) {
      const std::string label = "pure:" + std::to_string(i);
      try {
        const auto pure = make_ensemble(Pure{i}, s);
        const auto rep = tradeoff_report(s, pure, i, base, mopt);
        const double target = tradeoff_rhs(reduce_transition(s, i, i, base).matrix, cfg.rank_policy);
        add_check(report, "pure_state", n, label, std::abs(rep.v_off_sum - target) + rep.v_dg,
                  identity_tolerance(target));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::SingularLocalState) throw;
        add_expected_error(report, "pure_state", n, label, e);
      }
    }
  }
  return report;
}

struct Diagnostics {
  int n = 0;
  Histogram dos;
  Histogram canonical;
  std::vector<std::pair<double, double>> energy_vs_beta;
  std::vector<std::pair<int, double>> mutual_information;  // (distance, I)
};

inline Diagnostics compute_diagnostics(const Spectrum& s, double beta, int bins, double beta_max = 5.0,
                                       double beta_step = 0.05) {
  Diagnostics d;
  d.n = s.sites;
  d.dos = spectral_histogram(s, nullptr, bins);
  const auto can = make_ensemble(Canonical{beta}, s);
  d.canonical = spectral_histogram(s, &can, bins);
  const int steps = static_cast<int>(std::lround(beta_max / beta_step));
  for (int k = 0; k <= steps; ++k) {
    const double b = beta_step * k;
    d.energy_vs_beta.emplace_back(b, canonical_energy(s, b));
  }
  for (int dist = 1; dist <= s.sites / 2; ++dist) {
    d.mutual_information.emplace_back(dist, mutual_information(s, can, BlockSpec({1}), BlockSpec({1 + dist})));
  }
  return d;
}

inline std::string histogram_csv(const Histogram& h) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,value,energy_sum\n";
  for (std::size_t b = 0; b < h.values.size(); ++b) {
    csv::Row line;
    line << h.edges[b] << h.edges[b + 1] << h.values[b] << h.energy_sums[b];
    out << line.str() << "\n";
  }
  return out.str();
}

inline std::string energy_beta_csv(const Diagnostics& d) {
  std::ostringstream out;
  out << "beta,energy\n";
  for (const auto& [b, e] : d.energy_vs_beta) {
    csv::Row line;
    line << b << e;
    out << line.str() << "\n";
  }
  return out.str();
}

inline std::string mutual_information_csv(const Diagnostics& d) {
  std::ostringstream out;
  out << "distance,mutual_information,log10_mutual_information\n";
  for (const auto& [dist, i] : d.mutual_information) {
    csv::Row line;
    line << dist << i << (i > 0.0 ? std::log10(i) : -INFINITY);
    out << line.str() << "\n";
  }
  return out.str();
}

}  // namespace ethtrade
