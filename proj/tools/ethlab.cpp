// ethlab: command-line driver for the ethtrade library.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "ethtrade/experiment.hpp"

namespace fs = std::filesystem;
using namespace ethtrade;

namespace {

enum Exit { kOk = 0, kUsage = 1, kNumerical = 2, kIdentity = 3 };

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSpec:
    case ErrorCode::DimensionLimit:
      return kUsage;
    case ErrorCode::IdentityFailure:
      return kIdentity;
    default:
      return kNumerical;
  }
}

struct Flags {
  std::string n;
  int n_min = 0;
  int n_max = 0;
  double g = 1.05;
  double h = 0.1;
  double beta = 0.1;
  int nb1 = 1;
  std::vector<std::string> ensembles;
  std::string shell_center = "zero";
  double shell_width = 0.2;
  std::string width_mode = "per_site";
  std::string rank_policy = "strict";
  int workers = 1;
  std::string out;
  std::string config;
  bool allow_residual = false;
  bool allow_large = false;
  bool no_averaged = false;
  bool verbose = false;
};

void add_chain_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--g", f.g, "transverse field");
  cmd->add_option("--h", f.h, "longitudinal field");
  cmd->add_flag("--allow-large", f.allow_large, "permit N above 14");
}

void add_run_flags(CLI::App* cmd, Flags& f) {
  add_chain_flags(cmd, f);
  cmd->add_option("--beta", f.beta, "inverse temperature for canonical / beta-energy shells");
  cmd->add_option("--nb1", f.nb1, "local block size")->check(CLI::PositiveNumber);
  cmd->add_option("--ensemble", f.ensembles,
                  "uniform | canonical[:beta] | microcanonical | mc-zero | mc-beta[:beta] | pure:<i>")
      ->delimiter(',');
  cmd->add_option("--shell-center", f.shell_center, "center for 'microcanonical'")
      ->check(CLI::IsMember({"zero", "beta-energy"}));
  cmd->add_option("--shell-width", f.shell_width, "shell width (per site unless --width-mode absolute)");
  cmd->add_option("--width-mode", f.width_mode)->check(CLI::IsMember({"per_site", "per-site", "absolute"}));
  cmd->add_option("--rank-policy", f.rank_policy)->check(CLI::IsMember({"strict", "pseudo"}));
  cmd->add_option("--workers", f.workers)->check(CLI::PositiveNumber);
  cmd->add_option("--config", f.config, "key=value config file; flags given explicitly override it");
  cmd->add_flag("--allow-residual", f.allow_residual, "write rows even if an identity residual is too large");
  cmd->add_flag("--no-averaged", f.no_averaged, "skip translation-averaged columns");
  cmd->add_flag("-v,--verbose", f.verbose);
}

RunConfig build_config(const CLI::App* cmd, const Flags& f) {
  RunConfig cfg;
  if (!f.config.empty()) load_config_file(cfg, f.config);
  auto given = [&](const char* name) {
    const auto* opt = cmd->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  if (given("--n")) cfg.n_list = parse_int_list(f.n);
  if (given("--n-min") || given("--n-max")) {
    require(given("--n-min") && given("--n-max"), ErrorCode::InvalidSpec, "--n-min and --n-max go together");
    require(f.n_min <= f.n_max, ErrorCode::InvalidSpec, "--n-min exceeds --n-max");
    cfg.n_list.clear();
    for (int n = f.n_min; n <= f.n_max; ++n) cfg.n_list.push_back(n);
  }
  if (given("--g")) cfg.g = f.g;
  if (given("--h")) cfg.h = f.h;
  if (given("--beta")) cfg.beta = f.beta;
  if (given("--nb1")) cfg.n_b1 = f.nb1;
  if (given("--shell-width")) cfg.shell_width = f.shell_width;
  if (given("--width-mode")) apply_setting(cfg, "width_mode", f.width_mode);
  if (given("--rank-policy")) apply_setting(cfg, "rank_policy", f.rank_policy);
  if (given("--workers")) cfg.workers = f.workers;
  if (given("--out")) cfg.output_dir = f.out;
  if (f.allow_residual) cfg.allow_residual = true;
  if (f.allow_large) cfg.allow_large = true;
  if (f.no_averaged) cfg.averaged = false;
  cfg.verbose = f.verbose;
  if (given("--ensemble")) {
    cfg.ensembles.clear();
    for (auto tok : f.ensembles) {
      if (tok == "microcanonical") tok = f.shell_center == "zero" ? "mc-zero" : "mc-beta";
      cfg.ensembles.push_back(parse_ensemble(tok));
    }
  }
  return cfg;
}

void write_out(const std::string& dir, const std::string& name, const std::string& content) {
  fs::create_directories(dir);
  write_file_atomic(fs::path(dir) / name, content);
}

int cmd_spectrum(const CLI::App* cmd, const Flags& f) {
  RunConfig cfg = build_config(cmd, f);
  cfg.validate();
  std::ostringstream csvout;
  csvout << "N,g,h,i,E\n";
  for (int n : cfg.n_list) {
    const ChainSpec spec{n, cfg.g, cfg.h, cfg.allow_large};
    const auto h = build_hamiltonian(spec);
    const Spectrum s = diagonalize(h);
    const auto q = assess(h, s);
    std::cerr << "N=" << n << " dim=" << s.dim() << " E in [" << s.min_energy() << ", " << s.max_energy()
              << "] residual=" << q.max_residual << " orthonormality=" << q.orthonormality << "\n";
    for (std::size_t i = 0; i < s.dim(); ++i) {
      csv::Row row;
      row << n << cfg.g << cfg.h << i << s.energy(i);
      csvout << row.str() << "\n";
    }
  }
  if (cfg.output_dir.empty()) std::cout << csvout.str();
  else write_out(cfg.output_dir, "spectrum.csv", csvout.str());
  return kOk;
}

int cmd_sweep(const CLI::App* cmd, const Flags& f, bool single) {
  RunConfig cfg = build_config(cmd, f);
  if (single) require(cfg.n_list.size() == 1, ErrorCode::InvalidSpec, "measures takes a single --n");
  if (cfg.ensembles.empty()) cfg.ensembles = {parse_ensemble("canonical")};
  if (cfg.output_dir.empty()) {
    const auto result = compute_sweep(cfg);
    std::cout << summary_csv(result);
    return kOk;
  }
  const auto files = run_sweep(cfg);
  std::cerr << "wrote " << files.records.string() << " and " << files.summary.string() << "\n";
  return kOk;
}

int cmd_check(const CLI::App* cmd, const Flags& f) {
  RunConfig cfg = build_config(cmd, f);
  const auto report = check_identities(cfg);
  const std::string text = report.to_csv();
  if (cfg.output_dir.empty()) std::cout << text;
  else write_out(cfg.output_dir, "identities.csv", text);
  return report.passed() ? kOk : kIdentity;
}

int cmd_fit(const std::string& input, const std::string& column, const std::vector<std::string>& filters,
            const std::string& out) {
  std::map<std::string, std::string> where;
  for (const auto& f : filters) {
    const auto eq = f.find('=');
    require(eq != std::string::npos, ErrorCode::InvalidSpec, "filter must be column=value: " + f);
    where[f.substr(0, eq)] = f.substr(eq + 1);
  }
  const auto table = csv::read_file(input);
  const auto fit = fit_decay(select_points(table, column, where));
  std::ostringstream text;
  text << "column,points,slope,intercept,r_squared,slope_over_ln2\n";
  csv::Row row;
  row << column << fit.points.size() << fit.slope << fit.intercept << fit.r_squared << fit.slope / std::log(2.0);
  text << row.str() << "\n";
  if (out.empty()) std::cout << text.str();
  else write_out(out, "fit_" + column + ".csv", text.str());
  return kOk;
}

int cmd_diagnostics(const CLI::App* cmd, const Flags& f, int bins) {
  RunConfig cfg = build_config(cmd, f);
  cfg.validate();
  require(bins > 0, ErrorCode::InvalidSpec, "--bins must be positive");
  for (int n : cfg.n_list) {
    const Spectrum s = diagonalize(ChainSpec{n, cfg.g, cfg.h, cfg.allow_large});
    const auto d = compute_diagnostics(s, cfg.beta, bins);
    const std::string tag = "_N" + std::to_string(n);
    if (cfg.output_dir.empty()) {
      std::cout << "# N=" << n << " mutual information vs distance\n" << mutual_information_csv(d);
      continue;
    }
    write_out(cfg.output_dir, "dos" + tag + ".csv", histogram_csv(d.dos));
    write_out(cfg.output_dir, "canonical_hist" + tag + ".csv", histogram_csv(d.canonical));
    write_out(cfg.output_dir, "energy_beta" + tag + ".csv", energy_beta_csv(d));
    write_out(cfg.output_dir, "mutual_information" + tag + ".csv", mutual_information_csv(d));
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ethtrade: distinguishability trade-offs for eigenstates of an Ising chain"};
  app.set_help_flag("--help", "print help");
  app.require_subcommand(1);
  Flags f;

  auto* spectrum = app.add_subcommand("spectrum", "diagonalize and dump eigenvalues");
  spectrum->add_option("--n", f.n, "chain length(s), e.g. 8 or 8,10 or 8..12")->required();
  add_chain_flags(spectrum, f);
  spectrum->add_option("--out", f.out, "output directory (stdout if omitted)");

  auto* measures = app.add_subcommand("measures", "per-eigenstate measures for one chain");
  measures->add_option("--n", f.n, "chain length")->required();
  add_run_flags(measures, f);
  measures->add_option("--out", f.out);

  auto* sweep = app.add_subcommand("sweep", "per-eigenstate records and summaries over a range of N");
  sweep->add_option("--n", f.n, "chain lengths");
  sweep->add_option("--n-min", f.n_min);
  sweep->add_option("--n-max", f.n_max);
  add_run_flags(sweep, f);
  sweep->add_option("--out", f.out);

  auto* check = app.add_subcommand("check-identities", "evaluate every exact identity; exit 3 on failure");
  check->add_option("--n", f.n, "chain lengths")->required();
  add_run_flags(check, f);
  check->add_option("--out", f.out);

  std::string fit_input, fit_column;
  std::vector<std::string> fit_filters;
  auto* fit = app.add_subcommand("fit", "fit ln(column) against N from a summary CSV");
  fit->add_option("--input", fit_input)->required()->check(CLI::ExistingFile);
  fit->add_option("--column", fit_column)->required();
  fit->add_option("--where", fit_filters, "column=value filters");
  fit->add_option("--out", f.out);

  int bins = 40;
  auto* diag = app.add_subcommand("diagnostics", "density of states, canonical histogram, E(beta), mutual information");
  diag->add_option("--n", f.n)->required();
  add_chain_flags(diag, f);
  diag->add_option("--beta", f.beta);
  diag->add_option("--bins", bins);
  diag->add_option("--out", f.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*spectrum) return cmd_spectrum(spectrum, f);
    if (*measures) return cmd_sweep(measures, f, true);
    if (*sweep) return cmd_sweep(sweep, f, false);
    if (*check) return cmd_check(check, f);
    if (*fit) return cmd_fit(fit_input, fit_column, fit_filters, f.out);
    if (*diag) return cmd_diagnostics(diag, f, bins);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }
  return kUsage;
}
