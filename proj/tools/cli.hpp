#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rfa/rfa.hpp"

namespace rfa::cli {

enum Exit : int { kOk = 0, kIo = 1, kNumerical = 2, kBadArgs = 3 };

inline int exit_code(ErrorKind kind) {
  if (kind == ErrorKind::Io) return kIo;
  if (is_numerical(kind)) return kNumerical;
  return kBadArgs;
}

inline std::pair<Eigen::Index, Eigen::Index> parse_dims(const std::string& s) {
  const auto x = s.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t used_p = 0, used_t = 0;
    const long p = std::stol(s.substr(0, x), &used_p);
    const long T = std::stol(s.substr(x + 1), &used_t);
    if (used_p != x || used_t != s.size() - x - 1 || p < 1 || T < 1) throw std::invalid_argument(s);
    return {p, T};
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::InvalidParameter, "dims must look like PxT, got '" + s + "'");
  }
}

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

/// Writes to `path`, or to `out` when no path was given.
inline void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  f << text;
  if (!f) throw Error(ErrorKind::Io, "write to '" + path + "' failed");
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

/// "# key=value ..." line heading CSV and table outputs.
inline std::string comment_line(const Json& config) {
  std::string s = "#";
  for (const auto& [k, v] : config.items()) s += " " + k + "=" + (v.is_string() ? v.get<std::string>() : v.dump());
  return s + "\n";
}

inline Method parse_method(const std::string& m) { return m == "pca" ? Method::Pca : Method::Rip; }

struct Common {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;
};

inline void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Master seed")->capture_default_str();
  cmd->add_option("--threads", c.threads, "Worker cap; results do not depend on it")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--out", c.out, "Output file (default: stdout)");
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  Common common;
  std::string input;
  std::string method = "rip";
  int r = 3;
  double tau = 0.5;
  int starts = 5;
  int max_iter = 100;
  double tol = 1e-5;
};

inline Json fit_config(const FitArgs& a) {
  Json c;
  c["command"] = "fit";
  c["input"] = a.input;
  c["method"] = a.method;
  c["r"] = a.r;
  if (a.method == "rip") {
    c["tau"] = a.tau;
    c["starts"] = a.starts;
    c["max_iter"] = a.max_iter;
    c["conv_tol"] = a.tol;
  }
  c["seed"] = a.common.seed;
  return c;
}

inline int cmd_fit(const FitArgs& a, std::ostream& out) {
  const LabeledPanel data = read_panel_csv(a.input);
  FactorFit fit;
  if (a.method == "pca") {
    fit = fit_pca(data.panel, a.r);
  } else {
    RipConfig cfg;
    cfg.r = a.r;
    cfg.tau = a.tau;
    cfg.n_starts = a.starts;
    cfg.max_iter = a.max_iter;
    cfg.conv_tol = a.tol;
    cfg.seed = a.common.seed;
    cfg.threads = a.common.threads;
    fit = fit_rip(data.panel, cfg);
  }
  Json j;
  j["config"] = fit_config(a);
  j["ids"] = data.ids;
  j["fit"] = fit_to_json(fit);
  emit(dump(j), a.common.out, out);
  return kOk;
}

// ----------------------------------------------------------- simulate

struct SimulateArgs {
  Common common;
  std::string scenario = "A1";
  std::string dims = "150x100";
  double alpha = 1.5;
  std::optional<double> tau;
  std::uint64_t replication = 0;
  std::string truth;
};

inline int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const Scenario s = parse_scenario(a.scenario);
  const auto [p, T] = parse_dims(a.dims);
  DGPConfig cfg = scenario_config(s, p, T, a.alpha, a.common.seed);
  cfg.replication = a.replication;
  if (a.tau && *a.tau != 0.5) cfg.tau_adjust = *a.tau;
  const SimulatedPanel sim = gen_dgp(cfg);

  Json c;
  c["command"] = "simulate";
  c["scenario"] = to_string(s);
  c["dims"] = std::to_string(p) + "x" + std::to_string(T);
  c["family"] = to_string(cfg.family);
  if (cfg.family == Family::Stable) c["alpha"] = cfg.alpha;
  c["tau"] = cfg.tau_adjust.value_or(0.5);
  c["replication"] = a.replication;
  c["seed"] = a.common.seed;

  std::ostringstream csv;
  csv << comment_line(c);
  write_panel_csv(csv, sim.panel);
  emit(csv.str(), a.common.out, out);
  if (!a.truth.empty()) {
    Json t;
    t["config"] = c;
    t["loadings"] = matrix_to_json(sim.L0);
    t["scores"] = matrix_to_json(sim.F0);
    t["h0"] = vector_to_json(sim.h0);
    t["shift"] = sim.shift;
    emit(dump(t), a.truth, out);
  }
  return kOk;
}

// ----------------------------------------------------------- select-r

struct SelectArgs {
  Common common;
  std::string input;
  int r_max = 8;
  double tau = 0.5;
  std::vector<std::string> methods{"rer", "er", "ic"};
  int starts = 5;
};

inline Selector parse_selector(const std::string& m) {
  if (m == "rer") return Selector::Rer;
  if (m == "er") return Selector::Er;
  return Selector::Ic;
}

inline int cmd_select(const SelectArgs& a, std::ostream& out) {
  const LabeledPanel data = read_panel_csv(a.input);
  SelectionConfig cfg;
  cfg.r_max = a.r_max;
  cfg.tau = a.tau;
  cfg.methods.clear();
  for (const auto& m : a.methods) cfg.methods.push_back(parse_selector(m));
  RipConfig rip;
  rip.n_starts = a.starts;
  rip.seed = a.common.seed;
  rip.threads = a.common.threads;
  const SelectionReport rep = select_r(data.panel, cfg, rip);

  Json j;
  j["config"] = {{"command", "select-r"}, {"input", a.input}, {"r_max", a.r_max}, {"tau", a.tau},
                 {"methods", a.methods},  {"starts", a.starts}, {"seed", a.common.seed}};
  Json res = Json::object();
  auto put = [&](const char* name, const std::optional<SelectionResult>& r) {
    if (r) res[name] = {{"r", r->r}, {"eigenvalues", vector_to_json(r->eigenvalues)}};
  };
  put("RER", rep.rer);
  put("ER", rep.er);
  put("IC", rep.ic);
  j["results"] = res;
  emit(dump(j), a.common.out, out);
  return kOk;
}

// ---------------------------------------------------------- benchmark

struct BenchmarkArgs {
  Common common;
  std::string scenario = "A1";
  std::string dims = "150x100";
  int reps = 50;
  double alpha = 1.5;
  std::vector<std::string> methods;
  std::vector<double> taus{0.5};
  std::vector<std::string> selectors;
  int starts = 5;
  int r_max = 8;
  std::string format = "table";
};

inline ScenarioRun benchmark_run(const BenchmarkArgs& a) {
  ScenarioRun run;
  run.scenario = parse_scenario(a.scenario);
  std::tie(run.p, run.T) = parse_dims(a.dims);
  run.reps = a.reps;
  run.seed = a.common.seed;
  run.alpha = a.alpha;
  run.n_starts = a.starts;
  run.r_max = a.r_max;
  run.threads = a.common.threads;
  const bool selection_scenario = a.scenario.front() == 'C';
  std::vector<std::string> methods = a.methods;
  std::vector<std::string> selectors = a.selectors;
  if (methods.empty() && selectors.empty()) {
    if (selection_scenario)
      selectors = {"rer", "er", "ic"};
    else
      methods = {"rip", "pca"};
  }
  run.estimators.clear();
  for (const auto& m : methods) {
    if (m == "pca") {
      run.estimators.push_back({Method::Pca, 0.5});
    } else {
      for (double tau : a.taus) run.estimators.push_back({Method::Rip, tau});
    }
  }
  for (const auto& s : selectors) run.selectors.push_back(parse_selector(s));
  return run;
}

inline Json benchmark_config(const ScenarioRun& run) {
  Json c;
  c["command"] = "benchmark";
  c["scenario"] = to_string(run.scenario);
  c["dims"] = std::to_string(run.p) + "x" + std::to_string(run.T);
  c["reps"] = run.reps;
  c["alpha"] = run.alpha;
  c["starts"] = run.n_starts;
  c["r_max"] = run.r_max;
  c["seed"] = run.seed;
  return c;
}

inline std::string benchmark_table(const MonteCarloReport& rep) {
  std::ostringstream os;
  os << comment_line(benchmark_config(rep.run));
  if (!rep.estimators.empty()) {
    os << pad("method", 16) << pad("MEE_CC", 18) << pad("AVE_FL", 18) << "AVE_FS\n";
    for (const auto& e : rep.estimators) {
      os << pad(e.estimator.label(), 16) << pad(fixed(e.mee_cc.median, 4) + "(" + fixed(e.mee_cc.iqr, 4) + ")", 18)
         << pad(fixed(e.ave_fl.mean, 4) + "(" + fixed(e.ave_fl.sd, 4) + ")", 18)
         << fixed(e.ave_fs.mean, 4) + "(" + fixed(e.ave_fs.sd, 4) + ")" << '\n';
    }
  }
  if (!rep.selectors.empty()) {
    os << pad("selector", 16) << "r_hat\n";
    for (const auto& s : rep.selectors)
      os << pad(to_string(s.selector), 16) << fixed(s.mean, 3) << "(" << s.under << "|" << s.over << ")\n";
  }
  return os.str();
}

inline std::string benchmark_csv(const MonteCarloReport& rep) {
  std::ostringstream os;
  os << comment_line(benchmark_config(rep.run));
  if (!rep.estimators.empty()) {
    os << "method,mee_cc_median,mee_cc_iqr,ave_fl_mean,ave_fl_sd,ave_fs_mean,ave_fs_sd\n";
    for (const auto& e : rep.estimators)
      os << e.estimator.label() << ',' << format_double(e.mee_cc.median) << ',' << format_double(e.mee_cc.iqr) << ','
         << format_double(e.ave_fl.mean) << ',' << format_double(e.ave_fl.sd) << ',' << format_double(e.ave_fs.mean)
         << ',' << format_double(e.ave_fs.sd) << '\n';
  }
  if (!rep.selectors.empty()) {
    os << "selector,mean,under,over\n";
    for (const auto& s : rep.selectors)
      os << to_string(s.selector) << ',' << format_double(s.mean) << ',' << s.under << ',' << s.over << '\n';
  }
  return os.str();
}

inline Json benchmark_json(const MonteCarloReport& rep) {
  Json j;
  j["config"] = benchmark_config(rep.run);
  Json est = Json::array();
  for (const auto& e : rep.estimators) {
    est.push_back({{"method", e.estimator.label()},
                   {"mee_cc", {{"median", e.mee_cc.median}, {"iqr", e.mee_cc.iqr}, {"raw", e.mee_cc_raw}}},
                   {"ave_fl", {{"mean", e.ave_fl.mean}, {"sd", e.ave_fl.sd}, {"raw", e.fl_raw}}},
                   {"ave_fs", {{"mean", e.ave_fs.mean}, {"sd", e.ave_fs.sd}, {"raw", e.fs_raw}}}});
  }
  j["estimators"] = est;
  Json sel = Json::array();
  for (const auto& s : rep.selectors)
    sel.push_back({{"selector", to_string(s.selector)},
                   {"mean", s.mean},
                   {"under", s.under},
                   {"over", s.over},
                   {"estimates", s.estimates}});
  j["selectors"] = sel;
  return j;
}

inline int cmd_benchmark(const BenchmarkArgs& a, std::ostream& out) {
  const MonteCarloReport rep = run_scenario(benchmark_run(a));
  std::string text;
  if (a.format == "json")
    text = dump(benchmark_json(rep));
  else if (a.format == "csv")
    text = benchmark_csv(rep);
  else
    text = benchmark_table(rep);
  emit(text, a.common.out, out);
  return kOk;
}

// ----------------------------------------------------------- backtest

struct BacktestArgs {
  Common common;
  std::string input;
  int window = 52;
  int refit_every = 1;
  std::string method = "rip";
  int r = 3;
  std::string rank_rule = "fixed";
  int r_max = 8;
  double tau = 0.5;
  int starts = 5;
  std::string threshold = "adaptive";
  std::string netvalue_csv;
};

inline int cmd_backtest(const BacktestArgs& a, std::ostream& out) {
  const LabeledPanel data = read_panel_csv(a.input);
  BacktestConfig cfg;
  cfg.window = a.window;
  cfg.refit_every = a.refit_every;
  cfg.method = parse_method(a.method);
  cfg.rank_rule = a.rank_rule == "rer" ? RankRule::Rer : a.rank_rule == "er" ? RankRule::Er : RankRule::Fixed;
  cfg.r = a.r;
  cfg.r_max = a.r_max;
  cfg.tau = a.tau;
  cfg.n_starts = a.starts;
  cfg.seed = a.common.seed;
  cfg.threads = a.common.threads;
  if (a.threshold != "adaptive") {
    cfg.threshold.kind = ThresholdRule::Kind::Fixed;
    try {
      cfg.threshold.value = parse_double(a.threshold);
    } catch (const Error&) {
      throw Error(ErrorKind::InvalidParameter, "threshold must be 'adaptive' or a number");
    }
  }
  const BacktestResult res = backtest(data.panel, cfg);

  Json c;
  c["command"] = "backtest";
  c["input"] = a.input;
  c["window"] = a.window;
  c["refit_every"] = a.refit_every;
  c["method"] = a.method;
  c["rank_rule"] = a.rank_rule;
  c["r"] = a.r;
  c["r_max"] = a.r_max;
  c["tau"] = a.tau;
  c["starts"] = a.starts;
  c["threshold"] = a.threshold;
  c["seed"] = a.common.seed;

  Json j;
  j["config"] = c;
  j["ids"] = data.ids;
  j["periods"] = res.periods;
  Json w = Json::array();
  for (const auto& v : res.weights) w.push_back(vector_to_json(v));
  j["weights"] = w;
  j["portfolio_returns"] = res.portfolio_returns;
  j["netvalue"] = res.net_value;
  j["r_hat"] = res.r_hat;
  j["r2_square"] = res.r2_square;
  j["r2_absolute"] = res.r2_absolute;
  j["degenerate_periods"] = res.degenerate_periods;
  j["degenerate"] = res.degenerate;
  emit(dump(j), a.common.out, out);

  if (!a.netvalue_csv.empty()) {
    std::ostringstream csv;
    csv << comment_line(c) << "step,period,netvalue\n";
    csv << "0,," << format_double(res.net_value.front()) << '\n';
    for (std::size_t k = 0; k < res.periods.size(); ++k)
      csv << (k + 1) << ',' << (res.periods[k] + 1) << ',' << format_double(res.net_value[k + 1]) << '\n';
    emit(csv.str(), a.netvalue_csv, out);
  }
  return kOk;
}

// --------------------------------------------------------------- main

/// Parses `args` (without the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust factor analysis of large panels", "rfa"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a factor model to a panel CSV");
  fit_cmd->add_option("input", fit.input, "Panel CSV")->required();
  fit_cmd->add_option("--method", fit.method)->check(CLI::IsMember({"rip", "pca"}))->capture_default_str();
  fit_cmd->add_option("--r", fit.r, "Number of factors")->check(CLI::PositiveNumber)->capture_default_str();
  fit_cmd->add_option("--tau", fit.tau, "Quantile level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  fit_cmd->add_option("--starts", fit.starts, "Random initializations")->check(CLI::PositiveNumber)->capture_default_str();
  fit_cmd->add_option("--max-iter", fit.max_iter)->check(CLI::PositiveNumber)->capture_default_str();
  fit_cmd->add_option("--tol", fit.tol, "Relative change that stops the iteration")->capture_default_str();
  add_common(fit_cmd, fit.common);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Draw one panel from a simulation scenario");
  sim_cmd->add_option("--scenario", sim.scenario, "A1..A3, B1..B3 (B = B3), C1..C4")->capture_default_str();
  sim_cmd->add_option("--dims", sim.dims, "PxT")->capture_default_str();
  sim_cmd->add_option("--alpha", sim.alpha, "Stable index")->capture_default_str();
  sim_cmd->add_option("--tau", sim.tau, "Shift errors so their tau-quantile is zero");
  sim_cmd->add_option("--replication", sim.replication)->capture_default_str();
  sim_cmd->add_option("--truth", sim.truth, "Write true loadings, scores and densities as JSON");
  add_common(sim_cmd, sim.common);

  SelectArgs sel;
  auto* sel_cmd = app.add_subcommand("select-r", "Estimate the number of factors");
  sel_cmd->add_option("input", sel.input, "Panel CSV")->required();
  sel_cmd->add_option("--r-max", sel.r_max)->check(CLI::Range(2, 1000))->capture_default_str();
  sel_cmd->add_option("--tau", sel.tau)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  sel_cmd->add_option("--methods", sel.methods)->check(CLI::IsMember({"rer", "er", "ic"}))->delimiter(',')
      ->capture_default_str();
  sel_cmd->add_option("--starts", sel.starts)->check(CLI::PositiveNumber)->capture_default_str();
  add_common(sel_cmd, sel.common);

  BenchmarkArgs bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "Monte Carlo comparison on a simulation scenario");
  bench_cmd->add_option("--scenario", bench.scenario)->capture_default_str();
  bench_cmd->add_option("--dims", bench.dims, "PxT")->capture_default_str();
  bench_cmd->add_option("--reps", bench.reps, "Replications")->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--alpha", bench.alpha)->capture_default_str();
  bench_cmd->add_option("--methods", bench.methods, "Estimators: rip,pca")
      ->check(CLI::IsMember({"rip", "pca"}))->delimiter(',');
  bench_cmd->add_option("--taus", bench.taus, "Quantile levels for RIP")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--selectors", bench.selectors, "Factor-number selectors: rer,er,ic")
      ->check(CLI::IsMember({"rer", "er", "ic"}))->delimiter(',');
  bench_cmd->add_option("--starts", bench.starts)->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--r-max", bench.r_max)->check(CLI::Range(2, 1000))->capture_default_str();
  bench_cmd->add_option("--format", bench.format)->check(CLI::IsMember({"table", "json", "csv"}))->capture_default_str();
  add_common(bench_cmd, bench.common);

  BacktestArgs bt;
  auto* bt_cmd = app.add_subcommand("backtest", "Rolling minimum-variance portfolio backtest");
  bt_cmd->add_option("input", bt.input, "Returns panel CSV")->required();
  bt_cmd->add_option("--window", bt.window)->check(CLI::PositiveNumber)->capture_default_str();
  bt_cmd->add_option("--refit-every", bt.refit_every)->check(CLI::PositiveNumber)->capture_default_str();
  bt_cmd->add_option("--method", bt.method)->check(CLI::IsMember({"rip", "pca"}))->capture_default_str();
  bt_cmd->add_option("--r", bt.r)->check(CLI::PositiveNumber)->capture_default_str();
  bt_cmd->add_option("--rank-rule", bt.rank_rule)->check(CLI::IsMember({"fixed", "rer", "er"}))->capture_default_str();
  bt_cmd->add_option("--r-max", bt.r_max)->check(CLI::Range(2, 1000))->capture_default_str();
  bt_cmd->add_option("--tau", bt.tau)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  bt_cmd->add_option("--starts", bt.starts)->check(CLI::PositiveNumber)->capture_default_str();
  bt_cmd->add_option("--threshold", bt.threshold, "'adaptive' or a fixed absolute threshold")->capture_default_str();
  bt_cmd->add_option("--netvalue-csv", bt.netvalue_csv, "Plot-ready net-value curve");
  add_common(bt_cmd, bt.common);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kBadArgs;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit, out);
    if (*sim_cmd) return cmd_simulate(sim, out);
    if (*sel_cmd) return cmd_select(sel, out);
    if (*bench_cmd) return cmd_benchmark(bench, out);
    if (*bt_cmd) return cmd_backtest(bt, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  }
  return kBadArgs;
}

}  // namespace rfa::cli
