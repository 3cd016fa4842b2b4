#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rfa/baselines.hpp"
#include "rfa/dgp.hpp"
#include "rfa/factor_number.hpp"
#include "rfa/metrics.hpp"
#include "rfa/parallel.hpp"
#include "rfa/rip.hpp"

namespace rfa {

enum class Scenario { A1, A2, A3, B1, B2, B3, C1, C2, C3, C4 };

inline std::string to_string(Scenario s) {
  static const char* names[] = {"A1", "A2", "A3", "B1", "B2", "B3", "C1", "C2", "C3", "C4"};
  return names[static_cast<int>(s)];
}

/// Accepts A1..A3, B1..B3, C1..C4; plain "B" means the stable-error case B3.
inline Scenario parse_scenario(const std::string& name) {
  static const std::map<std::string, Scenario> table{
      {"A1", Scenario::A1}, {"A2", Scenario::A2}, {"A3", Scenario::A3}, {"B", Scenario::B3},
      {"B1", Scenario::B1}, {"B2", Scenario::B2}, {"B3", Scenario::B3}, {"C1", Scenario::C1},
      {"C2", Scenario::C2}, {"C3", Scenario::C3}, {"C4", Scenario::C4}};
  const auto it = table.find(name);
  if (it == table.end()) throw Error(ErrorKind::InvalidParameter, "unknown scenario '" + name + "'");
  return it->second;
}

inline DGPConfig scenario_config(Scenario s, Eigen::Index p, Eigen::Index T, double alpha, std::uint64_t seed) {
  DGPConfig cfg;
  cfg.p = p;
  cfg.T = T;
  cfg.r = 3;
  cfg.seed = seed;
  cfg.alpha = alpha;
  cfg.nu = 3.0;
  switch (s) {
    case Scenario::B1:
    case Scenario::B2:
    case Scenario::B3:
      cfg.theta = 0.5;
      cfg.rho = 0.2;
      cfg.beta_cs = 0.2;
      cfg.J = 3;
      break;
    default: break;
  }
  switch (s) {
    case Scenario::A1:
    case Scenario::B1:
    case Scenario::C1: cfg.family = Family::Gaussian; break;
    case Scenario::A2:
    case Scenario::B2:
    case Scenario::C2: cfg.family = Family::JointT; break;
    case Scenario::C3:
      cfg.family = Family::IidT;
      cfg.nu = 2.0;
      break;
    case Scenario::A3:
    case Scenario::B3:
    case Scenario::C4: cfg.family = Family::Stable; break;
  }
  return cfg;
}

enum class Method { Rip, Pca };

struct Estimator {
  Method method = Method::Rip;
  double tau = 0.5;

  std::string label() const {
    if (method == Method::Pca) return "PCA";
    std::ostringstream os;
    os << "RIP(tau=" << tau << ")";
    return os.str();
  }
};

struct ScenarioRun {
  Scenario scenario = Scenario::A1;
  Eigen::Index p = 150;
  Eigen::Index T = 100;
  int reps = 50;
  std::uint64_t seed = 0;
  double alpha = 1.5;
  std::vector<Estimator> estimators{{Method::Rip, 0.5}, {Method::Pca, 0.5}};
  std::vector<Selector> selectors;
  int r_max = 8;
  int n_starts = 5;
  int threads = 1;
};

struct EstimatorReport {
  Estimator estimator;
  Summary mee_cc;
  Summary ave_fl;
  Summary ave_fs;
  std::vector<double> mee_cc_raw;
  std::vector<double> fl_raw;
  std::vector<double> fs_raw;
};

struct SelectorReport {
  Selector selector = Selector::Rer;
  double mean = 0.0;
  int under = 0;
  int over = 0;
  std::vector<int> estimates;
};

struct MonteCarloReport {
  ScenarioRun run;
  std::vector<EstimatorReport> estimators;
  std::vector<SelectorReport> selectors;
};

inline RipConfig replication_rip_config(const ScenarioRun& run, std::uint64_t rep, int r, double tau) {
  RipConfig cfg;
  cfg.r = r;
  cfg.tau = tau;
  cfg.n_starts = run.n_starts;
  cfg.seed = stream_seed(run.seed, "init", rep);
  cfg.threads = 1;
  return cfg;
}

/// Monte Carlo replications of one scenario. Replication m draws its panel
/// from the "dgp" stream with index m, so results do not depend on threads.
inline MonteCarloReport run_scenario(const ScenarioRun& run) {
  if (run.reps < 1) throw Error(ErrorKind::InvalidParameter, "reps must be at least 1");
  const std::size_t M = static_cast<std::size_t>(run.reps);
  const std::size_t ne = run.estimators.size();
  const std::size_t ns = run.selectors.size();
  std::vector<std::vector<double>> mee(ne, std::vector<double>(M));
  std::vector<std::vector<double>> fl(ne, std::vector<double>(M));
  std::vector<std::vector<double>> fs(ne, std::vector<double>(M));
  std::vector<std::vector<int>> sel(ns, std::vector<int>(M));

  parallel_for(M, run.threads, [&](std::size_t m) {
    DGPConfig cfg = scenario_config(run.scenario, run.p, run.T, run.alpha, run.seed);
    cfg.replication = m;
    std::map<double, SimulatedPanel> panels;
    auto panel_for = [&](double tau) -> const SimulatedPanel& {
      auto it = panels.find(tau);
      if (it != panels.end()) return it->second;
      DGPConfig c = cfg;
      if (tau != 0.5) c.tau_adjust = tau;
      return panels.emplace(tau, gen_dgp(c)).first->second;
    };
    for (std::size_t k = 0; k < ne; ++k) {
      const Estimator& est = run.estimators[k];
      const SimulatedPanel& sim = panel_for(est.method == Method::Pca ? 0.5 : est.tau);
      const FactorFit fit = est.method == Method::Pca
                                ? fit_pca(sim.panel, cfg.r)
                                : fit_rip(sim.panel, replication_rip_config(run, m, static_cast<int>(cfg.r), est.tau));
      mee[k][m] = mee_cc_single(fit, sim.L0, sim.F0);
      fl[k][m] = loading_distance(fit, sim.L0);
      fs[k][m] = score_distance(fit, sim.F0);
    }
    if (ns > 0) {
      const SimulatedPanel& sim = panel_for(0.5);
      SelectionConfig scfg;
      scfg.r_max = run.r_max;
      scfg.methods = run.selectors;
      const SelectionReport rep =
          select_r(sim.panel, scfg, replication_rip_config(run, m, run.r_max, 0.5));
      for (std::size_t k = 0; k < ns; ++k) {
        switch (run.selectors[k]) {
          case Selector::Rer: sel[k][m] = rep.rer->r; break;
          case Selector::Er: sel[k][m] = rep.er->r; break;
          case Selector::Ic: sel[k][m] = rep.ic->r; break;
        }
      }
    }
  });

  MonteCarloReport out;
  out.run = run;
  for (std::size_t k = 0; k < ne; ++k) {
    EstimatorReport er;
    er.estimator = run.estimators[k];
    er.mee_cc = summarize(mee[k]);
    er.ave_fl = summarize(fl[k]);
    er.ave_fs = summarize(fs[k]);
    er.mee_cc_raw = std::move(mee[k]);
    er.fl_raw = std::move(fl[k]);
    er.fs_raw = std::move(fs[k]);
    out.estimators.push_back(std::move(er));
  }
  const int r_true = 3;
  for (std::size_t k = 0; k < ns; ++k) {
    SelectorReport sr;
    sr.selector = run.selectors[k];
    double sum = 0.0;
    for (int v : sel[k]) {
      sum += v;
      if (v < r_true) ++sr.under;
      if (v > r_true) ++sr.over;
    }
    sr.mean = sum / static_cast<double>(M);
    sr.estimates = std::move(sel[k]);
    out.selectors.push_back(std::move(sr));
  }
  return out;
}

}  // namespace rfa
