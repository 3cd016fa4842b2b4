#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "rfa/baselines.hpp"
#include "rfa/rip.hpp"

namespace rfa {

enum class Selector { Rer, Er, Ic };

constexpr const char* to_string(Selector s) noexcept {
  switch (s) {
    case Selector::Rer: return "RER";
    case Selector::Er: return "ER";
    case Selector::Ic: return "IC";
  }
  return "?";
}

struct SelectionConfig {
  int r_max = 8;
  double tau = 0.5;
  std::vector<Selector> methods{Selector::Rer, Selector::Er, Selector::Ic};

  void validate(Eigen::Index p, Eigen::Index T) const {
    if (r_max < 2) throw Error(ErrorKind::InvalidParameter, "r_max must be at least 2");
    if (r_max >= std::min(p, T)) throw Error(ErrorKind::InvalidParameter, "r_max must be below min(p, T)");
    if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorKind::InvalidParameter, "tau must lie in (0,1)");
  }
};

struct SelectionResult {
  int r = 0;
  Vector eigenvalues;
};

struct SelectionReport {
  std::optional<SelectionResult> rer;
  std::optional<SelectionResult> er;
  std::optional<SelectionResult> ic;
};

// Relative floor: eigenvalues below kEigenFloor times the leading one count as
// zero, which keeps the selectors scale invariant.
inline constexpr double kEigenFloor = 1e-12;

/// argmax over 1 <= j <= r_max - 1 of lambda_j / lambda_{j+1} (1-based),
/// eigenvalues clamped below at kEigenFloor * lambda_1; ties go to the smallest j.
inline int ratio_argmax(const Vector& eig, int r_max) {
  if (eig.size() < r_max) throw Error(ErrorKind::InvalidParameter, "need r_max eigenvalues");
  const double floor = kEigenFloor * eig(0);
  if (!(floor > 0.0)) return 1;
  int best = 1;
  double best_ratio = -1.0;
  for (int j = 1; j < r_max; ++j) {
    const double ratio = std::max(eig(j - 1), floor) / std::max(eig(j), floor);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = j;
    }
  }
  return best;
}

inline SelectionResult select_r_rer(const PanelData& Y, const SelectionConfig& cfg, RipConfig rip_cfg) {
  cfg.validate(Y.p(), Y.T());
  rip_cfg.tau = cfg.tau;
  // A panel of rank below r_max makes every r_max chain degenerate; the fit
  // then drops to the largest feasible rank and the missing eigenvalues are 0.
  for (int k = cfg.r_max;; --k) {
    rip_cfg.r = k;
    FactorFit fit;
    try {
      fit = fit_rip(Y, rip_cfg);
    } catch (const Error& e) {
      if (k == 1 || !is_numerical(e.kind())) throw;
      continue;
    }
    const Matrix g = fit.loadings.transpose() * fit.loadings / static_cast<double>(Y.p());
    SelectionResult out;
    out.eigenvalues = Vector::Zero(cfg.r_max);
    out.eigenvalues.head(k) = detail::sorted_eigen(g).first;
    out.r = ratio_argmax(out.eigenvalues, cfg.r_max);
    return out;
  }
}

inline SelectionResult select_r_er(const PanelData& Y, const SelectionConfig& cfg) {
  cfg.validate(Y.p(), Y.T());
  SelectionResult out;
  out.eigenvalues = pca_eigenvalues(Y).head(cfg.r_max);
  out.r = ratio_argmax(out.eigenvalues, cfg.r_max);
  return out;
}

/// IC_p2: minimizes log V(k) + k g(p, T) over 0 <= k <= r_max, with V(k) the
/// mean squared residual of the k-factor principal-component fit.
inline SelectionResult select_r_ic(const PanelData& Y, const SelectionConfig& cfg) {
  cfg.validate(Y.p(), Y.T());
  const Vector eig = pca_eigenvalues(Y);
  const double p = static_cast<double>(Y.p());
  const double T = static_cast<double>(Y.T());
  const double g = (p + T) / (p * T) * std::log(p * T / (p + T));
  SelectionResult out;
  out.eigenvalues = eig.head(cfg.r_max + 1);
  const double floor = std::max(kEigenFloor * eig.sum(), std::numeric_limits<double>::min());
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= cfg.r_max; ++k) {
    const double v = eig.tail(eig.size() - k).sum();
    const double crit = std::log(std::max(v, floor)) + k * g;
    if (crit < best) {
      best = crit;
      out.r = k;
    }
  }
  return out;
}

inline SelectionReport select_r(const PanelData& Y, const SelectionConfig& cfg, const RipConfig& rip_cfg) {
  SelectionReport rep;
  for (Selector s : cfg.methods) {
    switch (s) {
      case Selector::Rer: rep.rer = select_r_rer(Y, cfg, rip_cfg); break;
      case Selector::Er: rep.er = select_r_er(Y, cfg); break;
      case Selector::Ic: rep.ic = select_r_ic(Y, cfg); break;
    }
  }
  return rep;
}

}  // namespace rfa
