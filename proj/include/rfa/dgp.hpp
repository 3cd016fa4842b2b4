#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>

#include "rfa/distributions.hpp"
#include "rfa/error.hpp"
#include "rfa/panel.hpp"
#include "rfa/random.hpp"

namespace rfa {

/// Joint law of (f_t, w_t). JointT draws both from one multivariate t (shared
/// mixing per period); IidT and Stable pair Gaussian factors with i.i.d. errors.
enum class Family { Gaussian, JointT, IidT, Stable };

constexpr const char* to_string(Family f) noexcept {
  switch (f) {
    case Family::Gaussian: return "gaussian";
    case Family::JointT: return "joint-t";
    case Family::IidT: return "iid-t";
    case Family::Stable: return "stable";
  }
  return "?";
}

struct DGPConfig {
  Eigen::Index p = 100;
  Eigen::Index T = 100;
  Eigen::Index r = 3;
  double theta = 1.0;
  double rho = 0.0;
  double beta_cs = 0.0;
  int J = 0;
  Family family = Family::Gaussian;
  double nu = 3.0;
  double alpha = 1.5;
  bool exclude_self = false;  // drop l = i from the band sum
  std::optional<double> tau_adjust;
  std::uint64_t seed = 0;
  std::uint64_t replication = 0;
  int burn_in = 200;

  bool iid_errors() const { return rho == 0.0 && beta_cs == 0.0 && J == 0; }

  void validate() const {
    if (p < 1 || T < 1 || r < 1) throw Error(ErrorKind::InvalidParameter, "dimensions must be positive");
    if (!(theta >= 0.0)) throw Error(ErrorKind::InvalidParameter, "theta must be nonnegative");
    if (!(rho > -1.0 && rho < 1.0)) throw Error(ErrorKind::InvalidParameter, "rho must lie in (-1,1)");
    if (J < 0) throw Error(ErrorKind::InvalidParameter, "J must be nonnegative");
    if (!(1.0 + 2.0 * J * beta_cs * beta_cs > 0.0)) throw Error(ErrorKind::InvalidParameter, "1 + 2 J beta^2 must be positive");
    if ((family == Family::JointT || family == Family::IidT) && !(nu > 0.0))
      throw Error(ErrorKind::InvalidParameter, "nu must be positive");
    if (family == Family::Stable && !(alpha > 0.0 && alpha <= 2.0))
      throw Error(ErrorKind::InvalidParameter, "alpha must lie in (0,2]");
    if (burn_in < 0) throw Error(ErrorKind::InvalidParameter, "burn_in must be nonnegative");
    if (tau_adjust) {
      if (!(*tau_adjust > 0.0 && *tau_adjust < 1.0))
        throw Error(ErrorKind::InvalidParameter, "tau_adjust must lie in (0,1)");
      if (!iid_errors())
        throw Error(ErrorKind::InvalidParameter, "tau_adjust needs i.i.d. errors (rho = beta = J = 0)");
    }
  }
};

struct SimulatedPanel {
  PanelData panel;
  Matrix L0;       // p x r
  Matrix F0;       // r x T
  Matrix E0;       // p x T recursion state e_it
  Matrix epsilon;  // p x T idiosyncratic part of the panel, sqrt(theta) u - shift
  Vector h0;       // density of epsilon_i at 0; NaN where no closed form exists
  double shift = 0.0;
  DGPConfig config;
};

namespace detail {

/// Quantile and density of a single w draw for i.i.d. designs.
inline double w_quantile(const DGPConfig& cfg, double q) {
  switch (cfg.family) {
    case Family::Gaussian: return normal_quantile(q);
    case Family::JointT:
    case Family::IidT: return student_quantile(q, cfg.nu);
    case Family::Stable: return symmetric_stable_quantile(q, cfg.alpha);
  }
  return 0.0;
}

inline double w_pdf(const DGPConfig& cfg, double x) {
  switch (cfg.family) {
    case Family::Gaussian: return normal_pdf(x);
    case Family::JointT:
    case Family::IidT: return student_pdf(x, cfg.nu);
    case Family::Stable: return symmetric_stable_pdf(x, cfg.alpha);
  }
  return 0.0;
}

/// e-innovation (1 - beta) w_i + beta * sum over the band, via prefix sums.
inline void band_mix(const DGPConfig& cfg, const Vector& w, Vector& out) {
  const Eigen::Index p = w.size();
  Vector prefix(p + 1);
  prefix(0) = 0.0;
  for (Eigen::Index i = 0; i < p; ++i) prefix(i + 1) = prefix(i) + w(i);
  for (Eigen::Index i = 0; i < p; ++i) {
    const Eigen::Index lo = std::max<Eigen::Index>(i - cfg.J, 0);
    const Eigen::Index hi = std::min<Eigen::Index>(i + cfg.J, p - 1);
    double band = prefix(hi + 1) - prefix(lo);
    if (cfg.exclude_self) band -= w(i);
    out(i) = (1.0 - cfg.beta_cs) * w(i) + cfg.beta_cs * band;
  }
}

inline Eigen::Index band_neighbours(const DGPConfig& cfg, Eigen::Index i) {
  const Eigen::Index lo = std::max<Eigen::Index>(i - cfg.J, 0);
  const Eigen::Index hi = std::min<Eigen::Index>(i + cfg.J, cfg.p - 1);
  return hi - lo;
}

}  // namespace detail

/// Density at zero of every epsilon_i (after the optional quantile shift).
/// Closed forms exist for i.i.d. errors and, with band mixing or AR terms, for
/// Gaussian and stable innovations (both closed under linear combinations).
inline Vector density_at_zero(const DGPConfig& cfg, double Q) {
  const Eigen::Index p = cfg.p;
  Vector h(p);
  if (cfg.theta == 0.0) return Vector::Constant(p, std::numeric_limits<double>::infinity());
  const double st = std::sqrt(cfg.theta);
  if (cfg.iid_errors()) return Vector::Constant(p, detail::w_pdf(cfg, Q) / st);
  const double c = std::sqrt((1.0 - cfg.rho * cfg.rho) / (1.0 + 2.0 * cfg.J * cfg.beta_cs * cfg.beta_cs));
  const double self = cfg.exclude_self ? 1.0 - cfg.beta_cs : 1.0;
  for (Eigen::Index i = 0; i < p; ++i) {
    const double n = static_cast<double>(detail::band_neighbours(cfg, i));
    if (cfg.family == Family::Gaussian) {
      const double var = c * c * (self * self + n * cfg.beta_cs * cfg.beta_cs) / (1.0 - cfg.rho * cfg.rho);
      h(i) = normal_pdf(0.0) / (st * std::sqrt(var));
    } else if (cfg.family == Family::Stable) {
      const double a = cfg.alpha;
      const double mass = std::pow(std::abs(self), a) + n * std::pow(std::abs(cfg.beta_cs), a);
      const double gamma = c * std::pow(mass / (1.0 - std::pow(std::abs(cfg.rho), a)), 1.0 / a);
      h(i) = symmetric_stable_pdf0(a, gamma * st);
    } else {
      h(i) = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return h;
}

/// y_it = l_i' f_t + sqrt(theta) u_it - shift, u = c e, with
/// e_t = rho e_{t-1} + (1 - beta) w_t + beta * (band sum of w_t).
inline SimulatedPanel gen_dgp(const DGPConfig& cfg) {
  cfg.validate();
  const Eigen::Index p = cfg.p;
  const Eigen::Index T = cfg.T;
  const Eigen::Index r = cfg.r;
  Rng rng = make_rng(cfg.seed, "dgp", cfg.replication);
  std::normal_distribution<double> norm;
  std::chi_squared_distribution<double> chi(cfg.family == Family::JointT ? cfg.nu : 1.0);
  std::student_t_distribution<double> student(cfg.family == Family::IidT ? cfg.nu : 1.0);

  Matrix L0(p, r);
  for (Eigen::Index j = 0; j < r; ++j)
    for (Eigen::Index i = 0; i < p; ++i) L0(i, j) = norm(rng);

  Vector f(r);
  Vector w(p);
  auto draw = [&](bool with_factors) {
    switch (cfg.family) {
      case Family::Gaussian:
        if (with_factors)
          for (Eigen::Index j = 0; j < r; ++j) f(j) = norm(rng);
        for (Eigen::Index i = 0; i < p; ++i) w(i) = norm(rng);
        break;
      case Family::JointT: {
        const double s = 1.0 / std::sqrt(chi(rng) / cfg.nu);
        if (with_factors)
          for (Eigen::Index j = 0; j < r; ++j) f(j) = norm(rng) * s;
        for (Eigen::Index i = 0; i < p; ++i) w(i) = norm(rng) * s;
        break;
      }
      case Family::IidT:
        if (with_factors)
          for (Eigen::Index j = 0; j < r; ++j) f(j) = norm(rng);
        for (Eigen::Index i = 0; i < p; ++i) w(i) = student(rng);
        break;
      case Family::Stable:
        if (with_factors)
          for (Eigen::Index j = 0; j < r; ++j) f(j) = norm(rng);
        for (Eigen::Index i = 0; i < p; ++i) w(i) = draw_stable(cfg.alpha, 0.0, 1.0, 0.0, rng);
        break;
    }
  };

  Vector e = Vector::Zero(p);
  Vector mixed(p);
  if (cfg.rho != 0.0) {
    if (cfg.family == Family::Gaussian) {
      // Stationary start: e = (band mix of z) / sqrt(1 - rho^2).
      for (Eigen::Index i = 0; i < p; ++i) w(i) = norm(rng);
      detail::band_mix(cfg, w, mixed);
      e = mixed / std::sqrt(1.0 - cfg.rho * cfg.rho);
    }
    for (int b = 0; b < cfg.burn_in; ++b) {
      draw(false);
      detail::band_mix(cfg, w, mixed);
      e = cfg.rho * e + mixed;
    }
  }

  SimulatedPanel sim{PanelData(Matrix::Zero(p, T)), std::move(L0), Matrix(r, T), Matrix(p, T), Matrix(p, T),
                     Vector(), 0.0, cfg};
  for (Eigen::Index t = 0; t < T; ++t) {
    draw(true);
    detail::band_mix(cfg, w, mixed);
    e = cfg.rho * e + mixed;
    sim.F0.col(t) = f;
    sim.E0.col(t) = e;
  }

  const double c = std::sqrt((1.0 - cfg.rho * cfg.rho) / (1.0 + 2.0 * cfg.J * cfg.beta_cs * cfg.beta_cs));
  const double st = std::sqrt(cfg.theta);
  double Q = 0.0;
  if (cfg.tau_adjust) Q = detail::w_quantile(cfg, *cfg.tau_adjust);
  sim.shift = st * Q;
  sim.epsilon = (st * c) * sim.E0;
  sim.epsilon.array() -= sim.shift;
  sim.h0 = density_at_zero(cfg, Q);
  sim.panel = PanelData(Matrix(sim.L0 * sim.F0 + sim.epsilon));
  return sim;
}

}  // namespace rfa
