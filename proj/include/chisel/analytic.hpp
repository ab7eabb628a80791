#pragma once

// Closed-form results for the quadratic imaginary potential V = s xi^2 and the
// power-law scalings. Everything here is a pure function and doubles as the
// oracle for the numerical modules.

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

#include "chisel/core.hpp"

namespace chisel::analytic {

/// Dimensionless Gaussian-solution constants.
///
/// alpha = sqrt(s) e^{-i pi/4} (so that M omega0 x^2 = sqrt(s) xi^2) and
/// beta = 2 sqrt(s) e^{i pi/4} (beta / omega_r).
struct GaussianSolutionParams {
  double s = 1.0;

  explicit GaussianSolutionParams(double s_) : s(s_) {
    if (!(s > 0.0)) throw ParameterError("s must be positive");
  }
  explicit GaussianSolutionParams(const DimensionlessParams& d) : GaussianSolutionParams(d.s) {}

  cplx alpha() const { return std::polar(std::sqrt(s), -pi / 4); }
  cplx beta() const { return std::polar(2.0 * std::sqrt(s), pi / 4); }
  double omega0_bar() const { return 2.0 * std::sqrt(s); }
};

namespace detail {

// log cosh(z) on the branch continuous from z = 0, valid for Re z >= 0:
// cosh z = e^z (1 + e^{-2z}) / 2 and |e^{-2z}| <= 1 keeps log1p off its cut.
inline cplx log_cosh(cplx z) { return z + std::log(1.0 + std::exp(-2.0 * z)) - std::numbers::ln2; }

inline cplx tanh_stable(cplx z) {
  const cplx w = std::exp(-2.0 * z);
  return (1.0 - w) / (1.0 + w);
}

inline void require_nonnegative_tau(double tau) {
  if (!(tau >= 0.0)) throw ParameterError("tau must be >= 0");
}

}  // namespace detail

/// pi^{-1/2} cosh(beta tau)^{-1/2} exp(-alpha xi^2 tanh(beta tau) / 2).
///
/// The square root follows the branch continuous in tau from +1 at tau = 0,
/// which differs from the principal root once omega0_bar tau passes ~4.4.
inline cplx gaussian_solution(double xi, double tau, const GaussianSolutionParams& p) {
  detail::require_nonnegative_tau(tau);
  const cplx z = p.beta() * tau;
  const cplx lc = detail::log_cosh(z);
  const cplx th = detail::tanh_stable(z);
  return std::exp(-0.5 * lc - 0.5 * p.alpha() * xi * xi * th) / std::sqrt(pi);
}

/// delta_xi(tau) = [Re{alpha tanh(beta tau)}]^{-1/2}; +infinity at tau = 0.
inline double packet_width(double tau, const GaussianSolutionParams& p) {
  detail::require_nonnegative_tau(tau);
  if (tau == 0.0) return std::numeric_limits<double>::infinity();
  const double re = std::real(p.alpha() * detail::tanh_stable(p.beta() * tau));
  return 1.0 / std::sqrt(re);
}

struct StationaryWidth {
  double exact;               // tau -> infinity limit of packet_width, 2^{1/4} s^{-1/4}
  double quoted_combination;  // (omega_r Gamma / Omega0^2)^{1/4} = (2 s)^{-1/4}
};

inline StationaryWidth stationary_width(const GaussianSolutionParams& p) {
  return {exact_stationary_width(p.s), std::pow(2.0 * p.s, -0.25)};
}

/// Density decay rate Gamma0 / omega_r = omega0_bar / sqrt(2) = sqrt(2 s).
inline double decay_rate(const GaussianSolutionParams& p) { return std::sqrt(2.0 * p.s); }

struct QuadraticPhase {
  double magnitude;  // sqrt(s) / sqrt(8)
  int sign;          // arg(phi) = sign * magnitude * xi^2
};

/// Quadratic phase of exp(-alpha xi^2 / 2): -Im(alpha)/2 = +sqrt(s)/sqrt(8).
inline QuadraticPhase quadratic_phase_coefficient(const GaussianSolutionParams& p) {
  return {std::sqrt(p.s) / std::sqrt(8.0), -std::imag(p.alpha()) > 0 ? +1 : -1};
}

/// phi2 = -2 (omega_r Gamma / Omega0^2)^{1/2} = -sqrt(2 / s).
inline double phi2(const GaussianSolutionParams& p) { return -std::sqrt(2.0 / p.s); }

inline double order_phase(int n, const GaussianSolutionParams& p) {
  return phi2(p) * static_cast<double>(n) * static_cast<double>(n);
}

/// Far-field amplitudes a_n = exp(-(1+i)|phi2| n^2) for n = 0..n_max, a_0 = 1.
inline std::vector<cplx> asymptotic_order_amplitudes(int n_max, const GaussianSolutionParams& p) {
  if (n_max < 0) throw ParameterError("n_max must be >= 0");
  const double a = std::abs(phi2(p));
  std::vector<cplx> out(static_cast<std::size_t>(n_max) + 1);
  for (int n = 0; n <= n_max; ++n) out[static_cast<std::size_t>(n)] = std::exp(-cplx(1.0, 1.0) * a * double(n * n));
  return out;
}

/// Characteristic scales of the U_{2n} potential with unit prefactors.
///
/// `t0` is in units of 1/Gamma; `tau0` = omega_r_tilde t0; `q_delta_x0` is
/// (Gamma / (Omega0^2 t0))^{1/2n}. Only the exponents are meaningful.
struct ScalingPrediction {
  int n;
  double t0;
  double tau0;
  double q_delta_x0;
  double t0_exponent;   // d ln t0 / d ln Omega0
  double dx0_exponent;  // d ln q dx0 / d ln Omega0
};

inline ScalingPrediction powerlaw_scales(int n, double rabi_over_gamma, double recoil_tilde_over_gamma) {
  if (n < 1) throw ParameterError("power-law index n must be >= 1 (n = 0 has no localization)");
  if (!(rabi_over_gamma > 0.0) || !(recoil_tilde_over_gamma > 0.0)) {
    throw ParameterError("Omega0/Gamma and omega_r~/Gamma must be positive");
  }
  const double np1 = n + 1.0;
  const double t0 = std::pow(rabi_over_gamma, -2.0 / np1) * std::pow(std::pow(recoil_tilde_over_gamma, -n), 1.0 / np1);
  const double dx = std::pow(1.0 / (rabi_over_gamma * rabi_over_gamma * t0), 1.0 / (2.0 * n));
  return {n, t0, recoil_tilde_over_gamma * t0, dx, -2.0 / np1, -1.0 / np1};
}

inline cplx product_solution_2d(double xi_x, double xi_y, double tau, const GaussianSolutionParams& px,
                                const GaussianSolutionParams& py) {
  return gaussian_solution(xi_x, tau, px) * gaussian_solution(xi_y, tau, py);
}

}  // namespace chisel::analytic
