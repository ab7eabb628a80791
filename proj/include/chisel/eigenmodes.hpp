#pragma once

// "Ground" modes of H = -d_xi^2 - i V(xi): the slowest-decaying eigenvector,
// obtained by renormalized long-time propagation, plus log-log scaling fits.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chisel/core.hpp"
#include "chisel/propagator.hpp"

namespace chisel {

struct EigenMode {
  Grid grid;
  std::vector<cplx> mode;  // unit discrete norm, real and positive at its peak
  cplx eigenvalue;              // symmetric Rayleigh quotient psi^T H psi / psi^T psi
  cplx propagator_eigenvalue;   // i log(lambda) / dtau from the last step ratio
  double residual = 0.0;
  double converged_tau = 0.0;
};

struct GroundModeOptions {
  double tol = 1e-10;            // allowed overlap change per unit tau
  double dtau = 1e-4;
  double check_interval = 0.05;  // tau between convergence checks
  double max_tau = 200.0;
  std::optional<std::vector<cplx>> initial;  // defaults to the uniform state
  int polish_iterations = 2;     // dense inverse-iteration sweeps with the exact H
  std::size_t polish_max_size = 2048;
};

/// Applies H = -d_xi^2 - i V using the spectral second derivative.
inline std::vector<cplx> apply_hamiltonian(std::span<const cplx> psi, std::span<const double> V, const Grid& g) {
  if (psi.size() != g.size() || V.size() != g.size()) throw ShapeError("hamiltonian operand does not match the grid");
  std::vector<cplx> k(psi.begin(), psi.end());
  Spectral fft(g.size());
  fft.forward_inplace(k);
  for (std::size_t m = 0; m < k.size(); ++m) k[m] *= g.kappa(m) * g.kappa(m);
  fft.inverse_inplace(k);
  for (std::size_t j = 0; j < k.size(); ++j) k[j] -= I * V[j] * psi[j];
  return k;
}

/// ||(H - E) psi|| / ||psi|| with the spectral second derivative.
inline double eigenvalue_residual(std::span<const cplx> mode, cplx E, std::span<const double> V, const Grid& g) {
  const auto h = apply_hamiltonian(mode, V, g);
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < h.size(); ++j) {
    num += std::norm(h[j] - E * mode[j]);
    den += std::norm(mode[j]);
  }
  if (!(den > 0.0)) throw DataError("zero mode");
  return std::sqrt(num / den);
}

/// Dense matrix of H = -d_xi^2 - i V with the spectral second derivative.
inline Eigen::MatrixXcd dense_hamiltonian(std::span<const double> V, const Grid& g) {
  if (V.size() != g.size()) throw ShapeError("potential length does not match the grid");
  const std::size_t n = g.size();
  std::vector<cplx> col(n);
  for (std::size_t m = 0; m < n; ++m) col[m] = g.kappa(m) * g.kappa(m);
  Spectral fft(n);
  fft.inverse_inplace(col);
  Eigen::MatrixXcd H(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = col[(j + n - k) % n];
    H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) -= I * V[j];
  }
  return H;
}

namespace detail {

inline void normalize_mode(std::vector<cplx>& psi, double dxi) {
  const double n = discrete_norm(psi, dxi);
  std::size_t peak = 0;
  for (std::size_t j = 1; j < psi.size(); ++j) {
    if (std::norm(psi[j]) > std::norm(psi[peak])) peak = j;
  }
  const cplx phase = std::abs(psi[peak]) > 0.0 ? std::conj(psi[peak]) / std::abs(psi[peak]) : cplx{1.0, 0.0};
  const double scale = 1.0 / std::sqrt(n);
  for (auto& z : psi) z *= scale * phase;
}

}  // namespace detail

/// Slowest-decaying eigenmode by power iteration on the propagator.
///
/// Converged when 1 - |<psi(tau)|psi(tau + check_interval)>| per unit tau drops
/// below tol. The reported eigenvalue is the (bilinear) Rayleigh quotient with
/// the exact discrete H, which is stationary for complex-symmetric H and removes
/// most of the splitting error left in the propagated vector.
inline EigenMode ground_mode(std::span<const double> V, const Grid& g, const GroundModeOptions& opt = {}) {
  if (V.size() != g.size()) throw ShapeError("potential length does not match the grid");
  for (double v : V) {
    if (!(v >= 0.0)) throw ParameterError("ground_mode needs V >= 0");
  }
  if (!(opt.check_interval > 0.0) || !(opt.max_tau > 0.0) || !(opt.tol > 0.0)) {
    throw ConfigError("ground_mode options must be positive");
  }
  const long steps = step_count(opt.check_interval, opt.dtau);
  const double h = opt.check_interval / static_cast<double>(steps);
  SplitStepper stepper(g, V, h);
  const double dxi = g.dxi();

  std::vector<cplx> psi = opt.initial ? *opt.initial : std::vector<cplx>(g.size(), cplx{1.0, 0.0});
  if (psi.size() != g.size()) throw ShapeError("initial guess does not match the grid");
  {
    const double n0 = discrete_norm(psi, dxi);
    if (!(n0 > 0.0)) throw ConfigError("initial guess has zero norm");
    for (auto& z : psi) z /= std::sqrt(n0);
  }

  double tau = 0.0;
  double last_rate = 1.0;
  cplx last_ratio{1.0, 0.0};
  std::vector<cplx> before(g.size());
  while (tau < opt.max_tau) {
    const std::vector<cplx> start = psi;
    for (long k = 0; k < steps; ++k) {
      const bool last = k + 1 == steps;
      if (last) before = psi;
      const double norm = stepper.step(psi);
      detail::check_finite(norm, k);
      if (!(norm > 0.0)) throw ConvergenceError("mode underflowed during power iteration");
      if (last) {
        cplx num{0.0, 0.0};
        double den = 0.0;
        for (std::size_t j = 0; j < psi.size(); ++j) {
          num += std::conj(before[j]) * psi[j];
          den += std::norm(before[j]);
        }
        last_ratio = num / den;
      }
      const double inv = 1.0 / std::sqrt(norm);
      for (auto& z : psi) z *= inv;
    }
    tau += opt.check_interval;
    cplx ov{0.0, 0.0};
    for (std::size_t j = 0; j < psi.size(); ++j) ov += std::conj(start[j]) * psi[j];
    ov *= dxi;
    last_rate = std::max(0.0, 1.0 - std::abs(ov)) / opt.check_interval;
    if (last_rate < opt.tol) {
      EigenMode out;
      out.grid = g;
      out.propagator_eigenvalue = I * std::log(last_ratio) / h;
      auto rayleigh = [&](const std::vector<cplx>& v) {
        const auto hv = apply_hamiltonian(v, V, g);
        cplx num{0.0, 0.0}, den{0.0, 0.0};
        for (std::size_t j = 0; j < v.size(); ++j) {
          num += v[j] * hv[j];
          den += v[j] * v[j];
        }
        return std::abs(den) > 1e-8 ? num / den : out.propagator_eigenvalue;
      };
      detail::normalize_mode(psi, dxi);
      cplx E = rayleigh(psi);
      // The propagated vector is an eigenvector of the split-step map, which
      // differs from that of H at second order in dtau; inverse iteration with
      // the exact H removes that bias.
      if (opt.polish_iterations > 0 && g.size() <= opt.polish_max_size) {
        const auto n = static_cast<Eigen::Index>(g.size());
        Eigen::MatrixXcd A = dense_hamiltonian(V, g);
        A.diagonal().array() -= E;
        const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
        for (int it = 0; it < opt.polish_iterations; ++it) {
          Eigen::VectorXcd x = lu.solve(Eigen::Map<const Eigen::VectorXcd>(psi.data(), n));
          if (!x.allFinite()) break;
          std::vector<cplx> cand(x.data(), x.data() + n);
          detail::normalize_mode(cand, dxi);
          psi = std::move(cand);
        }
        E = rayleigh(psi);
      }
      out.mode = psi;
      out.eigenvalue = E;
      out.residual = eigenvalue_residual(psi, out.eigenvalue, V, g);
      out.converged_tau = tau;
      return out;
    }
  }
  throw ConvergenceError("ground_mode did not converge within tau = " + std::to_string(opt.max_tau) +
                         " (overlap change rate " + std::to_string(last_rate) +
                         " per unit tau); the two slowest-decaying modes may be nearly degenerate");
}

namespace detail {

// Crossing of ln d with ln level inside [i, i+1], from the cubic through
// samples i-1..i+2 (clamped at the ends), located by bisection.
inline double crossing_offset(const std::vector<double>& d, std::size_t i, double level) {
  const std::size_t n = d.size();
  const std::size_t lo = i == 0 ? 0 : (i + 2 >= n ? n - 4 : i - 1);
  double y[4];
  for (int k = 0; k < 4; ++k) y[k] = std::log(std::max(d[lo + k], 1e-300)) - std::log(level);
  auto f = [&](double x) {
    double acc = 0.0;
    for (int a = 0; a < 4; ++a) {
      double w = 1.0;
      for (int b = 0; b < 4; ++b) {
        if (b != a) w *= (x - b) / double(a - b);
      }
      acc += w * y[a];
    }
    return acc;
  };
  double a = static_cast<double>(i - lo), b = a + 1.0;
  double fa = f(a);
  if (fa * f(b) > 0.0) return (d[i] - level) / (d[i] - d[i + 1]);
  for (int it = 0; it < 80; ++it) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if ((fm > 0.0) == (fa > 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b) - static_cast<double>(i - lo);
}

}  // namespace detail

/// Full width of the region where |psi|^2 >= fraction * max |psi|^2. Crossings
/// are located on a cubic interpolant of the log density.
inline double density_width(std::span<const cplx> psi, const Grid& g, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("density fraction must lie in (0, 1)");
  if (psi.size() != g.size() || psi.size() < 4) throw ShapeError("mode does not match the grid");
  std::vector<double> d(psi.size());
  for (std::size_t j = 0; j < psi.size(); ++j) d[j] = std::norm(psi[j]);
  const auto peak = static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
  const double level = fraction * d[peak];
  std::size_t r = peak, l = peak;
  while (r + 1 < d.size() && d[r + 1] >= level) ++r;
  while (l > 0 && d[l - 1] >= level) --l;
  if (r + 1 >= d.size() || l == 0) throw DataError("density does not fall below the requested level inside the grid");
  const double xr = g.xi(r) + g.dxi() * detail::crossing_offset(d, r, level);
  const double xl = g.xi(l - 1) + g.dxi() * detail::crossing_offset(d, l - 1, level);
  return xr - xl;
}

// ---------------------------------------------------------------------------
// Log-log scaling fits.

struct ScalingFit {
  std::vector<double> parameter;
  std::vector<double> measured;
  double slope = 0.0;
  double stderr_slope = 0.0;
  double intercept = 0.0;
  double predicted = 0.0;
  bool consistent = false;  // |slope - predicted| <= 2 stderr
};

/// Ordinary least squares of ln(measured) against ln(parameter). The sweep must
/// cover at least `min_span` in the parameter.
inline ScalingFit fit_scaling(std::span<const double> parameter, std::span<const double> measured,
                              double predicted_exponent, double min_span = 4.0) {
  if (parameter.size() != measured.size()) throw DataError("sweep and measurement lengths differ");
  if (parameter.size() < 4) throw DataError("scaling fit needs at least 4 points");
  for (std::size_t i = 0; i < parameter.size(); ++i) {
    if (!(parameter[i] > 0.0) || !(measured[i] > 0.0)) throw DataError("scaling fit needs positive values");
  }
  const auto [lo, hi] = std::minmax_element(parameter.begin(), parameter.end());
  if (*hi / *lo < min_span * (1.0 - 1e-12)) {
    throw DataError("sweep must span at least a factor " + std::to_string(min_span));
  }

  ScalingFit f;
  f.parameter.assign(parameter.begin(), parameter.end());
  f.measured.assign(measured.begin(), measured.end());
  f.predicted = predicted_exponent;
  const std::size_t n = parameter.size();
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::log(parameter[i]);
    y[i] = std::log(measured[i]);
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    rss += r * r;
  }
  f.stderr_slope = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  f.consistent = std::abs(f.slope - predicted_exponent) <= std::max(2.0 * f.stderr_slope, 1e-9);
  return f;
}

}  // namespace chisel
