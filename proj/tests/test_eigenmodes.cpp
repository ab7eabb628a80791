#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "chisel/analytic.hpp"
#include "chisel/eigenmodes.hpp"
#include "chisel/observables.hpp"
#include "oracles/dense.hpp"

using namespace chisel;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Power-law potential with its unit-prefactor time scale set to 1 and the edge capped.
std::vector<double> unit_powerlaw(int n, const Grid& g) {
  const double r = 0.3;
  const double s = 0.5 * std::pow(r, -2 * n);
  auto V = sample_potential(PowerLaw{n, r, s}, g);
  for (auto& v : V) v = std::min(v, 100.0);
  return V;
}

GroundModeOptions fast_options() {
  GroundModeOptions o;
  o.dtau = 3e-4;
  o.check_interval = 0.1;
  o.tol = 1e-9;
  return o;
}

}  // namespace

TEST_CASE("ground mode matches the dense eigensolver", "[eigenmodes][oracle]") {
  const auto g = make_grid(1, 32);
  const auto V = sample_potential(SinusoidalImaginary{20.0}, g);
  const auto mode = ground_mode(V, g);
  const auto ref = oracle::slowest_mode(oracle::dense_h(g, V));
  CHECK(std::abs(mode.eigenvalue - ref.eigenvalue) < 1e-6);
  CHECK(oracle::overlap(mode.mode, ref.vector) > 1.0 - 1e-8);
  CHECK(mode.eigenvalue.imag() < 0.0);
  CHECK(mode.residual < 1e-8);
  // Split-step estimate, before the dense polish, is close but carries the O(dtau^2) bias.
  CHECK(std::abs(mode.propagator_eigenvalue - ref.eigenvalue) < 1e-3);
}

TEST_CASE("quadratic potential has a complex harmonic ground state", "[eigenmodes][oracle]") {
  const auto g = make_grid(4, 32);
  for (double s : {1.0, 3.0}) {
    const auto mode = ground_mode(sample_potential(QuadraticImaginary{s}, g), g, fast_options());
    const cplx expect = std::polar(std::sqrt(s), -pi / 4);
    CHECK(std::abs(mode.eigenvalue - expect) < 1e-8);
    CHECK_THAT(std::arg(mode.eigenvalue), WithinAbs(-pi / 4, 1e-3));
    CHECK_THAT(-2.0 * mode.eigenvalue.imag(), WithinRel(analytic::decay_rate(analytic::GaussianSolutionParams(s)), 1e-8));
  }
}

TEST_CASE("free ground mode", "[eigenmodes]") {
  const auto g = make_grid(2, 16);
  const auto mode = ground_mode(std::vector<double>(g.size(), 0.0), g);
  CHECK(std::abs(mode.eigenvalue) < 1e-12);
  for (const auto& z : mode.mode) CHECK_THAT(std::abs(z), WithinRel(std::abs(mode.mode[0]), 1e-12));
}

TEST_CASE("ground mode of an even potential is even", "[eigenmodes][property]") {
  const auto g = make_grid(4, 32);
  const auto mode = ground_mode(unit_powerlaw(2, g), g, fast_options());
  // xi_j mirrors to xi_{N-j}; index 0 sits at -L/2, the same point as +L/2.
  double odd = 0.0, total = 0.0;
  const std::size_t n = g.size();
  for (std::size_t j = 0; j < n; ++j) {
    const cplx mirror = mode.mode[(n - j) % n];
    odd += std::norm(0.5 * (mode.mode[j] - mirror));
    total += std::norm(mode.mode[j]);
  }
  CHECK(std::sqrt(odd / total) < 1e-8);
}

TEST_CASE("ground mode options and errors", "[eigenmodes]") {
  const auto g = make_grid(1, 32);
  const auto V = sample_potential(SinusoidalImaginary{2.0}, g);
  GroundModeOptions o;
  o.max_tau = 0.5;
  CHECK_THROWS_AS(ground_mode(V, g, o), ConvergenceError);
  CHECK_THROWS_AS(ground_mode(std::vector<double>(g.size(), -1.0), g), ParameterError);
  CHECK_THROWS_AS(ground_mode(std::vector<double>(5, 0.0), g), ShapeError);
  o.tol = 0.0;
  CHECK_THROWS_AS(ground_mode(V, g, o), ConfigError);
}

TEST_CASE("eigenvalue residual", "[eigenmodes]") {
  const auto g = make_grid(1, 32);
  const auto V = sample_potential(SinusoidalImaginary{20.0}, g);
  const auto ref = oracle::slowest_mode(oracle::dense_h(g, V));
  auto psi = ref.vector;
  detail::normalize_mode(psi, g.dxi());
  CHECK(eigenvalue_residual(psi, ref.eigenvalue, V, g) < 1e-10);

  const cplx delta(3e-3, -4e-3);
  CHECK_THAT(eigenvalue_residual(psi, ref.eigenvalue + delta, V, g), WithinRel(std::abs(delta), 1e-6));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  auto noisy = psi;
  double scale = 0.0;
  for (const auto& z : psi) scale = std::max(scale, std::abs(z));
  for (auto& z : noisy) z += 0.01 * scale * cplx(nd(rng), nd(rng));
  detail::normalize_mode(noisy, g.dxi());
  const double r = eigenvalue_residual(noisy, ref.eigenvalue, V, g);
  CHECK(r > 1e-3);
  // Bounded by the perturbation size times the operator scale (kappa_max^2 + max V).
  CHECK(r < 0.05 * (32.0 * 32.0 + 20.0));
}

TEST_CASE("dense Hamiltonian agrees with the spectral operator", "[eigenmodes]") {
  const auto g = make_grid(2, 16);
  const auto V = sample_potential(SinusoidalImaginary{4.0}, g);
  const auto H = dense_hamiltonian(V, g);
  const auto ref = oracle::dense_h(g, V);
  CHECK((H - ref).norm() < 1e-9 * ref.norm());
}

TEST_CASE("converged quadratic mode carries the analytic quadratic phase", "[eigenmodes][oracle]") {
  const double s = 2.0;
  const auto g = make_grid(4, 32);
  const auto mode = ground_mode(sample_potential(QuadraticImaginary{s}, g), g, fast_options());
  const analytic::GaussianSolutionParams p(s);
  const auto qp = analytic::quadratic_phase_coefficient(p);
  const double c = fit_quadratic_phase(mode.mode, g, stationary_width(p).exact);
  CHECK_THAT(c, WithinRel(qp.sign * qp.magnitude, 0.02));
}

TEST_CASE("higher power laws flatten the mode", "[eigenmodes][property]") {
  const auto g = make_grid(8, 32);
  double prev = 0.0;
  for (int n : {1, 3, 5}) {
    const auto mode = ground_mode(unit_powerlaw(n, g), g, fast_options());
    const double ratio = density_width(mode.mode, g, 0.9) / density_width(mode.mode, g, 0.5);
    CHECK(ratio > prev);
    prev = ratio;
  }
}

TEST_CASE("domain doubling barely moves the eigenvalue", "[eigenmodes]") {
  for (int n : {1, 3}) {
    const auto g1 = make_grid(8, 32);
    const auto g2 = make_grid(16, 32);
    const auto e1 = ground_mode(unit_powerlaw(n, g1), g1, fast_options()).eigenvalue;
    const auto e2 = ground_mode(unit_powerlaw(n, g2), g2, fast_options()).eigenvalue;
    CHECK(std::abs(e2 - e1) < 1e-3 * std::abs(e1));
  }
}

TEST_CASE("density width", "[eigenmodes]") {
  const auto g = make_grid(4, 64);
  std::vector<cplx> a(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) a[j] = std::exp(-0.5 * g.xi(j) * g.xi(j) / 0.49);
  // |a|^2 = exp(-xi^2 / 0.49); the half-density full width is 2 * 0.7 * sqrt(ln 2).
  CHECK_THAT(density_width(a, g, 0.5), WithinRel(1.4 * std::sqrt(std::log(2.0)), 1e-4));
}

TEST_CASE("fit_scaling", "[eigenmodes][scaling]") {
  const std::vector<double> x{0.1, 0.2, 0.4, 0.8};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 / v);
  const auto f = fit_scaling(x, y, -1.0);
  CHECK_THAT(f.slope, WithinAbs(-1.0, 1e-12));
  CHECK(f.stderr_slope < 1e-12);
  CHECK(f.consistent);
  CHECK_THAT(std::exp(f.intercept), WithinRel(3.0, 1e-12));
  CHECK_FALSE(fit_scaling(x, y, -0.9).consistent);

  CHECK_THROWS_AS(fit_scaling(std::vector<double>{0.1, 0.2, 0.4}, std::vector<double>{1, 2, 3}, -1.0), DataError);
  CHECK_THROWS_AS(fit_scaling(x, std::vector<double>{1, 0, 2, 3}, -1.0), DataError);
  CHECK_THROWS_AS(fit_scaling(x, std::vector<double>{1, 2, 3}, -1.0), DataError);
  const std::vector<double> narrow{0.2, 0.3, 0.4, 0.6};
  CHECK_THROWS_AS(fit_scaling(narrow, y, -1.0), DataError);
  CHECK_NOTHROW(fit_scaling(narrow, y, -1.0, 3.0));

  // Noisy data: the standard error tracks the scatter.
  const std::vector<double> noisy{3.0 / 0.1 * 1.02, 3.0 / 0.2 * 0.98, 3.0 / 0.4 * 1.01, 3.0 / 0.8 * 0.99};
  const auto fn = fit_scaling(x, noisy, -1.0);
  CHECK(fn.stderr_slope > 1e-3);
  CHECK(fn.consistent);
}
