#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "chisel/core.hpp"
#include "oracles/series.hpp"

using namespace chisel;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("reduce_params follows the definition of s", "[core]") {
  const auto d = reduce_params(0.4, 1e-3);
  CHECK_THAT(d.s, WithinRel(80.0, 1e-14));
  CHECK_THAT(d.omega0_bar, WithinRel(2.0 * std::sqrt(80.0), 1e-14));
  CHECK(d.warnings.empty());

  CHECK_THAT(DimensionlessParams::from_s(2.0).omega0_bar, WithinRel(2.8284271247461903, 1e-15));
  CHECK_THROWS_AS(reduce_params(0.0, 1e-3), ParameterError);
  CHECK_THROWS_AS(reduce_params(0.4, 0.0), ParameterError);
  CHECK_THROWS_AS(DimensionlessParams::from_s(-1.0), ParameterError);
}

TEST_CASE("reduce_params with laboratory units", "[core]") {
  PhysicalParams p;
  p.rabi_over_gamma = 0.23;
  p.linewidth = 3.23e7;
  p.recoil_frequency = 48851.45;
  const double expected = std::pow(0.23 * 3.23e7, 2) / (2.0 * 48851.45 * 3.23e7);
  CHECK_THAT(reduce_params(p).s, WithinRel(expected, 1e-14));
}

TEST_CASE("reduce_params under rescaling", "[core][property]") {
  PhysicalParams p;
  p.rabi_over_gamma = 0.3;
  p.linewidth = 2.0e7;
  p.recoil_frequency = 3.0e4;
  const double s0 = reduce_params(p).s;
  for (double a : {2.0, 10.0}) {
    // Rescaling every rate by a leaves the dimensionless coupling unchanged.
    PhysicalParams all = p;
    all.linewidth *= a;
    all.recoil_frequency *= a;
    CHECK_THAT(reduce_params(all).s, WithinRel(s0, 1e-13));
    // Scaling only omega_r divides s by a.
    PhysicalParams rec = p;
    rec.recoil_frequency *= a;
    CHECK_THAT(reduce_params(rec).s, WithinRel(s0 / a, 1e-13));
  }
}

TEST_CASE("large recoil ratio warns", "[core]") {
  const auto d = reduce_params(1.0, 0.2);
  REQUIRE(d.warnings.size() == 1);
  CHECK(d.warnings[0].find("0.2") != std::string::npos);
}

TEST_CASE("make_grid geometry", "[core]") {
  const auto g = make_grid(1, 256);
  CHECK_THAT(g.dxi(), WithinRel(pi / 256, 1e-15));
  CHECK_THAT(g.xi(0), WithinAbs(-pi / 2, 1e-15));

  const auto g4 = make_grid(4, 64);
  CHECK_THAT(g4.dkappa(), WithinRel(0.5, 1e-15));
  CHECK(g4.order_bin(1) == 4);
  CHECK(g4.kappa(4) == 2.0);
  CHECK(g4.kappa(g4.order_bin(-3)) == -6.0);

  CHECK_THROWS_AS(make_grid(3, 3), ConfigError);
  CHECK_THROWS_AS(make_grid(3, 32), ConfigError);
  CHECK_THROWS_AS(make_grid(0, 64), ConfigError);
  CHECK_THROWS_AS(make_grid(1, 4), ConfigError);
}

TEST_CASE("order positions are exact comb entries", "[core]") {
  for (int P : {1, 2, 4, 8}) {
    const auto g = make_grid(P, 64);
    for (int n = -31; n <= 31; ++n) CHECK(g.kappa(g.order_bin(n)) == 2.0 * n);
    CHECK_THROWS_AS(g.order_bin(32), ConfigError);
  }
}

TEST_CASE("sample_potential closed forms", "[core]") {
  CHECK_THAT(potential_at(SinusoidalImaginary{1.0}, pi / 2), WithinRel(1.0, 1e-15));
  CHECK_THAT(potential_at(QuadraticImaginary{80.0}, 0.1), WithinRel(0.8, 1e-14));
  // 2 (q xi / k)^{6} at q xi / k = 0.5.
  CHECK_THAT(potential_at(PowerLaw{3, 0.5, 1.0}, 1.0), WithinRel(0.03125, 1e-15));

  const auto g = make_grid(4, 32);
  const auto V = sample_potential(SinusoidalImaginary{3.0}, g);
  for (std::size_t j = 0; j < g.size(); ++j) {
    const long off = static_cast<long>(j) - static_cast<long>(g.size() / 2);
    if (off % 32 == 0) {
      CHECK(V[j] == 0.0);
    } else {
      CHECK(V[j] > 0.0);
    }
  }
  CHECK_THROWS_AS(sample_potential(CustomPotential{std::vector<double>(5, 0.0)}, g), ShapeError);
  CHECK_THROWS_AS(sample_potential(CustomPotential{std::vector<double>(g.size(), -1.0)}, g), ParameterError);
}

TEST_CASE("sinusoid matches its quadratic expansion near a node", "[core][property]") {
  const auto g = make_grid(1, 1024);
  const auto vs = sample_potential(SinusoidalImaginary{5.0}, g);
  const auto vq = sample_potential(QuadraticImaginary{5.0}, g);
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double x = g.xi(j);
    if (x == 0.0 || std::abs(x) >= 0.1) continue;
    const double rel = std::abs(vs[j] - vq[j]) / vq[j];
    CHECK(rel < 0.005);
    CHECK(rel <= x * x / 3.0 + 1e-12);
  }
}

TEST_CASE("initial states", "[core]") {
  const auto g = make_grid(1, 256);
  const auto u = make_initial_state(g);
  CHECK_THAT(discrete_norm(u.amplitudes, g.dxi()), WithinRel(1.0, 1e-14));
  for (const auto& z : u.amplitudes) CHECK_THAT(std::norm(z) * g.dxi(), WithinRel(1.0 / 256, 1e-12));
  CHECK(u.tau == 0.0);

  InitialSpec pw;
  pw.kind = InitialKind::plane_wave;
  pw.kappa0 = 0.0;
  const auto p0 = make_initial_state(g, pw);
  for (std::size_t j = 0; j < g.size(); ++j) CHECK(std::abs(p0.amplitudes[j] - u.amplitudes[j]) < 1e-15);

  pw.kappa0 = 0.37;
  CHECK_THROWS_AS(make_initial_state(g, pw), ConfigError);

  pw.kappa0 = 4.0;
  const auto p4 = make_initial_state(g, pw);
  CHECK_THAT(discrete_norm(p4.amplitudes, g.dxi()), WithinRel(1.0, 1e-13));
}

TEST_CASE("spectral transform matches a direct DFT and round-trips", "[core][property]") {
  const auto g = make_grid(2, 32);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  std::vector<cplx> x(g.size());
  for (auto& z : x) z = {nd(rng), nd(rng)};
  Spectral fft(g.size());
  std::vector<cplx> f(g.size()), back(g.size());
  fft.forward(x, f);
  const auto ref = oracle::direct_dft(x);
  for (std::size_t m = 0; m < x.size(); ++m) CHECK(std::abs(f[m] - ref[m]) < 1e-12);
  fft.inverse(f, back);
  for (std::size_t j = 0; j < x.size(); ++j) CHECK(std::abs(back[j] - x[j]) < 1e-13);
}

TEST_CASE("resolution guard", "[core]") {
  CHECK_NOTHROW(check_resolution(2.0, make_grid(4, 64)));
  // Width 2^{1/4} s^{-1/4} at s = 100 is 0.376, below 8 pi / 64 = 0.393.
  CHECK_THROWS_AS(check_resolution(100.0, make_grid(1, 64)), ConfigError);
  CHECK_NOTHROW(check_resolution(100.0, make_grid(1, 128)));
  CHECK_NOTHROW(check_resolution(52.9, make_grid(1, 64)));
}
