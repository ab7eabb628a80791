#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "chisel/harness.hpp"

using namespace chisel;
using namespace chisel::harness;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Beam argon() { return {3.23e7, 48851.45, 7.839488e6, 50.0}; }

std::vector<double> range(double start, double stop, double step) {
  std::vector<double> out;
  for (int i = 0; start + i * step <= stop + 1e-9; ++i) out.push_back(start + i * step);
  return out;
}

SweepConfig small_sweep() {
  SweepConfig c;
  c.beam = argon();
  c.omega0_over_gamma = {0.4};
  c.dz_um = range(0.0, 60.0, 10.0);
  c.n_max = 3;
  c.grid = make_grid(1, 128);
  return c;
}

}  // namespace

TEST_CASE("beam kinematics", "[harness]") {
  const auto b = argon();
  CHECK_THAT(b.recoil_over_gamma(), WithinRel(1.512429e-3, 1e-6));
  CHECK_THAT(b.recoil_velocity(), WithinRel(2.0 * 48851.45 / 7.839488e6, 1e-15));
  CHECK_THAT(b.tau_of(500.0), WithinRel(48851.45 * 500e-6 / 50.0, 1e-15));
  CHECK_THAT(b.tau_of(500.0, 100.0), WithinRel(0.5 * b.tau_of(500.0), 1e-15));
  Beam bad = b;
  bad.velocity = 0.0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("parallel_map keeps order and rethrows", "[harness]") {
  const auto v = parallel_map(50, [](std::size_t i) { return static_cast<int>(i * i); });
  REQUIRE(v.size() == 50);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == static_cast<int>(i * i));
  CHECK(parallel_map(0, [](std::size_t i) { return i; }).empty());
  CHECK_THROWS_AS(parallel_map(8,
                               [](std::size_t i) {
                                 if (i == 5) throw DataError("boom");
                                 return i;
                               }),
                  DataError);
}

TEST_CASE("worker count honours the environment cap", "[harness]") {
  ::setenv("CHISEL_THREADS", "1", 1);
  CHECK(worker_count() == 1);
  ::unsetenv("CHISEL_THREADS");
  CHECK(worker_count() >= 1);
}

TEST_CASE("velocity classes", "[harness][velocity]") {
  const auto b = argon();
  VelocityAveraging none;
  const auto one = draw_velocity_classes(none, b);
  REQUIRE(one.size() == 1);
  CHECK(one[0].velocity == b.velocity);
  CHECK(one[0].quasimomentum == 0.0);
  CHECK(one[0].weight == 1.0);

  VelocityAveraging avg{20000, 10.0, 0.007, 42};
  const auto many = draw_velocity_classes(avg, b);
  double mv = 0, mq = 0;
  for (const auto& c : many) {
    mv += c.velocity / avg.samples;
    mq += c.quasimomentum / avg.samples;
  }
  double vv = 0, vq = 0;
  for (const auto& c : many) {
    vv += (c.velocity - mv) * (c.velocity - mv) / avg.samples;
    vq += (c.quasimomentum - mq) * (c.quasimomentum - mq) / avg.samples;
  }
  // FWHM -> sigma = FWHM / (2 sqrt(2 ln 2)).
  CHECK_THAT(std::sqrt(vv), WithinRel(10.0 / (2.0 * std::sqrt(2.0 * std::log(2.0))), 0.03));
  CHECK_THAT(std::sqrt(vq), WithinRel(0.007 * kFwhmToSigma / b.recoil_velocity(), 0.03));

  const auto again = draw_velocity_classes(avg, b);
  for (std::size_t i = 0; i < many.size(); ++i) CHECK(again[i].velocity == many[i].velocity);

  std::vector<std::string> warn;
  draw_velocity_classes({64, 0.0, 0.1, 1}, b, &warn);
  REQUIRE(warn.size() == 1);
  CHECK(warn[0].find("wrapped") != std::string::npos);
  CHECK_THROWS_AS(draw_velocity_classes({0, 0.0, 0.0, 1}, b), ConfigError);
  CHECK_THROWS_AS(draw_velocity_classes({1, -1.0, 0.0, 1}, b), ConfigError);
}

TEST_CASE("quasimomentum wrapping", "[harness][velocity]") {
  CHECK(wrap_quasimomentum(0.3) == 0.3);
  CHECK_THAT(wrap_quasimomentum(1.3), WithinAbs(-0.7, 1e-15));
  CHECK_THAT(wrap_quasimomentum(-1.0), WithinAbs(1.0, 1e-15));
  CHECK_THAT(wrap_quasimomentum(1.0), WithinAbs(1.0, 1e-15));
  CHECK_THAT(wrap_quasimomentum(-2.6), WithinAbs(-0.6, 1e-15));
}

TEST_CASE("auto_dtau respects both guards", "[harness]") {
  const auto g = make_grid(1, 128);
  for (double vmax : {1.0, 50.0, 500.0}) {
    const double h = auto_dtau(g, vmax, 0.4);
    CHECK(h * vmax < 0.1);
    CHECK(h * (128.0 + 0.4) * (128.0 + 0.4) < 0.5);
  }
}

TEST_CASE("march stops at the requested times", "[harness]") {
  const auto g = make_grid(1, 32);
  const auto V = sample_potential(SinusoidalImaginary{3.0}, g);
  const std::vector<double> taus{0.0, 0.013, 0.05, 0.05, 0.2};
  std::vector<double> seen;
  march(make_initial_state(g), V, taus, 1e-4, [&](std::size_t, const WaveState& st) { seen.push_back(st.tau); });
  CHECK(seen == taus);
  const std::vector<double> back{0.1, 0.05};
  CHECK_THROWS_AS(march(make_initial_state(g), V, back, 1e-4, [](std::size_t, const WaveState&) {}), ConfigError);
}

TEST_CASE("sweep validation", "[harness]") {
  auto c = small_sweep();
  c.dz_um = {0.0, 10.0, 10.0};
  CHECK_THROWS_AS(run_diffraction_sweep(c), ConfigError);
  c.dz_um = {-1.0, 10.0};
  CHECK_THROWS_AS(run_diffraction_sweep(c), ConfigError);
  c = small_sweep();
  c.omega0_over_gamma.clear();
  CHECK_THROWS_AS(run_diffraction_sweep(c), ConfigError);
  c = small_sweep();
  c.grid = make_grid(1, 32);
  CHECK_THROWS_AS(run_diffraction_sweep(c), ConfigError);  // resolution guard at s = 52.9
}

TEST_CASE("diffraction sweep basics", "[harness]") {
  const auto c = small_sweep();
  const auto curves = run_diffraction_sweep(c);
  REQUIRE(curves.size() == 1);
  const auto& cv = curves[0];
  CHECK_THAT(cv.s, WithinRel(0.16 / (2.0 * c.beam.recoil_over_gamma()), 1e-12));
  CHECK_THAT(cv.order_series(0)[0], WithinAbs(1.0, 1e-14));
  CHECK_THAT(cv.survival[0], WithinAbs(1.0, 1e-14));
  for (const auto& row : cv.eta) {
    double sum = 0.0;
    for (double e : row) sum += e;
    CHECK_THAT(sum, WithinAbs(1.0, 1e-9));
  }
  for (std::size_t i = 1; i < cv.survival.size(); ++i) CHECK(cv.survival[i] < cv.survival[i - 1]);
  CHECK(cv.eta_raman_nath.empty());
}

TEST_CASE("sweep equals evolve plus diffraction_amplitudes", "[harness][property]") {
  auto c = small_sweep();
  c.dz_um = {40.0};
  c.dtau = 2e-5;
  const auto cv = run_diffraction_sweep(c).at(0);
  const auto g = c.grid;
  EvolveConfig ec;
  ec.dtau = c.dtau;
  ec.tau_final = c.beam.tau_of(40.0);
  const auto st = evolve(make_initial_state(g), sample_potential(SinusoidalImaginary{cv.s}, g), ec).final_state;
  const auto tab = diffraction_amplitudes(st, c.n_max);
  for (int n = -c.n_max; n <= c.n_max; ++n) CHECK_THAT(cv.order_series(n)[0], WithinAbs(tab.efficiency(n), 1e-12));
  CHECK_THAT(cv.survival[0], WithinRel(survival(st), 1e-12));
}

TEST_CASE("sweeps are deterministic", "[harness][property]") {
  auto c = small_sweep();
  c.averaging = {4, 10.0, 0.007, 7};
  c.raman_nath = true;
  const auto a = run_diffraction_sweep(c).at(0);
  const auto b = run_diffraction_sweep(c).at(0);
  CHECK(a.eta == b.eta);
  CHECK(a.survival == b.survival);
  CHECK(a.eta_raman_nath == b.eta_raman_nath);
}

TEST_CASE("velocity averaging", "[harness][velocity]") {
  auto c = small_sweep();
  const auto plain = run_diffraction_sweep(c).at(0);

  // One sample with zero spreads is the unaveraged pipeline.
  c.averaging = {1, 0.0, 0.0, 99};
  CHECK(run_diffraction_sweep(c).at(0).eta == plain.eta);

  // Vanishing spreads converge to it.
  c.averaging = {6, 1e-9, 1e-12, 5};
  const auto tiny = run_diffraction_sweep(c).at(0);
  for (std::size_t i = 0; i < plain.eta.size(); ++i) {
    for (std::size_t k = 0; k < plain.eta[i].size(); ++k) CHECK_THAT(tiny.eta[i][k], WithinAbs(plain.eta[i][k], 1e-6));
  }

  // Intensity-linear: two explicit classes average to the weighted sum of their tables.
  const double s = plain.s;
  const std::vector<VelocityClass> classes{{45.0, 0.2, 0.25}, {55.0, -0.1, 0.75}};
  const auto avg = weighted_average(std::span<const VelocityClass>(classes),
                                    [&](const VelocityClass& vc) { return class_efficiency_rows(s, c, vc, false); });
  const auto r0 = class_efficiency_rows(s, c, classes[0], false);
  const auto r1 = class_efficiency_rows(s, c, classes[1], false);
  for (std::size_t k = 0; k < avg.size(); ++k) CHECK_THAT(avg[k], WithinAbs(0.25 * r0[k] + 0.75 * r1[k], 1e-15));

  // Paper spreads move the curve by a visible but modest amount.
  c.averaging = {8, 10.0, 0.007, 20050601};
  const auto spread = run_diffraction_sweep(c).at(0);
  const double d = std::abs(spread.order_series(0).back() - plain.order_series(0).back());
  CHECK(d > 1e-6);
  CHECK(d < 0.1);
}

TEST_CASE("z0 from a constructed crossing", "[harness][z0]") {
  const auto dz = range(0.0, 1000.0, 5.0);
  std::vector<double> eta;
  for (double z : dz) eta.push_back(z < 200.0 ? 1.0 - 0.7 * z / 200.0 : 0.3);
  const auto r = extract_z0(dz, eta);
  CHECK_THAT(r.z0, WithinAbs(200.0, 1.0));

  // Rescaling all efficiencies leaves the crossing unchanged.
  auto scaled = eta;
  for (auto& e : scaled) e *= 0.37;
  CHECK_THAT(extract_z0(dz, scaled).z0, WithinRel(r.z0, 1e-10));

  // A decline that never levels off has no plateau.
  std::vector<double> falling;
  for (double z : dz) falling.push_back(1.0 - 0.5 * z / 1000.0);
  CHECK_THROWS_AS(extract_z0(dz, falling), RangeError);
  CHECK_THROWS_AS(extract_z0(std::vector<double>{1, 2}, std::vector<double>{1}), DataError);
}

TEST_CASE("z0 doubles with the beam velocity", "[harness][z0]") {
  auto c = small_sweep();
  c.omega0_over_gamma = {0.6};
  c.n_max = 1;
  c.dz_um = range(0.0, 400.0, 4.0);
  const auto slow = run_diffraction_sweep(c).at(0);
  c.beam.velocity = 100.0;
  for (auto& z : c.dz_um) z *= 2.0;
  const auto fast = run_diffraction_sweep(c).at(0);
  const double z_slow = extract_z0(slow.dz_um, slow.order_series(0)).z0;
  const double z_fast = extract_z0(fast.dz_um, fast.order_series(0)).z0;
  CHECK_THAT(z_fast, WithinRel(2.0 * z_slow, 1e-9));
}

TEST_CASE("plateau onset", "[harness]") {
  const auto t = range(0.0, 10.0, 0.1);
  std::vector<double> y;
  for (double x : t) y.push_back(0.4 + 0.6 * std::exp(-x));
  // The curve enters the 1% band around its final value when 0.6 (e^{-t} - e^{-10}) = 0.01 y(10).
  const double onset = -std::log(0.01 * y.back() / 0.6 + std::exp(-10.0));
  CHECK_THAT(plateau_onset(t, y), WithinAbs(onset, 0.01));
  std::vector<double> ramp;
  for (double x : t) ramp.push_back(1.0 + x);
  CHECK_THROWS_AS(plateau_onset(t, ramp), RangeError);
}

TEST_CASE("simulated protocol self-subtraction", "[harness][protocol]") {
  ProtocolConfig pc;
  pc.sweep = small_sweep();
  pc.dz_long_um = 50.0;
  pc.dz_ref_um = 50.0;
  pc.phi_steps = 16;
  const auto r = phase_protocol(pc);
  CHECK(r.result.difference == 0.0);
  CHECK(r.long_fringe.intensity == r.ref_fringe.intensity);
  REQUIRE(r.long_fringe.fit.has_value());
}
