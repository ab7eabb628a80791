#pragma once

// JSON run configuration. Unknown keys are rejected so typos surface as
// config errors instead of silently falling back to defaults.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chisel/core.hpp"
#include "chisel/harness.hpp"
#include "chisel/observables.hpp"

namespace chisel::config {

using nlohmann::json;

inline constexpr double kHbar = 1.054571817e-34;        // J s
inline constexpr double kAtomicMass = 1.66053906660e-27;  // kg

enum class PotentialKind { sinusoidal, quadratic, powerlaw };

struct RunConfig {
  json raw = json::object();

  std::optional<double> s;
  std::optional<double> omega0_over_gamma;
  std::optional<double> omega_r_over_gamma;

  std::optional<double> gamma;          // rad/s
  std::optional<double> wavelength_nm;
  std::optional<double> mass_amu;
  std::optional<double> velocity;       // m/s

  int periods = 1;
  int points_per_period = 128;
  InitialSpec initial;
  double dtau = 0.0;  // 0 selects a guard-satisfying step
  double tau_final = 1.0;
  int observer_stride = 0;

  std::vector<double> dz_um;
  int n_max = 4;
  bool raman_nath = false;
  std::vector<double> omega0_list;

  harness::VelocityAveraging averaging;

  ProbeSpec probe{cplx{0.0, 0.5}, 0.0, -1};
  int order = 3;
  int phi_steps = 64;
  double phi_origin = 0.0;
  double dz_long_um = 450.0;
  double dz_ref_um = 50.0;

  PotentialKind potential = PotentialKind::sinusoidal;
  int power_n = 1;
  double q_over_k = 0.3;
  double potential_cap = 100.0;
  double horizon = 12.0;
  int time_samples = 160;
  double width_fraction = 0.5;
};

namespace detail {

inline double number(const json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return j.get<double>();
}

inline int integer(const json& j, const std::string& key) {
  if (!j.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
  return j.get<int>();
}

inline std::vector<double> number_list(const json& j, const std::string& key) {
  if (!j.is_array()) throw ConfigError("config key '" + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(number(v, key));
  return out;
}

// Either an explicit list or {start, stop, step} with the stop included.
inline std::vector<double> range_or_list(const json& j, const std::string& key) {
  if (j.is_array()) return number_list(j, key);
  if (!j.is_object()) throw ConfigError("config key '" + key + "' must be a list or {start, stop, step}");
  for (const auto& [k, v] : j.items()) {
    if (k != "start" && k != "stop" && k != "step") throw ConfigError("unknown key '" + key + "." + k + "'");
  }
  if (!j.contains("start") || !j.contains("stop") || !j.contains("step")) {
    throw ConfigError("config key '" + key + "' needs start, stop and step");
  }
  const double a = number(j["start"], key), b = number(j["stop"], key), h = number(j["step"], key);
  if (!(h > 0.0) || !(b >= a)) throw ConfigError("config key '" + key + "' needs step > 0 and stop >= start");
  const auto count = static_cast<long>(std::floor((b - a) / h + 1e-9));
  std::vector<double> out;
  for (long i = 0; i <= count; ++i) out.push_back(a + h * static_cast<double>(i));
  return out;
}

inline void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown config key '" + where + k + "'");
  }
}

}  // namespace detail

inline RunConfig parse_config(const json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"s", "omega0_over_gamma", "omega_r_over_gamma", "gamma", "wavelength_nm", "mass_amu", "velocity",
                  "periods", "points_per_period", "initial", "dtau", "tau_final", "observer_stride", "dz_um", "n_max",
                  "raman_nath", "omega0_list", "averaging", "probe", "interferometer", "potential", "scaling",
                  "description"},
                 "");
  RunConfig c;
  c.raw = j;
  if (j.contains("s")) c.s = number(j["s"], "s");
  if (j.contains("omega0_over_gamma")) c.omega0_over_gamma = number(j["omega0_over_gamma"], "omega0_over_gamma");
  if (j.contains("omega_r_over_gamma")) c.omega_r_over_gamma = number(j["omega_r_over_gamma"], "omega_r_over_gamma");
  if (j.contains("gamma")) c.gamma = number(j["gamma"], "gamma");
  if (j.contains("wavelength_nm")) c.wavelength_nm = number(j["wavelength_nm"], "wavelength_nm");
  if (j.contains("mass_amu")) c.mass_amu = number(j["mass_amu"], "mass_amu");
  if (j.contains("velocity")) c.velocity = number(j["velocity"], "velocity");
  if (j.contains("periods")) c.periods = integer(j["periods"], "periods");
  if (j.contains("points_per_period")) c.points_per_period = integer(j["points_per_period"], "points_per_period");
  if (j.contains("initial")) {
    const auto& in = j["initial"];
    if (!in.is_object()) throw ConfigError("config key 'initial' must be an object");
    reject_unknown(in, {"kind", "kappa0"}, "initial.");
    if (in.contains("kind")) {
      if (!in["kind"].is_string()) throw ConfigError("initial.kind must be a string");
      const auto k = in["kind"].get<std::string>();
      if (k == "uniform") {
        c.initial.kind = InitialKind::uniform;
      } else if (k == "plane_wave") {
        c.initial.kind = InitialKind::plane_wave;
      } else {
        throw ConfigError("initial.kind must be 'uniform' or 'plane_wave', got '" + k + "'");
      }
    }
    if (in.contains("kappa0")) c.initial.kappa0 = number(in["kappa0"], "initial.kappa0");
  }
  if (j.contains("dtau")) c.dtau = number(j["dtau"], "dtau");
  if (j.contains("tau_final")) c.tau_final = number(j["tau_final"], "tau_final");
  if (j.contains("observer_stride")) c.observer_stride = integer(j["observer_stride"], "observer_stride");
  if (j.contains("dz_um")) c.dz_um = range_or_list(j["dz_um"], "dz_um");
  if (j.contains("n_max")) c.n_max = integer(j["n_max"], "n_max");
  if (j.contains("raman_nath")) {
    if (!j["raman_nath"].is_boolean()) throw ConfigError("raman_nath must be a boolean");
    c.raman_nath = j["raman_nath"].get<bool>();
  }
  if (j.contains("omega0_list")) c.omega0_list = number_list(j["omega0_list"], "omega0_list");
  if (j.contains("averaging")) {
    const auto& a = j["averaging"];
    if (!a.is_object()) throw ConfigError("config key 'averaging' must be an object");
    reject_unknown(a, {"samples", "dv_longitudinal", "dv_transverse", "seed"}, "averaging.");
    if (a.contains("samples")) c.averaging.samples = integer(a["samples"], "averaging.samples");
    if (a.contains("dv_longitudinal")) c.averaging.dv_longitudinal = number(a["dv_longitudinal"], "averaging.dv_longitudinal");
    if (a.contains("dv_transverse")) c.averaging.dv_transverse = number(a["dv_transverse"], "averaging.dv_transverse");
    if (a.contains("seed")) {
      if (!a["seed"].is_number_unsigned() && !(a["seed"].is_number_integer() && a["seed"].get<long long>() >= 0)) {
        throw ConfigError("averaging.seed must be a non-negative integer");
      }
      c.averaging.seed = a["seed"].get<std::uint64_t>();
    }
  }
  if (j.contains("probe")) {
    const auto& p = j["probe"];
    if (!p.is_object()) throw ConfigError("config key 'probe' must be an object");
    reject_unknown(p, {"eta_re", "eta_im", "j_max"}, "probe.");
    double re = c.probe.eta_c.real(), im = c.probe.eta_c.imag();
    if (p.contains("eta_re")) re = number(p["eta_re"], "probe.eta_re");
    if (p.contains("eta_im")) im = number(p["eta_im"], "probe.eta_im");
    c.probe.eta_c = cplx{re, im};
    if (p.contains("j_max")) c.probe.j_max = integer(p["j_max"], "probe.j_max");
  }
  if (j.contains("interferometer")) {
    const auto& p = j["interferometer"];
    if (!p.is_object()) throw ConfigError("config key 'interferometer' must be an object");
    reject_unknown(p, {"order", "phi_steps", "phi_origin", "dz_long_um", "dz_ref_um"}, "interferometer.");
    if (p.contains("order")) c.order = integer(p["order"], "interferometer.order");
    if (p.contains("phi_steps")) c.phi_steps = integer(p["phi_steps"], "interferometer.phi_steps");
    if (p.contains("phi_origin")) c.phi_origin = number(p["phi_origin"], "interferometer.phi_origin");
    if (p.contains("dz_long_um")) c.dz_long_um = number(p["dz_long_um"], "interferometer.dz_long_um");
    if (p.contains("dz_ref_um")) c.dz_ref_um = number(p["dz_ref_um"], "interferometer.dz_ref_um");
  }
  if (j.contains("potential")) {
    if (!j["potential"].is_string()) throw ConfigError("potential must be a string");
    const auto k = j["potential"].get<std::string>();
    if (k == "sinusoidal") {
      c.potential = PotentialKind::sinusoidal;
    } else if (k == "quadratic") {
      c.potential = PotentialKind::quadratic;
    } else if (k == "powerlaw") {
      c.potential = PotentialKind::powerlaw;
    } else {
      throw ConfigError("potential must be 'sinusoidal', 'quadratic' or 'powerlaw', got '" + k + "'");
    }
  }
  if (j.contains("scaling")) {
    const auto& p = j["scaling"];
    if (!p.is_object()) throw ConfigError("config key 'scaling' must be an object");
    reject_unknown(p, {"n", "q_over_k", "potential_cap", "horizon", "time_samples", "width_fraction"}, "scaling.");
    if (p.contains("n")) c.power_n = integer(p["n"], "scaling.n");
    if (p.contains("q_over_k")) c.q_over_k = number(p["q_over_k"], "scaling.q_over_k");
    if (p.contains("potential_cap")) c.potential_cap = number(p["potential_cap"], "scaling.potential_cap");
    if (p.contains("horizon")) c.horizon = number(p["horizon"], "scaling.horizon");
    if (p.contains("time_samples")) c.time_samples = integer(p["time_samples"], "scaling.time_samples");
    if (p.contains("width_fraction")) c.width_fraction = number(p["width_fraction"], "scaling.width_fraction");
  }
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

inline double require(const std::optional<double>& v, const char* key) {
  if (!v) throw ConfigError(std::string("config key '") + key + "' is required for this command");
  return *v;
}

inline double wavenumber(const RunConfig& c) { return 2.0 * pi / (require(c.wavelength_nm, "wavelength_nm") * 1e-9); }

/// omega_r in rad/s: from omega_r_over_gamma when given, else hbar k^2 / (2 M).
inline double recoil_frequency(const RunConfig& c) {
  if (c.omega_r_over_gamma) return *c.omega_r_over_gamma * require(c.gamma, "gamma");
  const double k = wavenumber(c);
  const double m = require(c.mass_amu, "mass_amu") * kAtomicMass;
  return kHbar * k * k / (2.0 * m);
}

inline double recoil_over_gamma(const RunConfig& c) {
  if (c.omega_r_over_gamma) return *c.omega_r_over_gamma;
  return recoil_frequency(c) / require(c.gamma, "gamma");
}

/// The coupling s: explicit `s` wins, else Omega0/Gamma with omega_r/Gamma.
inline DimensionlessParams dimensionless(const RunConfig& c, std::optional<double> omega0 = std::nullopt) {
  if (c.s && !omega0) return DimensionlessParams::from_s(*c.s);
  const double om = omega0 ? *omega0 : require(c.omega0_over_gamma, "omega0_over_gamma");
  return reduce_params(om, recoil_over_gamma(c));
}

inline Grid grid(const RunConfig& c) { return make_grid(c.periods, c.points_per_period); }

inline harness::Beam beam(const RunConfig& c) {
  harness::Beam b;
  b.linewidth = require(c.gamma, "gamma");
  b.recoil_frequency = recoil_frequency(c);
  b.wavenumber = wavenumber(c);
  b.velocity = require(c.velocity, "velocity");
  b.validate();
  return b;
}

inline harness::SweepConfig sweep(const RunConfig& c) {
  harness::SweepConfig s;
  s.beam = beam(c);
  if (c.omega0_over_gamma) s.omega0_over_gamma = {*c.omega0_over_gamma};
  if (c.s && !c.omega0_over_gamma) s.s_override = *c.s;
  s.dz_um = c.dz_um;
  s.averaging = c.averaging;
  s.n_max = c.n_max;
  s.raman_nath = c.raman_nath;
  s.grid = grid(c);
  s.dtau = c.dtau;
  return s;
}

inline harness::ProtocolConfig protocol(const RunConfig& c) {
  harness::ProtocolConfig p;
  p.sweep = sweep(c);
  p.omega0_over_gamma = c.omega0_over_gamma.value_or(0.0);
  p.dz_long_um = c.dz_long_um;
  p.dz_ref_um = c.dz_ref_um;
  p.probe = c.probe;
  p.order = c.order;
  p.phi_steps = c.phi_steps;
  p.phi_origin = c.phi_origin;
  return p;
}

inline harness::PowerLawSweepConfig powerlaw(const RunConfig& c) {
  harness::PowerLawSweepConfig p;
  p.n = c.power_n;
  p.q_over_k = c.q_over_k;
  p.recoil_over_gamma = recoil_over_gamma(c);
  if (!c.omega0_list.empty()) p.omega0_over_gamma = c.omega0_list;
  p.grid = grid(c);
  p.dtau = c.dtau;
  p.time_samples = c.time_samples;
  p.horizon = c.horizon;
  p.dx0_fraction = c.width_fraction;
  p.potential_cap = c.potential_cap;
  return p;
}

/// Potential for the single-state commands (evolve, eigenmode).
inline PotentialSpec potential_spec(const RunConfig& c) {
  switch (c.potential) {
    case PotentialKind::quadratic:
      return QuadraticImaginary{dimensionless(c).s};
    case PotentialKind::powerlaw:
      return PowerLaw{c.power_n, c.q_over_k, dimensionless(c).s};
    case PotentialKind::sinusoidal:
    default:
      return SinusoidalImaginary{dimensionless(c).s};
  }
}

}  // namespace chisel::config
