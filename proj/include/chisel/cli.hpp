#pragma once

// Command-line front end. Every subcommand reads a JSON config, writes CSV
// files with a header row and a JSON sidecar (config echo, version, seed).
// Exit codes: 0 success, 2 config error, 3 numerical failure, 64 usage.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "chisel/analytic.hpp"
#include "chisel/config.hpp"
#include "chisel/core.hpp"
#include "chisel/eigenmodes.hpp"
#include "chisel/harness.hpp"
#include "chisel/io.hpp"
#include "chisel/observables.hpp"
#include "chisel/propagator.hpp"

namespace chisel::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitUsage = 64;

namespace detail {

inline json complex_json(cplx z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

inline json fit_json(const FringeFit& f) {
  return json{{"offset", f.offset}, {"amplitude", f.amplitude}, {"theta", f.theta}, {"sigma_theta", f.sigma_theta}};
}

inline json scaling_json(const ScalingFit& f) {
  return json{{"slope", f.slope},
              {"stderr_slope", f.stderr_slope},
              {"intercept", f.intercept},
              {"predicted", f.predicted},
              {"consistent", f.consistent}};
}

inline json meta(const config::RunConfig& c, const std::string& command) {
  return json{{"artifact", "chisel"},
              {"version", io::kArtifactVersion},
              {"command", command},
              {"seed", c.averaging.seed},
              {"config", c.raw}};
}

inline fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
  return p;
}

inline double step_for(const config::RunConfig& c, const Grid& g, std::span<const double> V, double q = 0.0) {
  if (c.dtau > 0.0) return c.dtau;
  return harness::auto_dtau(g, *std::max_element(V.begin(), V.end()), q);
}

inline void write_state(const fs::path& path, const WaveState& st) {
  io::CsvWriter w(path, {"xi", "re", "im"});
  for (std::size_t j = 0; j < st.amplitudes.size(); ++j) {
    w.row({st.grid.xi(j), st.amplitudes[j].real(), st.amplitudes[j].imag()});
  }
  w.close();
}

}  // namespace detail

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<double> tau;
  int samples = 121;
  int n_max = 4;
  std::vector<double> omega0;
  std::optional<int> order;
  std::optional<int> phi_steps;
  std::optional<int> power_n;
};

inline void cmd_analytic(const config::RunConfig& c, const Options& o) {
  const auto d = config::dimensionless(c);
  const analytic::GaussianSolutionParams p(d.s);
  const fs::path out = detail::prepare_out(o.out);
  const double tau_max = o.tau.value_or(6.0 / p.omega0_bar());
  if (!(tau_max > 0.0) || o.samples < 2) throw ConfigError("analytic needs tau > 0 and samples >= 2");
  {
    io::CsvWriter w(out / "analytic.csv", {"tau", "width", "log_survival"});
    for (int i = 0; i < o.samples; ++i) {
      const double tau = tau_max * i / (o.samples - 1);
      // |cosh(beta tau)|^{-1} is the norm of the closed-form solution.
      const double ls = -std::real(analytic::detail::log_cosh(p.beta() * tau));
      w.row({tau, analytic::packet_width(tau, p), ls});
    }
    w.close();
  }
  const auto amps = analytic::asymptotic_order_amplitudes(o.n_max, p);
  {
    io::CsvWriter w(out / "orders.csv", {"order", "re", "im", "eta_ratio"});
    for (int n = 0; n <= o.n_max; ++n) {
      const auto a = amps[static_cast<std::size_t>(n)];
      w.row({static_cast<double>(n), a.real(), a.imag(), std::norm(a)});
    }
    w.close();
  }
  const auto sw = analytic::stationary_width(p);
  const auto qp = analytic::quadratic_phase_coefficient(p);
  json m = detail::meta(c, "analytic");
  m["results"] = {{"s", d.s},
                  {"omega0_bar", p.omega0_bar()},
                  {"alpha", detail::complex_json(p.alpha())},
                  {"beta", detail::complex_json(p.beta())},
                  {"stationary_width_exact", sw.exact},
                  {"stationary_width_quoted", sw.quoted_combination},
                  {"decay_rate", analytic::decay_rate(p)},
                  {"quadratic_phase", qp.sign * qp.magnitude},
                  {"phi2", analytic::phi2(p)}};
  m["warnings"] = d.warnings;
  io::write_json(out / "analytic.meta.json", m);
}

inline void cmd_evolve(const config::RunConfig& c, const Options& o) {
  const Grid g = config::grid(c);
  const auto d = config::dimensionless(c);
  if (c.potential != config::PotentialKind::powerlaw) check_resolution(d.s, g);
  const auto V = sample_potential(config::potential_spec(c), g);
  EvolveConfig ec;
  ec.tau_final = o.tau.value_or(c.tau_final);
  ec.dtau = detail::step_for(c, g, V);
  ec.observer_stride = 0;
  const auto tr = evolve(make_initial_state(g, c.initial), V, ec);
  const fs::path out = detail::prepare_out(o.out);
  detail::write_state(out / "state.csv", tr.final_state);
  {
    const std::size_t stride = c.observer_stride > 0 ? static_cast<std::size_t>(c.observer_stride) : 1;
    io::CsvWriter w(out / "survival.csv", {"tau", "log_survival"});
    for (std::size_t k = 0; k < tr.taus.size(); k += stride) w.row({tr.taus[k], tr.log_survival[k]});
    w.close();
  }
  {
    const auto spec = momentum_spectrum(tr.final_state);
    io::CsvWriter w(out / "spectrum.csv", {"kappa", "re", "im"});
    for (std::size_t m = 0; m < spec.kappa.size(); ++m) {
      w.row({spec.kappa[m], spec.amplitudes[m].real(), spec.amplitudes[m].imag()});
    }
    w.close();
  }
  json m = detail::meta(c, "evolve");
  m["results"] = {{"s", d.s},
                  {"tau_final", tr.final_state.tau},
                  {"dtau", ec.dtau},
                  {"steps", static_cast<long>(tr.taus.size()) - 1},
                  {"survival", survival(tr.final_state)}};
  m["warnings"] = d.warnings;
  io::write_json(out / "evolve.meta.json", m);
}

inline void write_curve(const fs::path& path, const harness::EfficiencyCurve& cv,
                        const std::vector<std::vector<double>>& eta, const std::vector<double>& surv) {
  io::CsvWriter w(path, {"dz_um", "order", "eta", "survival"});
  for (std::size_t i = 0; i < cv.dz_um.size(); ++i) {
    for (int n = -cv.n_max; n <= cv.n_max; ++n) {
      w.row({cv.dz_um[i], static_cast<double>(n), eta[i][static_cast<std::size_t>(n + cv.n_max)], surv[i]});
    }
  }
  w.close();
}

inline void cmd_diffraction(const config::RunConfig& c, const Options& o) {
  auto sc = config::sweep(c);
  if (sc.dz_um.empty()) throw ConfigError("diffraction needs 'dz_um'");
  const auto curves = harness::run_diffraction_sweep(sc);
  const auto& cv = curves.front();
  const fs::path out = detail::prepare_out(o.out);
  write_curve(out / "efficiencies.csv", cv, cv.eta, cv.survival);
  if (sc.raman_nath) write_curve(out / "raman_nath.csv", cv, cv.eta_raman_nath, cv.survival_raman_nath);
  json m = detail::meta(c, "diffraction");
  m["results"] = {{"s", cv.s}, {"omega0_over_gamma", cv.omega0_over_gamma}, {"tau_per_um", sc.beam.tau_of(1.0)}};
  m["warnings"] = cv.warnings;
  io::write_json(out / "efficiencies.meta.json", m);
}

inline void cmd_z0(const config::RunConfig& c, const Options& o) {
  auto sc = config::sweep(c);
  sc.s_override.reset();
  sc.omega0_over_gamma = !o.omega0.empty() ? o.omega0 : c.omega0_list;
  if (sc.omega0_over_gamma.empty()) throw ConfigError("z0 needs --omega0 or 'omega0_list'");
  if (sc.dz_um.empty()) throw ConfigError("z0 needs 'dz_um'");
  const auto res = harness::run_z0_sweep(sc);
  const fs::path out = detail::prepare_out(o.out);
  {
    io::CsvWriter w(out / "z0.csv", {"omega0_over_gamma", "z0_um"});
    for (std::size_t i = 0; i < res.z0_um.size(); ++i) w.row({res.omega0_over_gamma[i], res.z0_um[i]});
    w.close();
  }
  json m = detail::meta(c, "z0");
  if (res.omega0_over_gamma.size() >= 4) {
    m["results"] = detail::scaling_json(res.fit);
  } else {
    m["results"] = json{{"slope", nullptr}, {"note", "slope needs at least 4 Rabi frequencies"}};
  }
  json warnings = json::array();
  for (const auto& cv : res.curves) {
    for (const auto& w : cv.warnings) warnings.push_back(w);
  }
  m["warnings"] = warnings;
  io::write_json(out / "z0.meta.json", m);
}

inline void cmd_interfere(const config::RunConfig& c, const Options& o) {
  auto pc = config::protocol(c);
  if (!c.omega0_over_gamma && c.s) pc.sweep.s_override = *c.s;
  if (o.order) pc.order = *o.order;
  if (o.phi_steps) pc.phi_steps = *o.phi_steps;
  const auto res = harness::phase_protocol(pc);
  const fs::path out = detail::prepare_out(o.out);
  auto write_fringe = [&](const fs::path& path, const Fringe& f) {
    io::CsvWriter w(path, {"phi_s", "intensity"});
    for (std::size_t k = 0; k < f.phi_s.size(); ++k) w.row({f.phi_s[k], f.intensity[k]});
    w.close();
  };
  write_fringe(out / "fringe.csv", res.long_fringe);
  write_fringe(out / "fringe_ref.csv", res.ref_fringe);
  json m = detail::meta(c, "interfere");
  m["results"] = {{"s", res.s},
                  {"order", pc.order},
                  {"dz_long_um", pc.dz_long_um},
                  {"dz_ref_um", pc.dz_ref_um},
                  {"theta", res.result.long_fit.theta},
                  {"sigma_theta", res.result.long_fit.sigma_theta},
                  {"long_fit", detail::fit_json(res.result.long_fit)},
                  {"ref_fit", detail::fit_json(res.result.ref_fit)},
                  {"difference", res.result.difference},
                  {"magnitude", res.result.magnitude},
                  {"sigma", res.result.sigma}};
  if (pc.order == 3) m["results"]["phi2_estimate"] = res.result.magnitude / 3.0;
  m["warnings"] = res.warnings;
  io::write_json(out / "fringe.meta.json", m);
}

inline void cmd_eigenmode(const config::RunConfig& c, const Options& o) {
  const Grid g = config::grid(c);
  const auto d = config::dimensionless(c);
  if (c.potential != config::PotentialKind::powerlaw) check_resolution(d.s, g);
  const auto V = sample_potential(config::potential_spec(c), g);
  GroundModeOptions opt;
  opt.dtau = detail::step_for(c, g, V);
  const auto mode = ground_mode(V, g, opt);
  const fs::path out = detail::prepare_out(o.out);
  {
    io::CsvWriter w(out / "mode.csv", {"xi", "re", "im"});
    for (std::size_t j = 0; j < mode.mode.size(); ++j) w.row({g.xi(j), mode.mode[j].real(), mode.mode[j].imag()});
    w.close();
  }
  json m = detail::meta(c, "eigenmode");
  m["results"] = {{"s", d.s},
                  {"eigenvalue", detail::complex_json(mode.eigenvalue)},
                  {"propagator_eigenvalue", detail::complex_json(mode.propagator_eigenvalue)},
                  {"residual", mode.residual},
                  {"converged_tau", mode.converged_tau},
                  {"width", density_width(mode.mode, g, c.width_fraction)}};
  m["warnings"] = d.warnings;
  io::write_json(out / "mode.meta.json", m);
}

inline void cmd_scaling(const config::RunConfig& c, const Options& o) {
  auto pc = config::powerlaw(c);
  if (o.power_n) pc.n = *o.power_n;
  if (!o.omega0.empty()) pc.omega0_over_gamma = o.omega0;
  const auto res = harness::run_powerlaw_sweep(pc);
  const fs::path out = detail::prepare_out(o.out);
  {
    io::CsvWriter w(out / "scaling.csv", {"omega0_over_gamma", "s", "t0", "dx0"});
    for (const auto& p : res.points) w.row({p.omega0_over_gamma, p.s, p.t0, p.dx0});
    w.close();
  }
  json m = detail::meta(c, "scaling");
  m["results"] = {{"n", pc.n}};
  if (res.points.size() >= 4) {
    m["results"]["t0_fit"] = detail::scaling_json(res.t0_fit);
    m["results"]["dx0_fit"] = detail::scaling_json(res.dx0_fit);
  }
  io::write_json(out / "scaling.meta.json", m);
}

/// Runs the CLI; returns the process exit code.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"chisel: stationary wave packets in imaginary standing-wave potentials"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration")->required();
    sub->add_option("--out", o.out, "output directory");
  };
  auto* analytic = app.add_subcommand("analytic", "closed-form quadratic-potential results");
  add_common(analytic);
  analytic->add_option("--tau", o.tau, "largest tau sampled");
  analytic->add_option("--samples", o.samples, "number of tau samples");
  analytic->add_option("--n-max", o.n_max, "highest asymptotic order");
  auto* evolve_cmd = app.add_subcommand("evolve", "propagate the configured initial state");
  add_common(evolve_cmd);
  evolve_cmd->add_option("--tau", o.tau, "final tau (overrides tau_final)");
  auto* diffraction = app.add_subcommand("diffraction", "efficiencies versus interaction length");
  add_common(diffraction);
  auto* z0 = app.add_subcommand("z0", "z0 versus Rabi frequency");
  add_common(z0);
  z0->add_option("--omega0", o.omega0, "Omega0/Gamma values")->delimiter(',');
  auto* interfere = app.add_subcommand("interfere", "probe-grating fringe and phase protocol");
  add_common(interfere);
  interfere->add_option("--order", o.order, "detected diffraction order");
  interfere->add_option("--phi-steps", o.phi_steps, "number of probe positions");
  auto* eigen = app.add_subcommand("eigenmode", "slowest-decaying eigenmode");
  add_common(eigen);
  auto* scaling = app.add_subcommand("scaling", "power-law t0 and dx0 exponents");
  add_common(scaling);
  scaling->add_option("--n", o.power_n, "power-law index");
  scaling->add_option("--omega0", o.omega0, "Omega0/Gamma values")->delimiter(',');

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    const auto cfg = config::load_config(o.config);
    if (analytic->parsed()) cmd_analytic(cfg, o);
    if (evolve_cmd->parsed()) cmd_evolve(cfg, o);
    if (diffraction->parsed()) cmd_diffraction(cfg, o);
    if (z0->parsed()) cmd_z0(cfg, o);
    if (interfere->parsed()) cmd_interfere(cfg, o);
    if (eigen->parsed()) cmd_eigenmode(cfg, o);
    if (scaling->parsed()) cmd_scaling(cfg, o);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const nlohmann::json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, out, err);
}

}  // namespace chisel::cli
