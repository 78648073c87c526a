// Command-line front end for the log-gas laboratory.
//
// Exit codes: 0 all checks passed, 1 a verification failed (the report is
// still written), 2 configuration error, 3 numerical instability. Every
// report shares one shape: an envelope (command, config hash, timestamp),
// command-specific blocks, and a flat "results" array whose rows carry
// name/K/t/margin/z/pass so `loggas report` can consolidate any mix of them.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "loggas/dynamics.hpp"
#include "loggas/report.hpp"

namespace {

using loggas::ConfigError;
using loggas::ConfigReader;
using loggas::Configuration;
using loggas::ConditionalPotential;
using loggas::GridDensity;
using loggas::json;
using loggas::ScalarPotential;
using loggas::SdeConfig;
using loggas::VerificationReport;

// Stream/purpose tags for seeds derived from the master seed, so distinct
// components never share a generator stream.
constexpr std::uint64_t kPurposeSampler = 0x736d70;    // conditional sampler
constexpr std::uint64_t kPurposeSurrogate = 0x737572;  // exterior surrogate

std::string hash_preamble(const json& config) {
  return "# config_hash=" + loggas::config_hash(config) + "\n";
}

// ---------------------------------------------------------------------------
// Shared config fragments.
// ---------------------------------------------------------------------------

std::size_t require_count(ConfigReader& c, const std::string& key) {
  std::int64_t v = c.require_integer(key);
  if (v <= 0) throw ConfigError("config key " + key + ": expected a positive count");
  return static_cast<std::size_t>(v);
}

ConditionalPotential parse_potential(ConfigReader& c, std::uint64_t master) {
  const std::string kind = c.require_text("kind");
  const double beta = c.require_number("beta");
  const double r = c.number("r", 1.0);
  const double R = c.number("R", 3.0 * r);

  loggas::ExteriorConfiguration ext = loggas::ExteriorConfiguration::make(r, {});
  if (c.has("exterior")) {
    if (c.is_array("exterior")) {
      ext = loggas::ExteriorConfiguration::make(r, c.require_numbers("exterior"));
    } else {
      ConfigReader e = c.child("exterior");
      ConfigReader s = e.child("surrogate");
      const std::size_t n = require_count(s, "count");
      const double sbeta = s.number("beta", beta);
      const std::uint64_t stream = s.seed("stream", 0);
      s.finish();
      e.finish();
      ext = loggas::sample_exterior_cbe(
          sbeta, r, R, n, loggas::derive_seed(master, stream, kPurposeSurrogate));
    }
  }

  if (kind == "dyson" || kind == "dyson_log")
    return ConditionalPotential::dyson_log(beta, r, R, std::move(ext));
  if (kind == "riesz")
    return ConditionalPotential::riesz(beta, c.require_number("s"), r, R,
                                       std::move(ext));
  throw ConfigError("unknown potential kind: " + kind);
}

SdeConfig parse_sde(ConfigReader& c, std::uint64_t master) {
  SdeConfig sde;
  sde.seed = master;
  if (!c.has("sde")) return sde;
  ConfigReader s = c.child("sde");
  sde.dt = s.number("dt", sde.dt);
  sde.t_final = s.number("t_final", sde.t_final);
  sde.substep_cap = static_cast<int>(s.integer("substep_cap", sde.substep_cap));
  sde.max_projection_fraction =
      s.number("max_projection_fraction", sde.max_projection_fraction);
  sde.record_stride = s.count("record_stride", sde.record_stride);
  s.finish();
  return sde;
}

Configuration parse_configuration(ConfigReader& c, const std::string& key) {
  return Configuration(c.require_numbers(key));
}

// ---------------------------------------------------------------------------
// Report assembly.
// ---------------------------------------------------------------------------

json row_of(const VerificationReport& r) {
  std::string name = r.inequality;
  if (!r.observable.empty()) name += ":" + r.observable;
  return loggas::result_row(name, r.curvature, r.t, r.margin, r.z, r.pass);
}

void print_rows(const json& results) {
  for (const auto& row : results) {
    std::printf("%-44s K=%-6g t=%-6g margin=%- 12.5g z=%- 10.4g %s\n",
                row["name"].get<std::string>().c_str(),
                row["K"].get<double>(), row["t"].get<double>(),
                row["margin"].get<double>(), row["z"].get<double>(),
                row["pass"].get<bool>() ? "pass" : "FAIL");
  }
}

int finish_command(const std::string& command, const json& config, json body,
                   json results, const std::string& report_path) {
  json doc = loggas::report_envelope(command, config);
  doc["config"] = config;
  for (auto& [key, value] : body.items()) doc[key] = std::move(value);
  bool all = true;
  for (const auto& row : results) all = all && row["pass"].get<bool>();
  doc["results"] = std::move(results);
  doc["all_pass"] = all;
  loggas::write_text_file(report_path, doc.dump(2) + "\n");
  print_rows(doc["results"]);
  std::printf("%s: %s -> %s\n", command.c_str(), all ? "all pass" : "FAILURES",
              report_path.c_str());
  return all ? 0 : 1;
}

// ---------------------------------------------------------------------------
// convexity: randomized certificate driven by direct flags.
// ---------------------------------------------------------------------------

struct ConvexityArgs {
  std::string kind = "dyson";
  double beta = 2.0;
  double s = 0.5;
  bool has_s = false;
  std::size_t k = 2;
  std::size_t trials = 1000;
  std::size_t directions = 10;
  std::uint64_t seed = 1;
  double r = 1.0;
  double R = 0.0;
  std::vector<double> exterior;
  std::string out = "convexity_report.json";
};

int run_convexity(const ConvexityArgs& a) {
  const double R = a.R > 0 ? a.R : 3.0 * a.r;
  json config;
  config["kind"] = a.kind;
  config["beta"] = a.beta;
  if (a.has_s) config["s"] = a.s;
  config["k"] = a.k;
  config["trials"] = a.trials;
  config["directions"] = a.directions;
  config["seed"] = a.seed;
  config["r"] = a.r;
  config["R"] = R;
  config["exterior"] = a.exterior;

  auto ext = loggas::ExteriorConfiguration::make(a.r, a.exterior);
  ConditionalPotential pot = [&] {
    if (a.kind == "dyson" || a.kind == "dyson_log")
      return ConditionalPotential::dyson_log(a.beta, a.r, R, std::move(ext));
    if (a.kind == "riesz") {
      if (!a.has_s) throw ConfigError("riesz potential needs --s");
      return ConditionalPotential::riesz(a.beta, a.s, a.r, R, std::move(ext));
    }
    throw ConfigError("unknown potential kind: " + a.kind);
  }();

  auto rep = loggas::certify_convexity(pot, a.k, a.trials, a.directions, a.seed);
  json results = json::array();
  results.push_back(loggas::result_row(
      "hessian-form:" + rep.potential, 0.0, 0.0,
      rep.min_quadratic_form - rep.hessian_tolerance, 0.0, rep.hessian_pass()));
  results.push_back(loggas::result_row(
      "midpoint-convexity:" + rep.potential, 0.0, 0.0,
      rep.min_midpoint_slack_rel - rep.midpoint_tolerance, 0.0,
      rep.midpoint_pass()));
  json body;
  body["convexity"] = loggas::to_json(rep);
  return finish_command("convexity", config, std::move(body),
                        std::move(results), a.out);
}

// ---------------------------------------------------------------------------
// sample: equilibrium draws from the conditional measure.
// ---------------------------------------------------------------------------

int run_sample(const std::string& config_path, std::string out,
               std::string report_path) {
  json config = loggas::read_json_file(config_path);
  ConfigReader c(config, "");
  const std::uint64_t master = c.seed("seed", 1);

  ConfigReader pc = c.child("potential");
  ConditionalPotential pot = parse_potential(pc, master);
  pc.finish();
  const std::size_t k = require_count(c, "k");

  loggas::SamplerConfig scfg;
  scfg.seed = loggas::derive_seed(master, 0, kPurposeSampler);
  if (c.has("sampler")) {
    ConfigReader s = c.child("sampler");
    const std::string scheme = s.text("scheme", "metropolis");
    if (scheme == "metropolis")
      scfg.scheme = loggas::SamplerScheme::Metropolis;
    else if (scheme == "mala")
      scfg.scheme = loggas::SamplerScheme::Mala;
    else
      throw ConfigError("unknown sampler scheme: " + scheme);
    scfg.n_samples = s.count("n_samples", scfg.n_samples);
    scfg.burn_in = s.count("burn_in", scfg.burn_in);
    scfg.thinning = s.count("thinning", scfg.thinning);
    scfg.step_size = s.number("step_size", scfg.step_size);
    scfg.adapt = s.flag("adapt", scfg.adapt);
    s.finish();
  }
  if (out.empty()) out = c.text("out", "samples.csv");
  c.finish();

  loggas::SamplerDiagnostics diag;
  auto samples = loggas::sample_conditional(pot, k, scfg, &diag);

  std::ostringstream csv;
  csv << hash_preamble(config);
  loggas::write_configurations_csv(csv, samples);
  loggas::write_text_file(out, csv.str());

  json body;
  body["potential"] = pot.name();
  body["n_samples"] = samples.size();
  body["samples_out"] = out;
  body["sampler"] = loggas::to_json(diag);
  return finish_command("sample", config, std::move(body), json::array(),
                        report_path);
}

// ---------------------------------------------------------------------------
// evolve: reflected interacting SDE paths from a fixed start.
// ---------------------------------------------------------------------------

int run_evolve(const std::string& config_path, std::string out,
               std::string report_path) {
  json config = loggas::read_json_file(config_path);
  ConfigReader c(config, "");
  const std::uint64_t master = c.seed("seed", 1);

  ConfigReader pc = c.child("potential");
  ConditionalPotential pot = parse_potential(pc, master);
  pc.finish();

  Configuration gamma0 = parse_configuration(c, "initial");
  const std::size_t n_paths = c.count("n_paths", 1);
  SdeConfig sde = parse_sde(c, master);
  if (out.empty()) out = c.text("out", "trajectory.csv");
  c.finish();

  std::vector<loggas::Trajectory> paths;
  paths.reserve(n_paths);
  loggas::StepStats total;
  for (std::size_t p = 0; p < n_paths; ++p) {
    paths.push_back(loggas::evolve(gamma0, pot, sde, p));
    total.merge(paths.back().stats);
  }
  loggas::write_trajectory_csv(out, paths, hash_preamble(config));

  json body;
  body["potential"] = pot.name();
  body["n_paths"] = n_paths;
  body["t_final"] = sde.t_final;
  body["trajectory_out"] = out;
  body["stats"] = loggas::to_json(total);
  return finish_command("evolve", config, std::move(body), json::array(),
                        report_path);
}

// ---------------------------------------------------------------------------
// verify: Monte-Carlo functional-inequality checks along the diffusion.
// ---------------------------------------------------------------------------

int run_verify(const std::string& what, const std::string& config_path,
               int threads_flag, const std::string& report_path) {
  json config = loggas::read_json_file(config_path);
  ConfigReader c(config, "");
  const std::uint64_t master = c.seed("seed", 1);

  ConfigReader pc = c.child("potential");
  ConditionalPotential pot = parse_potential(pc, master);
  pc.finish();

  std::vector<double> times;
  if (c.has("times"))
    times = c.require_numbers("times");
  else
    times = {c.require_number("t")};
  if (times.empty()) throw ConfigError("config key times: expected at least one time");

  const double K = c.number("K", 0.0);
  const std::size_t n_paths = c.count("n_paths", 100000);
  SdeConfig sde = parse_sde(c, master);
  const int threads =
      loggas::resolve_threads(threads_flag > 0
                                  ? threads_flag
                                  : static_cast<int>(c.integer("threads", 0)));

  json results = json::array();
  json reports = json::array();

  if (what == "lipschitz") {
    std::vector<std::pair<Configuration, Configuration>> pairs;
    if (c.has("pairs")) {
      const json& arr = c.raw("pairs");
      if (!arr.is_array())
        throw ConfigError("config key pairs: expected an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        ConfigReader p(arr[i], "pairs[" + std::to_string(i) + "]");
        pairs.emplace_back(Configuration(p.require_numbers("gamma")),
                           Configuration(p.require_numbers("eta")));
        p.finish();
      }
    } else {
      pairs.emplace_back(parse_configuration(c, "gamma"),
                         parse_configuration(c, "eta"));
    }
    if (pairs.empty()) throw ConfigError("config key pairs: expected at least one pair");
    const std::size_t k = pairs.front().first.count();
    auto u = loggas::make_builtin_observable(
        c.text("observable", "smooth-occupancy"), pot.window(), k);
    c.finish();
    for (double t : times) {
      auto rep = loggas::verify_lipschitz_contraction(u, pairs, t, pot, K, sde,
                                                      n_paths, threads);
      reports.push_back(loggas::to_json(rep));
      results.push_back(row_of(rep));
    }
  } else if (what == "expmoment") {
    Configuration gamma = parse_configuration(c, "gamma");
    const double s_exp = c.require_number("s");
    auto u = loggas::make_builtin_observable(
        c.text("observable", "scaled-mean"), pot.window(), gamma.count());
    c.finish();
    for (double t : times) {
      auto rep =
          loggas::exp_moment(u, gamma, t, s_exp, pot, sde, n_paths, threads);
      reports.push_back(loggas::to_json(rep));
      // Inside the strict threshold the estimate must stabilize; outside it
      // the bound promises nothing, so the row cannot fail there.
      const bool pass = !rep.within_strict || rep.stable;
      results.push_back(loggas::result_row(
          "exponential-moment:" + rep.observable, K, t,
          rep.threshold_strict - s_exp, 0.0, pass));
    }
  } else {
    Configuration gamma = parse_configuration(c, "gamma");
    auto u = loggas::make_builtin_observable(
        c.text("observable", "smooth-occupancy"), pot.window(), gamma.count());
    if (what == "be" || what == "poincare") {
      const double fd_eps = c.number("fd_eps", 1e-4);
      c.finish();
      for (double t : times) {
        auto rep = what == "be"
                       ? loggas::verify_be(u, gamma, t, pot, K, sde, n_paths,
                                           fd_eps, threads)
                       : loggas::verify_poincare(u, gamma, t, pot, K, sde,
                                                 n_paths, fd_eps, threads);
        reports.push_back(loggas::to_json(rep));
        results.push_back(row_of(rep));
      }
    } else if (what == "harnack") {
      Configuration eta = parse_configuration(c, "eta");
      const double alpha = c.number("alpha", 2.0);
      c.finish();
      for (double t : times) {
        auto rep = loggas::verify_harnack(u, gamma, eta, alpha, t, pot, K, sde,
                                          n_paths, threads);
        reports.push_back(loggas::to_json(rep));
        results.push_back(row_of(rep));
      }
    } else if (what == "log-harnack") {
      Configuration eta = parse_configuration(c, "eta");
      const double log_eps = c.number("log_eps", 1e-3);
      c.finish();
      for (double t : times) {
        auto rep = loggas::verify_log_harnack(u, gamma, eta, t, pot, K,
                                              log_eps, sde, n_paths, threads);
        reports.push_back(loggas::to_json(rep));
        results.push_back(row_of(rep));
      }
    } else {
      throw ConfigError("unknown verify target: " + what);
    }
  }

  json body;
  body["check"] = what;
  body["potential"] = pot.name();
  body["n_paths"] = n_paths;
  body["reports"] = std::move(reports);
  return finish_command("verify", config, std::move(body), std::move(results),
                        report_path);
}

// ---------------------------------------------------------------------------
// flow: deterministic density evolution and entropy-transport diagnostics.
// ---------------------------------------------------------------------------

struct ScalarSetup {
  ScalarPotential psi;
  double r = 1.0;
};

ScalarSetup parse_scalar_potential(ConfigReader& c, std::uint64_t master) {
  ConfigReader pc = c.child("potential");
  const std::string kind = pc.require_text("kind");
  ScalarSetup out;
  if (kind == "quadratic") {
    const double stiffness = pc.require_number("stiffness");
    const double center = pc.number("center", 0.0);
    out.r = pc.number("r", 1.0);
    out.psi = loggas::quadratic_well(stiffness, center);
  } else if (kind == "flat") {
    out.r = pc.number("r", 1.0);
    out.psi = loggas::quadratic_well(0.0);
  } else {
    // One-particle restriction of an interacting potential: the external
    // field is carried entirely by the exterior points.
    ConditionalPotential pot = parse_potential(pc, master);
    out.r = pot.window();
    out.psi = loggas::one_particle_potential(pot);
  }
  pc.finish();
  return out;
}

GridDensity parse_density(ConfigReader d, const ScalarSetup& s,
                          std::size_t cells) {
  const std::string type = d.require_text("type");
  GridDensity out;
  if (type == "uniform") {
    out = GridDensity::uniform(s.r, cells);
  } else if (type == "gibbs") {
    out = GridDensity::gibbs(s.psi, s.r, cells);
  } else if (type == "gaussian") {
    const double mean = d.number("mean", 0.0);
    const double sigma = d.require_number("sigma");
    if (!(sigma > 0)) throw ConfigError("gaussian density needs sigma > 0");
    out = GridDensity::from_function(s.r, cells, [=](double x) {
      const double u = (x - mean) / sigma;
      return std::exp(-0.5 * u * u);
    });
  } else {
    throw ConfigError("unknown density type: " + type);
  }
  d.finish();
  return out;
}

std::string residual_csv(const loggas::ResidualTable& rt, const json& config) {
  std::ostringstream out;
  out << hash_preamble(config) << "t,lhs,rhs,residual\n";
  for (std::size_t i = 0; i < rt.times.size(); ++i)
    out << loggas::format_double(rt.times[i]) << ","
        << loggas::format_double(rt.lhs[i]) << ","
        << loggas::format_double(rt.rhs[i]) << ","
        << loggas::format_double(rt.residual[i]) << "\n";
  return out.str();
}

std::string displacement_csv(const loggas::DisplacementReport& rep,
                             const json& config) {
  std::ostringstream out;
  out << hash_preamble(config) << "t,slack\n";
  for (std::size_t i = 0; i < rep.ts.size(); ++i)
    out << loggas::format_double(rep.ts[i]) << ","
        << loggas::format_double(rep.slack[i]) << "\n";
  return out.str();
}

int run_flow(const std::string& what, const std::string& config_path,
             std::string out, const std::string& report_path) {
  json config = loggas::read_json_file(config_path);
  ConfigReader c(config, "");
  const std::uint64_t master = c.seed("seed", 1);
  ScalarSetup setup = parse_scalar_potential(c, master);
  const std::size_t cells = c.count("cells", 256);

  json body;
  body["flow"] = what;
  json results = json::array();

  if (what == "fp" || what == "jko") {
    GridDensity p0 = parse_density(c.child("initial"), setup, cells);
    const double t = c.require_number("t");
    GridDensity evolved;
    if (what == "fp") {
      const double dt = c.require_number("dt");
      c.finish();
      loggas::FpStats stats;
      evolved = loggas::fokker_planck_evolve(p0, setup.psi, t, dt, &stats);
      json fs;
      fs["steps"] = stats.steps;
      fs["max_coefficient"] = stats.max_coefficient;
      body["fp"] = std::move(fs);
    } else {
      const double tau = c.require_number("tau");
      const std::size_t m = c.count("quantiles", 256);
      c.finish();
      loggas::JkoStats stats;
      evolved = loggas::jko_trajectory(p0, setup.psi, {t}, tau, m, &stats)
                    .states.back();
      json js;
      js["newton_iterations"] = stats.newton_iterations;
      js["objective"] = stats.objective;
      body["jko"] = std::move(js);
    }
    if (out.empty()) out = "flow.csv";
    loggas::write_density_csv(out, evolved, hash_preamble(config));
    const double mass = evolved.mass();
    body["t"] = t;
    body["mass"] = mass;
    body["entropy"] = loggas::entropy(evolved, setup.psi);
    body["density_out"] = out;
    results.push_back(loggas::result_row("mass-conservation", 0.0, t,
                                         1e-9 - std::abs(mass - 1.0), 0.0,
                                         std::abs(mass - 1.0) <= 1e-9));
  } else if (what == "evi") {
    GridDensity sigma0 = parse_density(c.child("initial"), setup, cells);
    GridDensity nu = c.has("target")
                         ? parse_density(c.child("target"), setup, cells)
                         : GridDensity::gibbs(setup.psi, setup.r, cells);
    std::vector<double> times = c.require_numbers("times");
    const double dt = c.require_number("dt");
    const double K = c.number("K", 0.0);
    const double tol = c.number("tolerance", 5e-3);
    c.finish();
    auto rt = loggas::verify_evi(setup.psi, sigma0, nu, times, K, dt, tol);
    if (out.empty()) out = "flow.csv";
    loggas::write_text_file(out, residual_csv(rt, config));
    body["evi"] = loggas::to_json(rt);
    body["residuals_out"] = out;
    results.push_back(loggas::result_row("evi", K, times.back(),
                                         rt.worst + tol, 0.0, rt.pass));
  } else if (what == "dissipation") {
    GridDensity p0 = parse_density(c.child("initial"), setup, cells);
    std::vector<double> times = c.require_numbers("times");
    const double dt = c.require_number("dt");
    const double tol = c.number("tolerance", 0.02);
    c.finish();
    auto rt = loggas::verify_dissipation(setup.psi, p0, times, dt, tol);
    if (out.empty()) out = "flow.csv";
    loggas::write_text_file(out, residual_csv(rt, config));
    body["dissipation"] = loggas::to_json(rt);
    body["residuals_out"] = out;
    results.push_back(loggas::result_row("entropy-dissipation", 0.0,
                                         times.back(), tol - rt.worst, 0.0,
                                         rt.pass));
  } else if (what == "dispconv") {
    GridDensity p0 = parse_density(c.child("p0"), setup, cells);
    GridDensity p1 = parse_density(c.child("p1"), setup, cells);
    const std::size_t samples = c.count("samples", 9);
    const double K = c.number("K", 0.0);
    const std::size_t m = c.count("quantiles", 1024);
    const double tol = c.number("tolerance", 5e-3);
    c.finish();
    auto rep =
        loggas::verify_displacement_convexity(setup.psi, p0, p1, samples, K, m, tol);
    if (out.empty()) out = "flow.csv";
    loggas::write_text_file(out, displacement_csv(rep, config));
    body["dispconv"] = loggas::to_json(rep);
    body["slack_out"] = out;
    results.push_back(loggas::result_row("displacement-convexity", K, 1.0,
                                         rep.min_slack + tol, 0.0, rep.pass));
  } else {
    throw ConfigError("unknown flow target: " + what);
  }

  return finish_command("flow", config, std::move(body), std::move(results),
                        report_path);
}

// ---------------------------------------------------------------------------
// report: consolidate result rows from any set of report files.
// ---------------------------------------------------------------------------

int run_report(const std::vector<std::string>& inputs, const std::string& out,
               const std::string& json_out) {
  std::vector<json> docs;
  docs.reserve(inputs.size());
  for (const auto& path : inputs) docs.push_back(loggas::read_json_file(path));
  loggas::Summary s = loggas::summarize_reports(docs);

  json config;
  config["inputs"] = inputs;
  loggas::write_text_file(out, hash_preamble(config) + s.csv);

  json doc = loggas::report_envelope("report", config);
  doc["rows"] = s.doc["rows"];
  doc["all_pass"] = s.all_pass;
  loggas::write_text_file(json_out, doc.dump(2) + "\n");

  std::printf("report: %zu rows, %s -> %s\n", s.rows,
              s.all_pass ? "all pass" : "FAILURES", out.c_str());
  return s.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite-volume laboratory for interacting-particle diffusions"};
  app.require_subcommand(1);

  ConvexityArgs conv;
  auto* conv_cmd = app.add_subcommand(
      "convexity", "randomized convexity certificate for a potential");
  conv_cmd->add_option("--kind", conv.kind, "dyson | riesz");
  conv_cmd->add_option("--beta", conv.beta, "inverse temperature");
  auto* s_opt = conv_cmd->add_option("--s", conv.s, "riesz exponent in (0,1)");
  conv_cmd->add_option("--k", conv.k, "number of interior particles");
  conv_cmd->add_option("--trials", conv.trials, "sampled configurations");
  conv_cmd->add_option("--directions", conv.directions,
                       "directions per configuration");
  conv_cmd->add_option("--seed", conv.seed, "master seed");
  conv_cmd->add_option("--r", conv.r, "window half-width");
  conv_cmd->add_option("--R", conv.R, "exterior cutoff (default 3r)");
  conv_cmd->add_option("--exterior", conv.exterior,
                       "fixed exterior points (|y| in (r, R])");
  conv_cmd->add_option("--out", conv.out, "report path");

  std::string sample_config, sample_out, sample_report = "sample_report.json";
  auto* sample_cmd =
      app.add_subcommand("sample", "draw equilibrium configurations");
  sample_cmd->add_option("--config", sample_config, "JSON experiment file")
      ->required();
  sample_cmd->add_option("--out", sample_out, "samples CSV path");
  sample_cmd->add_option("--report", sample_report, "report path");

  std::string evolve_config, evolve_out, evolve_report = "evolve_report.json";
  auto* evolve_cmd =
      app.add_subcommand("evolve", "integrate reflected interacting SDE paths");
  evolve_cmd->add_option("--config", evolve_config, "JSON experiment file")
      ->required();
  evolve_cmd->add_option("--out", evolve_out, "trajectory CSV path");
  evolve_cmd->add_option("--report", evolve_report, "report path");

  std::string verify_what, verify_config, verify_report = "verify_report.json";
  int verify_threads = 0;
  auto* verify_cmd = app.add_subcommand(
      "verify", "Monte-Carlo functional-inequality checks");
  verify_cmd
      ->add_option("what", verify_what,
                   "be | poincare | harnack | log-harnack | lipschitz | expmoment")
      ->required()
      ->check(CLI::IsMember({"be", "poincare", "harnack", "log-harnack",
                             "lipschitz", "expmoment"}));
  verify_cmd->add_option("--config", verify_config, "JSON experiment file")
      ->required();
  verify_cmd->add_option("--report", verify_report, "report path");
  verify_cmd->add_option("--threads", verify_threads,
                         "worker threads (0: LOGGAS_THREADS or hardware)");

  std::string flow_what, flow_config, flow_out, flow_report = "flow_report.json";
  auto* flow_cmd = app.add_subcommand(
      "flow", "density evolution and entropy-transport diagnostics");
  flow_cmd
      ->add_option("what", flow_what, "fp | jko | evi | dissipation | dispconv")
      ->required()
      ->check(CLI::IsMember({"fp", "jko", "evi", "dissipation", "dispconv"}));
  flow_cmd->add_option("--config", flow_config, "JSON experiment file")
      ->required();
  flow_cmd->add_option("--out", flow_out, "output CSV path");
  flow_cmd->add_option("--report", flow_report, "report path");

  std::vector<std::string> report_inputs;
  std::string report_out = "summary.csv", report_json = "summary.json";
  auto* report_cmd =
      app.add_subcommand("report", "consolidate report files into one table");
  report_cmd->add_option("inputs", report_inputs, "report JSON files");
  report_cmd->add_option("--out", report_out, "summary CSV path");
  report_cmd->add_option("--json", report_json, "summary JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    conv.has_s = s_opt->count() > 0;
    if (conv_cmd->parsed()) return run_convexity(conv);
    if (sample_cmd->parsed())
      return run_sample(sample_config, sample_out, sample_report);
    if (evolve_cmd->parsed())
      return run_evolve(evolve_config, evolve_out, evolve_report);
    if (verify_cmd->parsed())
      return run_verify(verify_what, verify_config, verify_threads,
                        verify_report);
    if (flow_cmd->parsed())
      return run_flow(flow_what, flow_config, flow_out, flow_report);
    if (report_cmd->parsed())
      return run_report(report_inputs, report_out, report_json);
    std::cerr << "no subcommand selected\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const loggas::NumericalInstabilityError& e) {
    std::cerr << "numerical instability: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
