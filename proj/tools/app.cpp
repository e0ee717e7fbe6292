#include "app.hpp"

#include "lawsde/catalog.hpp"
#include "lawsde/config.hpp"
#include "lawsde/detail/format.hpp"
#include "lawsde/girsanov.hpp"
#include "lawsde/lyapunov.hpp"
#include "lawsde/mollify.hpp"
#include "lawsde/oracle.hpp"
#include "lawsde/solver.hpp"
#include "lawsde/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

namespace lawsde::app {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- key sets

const std::set<std::string> kSimKeys = {"N", "dt", "T", "tau", "seed", "estimator", "estimator.cell_width"};
const std::set<std::string> kOutputKeys = {"output.path", "output.particle_stride", "output.time_stride"};
const std::set<std::string> kInitKeys = {"init.kind",    "init.point", "init.mean", "init.sd",
                                         "init.weights", "init.means", "init.sds",  "init.table"};
const std::set<std::string> kCertKeys = {"certificate.V", "certificate.C", "certificate.alpha", "certificate.p"};
const std::set<std::string> kGridKeys = {"grid.lo", "grid.hi", "grid.step", "grid.times"};

std::set<std::string> coefficient_keys(const std::string& prefix) {
  std::set<std::string> keys;
  for (const char* k : {"name", "dim", "theta", "sigma", "shift", "c"}) keys.insert(prefix + "." + k);
  return keys;
}

std::set<std::string> merge(std::initializer_list<std::set<std::string>> sets) {
  std::set<std::string> out;
  for (const auto& s : sets) out.insert(s.begin(), s.end());
  return out;
}

// ---------------------------------------------------------------- builders

/// Wraps library argument errors so they exit as configuration errors.
template <typename F>
auto as_config(const std::string& context, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(context + ": " + e.what());
  }
}

SimConfig sim_config(const Config& c, std::vector<std::string>& warnings) {
  SimConfig s;
  const std::uint64_t n = c.unsigned_integer("N");
  if (n == 0) throw ConfigError("key 'N' must be at least 1");
  s.particles = n;
  s.dt = c.number("dt");
  s.horizon = c.number("T");
  s.tau = c.number("tau", 0.0);
  s.seed = c.unsigned_integer("seed", 0);
  const std::string est = c.string("estimator", "atoms");
  if (est == "atoms") s.estimator = SimConfig::Estimator::kAtoms;
  else if (est == "grid") s.estimator = SimConfig::Estimator::kGrid;
  else throw ConfigError("key 'estimator': expected atoms or grid, got '" + est + "'");
  s.cell_width = c.number("estimator.cell_width", 0.05);
  warnings = as_config("simulation settings", [&] { return s.validate(); });
  return s;
}

CatalogParams catalog_params(const Config& c, const std::string& prefix) {
  CatalogParams p;
  p.dim = static_cast<int>(c.unsigned_integer(prefix + ".dim", 1));
  if (p.dim < 1 || p.dim > kMaxDim) throw ConfigError("key '" + prefix + ".dim' must be 1, 2 or 3");
  p.theta = c.number(prefix + ".theta", p.theta);
  p.sigma = c.number(prefix + ".sigma", p.sigma);
  p.shift = c.number(prefix + ".shift", p.shift);
  p.c = c.number(prefix + ".c", p.c);
  return p;
}

std::string known_families() {
  std::string s = "delay-mean";
  for (const auto& n : CoefficientCatalog::instance().names()) s += ", " + n;
  return s;
}

/// beta_tilde(t, s, x, y) = theta y against mu_{t - tau}, sigma = s I.
DelayedCoefficients delay_mean(const CatalogParams& p, double tau) {
  DelayedCoefficients dc;
  const int d = p.dim;
  const double theta = p.theta;
  dc.drift.dim = d;
  dc.drift.noise_dim = d;
  dc.drift.tau = tau;
  dc.drift.kappa = {{-tau, 1.0}};
  dc.drift.name = "delay-mean";
  dc.drift.beta_tilde = [theta](double, double, const PathView&, std::span<const double> y) -> Vector {
    Vector v(static_cast<Eigen::Index>(y.size()));
    for (std::size_t a = 0; a < y.size(); ++a) v[static_cast<Eigen::Index>(a)] = theta * y[a];
    return v;
  };
  dc.drift.separable.push_back(
      {[theta, d](double, double, const PathView&) -> Matrix { return theta * Matrix::Identity(d, d); },
       [](double, double, std::span<const double> y) -> Vector {
         Vector v(static_cast<Eigen::Index>(y.size()));
         for (std::size_t a = 0; a < y.size(); ++a) v[static_cast<Eigen::Index>(a)] = y[a];
         return v;
       }});
  dc.dispersion = DispersionSpec::constant(p.sigma * Matrix::Identity(d, d), "delay-mean");
  return dc;
}

CoefficientSet build_coefficients(const Config& c, const std::string& prefix, double tau) {
  const std::string name = c.string(prefix + ".name");
  const CatalogParams p = catalog_params(c, prefix);
  if (name == "delay-mean") {
    if (!(tau > 0.0)) throw ConfigError("coefficient family 'delay-mean' needs tau > 0");
    return delay_mean(p, tau);
  }
  if (!CoefficientCatalog::instance().contains(name)) {
    throw ConfigError("key '" + prefix + ".name': unknown coefficient family '" + name + "' (known: " +
                      known_families() + ")");
  }
  return as_config(prefix, [&] { return make_pairwise(name, p); });
}

PairwiseMeanFieldSpec build_pairwise(const Config& c, const std::string& prefix) {
  const std::string name = c.string(prefix + ".name");
  if (!CoefficientCatalog::instance().contains(name)) {
    throw ConfigError("key '" + prefix + ".name': '" + name + "' is not a pairwise catalog family");
  }
  return as_config(prefix, [&] { return make_pairwise(name, catalog_params(c, prefix)); });
}

Vector to_vector(const std::vector<double>& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

std::vector<std::vector<double>> read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("key 'init.table': cannot read " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Config tmp;
    tmp.set("row", line);
    rows.push_back(tmp.numbers("row"));
  }
  return rows;
}

InitialLaw initial_law(const Config& c, int dim) {
  const std::string kind = c.string("init.kind", "point");
  const auto check_dim = [&](const std::vector<double>& v, const char* key) {
    if (v.size() != static_cast<std::size_t>(dim))
      throw ConfigError(std::string("key '") + key + "' needs " + std::to_string(dim) + " entries");
  };
  return as_config("initial law", [&]() -> InitialLaw {
    if (kind == "point") {
      const auto p = c.numbers("init.point", std::vector<double>(static_cast<std::size_t>(dim), 0.0));
      check_dim(p, "init.point");
      return InitialLaw::point(to_vector(p));
    }
    if (kind == "gaussian") {
      const auto m = c.numbers("init.mean", std::vector<double>(static_cast<std::size_t>(dim), 0.0));
      check_dim(m, "init.mean");
      return InitialLaw::gaussian(to_vector(m), c.number("init.sd"));
    }
    if (kind == "mixture") {
      const auto w = c.numbers("init.weights");
      const auto flat = c.numbers("init.means");
      const auto s = c.numbers("init.sds");
      if (flat.size() != w.size() * static_cast<std::size_t>(dim))
        throw ConfigError("key 'init.means' needs one mean of dimension " + std::to_string(dim) + " per weight");
      std::vector<Vector> means;
      for (std::size_t k = 0; k < w.size(); ++k)
        means.push_back(to_vector({flat.begin() + static_cast<std::ptrdiff_t>(k * dim),
                                   flat.begin() + static_cast<std::ptrdiff_t>((k + 1) * dim)}));
      return InitialLaw::mixture(w, means, s);
    }
    if (kind == "table") return InitialLaw::table(dim, read_table(c.string("init.table")));
    throw ConfigError("key 'init.kind': expected point, gaussian, mixture or table, got '" + kind + "'");
  });
}

LyapunovFunction lyapunov_function(const Config& c) {
  const std::string kind = c.string("certificate.V", "quadratic");
  return as_config("certificate", [&] {
    if (kind == "quadratic") return LyapunovFunction::quadratic();
    if (kind == "polynomial") return LyapunovFunction::polynomial(c.number("certificate.alpha", 2.0));
    if (kind == "exponential")
      return LyapunovFunction::exponential(c.number("certificate.alpha", 1.0), c.number("certificate.p", 1.0));
    throw ConfigError("key 'certificate.V': expected quadratic, polynomial or exponential, got '" + kind + "'");
  });
}

WeightFunction weight_function(const Config& c) {
  const std::string kind = c.string("phi.kind", "polynomial");
  return as_config("phi", [&] {
    if (kind == "polynomial") return WeightFunction::polynomial(c.number("phi.alpha", 2.0));
    if (kind == "exponential") return WeightFunction::exponential(c.number("phi.alpha", 1.0), c.number("phi.p", 1.0));
    if (kind == "constant") return WeightFunction::constant(1.0);
    throw ConfigError("key 'phi.kind': expected polynomial, exponential or constant, got '" + kind + "'");
  });
}

SampleDomain sample_domain(const Config& c, int dim) {
  const double lo = c.number("grid.lo", -5.0);
  const double hi = c.number("grid.hi", 5.0);
  const double step = c.number("grid.step", 0.1);
  if (!(hi > lo) || !(step > 0.0)) throw ConfigError("grid needs grid.hi > grid.lo and grid.step > 0");
  return SampleDomain::grid(dim, lo, hi, step, c.numbers("grid.times", {0.0}));
}

std::size_t stride(const Config& c, const std::string& key) {
  const auto s = c.unsigned_integer(key, 1);
  if (s == 0) throw ConfigError("key '" + key + "' must be positive");
  return s;
}

// ---------------------------------------------------------------- output

struct Run {
  std::string subcommand;
  Config config;  // resolved: includes the effective seed
  fs::path out;
};

json header(const Run& run) {
  json j;
  j["artifact"] = kArtifactName;
  j["artifact_version"] = kArtifactVersion;
  j["subcommand"] = run.subcommand;
  json cfg = json::object();
  for (const auto& [k, v] : run.config.entries()) cfg[k] = v;
  j["config"] = cfg;
  j["seed"] = run.config.unsigned_integer("seed", 0);
  return j;
}

std::string csv_preamble(const Run& run) {
  std::string s = std::string("# ") + kArtifactName + " " + kArtifactVersion + " " + run.subcommand + "\n";
  for (const auto& [k, v] : run.config.entries()) s += "# " + k + " = " + v + "\n";
  return s;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

void write_report(const Run& run, const json& report) {
  write_file(run.out / (run.subcommand + ".json"), report.dump(2) + "\n");
  write_file(run.out / (run.subcommand + ".resolved.cfg"), run.config.serialize());
}

json point_json(const SamplePoint& p) {
  json j;
  j["t"] = p.t;
  j["x"] = std::vector<double>(p.x.data(), p.x.data() + p.x.size());
  j["y"] = std::vector<double>(p.y.data(), p.y.data() + p.y.size());
  return j;
}

json margin_json(const Margin& m) {
  json j;
  j["name"] = m.name;
  j["worst"] = m.worst;
  j["argmax"] = point_json(m.argmax);
  j["strict"] = m.strict;
  j["pass"] = m.pass;
  return j;
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

int verdict(json& report, bool pass) {
  report["verdict"] = pass ? "pass" : "fail";
  return pass ? kPass : kCheckFailed;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(Run& run) {
  const Config& c = run.config;
  c.reject_unknown(merge({kSimKeys, kOutputKeys, kInitKeys, coefficient_keys("coefficients"),
                          {"certificate.V", "certificate.alpha", "certificate.p"}}));
  std::vector<std::string> warnings;
  const SimConfig sim = sim_config(c, warnings);
  const CoefficientSet coeffs = build_coefficients(c, "coefficients", sim.tau);
  const InitialLaw init = initial_law(c, state_dim(coeffs));
  const LyapunovFunction V = lyapunov_function(c);
  const std::size_t ps = stride(c, "output.particle_stride");
  const std::size_t ts = stride(c, "output.time_stride");

  const ParticleEnsemble ens = as_config("simulate", [&] { return simulate(coeffs, init, sim); });

  std::ostringstream csv;
  csv << csv_preamble(run);
  write_trajectory_csv(csv, ens, ps, ts);
  write_file(run.out / "trajectories.csv", csv.str());

  json report = header(run);
  report["coefficients"] = ens.coefficients;
  report["initial_law"] = ens.initial_law;
  report["warnings"] = warnings;
  json series = json::array();
  const auto moments = moment_series(ens);
  for (std::size_t k = 0; k < moments.size(); k += ts) {
    const auto& m = moments[k];
    double v = 0.0;
    for (std::size_t i = 0; i < ens.particles(); ++i) v += V.value(m.t, ens.position(k, i));
    json p;
    p["t"] = m.t;
    p["mean"] = vec_json(m.mean);
    p["variance"] = vec_json(m.variance);
    p["variance_se"] = vec_json(m.variance_se);
    p["V_mean"] = v / static_cast<double>(ens.particles());
    series.push_back(p);
  }
  report["moments"] = series;
  const IntegrabilityReport integ = integrability_report(ens, coeffs);
  report["integrability"] = {{"max_drift_integral", integ.max_drift},
                             {"max_dispersion_integral", integ.max_dispersion},
                             {"threshold", integ.threshold},
                             {"flagged", integ.flagged.size()}};
  if (sim.estimator == SimConfig::Estimator::kGrid) {
    std::ostringstream law;
    const std::vector<double> origin(static_cast<std::size_t>(ens.dim), 0.0);
    const std::vector<double> width(static_cast<std::size_t>(ens.dim), sim.cell_width);
    write_csv(law, bin_to_grid(ens.flow.slice(ens.slices() - 1), origin, width));
    write_file(run.out / "law_T.csv", law.str());
  }
  const int code = verdict(report, integ.flagged.empty());
  write_report(run, report);
  return code;
}

// ---------------------------------------------------------------- oracle

int cmd_oracle(Run& run) {
  const Config& c = run.config;
  c.reject_unknown(merge({{"N", "dt", "T", "seed", "h.name", "h.c", "mu0.weights", "mu0.means", "mu0.sds",
                           "oracle.slack", "quadrature.order", "output.trajectories"},
                          kOutputKeys}));
  std::vector<std::string> warnings;
  SimConfig sim = sim_config(c, warnings);
  ScalarLawProblem problem = as_config("h", [&] { return ScalarLawProblem::with_h(c.string("h.name"), c.number("h.c", 1.0)); });
  problem.weights = c.numbers("mu0.weights", {1.0});
  problem.means = c.numbers("mu0.means", {0.0});
  problem.sds = c.numbers("mu0.sds", {0.0});
  problem.horizon = sim.horizon;
  as_config("oracle problem", [&] {
    problem.validate();
    return 0;
  });
  PhiOptions options;
  options.order = static_cast<int>(c.unsigned_integer("quadrature.order", 64));
  options.max_order = std::max(options.max_order, options.order);
  const double slack = c.number("oracle.slack", 1.0);
  const std::size_t ts = stride(c, "output.time_stride");

  const ParticleEnsemble ens = simulate(oracle_coefficients(problem), oracle_initial_law(problem), sim);
  const GPath g = solve_g(problem, sim.dt, options);
  const OracleReport rep = oracle_compare(problem, ens, g, slack);

  OracleReport thinned = rep;
  thinned.series.clear();
  for (std::size_t k = 0; k < rep.series.size(); k += ts) thinned.series.push_back(rep.series[k]);
  std::ostringstream csv;
  csv << csv_preamble(run);
  write_oracle_csv(csv, thinned);
  write_file(run.out / "oracle.csv", csv.str());
  if (c.boolean("output.trajectories", false)) {
    std::ostringstream traj;
    traj << csv_preamble(run);
    write_trajectory_csv(traj, ens, stride(c, "output.particle_stride"), ts);
    write_file(run.out / "trajectories.csv", traj.str());
  }

  json report = header(run);
  report["problem"] = {{"h", problem.name}, {"initial_mean", problem.initial_mean()}, {"horizon", problem.horizon}};
  report["g_final"] = g.g.back();
  report["bootstrapped"] = g.bootstrapped;
  report["sup_error"] = rep.sup_error;
  report["max_se"] = rep.max_se;
  report["tolerance"] = rep.tolerance;
  report["pass"] = rep.pass;
  const int code = verdict(report, rep.pass);
  write_report(run, report);
  return code;
}

// ---------------------------------------------------------------- stability

int cmd_martingale(Run& run) {
  const Config& c = run.config;
  c.reject_unknown(merge({{"stability.mode", "N", "dt", "T", "seed", "girsanov.c"}, kOutputKeys}));
  const std::uint64_t paths = c.unsigned_integer("N");
  const double dt = c.number("dt");
  const double T = c.number("T");
  const Vector cvec = to_vector(c.numbers("girsanov.c", {0.5}));
  const std::size_t ts = stride(c, "output.time_stride");
  const MartingaleReport rep =
      as_config("martingale", [&] { return martingale_check(cvec, paths, dt, T, c.unsigned_integer("seed", 0), ts); });

  std::ostringstream csv;
  csv << csv_preamble(run);
  write_martingale_csv(csv, rep);
  write_file(run.out / "martingale.csv", csv.str());

  json report = header(run);
  report["mode"] = "martingale";
  report["mean_M_T"] = rep.mean_final;
  report["se_M_T"] = rep.se_final;
  report["pass"] = rep.pass;
  const int code = verdict(report, rep.pass);
  write_report(run, report);
  return code;
}

int cmd_stability(Run& run) {
  const Config& c = run.config;
  const std::string mode = c.string("stability.mode", "tv");
  if (mode == "martingale") return cmd_martingale(run);
  if (mode != "tv") throw ConfigError("key 'stability.mode': expected tv or martingale, got '" + mode + "'");
  c.reject_unknown(merge({kSimKeys, kOutputKeys, kInitKeys, coefficient_keys("coefficients1"),
                          coefficient_keys("coefficients2"),
                          {"stability.mode", "seed2", "phi.kind", "phi.alpha", "phi.p", "stability.times"}}));
  std::vector<std::string> warnings;
  StabilityConfig cfg;
  cfg.sim = sim_config(c, warnings);
  cfg.seed2 = c.unsigned_integer("seed2", cfg.sim.seed + 1);
  cfg.cell_width = c.number("estimator.cell_width", 0.05);
  cfg.times = c.numbers("stability.times", {0.25, 0.5, 1.0});
  const CoefficientSet c1 = build_coefficients(c, "coefficients1", cfg.sim.tau);
  const CoefficientSet c2 = build_coefficients(c, "coefficients2", cfg.sim.tau);
  if (!same_dispersion(c1, c2, cfg.sim.horizon))
    throw ConfigError("coefficients1 and coefficients2 must share the dispersion");
  const InitialLaw init = initial_law(c, state_dim(c1));
  const WeightFunction phi = weight_function(c);
  const StabilityReport rep = as_config("stability", [&] { return tv_stability_check(c1, c2, init, cfg, phi); });

  std::ostringstream csv;
  csv << csv_preamble(run);
  write_stability_csv(csv, rep);
  write_file(run.out / "stability.csv", csv.str());

  json report = header(run);
  report["mode"] = "tv";
  report["cell_width"] = rep.cell_width;
  report["particles"] = rep.particles;
  json pts = json::array();
  for (const auto& p : rep.points) {
    pts.push_back({{"t", p.t},
                   {"lhs", p.lhs},
                   {"lhs_se", p.lhs_se},
                   {"rhs", p.rhs},
                   {"rhs_se", p.rhs_se},
                   {"binning_slack", p.binning_slack},
                   {"slack", p.slack},
                   {"pass", p.pass}});
  }
  report["points"] = pts;
  report["pass"] = rep.pass;
  const int code = verdict(report, rep.pass);
  write_report(run, report);
  return code;
}

// ---------------------------------------------------------------- certificates

int cmd_check_certificate(Run& run) {
  const Config& c = run.config;
  c.reject_unknown(merge({kSimKeys, kOutputKeys, kInitKeys, coefficient_keys("coefficients"), kCertKeys, kGridKeys,
                          {"certificate.strict", "certificate.search_C", "monitor", "monitor.slack"}}));
  const PairwiseMeanFieldSpec spec = build_pairwise(c, "coefficients");
  LyapunovCertificate cert;
  cert.V = lyapunov_function(c);
  cert.C = c.number("certificate.C");
  const bool strict = c.boolean("certificate.strict", false);
  const SampleDomain domain = sample_domain(c, spec.dim);

  json report = header(run);
  const Margin m = generator_margin(cert, spec, domain, strict);
  report["C"] = cert.C;
  report["samples"] = domain.size();
  report["margins"] = json::array({margin_json(m)});
  bool pass = m.pass;
  if (c.boolean("certificate.search_C", false)) {
    const double best = smallest_passing_constant([&](double C) {
      LyapunovCertificate probe = cert;
      probe.C = C;
      return generator_margin(probe, spec, domain, strict).pass;
    });
    report["smallest_C"] = best;
  }
  if (c.boolean("monitor", false)) {
    std::vector<std::string> warnings;
    const SimConfig sim = sim_config(c, warnings);
    const InitialLaw init = initial_law(c, spec.dim);
    const ParticleEnsemble ens = simulate(spec, init, sim);
    const MonitorReport mon = monitor_expectation(ens, cert, c.number("monitor.slack", 1.0));
    const std::size_t ts = stride(c, "output.time_stride");
    std::string csv = csv_preamble(run) + "t,mean_V,se,bound,slack,flagged\n";
    for (std::size_t k = 0; k < mon.series.size(); k += ts) {
      const auto& p = mon.series[k];
      for (double v : {p.t, p.mean, p.se, p.bound, p.slack}) {
        detail::append_number(csv, v);
        csv += ',';
      }
      csv += p.flagged ? "1\n" : "0\n";
    }
    write_file(run.out / "monitor.csv", csv);
    json mj;
    mj["initial_mean"] = mon.initial_mean;
    mj["flags"] = std::count_if(mon.series.begin(), mon.series.end(), [](const auto& p) { return p.flagged; });
    mj["first_flag"] = mon.first_flag ? json(*mon.first_flag) : json(nullptr);
    mj["pass"] = mon.pass();
    report["monitor"] = mj;
    pass = pass && mon.pass();
  }
  report["pass"] = pass;
  const int code = verdict(report, pass);
  write_report(run, report);
  return code;
}

int cmd_check_conditions(Run& run) {
  const Config& c = run.config;
  c.reject_unknown(merge({kOutputKeys, kInitKeys, coefficient_keys("coefficients"), kGridKeys,
                          {"seed", "conditions.case", "conditions.alpha", "conditions.p", "conditions.q",
                           "conditions.C", "conditions.search_C", "conditions.eta_exponent", "conditions.R",
                           "conditions.initial_samples"}}));
  const PairwiseMeanFieldSpec spec = build_pairwise(c, "coefficients");
  const SampleDomain domain = sample_domain(c, spec.dim);
  const std::string which = c.string("conditions.case", "polynomial");
  const double alpha = c.number("conditions.alpha", 2.0);
  const double p = c.number("conditions.p", 1.0);
  const double q = c.number("conditions.q", 4.0);
  const bool has_C = c.has("conditions.C");
  const bool search = c.boolean("conditions.search_C", !has_C);

  json report = header(run);
  report["case"] = which;
  report["samples"] = domain.size();
  bool pass = true;

  if (which == "polynomial" || which == "exponential") {
    const auto check = [&](double C) {
      return as_config("conditions", [&] {
        return which == "polynomial" ? check_polynomial_growth(spec, alpha, q, C, domain)
                                      : check_exponential_growth(spec, alpha, p, q, C, domain);
      });
    };
    std::optional<double> best;
    if (search) {
      best = smallest_passing_constant([&](double C) { return check(C).pass; });
      report["smallest_C"] = *best;
    }
    const double C = has_C ? c.number("conditions.C") : *best;
    const MarginReport rep = check(C);
    report["C"] = C;
    json ms = json::array();
    for (const auto& m : rep.margins) ms.push_back(margin_json(m));
    report["margins"] = ms;
    json extra = json::array();
    for (const auto& m : rep.extra) extra.push_back(margin_json(m));
    report["informational"] = extra;
    pass = rep.pass;
  } else if (which == "delayed") {
    if (spec.sigma_depends_on_y) throw ConfigError("conditions.case = delayed needs a dispersion independent of y");
    const auto build = [&](double C) {
      LyapunovCertificate cert = c.has("conditions.p") ? LyapunovCertificate::exponential_family(alpha, p, C)
                                                       : LyapunovCertificate::power_family(alpha, C);
      if (c.has("conditions.eta_exponent")) {
        const double e = c.number("conditions.eta_exponent");
        cert.eta = [e](double, std::span<const double> y) {
          double s = 0.0;
          for (double v : y) s += v * v;
          return 1.0 + std::pow(s, e / 2.0);
        };
      }
      return cert;
    };
    const DelayedCoefficients dc = delayed_from_pairwise(spec);
    const InitialLaw init = initial_law(c, spec.dim);
    const std::size_t n = c.unsigned_integer("conditions.initial_samples", 1000);
    std::vector<double> pos(n * static_cast<std::size_t>(spec.dim));
    for (std::size_t i = 0; i < n; ++i)
      init.sample(c.unsigned_integer("seed", 0), i, 1, std::span(pos.data() + i * spec.dim, spec.dim));
    const DiscreteSignedMeasure sample = empirical_from_particles(pos, spec.dim);
    const auto check = [&](double C) {
      return as_config("conditions", [&] { return check_delayed_conditions(dc.drift, dc.dispersion, build(C), domain, sample); });
    };
    std::optional<double> best;
    if (search) {
      best = smallest_passing_constant([&](double C) { return check(C).pass; });
      report["smallest_C"] = *best;
    }
    const double C = has_C ? c.number("conditions.C") : *best;
    const ConditionsReport rep = check(C);
    report["C"] = C;
    report["margins"] = json::array({margin_json(rep.generator), margin_json(rep.interaction), margin_json(rep.domination)});
    report["initial"] = {{"mean_V", rep.initial_mean_V}, {"finite", rep.initial_finite}};
    pass = rep.pass;
  } else {
    throw ConfigError("key 'conditions.case': expected polynomial, exponential or delayed, got '" + which + "'");
  }

  if (c.has("conditions.R")) {
    const NondegeneracyReport nd =
        check_nondegeneracy(spec, c.number("conditions.R"), domain.times, domain.x_points);
    report["nondegeneracy"] = {
        {"min_eigenvalue", nd.min_eigenvalue}, {"argmin", point_json(nd.argmin)}, {"pass", nd.pass}};
    pass = pass && nd.pass;
  }
  report["pass"] = pass;
  const int code = verdict(report, pass);
  write_report(run, report);
  return code;
}

// ---------------------------------------------------------------- mollify-inspect

JointMap test_function(const std::string& name) {
  if (name == "sign")
    return [](double, std::span<const double> z) {
      Eigen::VectorXd v(1);
      v[0] = z[0] > 0.0 ? 1.0 : (z[0] < 0.0 ? -1.0 : 0.0);
      return v;
    };
  if (name == "identity")
    return [](double, std::span<const double> z) {
      Eigen::VectorXd v(1);
      v[0] = z[0];
      return v;
    };
  if (name == "indicator-ball")
    return [](double, std::span<const double> z) {
      double s = 0.0;
      for (double x : z) s += x * x;
      Eigen::VectorXd v(1);
      v[0] = s <= 1.0 ? 1.0 : 0.0;
      return v;
    };
  throw ConfigError("key 'mollify.f': expected sign, identity or indicator-ball, got '" + name + "'");
}

int cmd_mollify_inspect(Run& run) {
  const Config& c = run.config;
  c.reject_unknown(merge({{"output.path", "mollify.f", "mollify.joint_dim", "mollify.n", "mollify.r",
                           "mollify.resolution", "mollify.R", "mollify.p", "mollify.T", "mollify.space_resolution",
                           "mollify.power", "mollify.section_from", "mollify.section_to",
                           "mollify.section_points"}}));
  const JointMap f = test_function(c.string("mollify.f", "sign"));
  const int D = static_cast<int>(c.unsigned_integer("mollify.joint_dim", 2));
  if (D < 1 || D > kMaxJointDim) throw ConfigError("key 'mollify.joint_dim' must be in [1, 6]");
  const int n = static_cast<int>(c.unsigned_integer("mollify.n", 2));
  const auto rs = c.numbers("mollify.r", {5.0, 10.0, 20.0, 40.0});
  const int res = static_cast<int>(c.unsigned_integer("mollify.resolution", 21));
  const double R = c.number("mollify.R", 1.0);
  const double p = c.number("mollify.p", 6.0);
  const double T = c.number("mollify.T", 1.0);
  const int space = static_cast<int>(c.unsigned_integer("mollify.space_resolution", 201));
  const int power = static_cast<int>(c.unsigned_integer("mollify.power", 1));

  const double from = c.number("mollify.section_from", -1.0);
  const double to = c.number("mollify.section_to", 1.0);
  const std::size_t points = c.unsigned_integer("mollify.section_points", 101);
  if (points < 2 || !(to > from)) throw ConfigError("mollify section needs section_to > section_from and >= 2 points");

  std::string csv = csv_preamble(run) + "r,support_radius,lp_distance,sup_distance\n";
  // Section along the first axis, other coordinates 0, t = 0.
  std::vector<std::vector<double>> section(points);
  for (std::size_t i = 0; i < points; ++i) {
    std::vector<double> z(static_cast<std::size_t>(D), 0.0);
    z[0] = from + (to - from) * static_cast<double>(i) / static_cast<double>(points - 1);
    section[i] = {z[0], f(0.0, z)[0]};
  }
  std::string section_csv = csv_preamble(run) + "z0,raw";
  json rows = json::array();
  bool monotone = true;
  double prev = std::numeric_limits<double>::infinity();
  for (double r : rs) {
    const MollifiedMap m = as_config("mollify", [&] { return mollify_coefficient(f, D, {n, r, res}, power); });
    section_csv += ",mollified_r";
    detail::append_number(section_csv, r);
    for (auto& row : section) {
      std::vector<double> z(static_cast<std::size_t>(D), 0.0);
      z[0] = row[0];
      row.push_back(m(0.0, z)[0]);
    }
    const double lp = lp_distance_on_ball(f, m.as_map(), D, p, R, T, space);
    const double sup = sup_distance_on_ball(f, m.as_map(), D, R, space);
    monotone = monotone && lp < prev;
    prev = lp;
    for (double v : {r, m.support_radius(), lp}) {
      detail::append_number(csv, v);
      csv += ',';
    }
    detail::append_number(csv, sup);
    csv += '\n';
    rows.push_back({{"r", r}, {"support_radius", m.support_radius()}, {"lp_distance", lp}, {"sup_distance", sup}});
  }
  write_file(run.out / "mollify.csv", csv);
  section_csv += '\n';
  for (const auto& row : section) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j > 0) section_csv += ',';
      detail::append_number(section_csv, row[j]);
    }
    section_csv += '\n';
  }
  write_file(run.out / "mollify_section.csv", section_csv);
  json report = header(run);
  report["p"] = p;
  report["R"] = R;
  report["rows"] = rows;
  report["lp_monotone"] = monotone;
  report["pass"] = monotone;
  const int code = verdict(report, monotone);
  write_report(run, report);
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App cli{"Particle simulation and certificate checks for law-dependent SDEs", "lawsde"};
  cli.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 0;

  struct Entry {
    const char* name;
    const char* help;
    int (*fn)(Run&);
  };
  const Entry entries[] = {
      {"simulate", "Simulate an interacting particle system", cmd_simulate},
      {"oracle", "Compare a particle run with the scalar ODE oracle", cmd_oracle},
      {"stability", "Weighted-TV stability or likelihood martingale check", cmd_stability},
      {"check-certificate", "Generator margin and moment monitor for a Lyapunov certificate", cmd_check_certificate},
      {"check-conditions", "Sampled growth and delayed-drift conditions", cmd_check_conditions},
      {"mollify-inspect", "Distances between a map and its mollifications", cmd_mollify_inspect},
  };
  std::vector<CLI::App*> subs;
  for (const auto& e : entries) {
    CLI::App* sub = cli.add_subcommand(e.name, e.help);
    sub->add_option("--config", config_path, "Configuration file (key = value)")->required();
    sub->add_option("--out", out_dir, "Output directory (default: output.path or .)");
    sub->add_option("--seed", seed, "Seed override");
    sub->add_option("--threads", threads, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
    subs.push_back(sub);
  }

  std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
  try {
    cli.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    std::cout << cli.help();
    return kPass;
  } catch (const CLI::ParseError& e) {
    std::cerr << "lawsde: " << e.what() << "\n";
    return kUsageError;
  }

  std::size_t which = 0;
  while (!subs[which]->parsed()) ++which;
  try {
    Run run;
    run.subcommand = entries[which].name;
    run.config = Config::load(config_path);
    if (seed) run.config.set("seed", std::to_string(*seed));
    run.out = out_dir.empty() ? fs::path(run.config.string("output.path", ".")) : fs::path(out_dir);
    fs::create_directories(run.out);
    if (threads > 0) omp_set_num_threads(threads);
    return entries[which].fn(run);
  } catch (const ConfigError& e) {
    std::cerr << "lawsde: config error: " << e.what() << "\n";
    return kUsageError;
  } catch (const SimulationError& e) {
    std::cerr << "lawsde: " << e.what() << "\n";
    return kCheckFailed;
  } catch (const EvaluationError& e) {
    std::cerr << "lawsde: evaluation failed: " << e.what() << "\n";
    return kCheckFailed;
  } catch (const InvalidArgument& e) {
    std::cerr << "lawsde: invalid input: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "lawsde: " << e.what() << "\n";
    return kUsageError;
  }
}

}  // namespace lawsde::app
