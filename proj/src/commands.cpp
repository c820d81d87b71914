#include "bnoise/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "bnoise/admissibility.hpp"
#include "bnoise/boundary_models.hpp"
#include "bnoise/errors.hpp"
#include "bnoise/perturbation.hpp"
#include "bnoise/report.hpp"
#include "bnoise/stochastic_sim.hpp"

namespace bnoise {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxJsonPathNumbers = 200000;

struct Context {
  const ModelSpec& spec;
  const CommandFlags& flags;
  BuiltModel built;
  double horizon;
};

double default_omega(double growth) { return std::isfinite(growth) ? growth + 0.5 : 1.0; }

std::string combine(const std::vector<Verdict>& vs) {
  if (std::any_of(vs.begin(), vs.end(), [](Verdict v) { return v == Verdict::Diverged; })) {
    return std::string(to_string(Verdict::Diverged));
  }
  if (!vs.empty() && std::all_of(vs.begin(), vs.end(), [](Verdict v) { return v == Verdict::Converged; })) {
    return std::string(to_string(Verdict::Converged));
  }
  return std::string(to_string(Verdict::Inconclusive));
}

json not_applicable(const std::string& why) {
  return json{{"verdict", "NotApplicable"}, {"evidence", why}};
}

json check_diagonal(const Context& ctx, const DiagonalSystem& sys, std::string& csv) {
  const double growth = growth_bound(sys.model);
  const double omega = ctx.flags.omega.value_or(default_omega(growth));
  const FrequencyGrid grid{omega, ctx.horizon, ctx.flags.freq_terms.value_or(64)};
  grid.validate(growth);

  const SeriesVerdict time = gamma_time(sys.model, sys.control, ctx.horizon);
  const SeriesVerdict freq = frequency_series(sys.model, sys.control, grid);
  const SeriesVerdict dir = dirichlet_frequency_criterion(sys.model, sys.control, grid);
  csv = series_csv(time.terms);

  json r;
  r["growth_bound"] = quantity(growth, provenance::kClosedForm);
  r["omega"] = quantity(omega, provenance::kClosedForm);
  r["tail_rule"] = describe(sys.control.tail());
  r["routes"]["time_domain"] = verdict_json(time);
  r["routes"]["b_star_frequency"] = verdict_json(freq);
  r["routes"]["dirichlet_frequency"] = verdict_json(dir);
  r["series"] = quantity(time.terms, provenance::kClosedForm);
  std::vector<Verdict> vs{time.verdict, freq.verdict, dir.verdict};
  if (sys.observation) {
    const SeriesVerdict obs_time = gamma_time(sys.model, *sys.observation, ctx.horizon);
    const SeriesVerdict obs_freq = frequency_series(sys.model, *sys.observation, grid);
    r["observation"]["time_domain"] = verdict_json(obs_time);
    r["observation"]["frequency"] = verdict_json(obs_freq);
    r["observation"]["verdict"] = combine({obs_time.verdict, obs_freq.verdict});
  }
  r["verdict"] = combine(vs);
  return r;
}

json check_transport(const Context& ctx, const TransportModel& tm, std::string& csv) {
  const double omega = ctx.flags.omega.value_or(1.0);
  const FrequencyGrid grid{omega, ctx.horizon, ctx.flags.freq_terms.value_or(64)};
  const SeriesVerdict dir = dirichlet_frequency_criterion(tm, grid);
  csv = series_csv(dir.terms);
  json r;
  r["growth_bound"] = quantity(tm.growth_bound(), provenance::kClosedForm);
  r["omega"] = quantity(omega, provenance::kClosedForm);
  r["delay"] = quantity(tm.delay, provenance::kClosedForm);
  r["noise_dim"] = tm.countable() ? json("countable") : json(*tm.noise_dim);
  r["dirichlet_hs_norm_at_omega"] = quantity(tm.dirichlet_hs_norm(Complex(omega, 0.0)), provenance::kClosedForm);
  try {
    (void)gamma_time(tm, CoefficientTable{}, ctx.horizon);
  } catch (const UnsupportedRepresentation& e) {
    r["routes"]["time_domain"] = not_applicable(e.what());
  }
  try {
    (void)frequency_series(tm, CoefficientTable{}, grid);
  } catch (const UnsupportedRepresentation& e) {
    r["routes"]["b_star_frequency"] = not_applicable(e.what());
  }
  r["routes"]["dirichlet_frequency"] = verdict_json(dir, provenance::kClosedForm);
  r["series"] = quantity(dir.terms, provenance::kClosedForm);
  r["verdict"] = combine({dir.verdict});
  return r;
}

json cmd_check(const Context& ctx, std::string& csv) {
  if (const auto* sys = std::get_if<DiagonalSystem>(&ctx.built)) return check_diagonal(ctx, *sys, csv);
  return check_transport(ctx, std::get<TransportModel>(ctx.built), csv);
}

const DiagonalSystem& require_diagonal(const Context& ctx, const std::string& command) {
  if (const auto* sys = std::get_if<DiagonalSystem>(&ctx.built)) return *sys;
  throw UnsupportedRepresentation(command + ": the transport model has no eigenbasis");
}

json stats_json(const EnsembleStats& st, const Eigen::MatrixXd& target) {
  json entries = json::array();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < st.covariance.rows(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double se = st.covariance_se(i, j);
      const double z = se > 0.0 ? std::abs(st.covariance(i, j) - target(i, j)) / se
                                : (st.covariance(i, j) == target(i, j) ? 0.0 : kInf);
      worst = std::max(worst, z);
      entries.push_back({{"n", i},
                         {"m", j},
                         {"empirical", quantity(st.covariance(i, j), provenance::monte_carlo(se))},
                         {"analytic", quantity(target(i, j), provenance::kClosedForm)},
                         {"z", quantity(z, provenance::monte_carlo(se))}});
    }
  }
  json mean = json::array();
  for (Eigen::Index i = 0; i < st.mean.size(); ++i) {
    mean.push_back(quantity(st.mean(i), provenance::monte_carlo(st.mean_se(i))));
  }
  return json{{"mean", mean}, {"covariance", entries}, {"max_abs_z", quantity(worst, provenance::kClosedForm)}};
}

json cmd_simulate(const Context& ctx, std::string& csv) {
  const std::size_t samples = ctx.flags.samples.value_or(1000);
  json r;
  if (const auto* tm = std::get_if<TransportModel>(&ctx.built)) {
    const GateDecision gate = existence_gate(*tm, ctx.horizon, ctx.flags.override_existence_gate);
    enforce(gate);
    const std::size_t cells = ctx.flags.modes.value_or(64);
    const TruncatedTransportDemo demo =
        truncated_transport_demo(*tm, cells, ctx.horizon, samples, ctx.flags.seed, true);
    r["gate"] = {{"allowed", gate.allowed}, {"overridden", gate.overridden}, {"reason", gate.reason}};
    r["label"] = "DIDACTIC DEMONSTRATION: truncated transport, no solution exists in H";
    r["cells"] = demo.cells;
    r["filled_cells"] = demo.filled;
    r["expected_norm_squared"] = quantity(demo.expected_norm_squared, provenance::kClosedForm);
    r["empirical_norm_squared"] =
        quantity(demo.empirical_norm_squared, provenance::monte_carlo(demo.empirical_se));
    csv = paths_csv(demo.ensemble.times, demo.ensemble.values);
    return r;
  }
  const DiagonalSystem& sys = std::get<DiagonalSystem>(ctx.built);
  const GateDecision gate = existence_gate(sys.model, sys.control, ctx.horizon, ctx.flags.override_existence_gate);
  enforce(gate);
  PathEnsemble ens;
  if (ctx.flags.dt) {
    GridOptions opts;
    opts.workers = ctx.flags.workers;
    ens = sample_grid(sys.model, sys.control, ctx.horizon, *ctx.flags.dt, samples, ctx.flags.seed, opts);
  } else {
    SamplingOptions opts;
    opts.workers = ctx.flags.workers;
    ens = sample_exact(sys.model, sys.control, ctx.horizon, samples, ctx.flags.seed, opts);
  }
  const CovarianceMatrix q = covariance_qt(sys.model, sys.control, ctx.horizon);
  r["gate"] = {{"allowed", gate.allowed}, {"overridden", gate.overridden}, {"reason", gate.reason}};
  if (gate.overridden) r["label"] = "existence gate OVERRIDDEN: results describe the truncation only";
  r["scheme"] = ens.scheme;
  r["samples"] = ens.samples;
  r["seed"] = ens.seed;
  r["times"] = quantity(ens.times, provenance::kClosedForm);
  if (samples >= 2) r["final_time_stats"] = stats_json(ensemble_stats(ens, ens.values.size() - 1), q.entries);
  const std::size_t numbers = ens.samples * sys.model.mode_count() * ens.times.size();
  if (numbers <= kMaxJsonPathNumbers) {
    json paths = json::array();
    for (std::size_t t = 0; t < ens.times.size(); ++t) {
      json rows = json::array();
      for (Eigen::Index s = 0; s < ens.values[t].rows(); ++s) {
        json row = json::array();
        for (Eigen::Index m = 0; m < ens.values[t].cols(); ++m) row.push_back(real(ens.values[t](s, m)));
        rows.push_back(row);
      }
      paths.push_back(rows);
    }
    r["paths"] = {{"value", paths}, {"provenance", "monte_carlo(se=n/a)"}, {"layout", "[time][sample][mode]"}};
  } else {
    r["paths_omitted"] = "ensemble too large for JSON; use --format csv";
  }
  csv = paths_csv(ens.times, ens.values);
  return r;
}

json cmd_covariance(const Context& ctx, std::string& csv) {
  const DiagonalSystem& sys = require_diagonal(ctx, "covariance");
  const CovarianceMatrix q = covariance_qt(sys.model, sys.control, ctx.horizon);
  const SeriesVerdict g = gamma_time(sys.model, sys.control, ctx.horizon);
  json entries = json::array();
  for (Eigen::Index i = 0; i < q.entries.rows(); ++i) {
    for (Eigen::Index j = 0; j < q.entries.cols(); ++j) {
      entries.push_back({{"n", i}, {"m", j}, {"value", quantity(q.entries(i, j), provenance::kClosedForm)}});
    }
  }
  json r;
  r["entries"] = entries;
  r["trace_materialized"] = quantity(q.trace_materialized, provenance::kClosedForm);
  r["trace_tail_lower"] = quantity(q.trace_tail.lower, provenance::kSeriesTail);
  r["trace_tail_upper"] = quantity(q.trace_tail.upper, provenance::kSeriesTail);
  r["min_eigenvalue"] = quantity(q.min_eigenvalue, provenance::kClosedForm);
  r["gamma_time"] = verdict_json(g);
  csv = covariance_csv(q.entries);
  return r;
}

json cmd_perturb_check(const Context& ctx, std::string& csv) {
  const DiagonalSystem& sys = require_diagonal(ctx, "perturb-check");
  if (!sys.perturbation) throw InvalidArgument("perturb-check: the model has no perturbation block");
  const PerturbedGamma pg = perturbed_gamma_time(sys.model, *sys.perturbation, sys.control, ctx.horizon);
  json r;
  r["perturbed_gamma_time"] = verdict_json(pg.verdict, provenance::kQuadrature);
  json levels = json::array();
  for (std::size_t i = 0; i < pg.levels.size(); ++i) {
    levels.push_back({{"modes", pg.levels[i]}, {"value", quantity(pg.values[i], provenance::kQuadrature)}});
  }
  r["levels"] = levels;
  r["unperturbed_gamma_time"] = verdict_json(gamma_time(sys.model, sys.control, ctx.horizon));
  if (sys.model.mode_count() <= 16) {
    json agreement = json::array();
    const ModeVector x = ModeVector::unit(sys.model.mode_count(), 0);
    for (double t : {0.1, 0.5, 1.0}) {
      const ModeVector g = perturbed_semigroup_apply(sys.model, *sys.perturbation, t, x, PerturbedMethod::Galerkin);
      const ModeVector v = perturbed_semigroup_apply(sys.model, *sys.perturbation, t, x, PerturbedMethod::Volterra);
      double diff = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) diff = std::max(diff, std::abs(g[i] - v[i]));
      const double rel = g.norm() > 0.0 ? diff / g.norm() : diff;
      agreement.push_back({{"t", quantity(t, provenance::kClosedForm)},
                           {"galerkin_norm", quantity(g.norm(), provenance::kClosedForm)},
                           {"volterra_rel_diff", quantity(rel, provenance::kQuadrature)}});
    }
    r["galerkin_vs_volterra"] = agreement;
  }
  csv = series_csv(pg.values);
  return r;
}

json cmd_scan_weiss(const Context& ctx, std::string& csv) {
  const DiagonalSystem& sys = require_diagonal(ctx, "scan-weiss");
  const CoefficientTable& obs = sys.observation ? static_cast<const CoefficientTable&>(*sys.observation)
                                                : static_cast<const CoefficientTable&>(sys.control);
  const double growth = growth_bound(sys.model);
  const double omega = ctx.flags.omega.value_or(default_omega(growth));
  std::vector<Complex> grid;
  for (int i = 0; i <= 20; ++i) {
    const double re = omega + std::pow(10.0, -2.0 + 0.25 * i);
    for (double im : {0.0, 1.0, -1.0, 5.0, -5.0, 25.0, -25.0}) grid.emplace_back(re, im);
  }
  const WeissScan scan = weiss_scan(sys.model, obs, omega, grid);
  const InfiniteHorizonResult inf = gamma_infinite(sys.model.shifted(omega), obs, 1.0);
  json r;
  r["operator"] = sys.observation ? "observation" : "control adjoint";
  r["omega"] = quantity(omega, provenance::kClosedForm);
  r["sup"] = quantity(scan.sup, provenance::kSeriesTail);
  r["argmax"] = {{"re", quantity(scan.argmax.real(), provenance::kClosedForm)},
                 {"im", quantity(scan.argmax.imag(), provenance::kClosedForm)}};
  r["gamma_infinite"] = verdict_json(inf.exact);
  const double gi = inf.exact.partial_value + inf.exact.tail_upper;
  r["bound_sqrt_2_gamma_inf"] = quantity(std::sqrt(2.0 * gi), provenance::kSeriesTail);
  r["bound_sqrt_gamma_inf_over_2"] = quantity(std::sqrt(0.5 * gi), provenance::kSeriesTail);
  json table = json::array();
  std::vector<double> stats;
  for (const WeissPoint& p : scan.table) {
    table.push_back({{"re", quantity(p.lambda.real(), provenance::kClosedForm)},
                     {"im", quantity(p.lambda.imag(), provenance::kClosedForm)},
                     {"statistic", quantity(p.statistic, provenance::kSeriesTail)}});
    stats.push_back(p.statistic);
  }
  r["table"] = table;
  csv = series_csv(stats);
  return r;
}

json cmd_dyadic(const Context& ctx, std::string& csv) {
  const DiagonalSystem& sys = require_diagonal(ctx, "dyadic");
  const int range = static_cast<int>(ctx.flags.freq_terms.value_or(10));
  const DyadicResult d = dyadic_diagnostic(sys.model, sys.control, range);
  json r;
  r["series"] = verdict_json(d.series);
  r["exponents"] = d.exponents;
  r["terms"] = quantity(d.series.terms, provenance::kClosedForm);
  r["symmetry_defect"] = quantity(d.symmetry_defect, provenance::kClosedForm);
  r["note"] = "diagnostic only; no existence claim";
  csv = series_csv(d.series.terms);
  return r;
}

json cmd_report(const Context& ctx, std::string& csv) {
  json r;
  r["check"] = cmd_check(ctx, csv);
  const std::string series = csv;
  std::string scratch;
  if (std::holds_alternative<DiagonalSystem>(ctx.built)) {
    const DiagonalSystem& sys = std::get<DiagonalSystem>(ctx.built);
    r["covariance"] = cmd_covariance(ctx, scratch);
    r["dyadic"] = cmd_dyadic(ctx, scratch);
    if (growth_bound(sys.model) < kInf) r["scan_weiss"] = cmd_scan_weiss(ctx, scratch);
    if (sys.perturbation) r["perturb_check"] = cmd_perturb_check(ctx, scratch);
  } else {
    const GateDecision gate = existence_gate(std::get<TransportModel>(ctx.built), ctx.horizon, false);
    r["simulate"] = {{"allowed", gate.allowed}, {"reason", gate.reason}};
  }
  csv = series;
  return r;
}

json flags_json(const CommandFlags& f) {
  json j;
  j["model"] = f.model_path;
  if (f.horizon) j["T"] = *f.horizon;
  if (f.omega) j["omega"] = *f.omega;
  if (f.modes) j["modes"] = *f.modes;
  if (f.freq_terms) j["freq_terms"] = *f.freq_terms;
  if (f.samples) j["samples"] = *f.samples;
  if (f.dt) j["dt"] = *f.dt;
  j["seed"] = f.seed;
  j["format"] = f.format;
  j["override_existence_gate"] = f.override_existence_gate;
  return j;
}

}  // namespace

std::vector<std::string> command_names() {
  return {"check", "simulate", "covariance", "perturb-check", "scan-weiss", "dyadic", "report"};
}

CommandOutput run_command(const std::string& command, const ModelSpec& spec, const CommandFlags& flags) {
  const auto start = std::chrono::steady_clock::now();
  const auto names = command_names();
  if (std::find(names.begin(), names.end(), command) == names.end()) {
    throw InvalidArgument("unknown command \"" + command + "\"");
  }
  if (flags.format != "json" && flags.format != "csv") {
    throw InvalidArgument("--format must be json or csv");
  }
  const double horizon = flags.horizon.value_or(1.0);
  if (!(horizon > 0.0)) throw InvalidArgument("--T must be > 0");
  Context ctx{spec, flags, build_model(spec, spec.is_transport() ? std::nullopt : flags.modes), horizon};

  CommandOutput out;
  json results;
  if (command == "check") results = cmd_check(ctx, out.csv);
  else if (command == "simulate") results = cmd_simulate(ctx, out.csv);
  else if (command == "covariance") results = cmd_covariance(ctx, out.csv);
  else if (command == "perturb-check") results = cmd_perturb_check(ctx, out.csv);
  else if (command == "scan-weiss") results = cmd_scan_weiss(ctx, out.csv);
  else if (command == "dyadic") results = cmd_dyadic(ctx, out.csv);
  else results = cmd_report(ctx, out.csv);

  const std::string spec_hash = fnv1a_hex(spec.to_json().dump());
  json flags_echo = flags_json(flags);
  flags_echo["T"] = horizon;
  json& rep = out.report;
  rep["format_version"] = kReportFormatVersion;
  rep["tool"] = {{"name", std::string(kToolName)}, {"version", std::string(kToolVersion)}};
  rep["command"] = command;
  rep["flags"] = flags_echo;
  rep["model"] = spec.name;
  rep["spec_hash"] = spec_hash;
  rep["config_hash"] = fnv1a_hex(command + "\n" + flags_echo.dump() + "\n" + spec_hash);
  rep["results"] = std::move(results);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  rep["timing"] = {{"elapsed_seconds", elapsed}};
  return out;
}

std::string render(const CommandOutput& out, const std::string& format) {
  if (format == "csv") return out.csv;
  return out.report.dump(2) + "\n";
}

json strip_timing(json report) {
  report.erase("timing");
  return report;
}

}  // namespace bnoise
