#include "bnoise/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "bnoise/errors.hpp"
#include "bnoise/numerics.hpp"

namespace bnoise {

bool RankOnePerturbation::is_zero() const noexcept {
  const bool b_zero = std::all_of(b.begin(), b.end(), [](double v) { return v == 0.0; });
  const bool m_zero = std::all_of(m.begin(), m.end(), [](double v) { return v == 0.0; });
  return b_zero || m_zero;
}

void RankOnePerturbation::validate(std::size_t modes) const {
  if (b.size() != modes || m.size() != modes) {
    throw InvalidArgument("rank-one perturbation: b and m need " + std::to_string(modes) +
                          " coefficients (got " + std::to_string(b.size()) + " and " +
                          std::to_string(m.size()) + ")");
  }
  for (std::size_t i = 0; i < modes; ++i) {
    if (!std::isfinite(b[i]) || !std::isfinite(m[i])) {
      throw InvalidArgument("rank-one perturbation: non-finite coefficient at mode " + std::to_string(i));
    }
  }
  if (std::holds_alternative<UnknownTail>(m_tail)) {
    throw InvalidArgument("rank-one perturbation: m needs a tail rule certifying square summability");
  }
  if (std::holds_alternative<ConstantWeightTail>(m_tail) &&
      std::get<ConstantWeightTail>(m_tail).weight != 0.0) {
    throw InvalidArgument("rank-one perturbation: a constant m tail is not square-summable");
  }
}

Eigen::MatrixXd galerkin_perturbed_generator(const DiagonalModel& model,
                                             const RankOnePerturbation& pert, std::size_t modes) {
  if (modes < 1 || modes > model.mode_count()) {
    throw InvalidArgument("galerkin_perturbed_generator: N = " + std::to_string(modes) +
                          " outside [1, " + std::to_string(model.mode_count()) + "]");
  }
  pert.validate(model.mode_count());
  const auto n = static_cast<Eigen::Index>(modes);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, i) = model.eigenvalue(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < n; ++j) {
      a(i, j) += pert.b[static_cast<std::size_t>(i)] * pert.m[static_cast<std::size_t>(j)];
    }
  }
  return a;
}

void VolterraProblem::validate() const {
  if (!(sigma >= 0.0 && sigma < 1.0)) {
    throw InvalidArgument("volterra: singularity exponent sigma must lie in [0, 1)");
  }
  if (!forcing || !kernel_regular) throw InvalidArgument("volterra: forcing and kernel are required");
  if (grid.size() < 2 || grid.front() != 0.0) {
    throw InvalidArgument("volterra: grid must start at 0 and have at least one interval");
  }
  for (std::size_t j = 1; j < grid.size(); ++j) {
    if (!(grid[j] > grid[j - 1])) throw InvalidArgument("volterra: grid must be strictly increasing");
  }
  const auto needed = static_cast<std::size_t>(std::ceil(16.0 / (1.0 - sigma)));
  if (grid.size() - 1 < needed) {
    std::ostringstream os;
    os << "volterra: " << grid.size() - 1 << " intervals are too coarse for sigma = " << sigma
       << " (need at least " << needed << ")";
    throw ResolutionError(os.str());
  }
}

namespace {

// Weights (for the values at u0 and u1) of int_{u0}^{u1} u^{-sigma} f(u) du
// with f interpolated linearly.
std::pair<double, double> product_weights(double u0, double u1, double sigma) {
  const double len = u1 - u0;
  if (sigma == 0.0) return {0.5 * len, 0.5 * len};
  if (u0 < 16.0 * len) {
    const double m0 = (std::pow(u1, 1.0 - sigma) - std::pow(u0, 1.0 - sigma)) / (1.0 - sigma);
    const double m1 = (std::pow(u1, 2.0 - sigma) - std::pow(u0, 2.0 - sigma)) / (2.0 - sigma);
    return {(u1 * m0 - m1) / len, (m1 - u0 * m0) / len};
  }
  // Far from the singularity u^{-sigma} is smooth on the cell.
  const auto& rule = gauss_legendre(4);
  double w0 = 0.0;
  double w1 = 0.0;
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    const double s = 0.5 * (1.0 + rule.nodes[q]);
    const double wt = 0.5 * len * rule.weights[q] * std::pow(u0 + s * len, -sigma);
    w0 += wt * (1.0 - s);
    w1 += wt * s;
  }
  return {w0, w1};
}

}  // namespace

VolterraSolution volterra_resolve(const VolterraProblem& problem) {
  problem.validate();
  const auto& t = problem.grid;
  const std::size_t n = t.size();
  const double sigma = problem.sigma;
  VolterraSolution out;
  out.times = t;
  out.values.assign(n, 0.0);
  out.values[0] = problem.forcing(0.0);
  const double k0 = problem.kernel_regular(0.0);
  for (std::size_t i = 1; i < n; ++i) {
    // int_0^{t_i} (t_i - s)^{-sigma} k(t_i - s) g(s) ds over cells [t_{j-1}, t_j], u = t_i - s.
    CompensatedSum acc;
    acc.add(problem.forcing(t[i]));
    double diag = 0.0;
    for (std::size_t j = 1; j <= i; ++j) {
      const double u0 = t[i] - t[j];
      const double u1 = t[i] - t[j - 1];
      const auto [w_near, w_far] = product_weights(u0, u1, sigma);
      // w_near belongs to s = t_j (u = u0), w_far to s = t_{j-1} (u = u1).
      acc.add(w_far * problem.kernel_regular(u1) * out.values[j - 1]);
      if (j == i) {
        diag = w_near * k0;
      } else {
        acc.add(w_near * problem.kernel_regular(u0) * out.values[j]);
      }
    }
    const double denom = 1.0 - diag;
    if (std::abs(denom) < 1e-12) {
      throw NumericalError("volterra: product-integration step is singular at t = " + std::to_string(t[i]));
    }
    out.values[i] = acc.value() / denom;
  }
  return out;
}

ModeVector perturbed_semigroup_apply(const DiagonalModel& model, const RankOnePerturbation& pert,
                                     double t, const ModeVector& x, PerturbedMethod method,
                                     const VolterraOptions& options) {
  if (!(t >= 0.0)) throw InvalidArgument("perturbed_semigroup_apply: t must be >= 0");
  const std::size_t n = model.mode_count();
  if (x.size() != n) throw InvalidArgument("perturbed_semigroup_apply: state size does not match the model");
  pert.validate(n);
  if (t == 0.0) return x;
  const auto eig = model.eigenvalues();

  if (method == PerturbedMethod::Galerkin) {
    const Eigen::MatrixXd a = galerkin_perturbed_generator(model, pert, n);
    const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(x.coeffs.data(), static_cast<Eigen::Index>(n));
    const Eigen::MatrixXd e = (a * t).exp();
    const Eigen::VectorXd y = e * x0;
    return ModeVector(std::vector<double>(y.data(), y.data() + y.size()));
  }

  VolterraProblem prob;
  prob.forcing = [&](double s) {
    double v = 0.0;
    for (std::size_t k = 0; k < n; ++k) v += pert.m[k] * std::exp(eig[k] * s) * x[k];
    return v;
  };
  prob.kernel_regular = [&](double tau) {
    double v = 0.0;
    for (std::size_t k = 0; k < n; ++k) v += pert.m[k] * pert.b[k] * std::exp(eig[k] * tau);
    return v;
  };
  prob.sigma = 0.0;
  prob.grid = graded_partition(t, options.intervals, 1.0);
  const VolterraSolution g = volterra_resolve(prob);

  // y_n(t) = e^{lambda t} x_n + b_n int e^{lambda (t - s)} g(s) ds with g
  // linear on each cell; recursively per cell of width h, z = lambda h:
  //   Y <- e^{z} Y + h (phi1(z) - phi2(z)) g_j + h phi2(z) g_{j+1}.
  std::vector<double> y(n);
  for (std::size_t k = 0; k < n; ++k) {
    double conv = 0.0;
    for (std::size_t j = 0; j + 1 < g.times.size(); ++j) {
      const double h = g.times[j + 1] - g.times[j];
      const double z = eig[k] * h;
      conv = std::exp(z) * conv + h * (phi1(z) - phi2(z)) * g.values[j] + h * phi2(z) * g.values[j + 1];
    }
    y[k] = std::exp(eig[k] * t) * x[k] + pert.b[k] * conv;
  }
  return ModeVector(std::move(y));
}

namespace {

// int_0^T ||e^{A t} beta||_F^2 dt by Gauss-Legendre on geometric panels
// that resolve the fastest transient e^{-|a| t}.
double galerkin_gamma(const Eigen::MatrixXd& a, const Eigen::MatrixXd& beta, double horizon) {
  const double rate = std::max(1.0, a.cwiseAbs().rowwise().sum().maxCoeff());
  const std::vector<double> partition = geometric_partition(horizon, 0.25 / rate, 2.0);
  std::vector<double> fine;
  // Split long panels so every cell stays at most one unit of the slowest scale.
  for (std::size_t j = 0; j + 1 < partition.size(); ++j) {
    const double lo = partition[j];
    const double hi = partition[j + 1];
    const auto pieces = static_cast<std::size_t>(std::ceil((hi - lo) / 0.25));
    for (std::size_t q = 0; q < pieces; ++q) fine.push_back(lo + (hi - lo) * static_cast<double>(q) / static_cast<double>(pieces));
  }
  fine.push_back(horizon);
  const auto& rule = gauss_legendre(8);
  CompensatedSum total;
  for (std::size_t j = 0; j + 1 < fine.size(); ++j) {
    const double half = 0.5 * (fine[j + 1] - fine[j]);
    const double mid = 0.5 * (fine[j + 1] + fine[j]);
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double s = mid + half * rule.nodes[q];
      const Eigen::MatrixXd e = (a * s).exp();
      total.add(half * rule.weights[q] * (e * beta).squaredNorm());
    }
  }
  return total.value();
}

}  // namespace

PerturbedGamma perturbed_gamma_time(const DiagonalModel& model, const RankOnePerturbation& pert,
                                    const ControlCoefficients& ctrl, double horizon,
                                    double tolerance) {
  if (!(horizon > 0.0)) throw InvalidArgument("perturbed_gamma_time: horizon T must be > 0");
  pert.validate(model.mode_count());
  if (ctrl.mode_count() != model.mode_count()) {
    throw InvalidArgument("perturbed_gamma_time: control table does not match the model");
  }
  const SeriesVerdict base = gamma_time(model, ctrl, horizon);
  if (base.verdict != Verdict::Converged) {
    throw PreconditionError(
        "perturbed_gamma_time: the unperturbed system is not S-admissible (gamma_time verdict " +
        std::string(to_string(base.verdict)) + ": " + base.evidence +
        "); the perturbation result assumes an existing unperturbed solution");
  }
  PerturbedGamma out;
  if (pert.is_zero()) {
    out.levels = {model.mode_count()};
    out.values = {base.total()};
    out.verdict = base;
    out.verdict.evidence = "zero perturbation: " + base.evidence;
    return out;
  }

  const std::size_t n = model.mode_count();
  if (model.is_finite()) {
    out.levels = {n};
  } else {
    for (std::size_t level : {n / 4, n / 2, n}) {
      if (level >= 1 && (out.levels.empty() || out.levels.back() != level)) out.levels.push_back(level);
    }
  }
  for (std::size_t level : out.levels) {
    const Eigen::MatrixXd a = galerkin_perturbed_generator(model, pert, level);
    const Eigen::MatrixXd beta = ctrl.values().topRows(static_cast<Eigen::Index>(level));
    out.values.push_back(galerkin_gamma(a, beta, horizon));
  }

  const double finest = out.values.back();
  if (model.is_finite()) {
    out.verdict = make_verdict(finest, out.values, {0.0, 0.0}, "finite model: exact Galerkin value");
    return out;
  }
  // The unperturbed modes beyond N are carried by the unperturbed tail bound.
  const TailBracket tail{base.tail_lower, base.tail_upper};
  if (out.values.size() < 2) {
    out.verdict = make_inconclusive(finest, out.values, "too few Galerkin levels to judge convergence");
    return out;
  }
  const std::size_t k = out.values.size();
  const double last = std::abs(out.values[k - 1] - out.values[k - 2]);
  const double prev = k >= 3 ? std::abs(out.values[k - 2] - out.values[k - 3]) : last;
  const double scale = std::abs(finest);
  std::ostringstream os;
  os << "Galerkin levels";
  for (std::size_t i = 0; i < k; ++i) os << (i ? ", " : " ") << "N=" << out.levels[i] << ": " << out.values[i];
  if (std::isfinite(finest) && last <= tolerance * scale && (last <= prev || prev <= tolerance * scale)) {
    os << "; Cauchy within " << tolerance << " relative";
    out.verdict = make_verdict(finest, out.values, tail, os.str());
  } else {
    os << "; not yet settled";
    out.verdict = make_inconclusive(finest, out.values, os.str());
  }
  return out;
}

}  // namespace bnoise
