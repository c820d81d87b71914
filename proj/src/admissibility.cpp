#include "bnoise/admissibility.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "bnoise/errors.hpp"
#include "bnoise/numerics.hpp"

namespace bnoise {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// What the coefficient tail rule lets us say about unmaterialized modes.
struct TailContext {
  enum class Kind { Zero, Constant, SquareSummable, Unusable };
  Kind kind = Kind::Unusable;
  double amount = 0.0;  // constant weight or ell2 bound
  std::string reason;
  PowerFamily family;
  std::size_t start_mode = 0;  // mode number of the first unmaterialized mode
};

TailContext tail_context(const DiagonalModel& model, const CoefficientTable& coeffs) {
  if (coeffs.mode_count() != model.mode_count()) {
    throw InvalidArgument("coefficient table has " + std::to_string(coeffs.mode_count()) +
                          " modes, model has " + std::to_string(model.mode_count()));
  }
  TailContext ctx;
  const TailRule& rule = coeffs.tail();
  if (std::holds_alternative<ZeroTail>(rule)) {
    ctx.kind = TailContext::Kind::Zero;
    return ctx;
  }
  if (std::holds_alternative<UnknownTail>(rule)) {
    ctx.reason = "no tail rule: unmaterialized modes are uncertified";
    return ctx;
  }
  if (model.is_finite()) {
    ctx.reason = "tail rule " + describe(rule) + " needs a parametric spectrum";
    return ctx;
  }
  ctx.family = *model.family();
  ctx.start_mode = ctx.family.first_mode + model.mode_count();
  if (const auto* c = std::get_if<ConstantWeightTail>(&rule)) {
    ctx.kind = c->weight == 0.0 ? TailContext::Kind::Zero : TailContext::Kind::Constant;
    ctx.amount = c->weight;
  } else {
    const auto& s = std::get<SquareSummableTail>(rule);
    ctx.kind = s.bound == 0.0 ? TailContext::Kind::Zero : TailContext::Kind::SquareSummable;
    ctx.amount = s.bound;
  }
  return ctx;
}

double sum_of(const std::vector<double>& terms) {
  CompensatedSum s;
  for (double t : terms) s.add(t);
  return s.value();
}

TailBracket exact_bracket(double v) { return {v, v}; }

// 1/(1 + alpha v) over v in (0, v_max]: monotone, so its range is spanned by
// the endpoint values 1 (v -> 0) and 1/(1 + alpha v_max).
std::pair<double, double> ratio_range(double alpha, double v_max) {
  const double end = 1.0 / (1.0 + alpha * v_max);
  return {std::min(1.0, end), std::max(1.0, end)};
}

// Bracket of sum over unmaterialized modes m of w / |lambda - lambda_m|^2.
//
// With a(x) = Re(lambda) - lambda(x) = alpha + c x^p and tau = Im(lambda),
//   w / (a^2 + tau^2) = (w/c^2) x^{-2p} h(v),  h(v) = 1/((1 + alpha v)^2 + tau^2 v^2),
// v = 1/(c x^p) in (0, v_M]. The denominator is a convex quadratic in v, so
// its maximum sits at an endpoint and its minimum at an endpoint or the
// vertex v* = -alpha/(alpha^2 + tau^2).
TailBracket resolvent_mode_tail(const TailContext& ctx, Complex lambda,
                                const CriterionOptions& options, double reference) {
  switch (ctx.kind) {
    case TailContext::Kind::Zero: return {0.0, 0.0};
    case TailContext::Kind::Unusable: return {0.0, kInf};
    case TailContext::Kind::SquareSummable: {
      const double gap = lambda.real() - ctx.family.eigenvalue_at(static_cast<double>(ctx.start_mode));
      if (!(gap > 0.0)) return {0.0, kInf};
      return {0.0, ctx.amount / (gap * gap + lambda.imag() * lambda.imag())};
    }
    case TailContext::Kind::Constant: break;
  }
  const PowerFamily& fam = ctx.family;
  const double w = ctx.amount;
  const double alpha = lambda.real() - fam.shift;
  const double tau = lambda.imag();
  auto term = [&](std::size_t n) {
    const double a = lambda.real() - fam.eigenvalue_at(static_cast<double>(n));
    const double d = a * a + tau * tau;
    if (d == 0.0) {
      throw SingularResolvent(n - fam.first_mode, "resolvent is singular at unmaterialized mode " +
                                                      std::to_string(n - fam.first_mode));
    }
    return exact_bracket(w / d);
  };
  auto envelope = [&](std::size_t m) -> std::optional<TailEnvelope> {
    const double cmp = fam.c * std::pow(static_cast<double>(m), fam.p);
    if (!(alpha + cmp > 0.0)) return std::nullopt;
    const double vm = 1.0 / cmp;
    auto denom = [&](double v) { return (1.0 + alpha * v) * (1.0 + alpha * v) + tau * tau * v * v; };
    double dmax = std::max(1.0, denom(vm));
    double dmin = std::min(1.0, denom(vm));
    const double norm2 = alpha * alpha + tau * tau;
    if (norm2 > 0.0) {
      const double vstar = -alpha / norm2;
      if (vstar > 0.0 && vstar < vm) dmin = std::min(dmin, tau * tau / norm2);
    }
    if (!(dmin > 0.0)) return std::nullopt;
    return TailEnvelope{w / (fam.c * fam.c), 2.0 * fam.p, 1.0 / dmax, 1.0 / dmin};
  };
  TailSumOptions opts;
  opts.relative_target = options.relative_tail_target;
  opts.reference = reference;
  return sum_tail_with_envelope(ctx.start_mode, term, envelope, opts);
}

// int_N^inf dx / (a^2 + (2 pi x / T)^2) for N > 0.
double frequency_tail_integral(double a, double horizon, double n) {
  return horizon / (kTwoPi * a) * std::atan(horizon * a / (kTwoPi * n));
}

// sum_{|n| > N} 1/(a^2 + (2 pi n/T)^2). f is decreasing in |n|, so the
// one-sided sum lies between int_{N+1}^inf f and int_N^inf f. Past the
// inflection point x = a T / (2 pi sqrt 3) f is convex, and the midpoint and
// trapezoid rules give the tighter [int_{N+1}^inf f + f(N+1)/2, int_{N+1/2}^inf f].
TailBracket frequency_tail_bracket(double a, double horizon, std::size_t terms) {
  const double n = static_cast<double>(terms);
  const double c = kTwoPi / horizon;
  if (n + 0.5 >= a / (c * std::sqrt(3.0))) {
    const double f = 1.0 / (a * a + c * c * (n + 1.0) * (n + 1.0));
    return {2.0 * (frequency_tail_integral(a, horizon, n + 1.0) + 0.5 * f),
            2.0 * frequency_tail_integral(a, horizon, n + 0.5)};
  }
  return {2.0 * frequency_tail_integral(a, horizon, n + 1.0),
          2.0 * frequency_tail_integral(a, horizon, n)};
}

// Frequencies in summation order 0, -1, 1, -2, 2, ...
std::vector<long> frequency_order(std::size_t terms) {
  std::vector<long> order{0};
  for (long n = 1; n <= static_cast<long>(terms); ++n) {
    order.push_back(-n);
    order.push_back(n);
  }
  return order;
}

void require_positive_horizon(double horizon, const char* op) {
  if (!(horizon > 0.0)) throw InvalidArgument(std::string(op) + ": horizon T must be > 0");
}

std::string divergence_evidence(double p) {
  std::ostringstream os;
  os << "integral-comparison lower bound diverges (constant tail weight, p = " << p << " <= 1)";
  return os.str();
}

}  // namespace

void FrequencyGrid::validate(double growth) const {
  if (!(omega > growth)) {
    throw InvalidArgument("frequency grid: omega must exceed the growth bound " +
                          std::to_string(growth));
  }
  if (!(horizon > 0.0)) throw InvalidArgument("frequency grid: T must be > 0");
  if (terms < 1) throw InvalidArgument("frequency grid: need at least one frequency term");
}

double FrequencyGrid::frequency(long n) const noexcept {
  return kTwoPi * static_cast<double>(n) / horizon;
}

SeriesVerdict gamma_time(const DiagonalModel& model, const CoefficientTable& coeffs, double horizon,
                         const CriterionOptions& options) {
  require_positive_horizon(horizon, "gamma_time");
  const TailContext ctx = tail_context(model, coeffs);
  const auto w = coeffs.weights();
  const auto eig = model.eigenvalues();
  std::vector<double> terms(w.size());
  for (std::size_t n = 0; n < w.size(); ++n) terms[n] = w[n] * exp_square_integral(eig[n], horizon);
  const double partial = sum_of(terms);

  switch (ctx.kind) {
    case TailContext::Kind::Zero:
      return make_verdict(partial, std::move(terms), {0.0, 0.0}, "zero tail");
    case TailContext::Kind::Unusable:
      return make_inconclusive(partial, std::move(terms), ctx.reason);
    case TailContext::Kind::SquareSummable: {
      // exp_square_integral is increasing in lambda and the family is
      // non-increasing, so the first unmaterialized mode dominates.
      const double lam = ctx.family.eigenvalue_at(static_cast<double>(ctx.start_mode));
      return make_verdict(partial, std::move(terms),
                          {0.0, ctx.amount * exp_square_integral(lam, horizon)}, "ell2 tail bound");
    }
    case TailContext::Kind::Constant: break;
  }

  // term(x) = w (1 - e^{-2 a T}) / (2 a), a = c x^p - shift
  //         = (w / 2c) x^{-p} * [1/(1 - shift v)] * (1 - e^{-2 a T}),  v = 1/(c x^p).
  const PowerFamily& fam = ctx.family;
  const double wt = ctx.amount;
  auto term = [&](std::size_t n) {
    return exact_bracket(wt * exp_square_integral(fam.eigenvalue_at(static_cast<double>(n)), horizon));
  };
  auto envelope = [&](std::size_t m) -> std::optional<TailEnvelope> {
    const double cmp = fam.c * std::pow(static_cast<double>(m), fam.p);
    const double a = cmp - fam.shift;
    if (!(a > 0.0)) return std::nullopt;
    const auto [rlo, rhi] = ratio_range(-fam.shift, 1.0 / cmp);
    return TailEnvelope{wt / (2.0 * fam.c), fam.p, rlo * -std::expm1(-2.0 * a * horizon), rhi};
  };
  TailSumOptions opts;
  opts.relative_target = options.relative_tail_target;
  opts.reference = partial;
  const TailBracket tail = sum_tail_with_envelope(ctx.start_mode, term, envelope, opts);
  if (tail.divergent()) return make_diverged(partial, std::move(terms), divergence_evidence(fam.p));
  return make_verdict(partial, std::move(terms), tail, "integral-comparison tail");
}

InfiniteHorizonResult gamma_infinite(const DiagonalModel& model, const CoefficientTable& coeffs,
                                     double t0, const CriterionOptions& options) {
  require_positive_horizon(t0, "gamma_infinite");
  const double w0 = growth_bound(model);
  if (!(w0 < 0.0)) {
    throw PreconditionError(
        "gamma_infinite: the semigroup is not exponentially stable (growth bound " +
        std::to_string(w0) + " >= 0); the infinite-horizon extension needs ||T(t0)|| < 1");
  }
  const TailContext ctx = tail_context(model, coeffs);
  const auto w = coeffs.weights();
  const auto eig = model.eigenvalues();
  std::vector<double> terms(w.size());
  for (std::size_t n = 0; n < w.size(); ++n) terms[n] = w[n] / (-2.0 * eig[n]);
  const double partial = sum_of(terms);

  InfiniteHorizonResult out;
  switch (ctx.kind) {
    case TailContext::Kind::Zero:
      out.exact = make_verdict(partial, std::move(terms), {0.0, 0.0}, "zero tail");
      break;
    case TailContext::Kind::Unusable:
      out.exact = make_inconclusive(partial, std::move(terms), ctx.reason);
      break;
    case TailContext::Kind::SquareSummable: {
      const double lam = ctx.family.eigenvalue_at(static_cast<double>(ctx.start_mode));
      out.exact = make_verdict(partial, std::move(terms), {0.0, ctx.amount / (-2.0 * lam)},
                               "ell2 tail bound");
      break;
    }
    case TailContext::Kind::Constant: {
      const PowerFamily& fam = ctx.family;
      const double wt = ctx.amount;
      auto term = [&](std::size_t n) {
        return exact_bracket(wt / (-2.0 * fam.eigenvalue_at(static_cast<double>(n))));
      };
      auto envelope = [&](std::size_t m) -> std::optional<TailEnvelope> {
        const double cmp = fam.c * std::pow(static_cast<double>(m), fam.p);
        if (!(cmp - fam.shift > 0.0)) return std::nullopt;
        const auto [rlo, rhi] = ratio_range(-fam.shift, 1.0 / cmp);
        return TailEnvelope{wt / (2.0 * fam.c), fam.p, rlo, rhi};
      };
      TailSumOptions opts;
      opts.relative_target = options.relative_tail_target;
      opts.reference = partial;
      const TailBracket tail = sum_tail_with_envelope(ctx.start_mode, term, envelope, opts);
      if (tail.divergent()) {
        out.exact = make_diverged(partial, std::move(terms), divergence_evidence(fam.p));
      } else {
        out.exact = make_verdict(partial, std::move(terms), tail, "integral-comparison tail");
      }
      break;
    }
  }

  out.contraction = std::exp(w0 * t0);
  const SeriesVerdict g = gamma_time(model, coeffs, t0, options);
  out.geometric_bound = g.verdict == Verdict::Converged
                            ? (g.partial_value + g.tail_upper) / (1.0 - out.contraction * out.contraction)
                            : kInf;
  return out;
}

SeriesVerdict resolvent_hs_norm_squared(const DiagonalModel& model, const CoefficientTable& coeffs,
                                        Complex lambda, const CriterionOptions& options) {
  const TailContext ctx = tail_context(model, coeffs);
  const auto w = coeffs.weights();
  const auto eig = model.eigenvalues();
  std::vector<double> terms(w.size());
  for (std::size_t n = 0; n < w.size(); ++n) {
    const double d = std::norm(lambda - eig[n]);
    const double scale = std::max(1.0, std::abs(eig[n]));
    if (std::sqrt(d) <= 64.0 * std::numeric_limits<double>::epsilon() * scale) {
      throw SingularResolvent(n, "resolvent is singular at mode " + std::to_string(n));
    }
    terms[n] = w[n] / d;
  }
  const double partial = sum_of(terms);
  if (ctx.kind == TailContext::Kind::Unusable) {
    return make_inconclusive(partial, std::move(terms), ctx.reason);
  }
  const TailBracket tail = resolvent_mode_tail(ctx, lambda, options, partial);
  if (tail.divergent()) {
    return make_diverged(partial, std::move(terms),
                         "per-term value is infinite (mode sum of w/|lambda - lambda_m|^2 diverges)");
  }
  std::string evidence = ctx.kind == TailContext::Kind::Zero ? "zero tail"
                         : ctx.kind == TailContext::Kind::SquareSummable ? "ell2 tail bound"
                                                                         : "integral-comparison tail";
  if (!tail.finite()) return make_inconclusive(partial, std::move(terms), "tail rule gives no bound here");
  return make_verdict(partial, std::move(terms), tail, std::move(evidence));
}

SeriesVerdict frequency_series(const DiagonalModel& model, const CoefficientTable& coeffs,
                               const FrequencyGrid& grid, const CriterionOptions& options) {
  grid.validate(growth_bound(model));
  const TailContext ctx = tail_context(model, coeffs);
  const auto w = coeffs.weights();
  const auto eig = model.eigenvalues();
  const double horizon = grid.horizon;

  std::vector<double> a(eig.size());
  for (std::size_t m = 0; m < eig.size(); ++m) a[m] = grid.omega - eig[m];

  std::vector<double> terms;
  CompensatedSum partial;
  for (long n : frequency_order(grid.terms)) {
    const double nu = grid.frequency(n);
    CompensatedSum t;
    for (std::size_t m = 0; m < a.size(); ++m) t.add(w[m] / (a[m] * a[m] + nu * nu));
    terms.push_back(t.value());
    partial.add(t.value());
  }

  // Remainder |n| > terms for the materialized modes.
  TailBracket tail{0.0, 0.0};
  for (std::size_t m = 0; m < a.size(); ++m) {
    if (w[m] == 0.0) continue;
    tail = tail + w[m] * frequency_tail_bracket(a[m], horizon, grid.terms);
  }

  switch (ctx.kind) {
    case TailContext::Kind::Zero:
      return make_verdict(partial.value(), std::move(terms), tail,
                          "zero mode tail; frequency tail by integral comparison");
    case TailContext::Kind::Unusable:
      return make_inconclusive(partial.value(), std::move(terms), ctx.reason);
    case TailContext::Kind::SquareSummable: {
      // Full frequency sum per mode: sum_n 1/(a^2 + nu_n^2) = (T/2a) coth(aT/2),
      // decreasing in a, so the first unmaterialized mode dominates.
      const double a0 = grid.omega - ctx.family.eigenvalue_at(static_cast<double>(ctx.start_mode));
      const double full = horizon / (2.0 * a0) / std::tanh(0.5 * a0 * horizon);
      return make_verdict(partial.value(), std::move(terms), tail + TailBracket{0.0, ctx.amount * full},
                          "ell2 mode tail; frequency tail by integral comparison");
    }
    case TailContext::Kind::Constant: break;
  }

  const PowerFamily& fam = ctx.family;
  const double wt = ctx.amount;
  if (2.0 * fam.p <= 1.0) {
    return make_diverged(partial.value(), std::move(terms),
                         "per-term value is infinite (mode sum of w/|lambda - lambda_m|^2 diverges)");
  }
  // Unmaterialized modes with all frequencies at once:
  //   w (T/2a) coth(aT/2) = (w T / 2c) x^{-p} * [1/(1 + alpha v)] * coth(aT/2),
  // a = alpha + c x^p, alpha = omega - shift; coth(aT/2) lies in [1, coth(a_M T/2)].
  const double alpha = grid.omega - fam.shift;
  auto term = [&](std::size_t n) {
    const double am = grid.omega - fam.eigenvalue_at(static_cast<double>(n));
    return exact_bracket(wt * horizon / (2.0 * am) / std::tanh(0.5 * am * horizon));
  };
  auto envelope = [&](std::size_t m) -> std::optional<TailEnvelope> {
    const double cmp = fam.c * std::pow(static_cast<double>(m), fam.p);
    const double am = alpha + cmp;
    if (!(am > 0.0)) return std::nullopt;
    const auto [rlo, rhi] = ratio_range(alpha, 1.0 / cmp);
    return TailEnvelope{wt * horizon / (2.0 * fam.c), fam.p, rlo, rhi / std::tanh(0.5 * am * horizon)};
  };
  TailSumOptions opts;
  opts.relative_target = options.relative_tail_target;
  opts.reference = partial.value();
  const TailBracket mode_tail = sum_tail_with_envelope(ctx.start_mode, term, envelope, opts);
  if (mode_tail.divergent()) {
    return make_diverged(partial.value(), std::move(terms), divergence_evidence(fam.p));
  }
  return make_verdict(partial.value(), std::move(terms), tail + mode_tail,
                      "integral-comparison tails (modes and frequencies)");
}

SeriesVerdict frequency_series_by_frequency(const DiagonalModel& model,
                                            const CoefficientTable& coeffs,
                                            const FrequencyGrid& grid,
                                            const CriterionOptions& options) {
  grid.validate(growth_bound(model));
  const TailContext ctx = tail_context(model, coeffs);
  if (ctx.kind == TailContext::Kind::Unusable) {
    // Materialized part only, for the record.
    SeriesVerdict v = frequency_series(model, coeffs, grid, options);
    return make_inconclusive(v.partial_value, std::move(v.terms), ctx.reason);
  }
  if (ctx.kind == TailContext::Kind::Constant && 2.0 * ctx.family.p <= 1.0) {
    return make_diverged(kInf, {}, "per-term value is infinite (mode sum of w/|lambda - lambda_m|^2 diverges)");
  }

  std::vector<double> terms;
  CompensatedSum partial;
  TailBracket tail{0.0, 0.0};
  for (long n : frequency_order(grid.terms)) {
    const SeriesVerdict hs =
        resolvent_hs_norm_squared(model, coeffs, Complex(grid.omega, grid.frequency(n)), options);
    if (hs.verdict != Verdict::Converged) {
      return make_inconclusive(partial.value(), std::move(terms),
                               "frequency term " + std::to_string(n) + ": " + hs.evidence);
    }
    terms.push_back(hs.partial_value);
    partial.add(hs.partial_value);
    tail = tail + TailBracket{hs.tail_lower, hs.tail_upper};
  }

  const auto w = coeffs.weights();
  const auto eig = model.eigenvalues();
  for (std::size_t m = 0; m < w.size(); ++m) {
    if (w[m] == 0.0) continue;
    tail = tail + w[m] * frequency_tail_bracket(grid.omega - eig[m], grid.horizon, grid.terms);
  }

  switch (ctx.kind) {
    case TailContext::Kind::Zero:
      return make_verdict(partial.value(), std::move(terms), tail,
                          "zero mode tail; frequency tail by integral comparison");
    case TailContext::Kind::SquareSummable: {
      const double a0 = grid.omega - ctx.family.eigenvalue_at(static_cast<double>(ctx.start_mode));
      return make_verdict(partial.value(), std::move(terms),
                          tail + ctx.amount * frequency_tail_bracket(a0, grid.horizon, grid.terms),
                          "ell2 mode tail; frequency tail by integral comparison");
    }
    default: break;
  }

  // |n| > terms for unmaterialized modes: per mode the bracket is
  // w [2 J(N+1), 2 J(N)], J(N) = (T / 2 pi a) atan(T a / 2 pi N), and
  //   2 J(N) = (w T / 2c) x^{-p} * [1/(1 + alpha v)] * (2/pi) atan(T a / 2 pi N).
  const PowerFamily& fam = ctx.family;
  const double wt = ctx.amount;
  const double alpha = grid.omega - fam.shift;
  const double nf = static_cast<double>(grid.terms);
  auto term = [&](std::size_t n) {
    const double am = grid.omega - fam.eigenvalue_at(static_cast<double>(n));
    return wt * frequency_tail_bracket(am, grid.horizon, grid.terms);
  };
  auto envelope = [&](std::size_t m) -> std::optional<TailEnvelope> {
    const double cmp = fam.c * std::pow(static_cast<double>(m), fam.p);
    const double am = alpha + cmp;
    if (!(am > 0.0)) return std::nullopt;
    const auto [rlo, rhi] = ratio_range(alpha, 1.0 / cmp);
    const double lo = 2.0 / std::numbers::pi * std::atan(grid.horizon * am / (kTwoPi * (nf + 1.0)));
    return TailEnvelope{wt * grid.horizon / (2.0 * fam.c), fam.p, rlo * lo, rhi};
  };
  TailSumOptions opts;
  opts.relative_target = options.relative_tail_target;
  opts.reference = partial.value();
  const TailBracket mode_tail = sum_tail_with_envelope(ctx.start_mode, term, envelope, opts);
  if (mode_tail.divergent()) {
    return make_diverged(partial.value(), std::move(terms), divergence_evidence(fam.p));
  }
  return make_verdict(partial.value(), std::move(terms), tail + mode_tail,
                      "integral-comparison tails (modes and frequencies)");
}

ParsevalResult parseval_identity_check(const DiagonalModel& model,
                                       const ObservationCoefficients& obs, double omega,
                                       double horizon, std::size_t frequency_terms) {
  if (!model.is_finite()) {
    throw PreconditionError("parseval_identity_check: needs a finite explicit spectrum");
  }
  const FrequencyGrid grid{omega, horizon, frequency_terms};
  // omega > omega_0 makes the spectral radius of e^{-omega T} T(T) less than
  // one, so J = I - e^{-omega T} T(T) is invertible.
  grid.validate(growth_bound(model));
  if (obs.mode_count() != model.mode_count()) {
    throw InvalidArgument("parseval_identity_check: observation table does not match the model");
  }
  const auto w = obs.weights();
  const auto eig = model.eigenvalues();

  ParsevalResult out;
  CompensatedSum lhs;
  CompensatedSum rhs;
  TailBracket tail{0.0, 0.0};
  for (std::size_t m = 0; m < w.size(); ++m) {
    if (w[m] == 0.0) continue;
    const double a = omega - eig[m];
    lhs.add(w[m] * horizon * phi1(-2.0 * a * horizon));
    const double j = -std::expm1(-a * horizon);
    // The exponentials e^{-2 pi i n t/T} have squared norm T in L^2(0,T),
    // hence the 1/T.
    const double weight = w[m] * j * j / horizon;
    CompensatedSum s;
    for (long n : frequency_order(frequency_terms)) {
      const double nu = grid.frequency(n);
      s.add(1.0 / (a * a + nu * nu));
    }
    rhs.add(weight * s.value());
    tail = tail + weight * frequency_tail_bracket(a, horizon, frequency_terms);
  }
  out.lhs = lhs.value();
  out.rhs = rhs.value() + tail.midpoint();
  out.rhs_tail_radius = tail.radius();
  out.residual = out.lhs == 0.0 ? 0.0 : std::abs(out.lhs - out.rhs) / out.lhs;
  return out;
}

WeissScan weiss_scan(const DiagonalModel& model, const CoefficientTable& obs, double omega,
                     std::span<const Complex> lambda_grid) {
  const double w0 = growth_bound(model);
  if (!(omega > w0)) throw InvalidArgument("weiss_scan: omega must exceed the growth bound");
  if (lambda_grid.empty()) throw InvalidArgument("weiss_scan: empty lambda grid");
  WeissScan scan;
  scan.sup = -1.0;
  for (const Complex& lambda : lambda_grid) {
    if (!(lambda.real() > omega)) {
      throw InvalidArgument("weiss_scan: grid point with Re(lambda) <= omega");
    }
    const SeriesVerdict hs = resolvent_hs_norm_squared(model, obs, lambda);
    if (hs.verdict != Verdict::Converged) {
      throw PreconditionError("weiss_scan: HS norm is not certified at a grid point: " + hs.evidence);
    }
    WeissPoint pt;
    pt.lambda = lambda;
    pt.hs_norm = std::sqrt(hs.total());
    pt.statistic = std::sqrt(lambda.real() - omega) * pt.hs_norm;
    if (pt.statistic > scan.sup) {
      scan.sup = pt.statistic;
      scan.argmax = lambda;
    }
    scan.table.push_back(pt);
  }
  return scan;
}

DyadicResult dyadic_diagnostic(const DiagonalModel& model, const CoefficientTable& ctrl, int range) {
  if (range < 0) throw InvalidArgument("dyadic_diagnostic: range must be >= 0");
  const TailContext ctx = tail_context(model, ctrl);
  const double w0 = growth_bound(model);
  const auto w = ctrl.weights();
  const auto eig = model.eigenvalues();

  DyadicResult out;
  std::vector<double> terms;
  CompensatedSum partial;
  TailBracket tail{0.0, 0.0};
  bool tail_known = ctx.kind != TailContext::Kind::Unusable;
  std::vector<double> by_exponent(2 * static_cast<std::size_t>(range) + 1, -1.0);

  // Ascending |n|, negative first within each |n|.
  for (int k = 0; k <= range; ++k) {
    for (int n : (k == 0 ? std::vector<int>{0} : std::vector<int>{-k, k})) {
      const double s = std::ldexp(1.0, n);
      if (!(s > w0)) continue;
      CompensatedSum t;
      for (std::size_t m = 0; m < w.size(); ++m) {
        const double d = s - eig[m];
        if (d == 0.0) throw SingularResolvent(m, "2^n hits eigenvalue of mode " + std::to_string(m));
        t.add(s * w[m] / (d * d));
      }
      if (tail_known) {
        const TailBracket mt = s * resolvent_mode_tail(ctx, Complex(s, 0.0), {}, t.value());
        if (!mt.finite()) tail_known = false;
        tail = tail + mt;
      }
      terms.push_back(t.value());
      partial.add(t.value());
      out.exponents.push_back(n);
      by_exponent[static_cast<std::size_t>(n + range)] = t.value();
    }
  }

  for (int n = 1; n <= range; ++n) {
    const double a = by_exponent[static_cast<std::size_t>(range + n)];
    const double b = by_exponent[static_cast<std::size_t>(range - n)];
    if (a < 0.0 || b < 0.0) continue;
    const double scale = std::max(a, b);
    if (scale > 0.0) out.symmetry_defect = std::max(out.symmetry_defect, std::abs(a - b) / scale);
  }

  if (!tail_known) {
    out.series = make_inconclusive(partial.value(), std::move(terms),
                                   ctx.kind == TailContext::Kind::Unusable ? ctx.reason
                                                                           : "mode tail not certified");
    return out;
  }

  // n > range: 2^n/(2^n - l)^2 = 2^{-n} g(2^{-n}), g(v) = 1/(1 - l v)^2 is
  // monotone in v, so over n > range it lies between g(0) = 1 and g(2^{-range-1}).
  const double vr = std::ldexp(1.0, -range - 1);
  double glo = 0.0;
  double ghi = 0.0;
  for (std::size_t m = 0; m < w.size(); ++m) {
    const double g = 1.0 / ((1.0 - eig[m] * vr) * (1.0 - eig[m] * vr));
    glo += w[m] * std::min(1.0, g);
    ghi += w[m] * std::max(1.0, g);
  }
  const double geo = std::ldexp(1.0, -range);  // sum_{n > range} 2^{-n}
  tail = tail + TailBracket{glo * geo, ghi * geo};
  if (ctx.kind == TailContext::Kind::Constant) {
    // 2^n sum_{m >= N} w/(2^n + c m^p)^2 <= 2^n w int_0^inf dx/(2^n + c x^p)^2
    //   = w c^{-1/p} I_p 2^{n(1/p - 1)},  I_p = (1/p) B(1/p, 2 - 1/p),
    // geometric in n when p > 1.
    const PowerFamily& fam = ctx.family;
    if (fam.p <= 1.0 || fam.shift > 0.0) {
      out.series = make_inconclusive(partial.value(), std::move(terms),
                                     "no certified dyadic tail for this spectrum (needs p > 1)");
      return out;
    }
    const double ip = std::tgamma(1.0 / fam.p) * std::tgamma(2.0 - 1.0 / fam.p) / fam.p;
    const double rho = std::exp2(1.0 / fam.p - 1.0);
    const double bound = ctx.amount * std::pow(fam.c, -1.0 / fam.p) * ip *
                         std::pow(rho, range + 1) / (1.0 - rho);
    tail = tail + TailBracket{0.0, bound};
  } else if (ctx.kind == TailContext::Kind::SquareSummable) {
    // 2^n / (2^n - l)^2 <= 2^{-n} once every unmaterialized l is <= 0.
    if (ctx.family.eigenvalue_at(static_cast<double>(ctx.start_mode)) > 0.0) {
      out.series = make_inconclusive(partial.value(), std::move(terms),
                                     "no certified dyadic tail: unmaterialized eigenvalues above 0");
      return out;
    }
    tail = tail + TailBracket{0.0, ctx.amount * geo};
  }

  // n < -range: present only when every 2^n sits above omega_0, i.e. omega_0 <= 0.
  if (w0 <= 0.0) {
    double zero_mode_weight = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    const double sr = std::ldexp(1.0, -range - 1);
    for (std::size_t m = 0; m < w.size(); ++m) {
      if (w[m] == 0.0) continue;
      if (eig[m] == 0.0) {
        zero_mode_weight += w[m];
        continue;
      }
      // sum_{n < -range} 2^n / (2^n + |l|)^2 in [2^{-range} / (2^{-range-1} + |l|)^2, 2^{-range} / l^2].
      lo += w[m] * geo / ((sr - eig[m]) * (sr - eig[m]));
      hi += w[m] * geo / (eig[m] * eig[m]);
    }
    if (zero_mode_weight > 0.0) {
      out.series = make_diverged(partial.value(), std::move(terms),
                                 "terms bounded below: a zero eigenvalue with nonzero weight makes "
                                 "term(n) >= w_0 2^{-n} as n -> -infinity");
      return out;
    }
    tail = tail + TailBracket{lo, hi};
    if (ctx.kind == TailContext::Kind::Constant || ctx.kind == TailContext::Kind::SquareSummable) {
      // 2^n sum_{m >= N} w/(lambda_m)^2 summed over n < -range.
      const PowerFamily& fam = ctx.family;
      double mode_sum = 0.0;
      if (ctx.kind == TailContext::Kind::Constant) {
        const TailBracket s = power_sum_tail(2.0 * fam.p, ctx.start_mode);
        mode_sum = ctx.amount * s.upper / (fam.c * fam.c);
      } else {
        const double l = fam.eigenvalue_at(static_cast<double>(ctx.start_mode));
        mode_sum = l == 0.0 ? kInf : ctx.amount / (l * l);
      }
      tail = tail + TailBracket{0.0, geo * mode_sum};
    }
  }
  out.series = make_verdict(partial.value(), std::move(terms), tail,
                            "geometric dyadic tails; diagnostic only, no existence claim");
  return out;
}

double PairingValues::residual() const noexcept {
  const double scale = std::max(std::abs(state_side), std::abs(output_side));
  if (scale == 0.0) return 0.0;
  return std::abs(state_side - output_side) / scale;
}

PairingValues input_map_pairing(const DiagonalModel& model, const ControlCoefficients& ctrl,
                                double horizon, std::span<const double> partition,
                                const Eigen::MatrixXd& u, const ModeVector& x) {
  require_positive_horizon(horizon, "input_map_pairing");
  if (partition.size() < 2) throw InvalidArgument("input_map_pairing: empty time grid");
  if (partition.front() != 0.0 || std::abs(partition.back() - horizon) > 1e-12 * horizon) {
    throw InvalidArgument("input_map_pairing: partition must run from 0 to T");
  }
  for (std::size_t j = 1; j < partition.size(); ++j) {
    if (!(partition[j] > partition[j - 1])) {
      throw InvalidArgument("input_map_pairing: partition must be strictly increasing");
    }
  }
  const std::size_t cells = partition.size() - 1;
  if (static_cast<std::size_t>(u.rows()) != cells ||
      static_cast<std::size_t>(u.cols()) != ctrl.channel_count()) {
    throw InvalidArgument("input_map_pairing: u must have one row per cell, one column per channel");
  }
  if (ctrl.mode_count() != model.mode_count() || x.size() != model.mode_count()) {
    throw InvalidArgument("input_map_pairing: coefficient/state sizes do not match the model");
  }
  const auto eig = model.eigenvalues();
  const Eigen::MatrixXd& beta = ctrl.values();

  // State side: y(t_{j+1}) = e^{l h} y(t_j) + h phi1(l h) (beta u_j).
  Eigen::VectorXd forcing = Eigen::VectorXd::Zero(beta.rows());
  std::vector<double> y(eig.size(), 0.0);
  for (std::size_t j = 0; j < cells; ++j) {
    const double h = partition[j + 1] - partition[j];
    forcing = beta * u.row(static_cast<Eigen::Index>(j)).transpose();
    for (std::size_t m = 0; m < eig.size(); ++m) {
      y[m] = std::exp(eig[m] * h) * y[m] + h * phi1(eig[m] * h) * forcing(static_cast<Eigen::Index>(m));
    }
  }
  PairingValues out;
  CompensatedSum state;
  for (std::size_t m = 0; m < eig.size(); ++m) state.add(y[m] * x[m]);
  out.state_side = state.value();

  // Output side: int_0^T <u(t), B* T*(T - t) x> dt by 5-point Gauss-Legendre,
  // each cell split so that |lambda| h <= 2 on every panel.
  const auto& rule = gauss_legendre(5);
  double stiffness = 0.0;
  for (double l : eig) stiffness = std::max(stiffness, std::abs(l));
  CompensatedSum output;
  for (std::size_t j = 0; j < cells; ++j) {
    const double h = partition[j + 1] - partition[j];
    const auto panels = static_cast<std::size_t>(std::max(1.0, std::ceil(stiffness * h / 2.0)));
    const double width = h / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
      const double half = 0.5 * width;
      const double mid = partition[j] + (static_cast<double>(p) + 0.5) * width;
      double cell = 0.0;
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double t = mid + half * rule.nodes[q];
        double val = 0.0;
        for (Eigen::Index k = 0; k < beta.cols(); ++k) {
          double obs = 0.0;
          for (std::size_t m = 0; m < eig.size(); ++m) {
            obs += beta(static_cast<Eigen::Index>(m), k) * std::exp(eig[m] * (horizon - t)) * x[m];
          }
          val += u(static_cast<Eigen::Index>(j), k) * obs;
        }
        cell += rule.weights[q] * val;
      }
      output.add(half * cell);
    }
  }
  out.output_side = output.value();
  return out;
}

DualityReport adjoint_duality_check(const DiagonalModel& model, const ControlCoefficients& ctrl,
                                    double horizon, std::span<const double> partition,
                                    std::size_t trials, std::uint64_t seed) {
  if (partition.size() < 2) throw InvalidArgument("adjoint_duality_check: empty time grid");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  DualityReport report;
  report.trials = trials;
  const auto cells = static_cast<Eigen::Index>(partition.size() - 1);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    Eigen::MatrixXd u(cells, static_cast<Eigen::Index>(ctrl.channel_count()));
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      for (Eigen::Index k = 0; k < u.cols(); ++k) u(i, k) = normal(rng);
    }
    ModeVector x = ModeVector::zero(model.mode_count());
    for (double& c : x.coeffs) c = normal(rng);
    const double r = input_map_pairing(model, ctrl, horizon, partition, u, x).residual();
    if (r > report.max_residual) {
      report.max_residual = r;
      report.worst_trial = trial;
    }
  }
  return report;
}

}  // namespace bnoise
