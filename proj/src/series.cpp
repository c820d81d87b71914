#include "bnoise/series.hpp"

#include <algorithm>
#include <cmath>

#include "bnoise/errors.hpp"

namespace bnoise {

void CompensatedSum::add(double x) noexcept {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    carry_ += (sum_ - t) + x;
  } else {
    carry_ += (x - t) + sum_;
  }
  sum_ = t;
}

double TailBracket::midpoint() const noexcept {
  if (!finite()) return kInf;
  return 0.5 * (lower + upper);
}

double TailBracket::radius() const noexcept {
  if (!finite()) return kInf;
  return 0.5 * (upper - lower);
}

TailBracket operator+(const TailBracket& a, const TailBracket& b) noexcept {
  return {a.lower + b.lower, a.upper + b.upper};
}

TailBracket operator*(double s, const TailBracket& a) noexcept {
  if (s == 0.0) return {0.0, 0.0};
  return {s * a.lower, s * a.upper};
}

TailBracket power_sum_tail(double s, std::size_t start) {
  if (start == 0) throw InvalidArgument("power_sum_tail: start index must be >= 1");
  if (s <= 1.0) return {kInf, kInf};

  const double a = static_cast<double>(start);
  // (s)_j rising factorial, evaluated incrementally.
  auto rising = [s](int j) {
    double r = 1.0;
    for (int i = 0; i < j; ++i) r *= s + i;
    return r;
  };
  constexpr double kB2 = 1.0 / 6.0;
  constexpr double kB4 = -1.0 / 30.0;
  constexpr double kB6 = 1.0 / 42.0;
  constexpr double kB8 = -1.0 / 30.0;

  const double a_s = std::pow(a, -s);
  double estimate = a * a_s / (s - 1.0) + 0.5 * a_s;
  estimate += kB2 / 2.0 * rising(1) * a_s / a;
  estimate += kB4 / 24.0 * rising(3) * a_s / std::pow(a, 3);
  estimate += kB6 / 720.0 * rising(5) * a_s / std::pow(a, 5);
  const double remainder = 2.0 * std::abs(kB8 / 40320.0 * rising(7) * a_s / std::pow(a, 7));
  // A few ulps for the arithmetic above.
  const double slack = remainder + 8.0 * std::numeric_limits<double>::epsilon() * estimate;
  return {std::max(0.0, estimate - slack), estimate + slack};
}

TailBracket sum_tail_with_envelope(
    std::size_t start, const std::function<TailBracket(std::size_t)>& term,
    const std::function<std::optional<TailEnvelope>(std::size_t)>& envelope,
    const TailSumOptions& options) {
  const std::size_t first = std::max<std::size_t>(start, 1);
  CompensatedSum lo;
  CompensatedSum hi;
  std::size_t n = start;
  // Index 0 has no x^{-s} envelope; it is always summed explicitly.
  if (n == 0) {
    const TailBracket t = term(0);
    lo.add(t.lower);
    hi.add(t.upper);
    n = 1;
  }
  std::size_t next_close = std::max(first, start + options.first_closure);
  // Closing straight away is cheap and catches divergent envelopes early.
  std::size_t try_at = first;
  TailBracket best{kInf, kInf};
  bool have_best = false;
  while (true) {
    if (n == try_at) {
      if (auto env = envelope(n)) {
        const TailBracket s = power_sum_tail(env->exponent, n);
        if (s.divergent() && env->scale * env->h_lower > 0.0) {
          return {kInf, kInf};
        }
        TailBracket closed{lo.value() + env->scale * env->h_lower * s.lower,
                           hi.value() + env->scale * env->h_upper * s.upper};
        if (!s.finite()) closed.upper = kInf;
        best = closed;
        have_best = true;
        const double target =
            options.relative_target * (std::abs(options.reference) + std::abs(closed.lower));
        if (closed.upper - closed.lower <= target || n >= options.cap) return closed;
      } else if (n >= options.cap) {
        break;
      }
      try_at = (try_at == first) ? next_close : 2 * try_at;
      try_at = std::min(try_at, options.cap);
    }
    const TailBracket t = term(n);
    if (t.divergent()) return {kInf, kInf};
    lo.add(t.lower);
    hi.add(t.upper);
    ++n;
  }
  if (have_best) return best;
  // No valid envelope up to the cap: only the explicit part is known.
  return {lo.value(), kInf};
}

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::Converged: return "Converged";
    case Verdict::Diverged: return "Diverged";
    case Verdict::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

std::string_view to_string(TailStatus s) noexcept {
  switch (s) {
    case TailStatus::Certified: return "certified";
    case TailStatus::Unbounded: return "unbounded";
    case TailStatus::Unknown: return "unknown";
  }
  return "unknown";
}

double SeriesVerdict::total() const noexcept {
  if (tail_status == TailStatus::Certified) return partial_value + 0.5 * (tail_lower + tail_upper);
  if (tail_status == TailStatus::Unbounded) return kInf;
  return partial_value;
}

double SeriesVerdict::uncertainty() const noexcept {
  if (tail_status != TailStatus::Certified) return kInf;
  return 0.5 * (tail_upper - tail_lower);
}

double SeriesVerdict::relative_uncertainty() const noexcept {
  const double t = total();
  if (t == 0.0) return uncertainty() == 0.0 ? 0.0 : kInf;
  return uncertainty() / std::abs(t);
}

SeriesVerdict make_verdict(double partial, std::vector<double> terms,
                           const TailBracket& tail, std::string evidence) {
  SeriesVerdict v;
  v.partial_value = partial;
  v.terms = std::move(terms);
  v.evidence = std::move(evidence);
  if (tail.divergent() || partial == kInf) {
    v.tail_status = TailStatus::Unbounded;
    v.tail_lower = kInf;
    v.tail_upper = kInf;
    v.verdict = Verdict::Diverged;
  } else if (tail.finite()) {
    v.tail_status = TailStatus::Certified;
    v.tail_lower = tail.lower;
    v.tail_upper = tail.upper;
    v.verdict = Verdict::Converged;
  } else {
    v.tail_status = TailStatus::Unknown;
    v.tail_lower = tail.lower;
    v.tail_upper = kInf;
    v.verdict = Verdict::Inconclusive;
  }
  return v;
}

SeriesVerdict make_inconclusive(double partial, std::vector<double> terms, std::string evidence) {
  SeriesVerdict v;
  v.partial_value = partial;
  v.terms = std::move(terms);
  v.tail_status = TailStatus::Unknown;
  v.tail_lower = 0.0;
  v.tail_upper = kInf;
  v.verdict = Verdict::Inconclusive;
  v.evidence = std::move(evidence);
  return v;
}

SeriesVerdict make_diverged(double partial, std::vector<double> terms, std::string evidence) {
  SeriesVerdict v;
  v.partial_value = partial;
  v.terms = std::move(terms);
  v.tail_status = TailStatus::Unbounded;
  v.tail_lower = kInf;
  v.tail_upper = kInf;
  v.verdict = Verdict::Diverged;
  v.evidence = std::move(evidence);
  return v;
}

}  // namespace bnoise
