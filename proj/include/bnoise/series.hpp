#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bnoise {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Compensated (Neumaier) running sum. Summation order is the caller's
/// order, so results are bitwise reproducible for a fixed term sequence.
class CompensatedSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// Closed interval [lower, upper] enclosing the unmaterialized part of a
/// nonnegative series. upper may be +inf; lower = +inf certifies divergence.
struct TailBracket {
  double lower = 0.0;
  double upper = 0.0;

  double midpoint() const noexcept;
  double radius() const noexcept;
  bool finite() const noexcept { return upper < kInf; }
  bool divergent() const noexcept { return lower == kInf; }
};

TailBracket operator+(const TailBracket& a, const TailBracket& b) noexcept;
TailBracket operator*(double s, const TailBracket& a) noexcept;

/// Bracket for sum_{n >= start} n^{-s}, start >= 1.
///
/// Euler-Maclaurin with three Bernoulli corrections,
///   S = a^{1-s}/(s-1) + a^{-s}/2 + sum_{k=1}^{3} B_{2k}/(2k)! (s)_{2k-1} a^{-s-2k+1} + R,
/// where (s)_j is the rising factorial. x^{-s} is completely monotone, so
/// |R| is bounded by the first omitted term B_8/8! (s)_7 a^{-s-7}; the
/// bracket uses twice that. For s <= 1 the series diverges and both ends
/// are +inf.
TailBracket power_sum_tail(double s, std::size_t start);

/// Envelope for the terms of a tail beyond index M:
///   term(x) = scale * x^{-exponent} * h(x),  h(x) in [h_lower, h_upper] for x >= M.
struct TailEnvelope {
  double scale = 0.0;
  double exponent = 0.0;
  double h_lower = 0.0;
  double h_upper = 0.0;
};

struct TailSumOptions {
  double relative_target = 1e-10;
  double reference = 0.0;          ///< magnitude the target is relative to
  std::size_t first_closure = 64;  ///< explicit terms summed before trying to close
  std::size_t cap = std::size_t{1} << 20;
};

/// Sums a nonnegative tail sum_{n >= start} term(n). Terms are summed
/// explicitly (each may itself be a bracket) until the envelope closure,
/// applied at a doubling sequence of cut points M, leaves a bracket whose
/// width meets the target or M reaches the cap. envelope(M) may return
/// nullopt when no envelope is valid from M on yet (e.g. a shifted
/// eigenvalue has not crossed below the abscissa).
TailBracket sum_tail_with_envelope(
    std::size_t start, const std::function<TailBracket(std::size_t)>& term,
    const std::function<std::optional<TailEnvelope>(std::size_t)>& envelope,
    const TailSumOptions& options);

enum class Verdict { Converged, Diverged, Inconclusive };
enum class TailStatus { Certified, Unbounded, Unknown };

std::string_view to_string(Verdict v) noexcept;
std::string_view to_string(TailStatus s) noexcept;

/// Outcome of a convergence test: materialized partial sum, a certificate
/// for the rest, and the verdict those two support.
struct SeriesVerdict {
  double partial_value = 0.0;
  TailStatus tail_status = TailStatus::Unknown;
  double tail_lower = 0.0;
  double tail_upper = kInf;
  Verdict verdict = Verdict::Inconclusive;
  std::string evidence;
  /// Materialized terms in summation order.
  std::vector<double> terms;

  /// partial + tail midpoint when the tail is certified, partial otherwise.
  double total() const noexcept;
  /// Half-width of the certified enclosure of the full sum.
  double uncertainty() const noexcept;
  double relative_uncertainty() const noexcept;
};

/// Builds a verdict from a partial sum and a tail bracket. A divergent
/// bracket yields Diverged, a finite one Converged.
SeriesVerdict make_verdict(double partial, std::vector<double> terms,
                           const TailBracket& tail, std::string evidence);
SeriesVerdict make_inconclusive(double partial, std::vector<double> terms,
                                std::string evidence);
SeriesVerdict make_diverged(double partial, std::vector<double> terms,
                            std::string evidence);

}  // namespace bnoise
