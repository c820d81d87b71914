#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bnoise/series.hpp"
#include "bnoise/spectral_core.hpp"

namespace bnoise {

/// Points omega + 2 pi i n / T for |n| <= terms.
struct FrequencyGrid {
  double omega = 0.0;
  double horizon = 1.0;
  std::size_t terms = 1;

  void validate(double growth) const;
  double frequency(long n) const noexcept;
};

struct CriterionOptions {
  /// Explicit tail summation continues until the enclosure width is this
  /// fraction of the total (or the term cap is reached).
  double relative_tail_target = 1e-10;
  /// Terms below this are treated as zero when looking for a constant
  /// lower bound (divergence witness).
  double divergence_threshold = 1e-12;
};

/// gamma(T) = int_0^T ||B*_L T*(t)||_2^2 dt = sum_n w_n (e^{2 lambda_n T} - 1)/(2 lambda_n).
SeriesVerdict gamma_time(const DiagonalModel& model, const CoefficientTable& coeffs, double horizon,
                         const CriterionOptions& options = {});

struct InfiniteHorizonResult {
  /// sum_n w_n / (2 |lambda_n|) with certified tail.
  SeriesVerdict exact;
  /// gamma(t0) * sum_k q^{2k}, q = e^{omega_0 t0} = ||T(t0)||.
  double geometric_bound = 0.0;
  double contraction = 0.0;
};

/// Infinite-horizon Hilbert-Schmidt integral of an exponentially stable model.
InfiniteHorizonResult gamma_infinite(const DiagonalModel& model, const CoefficientTable& coeffs,
                                     double t0, const CriterionOptions& options = {});

/// ||C R(lambda, A)||_2^2 = sum_n w_n / |lambda - lambda_n|^2 with certified tail.
SeriesVerdict resolvent_hs_norm_squared(const DiagonalModel& model, const CoefficientTable& coeffs,
                                        Complex lambda, const CriterionOptions& options = {});

/// J-free frequency criterion sum_{n in Z} ||C R(omega + 2 pi i n/T, A)||_2^2.
/// terms[] holds the materialized per-frequency values in the order
/// n = 0, -1, 1, -2, 2, ...
SeriesVerdict frequency_series(const DiagonalModel& model, const CoefficientTable& coeffs,
                               const FrequencyGrid& grid, const CriterionOptions& options = {});

struct ParsevalResult {
  /// ||Psi_T^omega||_2^2 in closed form.
  double lhs = 0.0;
  /// (1/T) sum_n ||C R(omega + 2 pi i n/T, A) J||_2^2, J = I - e^{-omega T} T(T).
  double rhs = 0.0;
  double rhs_tail_radius = 0.0;
  double residual = 0.0;
};

/// Evaluates both sides of the Parseval identity behind the frequency
/// criterion on a finite model; residual = |lhs - rhs| / lhs (0 when lhs = 0).
ParsevalResult parseval_identity_check(const DiagonalModel& model,
                                       const ObservationCoefficients& obs, double omega,
                                       double horizon, std::size_t frequency_terms);

struct WeissPoint {
  Complex lambda;
  double hs_norm = 0.0;    ///< ||C R(lambda, A)||_2
  double statistic = 0.0;  ///< sqrt(Re lambda - omega) * hs_norm
};

struct WeissScan {
  double sup = 0.0;
  Complex argmax;
  std::vector<WeissPoint> table;
};

WeissScan weiss_scan(const DiagonalModel& model, const CoefficientTable& obs, double omega,
                     std::span<const Complex> lambda_grid);

struct DyadicResult {
  SeriesVerdict series;
  /// Exponents n of the materialized terms, aligned with series.terms.
  std::vector<int> exponents;
  /// max |term(n) - term(-n)| / max(term(n), term(-n)) over pairs present.
  double symmetry_defect = 0.0;
};

/// sum_n 2^n ||R(2^n, A_{-1}) B||_2^2 over |n| <= range with 2^n > omega_0.
DyadicResult dyadic_diagnostic(const DiagonalModel& model, const CoefficientTable& ctrl, int range);

struct PairingValues {
  double state_side = 0.0;   ///< <Phi_T u, x> by exact propagation of the state
  double output_side = 0.0;  ///< <u, B* T*(T - .) x> by composite quadrature
  double residual() const noexcept;
};

/// u is piecewise constant, one row per cell of the partition and one
/// column per noise channel.
PairingValues input_map_pairing(const DiagonalModel& model, const ControlCoefficients& ctrl,
                                double horizon, std::span<const double> partition,
                                const Eigen::MatrixXd& u, const ModeVector& x);

struct DualityReport {
  double max_residual = 0.0;
  std::size_t worst_trial = 0;
  std::size_t trials = 0;
};

/// Random piecewise-constant u and random x; compares both sides of
/// (Phi_T^* x)(t) = B^* T^*(T - t) x in the weak form.
DualityReport adjoint_duality_check(const DiagonalModel& model, const ControlCoefficients& ctrl,
                                    double horizon, std::span<const double> partition,
                                    std::size_t trials, std::uint64_t seed = 1);

}  // namespace bnoise

namespace bnoise {

/// The frequency double series organized frequency by frequency: each
/// materialized term is a certified resolvent HS norm (its mode tail joins
/// the tail bracket) and the |n| > terms remainder is bracketed mode by mode
/// by integral comparison. This is the form in which the criterion is stated
/// for Dirichlet operators, D_lambda = R(lambda, A_{-1}) B.
SeriesVerdict frequency_series_by_frequency(const DiagonalModel& model,
                                            const CoefficientTable& coeffs,
                                            const FrequencyGrid& grid,
                                            const CriterionOptions& options = {});

}  // namespace bnoise
