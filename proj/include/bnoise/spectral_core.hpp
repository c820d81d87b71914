#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace bnoise {

using Complex = std::complex<double>;

/// Parametric spectrum lambda(n) = shift - c * n^p for mode numbers
/// n >= first_mode. Materialized mode i carries n = first_mode + i.
struct PowerFamily {
  double c = 1.0;
  double p = 2.0;
  std::size_t first_mode = 0;
  double shift = 0.0;

  double eigenvalue_at(double mode_number) const noexcept;
};

/// Self-adjoint generator diagonal in an abstract orthonormal basis.
///
/// Either a finite explicit spectrum (the model is finite-dimensional) or a
/// power family truncated to mode_count materialized modes, whose
/// unmaterialized eigenvalues follow the family rule.
class DiagonalModel {
 public:
  static DiagonalModel explicit_spectrum(std::vector<double> eigenvalues);
  /// include_zero_mode = false starts the family at n = 1.
  static DiagonalModel power_family(double c, double p, std::size_t mode_count,
                                    bool include_zero_mode = true);

  std::size_t mode_count() const noexcept { return eigenvalues_.size(); }
  std::span<const double> eigenvalues() const noexcept { return eigenvalues_; }
  double eigenvalue(std::size_t i) const { return eigenvalues_.at(i); }

  /// True for explicit spectra: there are no modes beyond mode_count.
  bool is_finite() const noexcept { return !family_.has_value(); }
  const std::optional<PowerFamily>& family() const noexcept { return family_; }

  /// Eigenvalue of mode index i, materialized or not (power families only
  /// beyond mode_count).
  double eigenvalue_rule(std::size_t i) const;

  /// Same eigenbasis, first n modes.
  DiagonalModel truncated(std::size_t n) const;
  /// Generator A - omega.
  DiagonalModel shifted(double omega) const;

 private:
  DiagonalModel(std::vector<double> eigenvalues, std::optional<PowerFamily> family);
  void validate() const;

  std::vector<double> eigenvalues_;
  std::optional<PowerFamily> family_;
};

/// Coefficients <x, phi_n> of a state truncated to a model's modes.
struct ModeVector {
  std::vector<double> coeffs;

  ModeVector() = default;
  explicit ModeVector(std::vector<double> c) : coeffs(std::move(c)) {}
  static ModeVector zero(std::size_t n) { return ModeVector(std::vector<double>(n, 0.0)); }
  static ModeVector unit(std::size_t n, std::size_t i);

  std::size_t size() const noexcept { return coeffs.size(); }
  double operator[](std::size_t i) const { return coeffs[i]; }
  double norm() const noexcept;
};

// Analytic description of rows beyond the materialized ones.
struct UnknownTail {};
struct ZeroTail {};
/// Every unmaterialized mode has channel weight sum_k beta_{n,k}^2 = weight.
struct ConstantWeightTail {
  double weight = 0.0;
};
/// sum over unmaterialized modes of the channel weights is <= bound.
struct SquareSummableTail {
  double bound = 0.0;
};
using TailRule = std::variant<UnknownTail, ZeroTail, ConstantWeightTail, SquareSummableTail>;

std::string describe(const TailRule& rule);

/// Mode-by-channel table (n, k) -> (B* phi_n)_k or (C phi_n)_k.
class CoefficientTable {
 public:
  CoefficientTable() = default;
  CoefficientTable(Eigen::MatrixXd values, TailRule tail);

  std::size_t mode_count() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t channel_count() const noexcept { return static_cast<std::size_t>(values_.cols()); }
  const Eigen::MatrixXd& values() const noexcept { return values_; }
  const TailRule& tail() const noexcept { return tail_; }

  /// Per-mode channel sums w_n = sum_k beta_{n,k}^2.
  std::vector<double> weights() const;
  CoefficientTable truncated(std::size_t n) const;

 private:
  Eigen::MatrixXd values_;
  TailRule tail_ = UnknownTail{};
};

/// B in L(U, H_{-1}) through its adjoint's action on the eigenbasis.
class ControlCoefficients : public CoefficientTable {
 public:
  using CoefficientTable::CoefficientTable;
  explicit ControlCoefficients(CoefficientTable t) : CoefficientTable(std::move(t)) {}
  /// Single noise channel, finite model (zero tail).
  static ControlCoefficients scalar(std::vector<double> beta, TailRule tail = ZeroTail{});
  ControlCoefficients truncated(std::size_t n) const {
    return ControlCoefficients(CoefficientTable::truncated(n));
  }
};

/// C in L(H_1, Y) through (C phi_n)_j.
class ObservationCoefficients : public CoefficientTable {
 public:
  using CoefficientTable::CoefficientTable;
  explicit ObservationCoefficients(CoefficientTable t) : CoefficientTable(std::move(t)) {}
  static ObservationCoefficients scalar(std::vector<double> gamma, TailRule tail = ZeroTail{});
};

ModeVector evaluate_semigroup(const DiagonalModel& model, double t, const ModeVector& x);

std::vector<Complex> evaluate_resolvent(const DiagonalModel& model, Complex lambda,
                                        const ModeVector& x);

/// sup of the spectrum: materialized eigenvalues and the family rule.
double growth_bound(const DiagonalModel& model);

struct YosidaResult {
  bool converged = false;
  /// Limit estimate (last probe value) per output channel.
  std::vector<double> value;
  /// C lambda R(lambda, A) x along the probe, one row per probe point.
  std::vector<std::vector<double>> trajectory;
};

/// Evaluates C lambda R(lambda, A) x along an increasing probe and reports
/// the limit when the last two probe values agree within tolerance
/// (|v_k - v_{k-1}| <= tolerance * max(1, |v_k|) channelwise).
YosidaResult yosida_apply(const DiagonalModel& model, const ObservationCoefficients& obs,
                          const ModeVector& x, std::span<const double> probe,
                          double tolerance = 1e-2);

/// ||x||_{-1} = ||R(beta, A) x||.
double extrapolation_norm(const DiagonalModel& model, const ModeVector& x, double beta);

}  // namespace bnoise
