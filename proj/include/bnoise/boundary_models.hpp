#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "bnoise/admissibility.hpp"
#include "bnoise/perturbation.hpp"
#include "bnoise/spectral_core.hpp"

namespace bnoise {

enum class Side { Left, Right };

/// Weight of the constant eigenfunction. Orthonormal uses phi_0 = 1/sqrt(pi);
/// Literal keeps sqrt(2/pi) for every n, including n = 0.
enum class ZeroModeNormalization { Orthonormal, Literal };

/// 1-D heat equation on [0, pi] with Neumann boundary noise at one end.
/// lambda_n = -n^2, phi_n(xi) = sqrt(2/pi) cos(n xi) for n >= 1.
struct HeatNeumannModel {
  Side side = Side::Right;
  ZeroModeNormalization zero_mode = ZeroModeNormalization::Orthonormal;
  /// m_n = M phi_n of a mean functional driving the xi = 0 Neumann condition.
  std::optional<std::vector<double>> feedback;
  DiagonalModel model = DiagonalModel::explicit_spectrum({0.0});
  ControlCoefficients control;

  std::size_t mode_count() const noexcept { return model.mode_count(); }
  double eigenfunction(std::size_t n, double xi) const;
  /// sum_n x_n phi_n(xi).
  double field_value(const ModeVector& x, double xi) const;
  /// P = B_left M for the feedback, if any.
  std::optional<RankOnePerturbation> perturbation() const;
};

double heat_eigenfunction(std::size_t n, double xi,
                          ZeroModeNormalization norm = ZeroModeNormalization::Orthonormal);

/// Records the tail rule w_n = 2/pi on lambda_n = -n^2.
HeatNeumannModel build_heat_neumann(Side side, std::size_t modes,
                                    std::optional<std::vector<double>> feedback = std::nullopt,
                                    ZeroModeNormalization norm = ZeroModeNormalization::Orthonormal);

/// <f, phi_n> for n < modes by Gauss-Legendre quadrature on [0, pi].
std::vector<double> heat_project(const std::function<double(double)>& f, std::size_t modes,
                                 ZeroModeNormalization norm = ZeroModeNormalization::Orthonormal,
                                 std::size_t panels = 64);

/// Coefficients of M x = <x, 1>: m_0 = sqrt(pi) (orthonormal), m_n = 0 otherwise.
std::vector<double> heat_constant_feedback(std::size_t modes,
                                           ZeroModeNormalization norm = ZeroModeNormalization::Orthonormal);

/// Trace of lambda phi = phi'' with phi'(0) = 0, phi'(pi) = alpha (right) or
/// phi'(0) = alpha, phi'(pi) = 0 (left, sign as in B* phi = -phi(0)).
Complex heat_dirichlet_closed_form(Complex lambda, double xi, Side side, double alpha = 1.0);

/// int_0^pi |D_lambda 1|^2 in closed form (same for both sides).
double heat_dirichlet_hs_norm_closed_form(Complex lambda);

/// Modal coefficients beta_{n,k} / (lambda - lambda_n) of D_lambda e_k.
Eigen::MatrixXcd dirichlet_coefficients(const DiagonalModel& model, const ControlCoefficients& ctrl,
                                        Complex lambda);

/// ||D_lambda||_2^2 = sum_n w_n / |lambda - lambda_n|^2 with D_lambda = R(lambda, A_{-1}) B.
SeriesVerdict dirichlet_hs_norm_spectral(const DiagonalModel& model, const ControlCoefficients& ctrl,
                                         Complex lambda, const CriterionOptions& options = {});

/// sum_n ||D_{omega + 2 pi i n/T}||_2^2.
SeriesVerdict dirichlet_frequency_criterion(const DiagonalModel& model,
                                            const ControlCoefficients& ctrl,
                                            const FrequencyGrid& grid,
                                            const CriterionOptions& options = {});

/// Left shift on L^2([-r, 0]; R^d) with Dirichlet operator (D_lambda v)(theta) = e^{lambda theta} v.
struct TransportModel {
  double delay = 1.0;
  /// nullopt for a countable (l^2) noise space.
  std::optional<std::size_t> noise_dim = 1;

  bool countable() const noexcept { return !noise_dim.has_value(); }
  /// (S(t) phi)(theta) = phi(theta + t) for theta + t <= 0, else 0.
  double shift_value(const std::function<double(double)>& phi, double t, double theta) const;
  Complex dirichlet_value(Complex lambda, double theta) const;
  /// d (1 - e^{-2 a r}) / (2 a), a = Re lambda; d r at a = 0; +inf when countable.
  double dirichlet_hs_norm(Complex lambda) const;
  /// The shift is nilpotent: its growth bound is -inf.
  double growth_bound() const noexcept;
};

TransportModel build_transport(double delay, std::optional<std::size_t> noise_dim);

SeriesVerdict dirichlet_frequency_criterion(const TransportModel& model, const FrequencyGrid& grid,
                                            const CriterionOptions& options = {});

/// The shift has no eigenbasis; time-domain and B*-frequency criteria refuse it.
SeriesVerdict gamma_time(const TransportModel& model, const CoefficientTable& coeffs, double horizon,
                         const CriterionOptions& options = {});
SeriesVerdict frequency_series(const TransportModel& model, const CoefficientTable& coeffs,
                               const FrequencyGrid& grid, const CriterionOptions& options = {});

}  // namespace bnoise
