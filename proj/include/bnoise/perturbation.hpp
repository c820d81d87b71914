#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "bnoise/admissibility.hpp"
#include "bnoise/spectral_core.hpp"

namespace bnoise {

/// P = B M with a scalar channel: (P x)_n = b_n sum_k m_k x_k.
struct RankOnePerturbation {
  std::vector<double> b;  ///< B* phi_n
  std::vector<double> m;  ///< M phi_n, square-summable
  /// Certifies sum m_n^2 < inf beyond the materialized modes.
  TailRule m_tail = ZeroTail{};

  std::size_t mode_count() const noexcept { return b.size(); }
  bool is_zero() const noexcept;
  void validate(std::size_t modes) const;
};

/// diag(lambda) + b m^T on the first `modes` modes.
Eigen::MatrixXd galerkin_perturbed_generator(const DiagonalModel& model,
                                             const RankOnePerturbation& pert, std::size_t modes);

enum class PerturbedMethod { Galerkin, Volterra };

struct VolterraOptions {
  std::size_t intervals = 1024;
};

/// Perturbed semigroup T(t) x. Galerkin: matrix exponential of the
/// truncated generator. Volterra: g = M T(.) x solves
///   g(t) = sum_k m_k e^{lambda_k t} x_k + int_0^t K(t - s) g(s) ds,  K(tau) = sum_k m_k b_k e^{lambda_k tau},
/// and y_n(t) = e^{lambda_n t} x_n + b_n int_0^t e^{lambda_n (t - s)} g(s) ds.
ModeVector perturbed_semigroup_apply(const DiagonalModel& model, const RankOnePerturbation& pert,
                                     double t, const ModeVector& x,
                                     PerturbedMethod method = PerturbedMethod::Galerkin,
                                     const VolterraOptions& options = {});

/// g(t) = a(t) + int_0^t K(t - s) g(s) ds with K(tau) = tau^{-sigma} k(tau),
/// k bounded near 0.
struct VolterraProblem {
  std::function<double(double)> forcing;
  std::function<double(double)> kernel_regular;
  double sigma = 0.0;
  std::vector<double> grid;

  void validate() const;
};

struct VolterraSolution {
  std::vector<double> times;
  std::vector<double> values;
};

/// Product trapezoidal rule: k g is interpolated linearly on each cell and
/// integrated exactly against tau^{-sigma}. Second order for smooth g; use a
/// graded grid when g inherits the t^{1 - sigma} singularity.
VolterraSolution volterra_resolve(const VolterraProblem& problem);

struct PerturbedGamma {
  /// partial_value is the value at the finest level; terms hold the level values.
  SeriesVerdict verdict;
  std::vector<std::size_t> levels;
  std::vector<double> values;
};

/// int_0^T ||T_N(t) B||_2^2 dt for the Galerkin truncations N in
/// {N/4, N/2, N}, N = mode_count. Converged only when the sequence settles
/// within `tolerance` (relative); finite models are computed once, exactly.
PerturbedGamma perturbed_gamma_time(const DiagonalModel& model, const RankOnePerturbation& pert,
                                    const ControlCoefficients& ctrl, double horizon,
                                    double tolerance = 1e-2);

}  // namespace bnoise
