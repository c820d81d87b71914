#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "bnoise/admissibility.hpp"
#include "bnoise/boundary_models.hpp"
#include "bnoise/spectral_core.hpp"

namespace bnoise {

/// Covariance Q_T of the stochastic convolution over the materialized modes.
struct CovarianceMatrix {
  Eigen::MatrixXd entries;
  double horizon = 0.0;
  double trace_materialized = 0.0;
  /// Trace contribution of the unmaterialized modes (the gamma_time tail).
  TailBracket trace_tail;
  double min_eigenvalue = 0.0;

  double trace() const noexcept { return trace_materialized; }
};

/// Q_nm = (sum_k beta_nk beta_mk) (e^{(lambda_n + lambda_m) T} - 1)/(lambda_n + lambda_m),
/// with the limit value T when lambda_n + lambda_m = 0.
CovarianceMatrix covariance_qt(const DiagonalModel& model, const ControlCoefficients& ctrl,
                               double horizon);

/// Samples recorded at a list of times; values[i] is samples x modes at times[i].
struct PathEnsemble {
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::string scheme;
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> values;

  const Eigen::MatrixXd& at_final() const { return values.back(); }
};

struct SamplingOptions {
  std::optional<ModeVector> initial;
  /// Worker threads; output does not depend on this.
  std::size_t workers = 1;
};

/// Seed of the stream for (sample, channel): splitmix64 applied to the
/// master seed, then mixed with the sample and channel counters.
std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t sample, std::uint64_t channel);

/// X(T) = T(T) X_0 + Q_T^{1/2} z with the symmetric eigen-factor of Q_T.
/// Sample s draws its normals from stream (s, 0).
PathEnsemble sample_exact(const DiagonalModel& model, const ControlCoefficients& ctrl,
                          double horizon, std::size_t samples, std::uint64_t seed,
                          const SamplingOptions& options = {});

enum class GridScheme {
  /// X_n <- e^{lambda_n dt} X_n + s_n beta_n . dW with s_n^2 dt = (e^{2 lambda_n dt} - 1)/(2 lambda_n):
  /// exact per-mode variance, O(dt^2) bias in cross covariances (the first-order terms of
  /// s_n s_m dt and the exact cross increment agree). Channel k of
  /// sample s uses stream (s, k).
  SharedIncrement,
  /// X <- e^{Lambda dt} X + Q_dt^{1/2} z, exact in joint distribution.
  /// Sample s uses stream (s, 0).
  ExactJoint,
};

std::string_view to_string(GridScheme scheme) noexcept;

struct GridOptions {
  GridScheme scheme = GridScheme::SharedIncrement;
  /// Record every stride-th step (the final time is always recorded).
  std::size_t record_stride = 1;
  std::optional<ModeVector> initial;
  std::size_t workers = 1;
};

PathEnsemble sample_grid(const DiagonalModel& model, const ControlCoefficients& ctrl,
                         double horizon, double dt, std::size_t samples, std::uint64_t seed,
                         const GridOptions& options = {});

/// E ||X(t) - X(s)||^2 over the materialized modes, in closed form.
double mean_square_modulus(const DiagonalModel& model, const ControlCoefficients& ctrl, double s,
                           double t);

struct EnsembleStats {
  Eigen::VectorXd mean;
  /// Unbiased: sum (x - xbar)(x - xbar)^T / (S - 1).
  Eigen::MatrixXd covariance;
  Eigen::VectorXd mean_se;
  /// Distribution-free: sqrt(var of the centered products / S).
  Eigen::MatrixXd covariance_se;
  std::size_t samples = 0;
};

EnsembleStats ensemble_stats(const Eigen::MatrixXd& samples);
EnsembleStats ensemble_stats(const PathEnsemble& ensemble, std::size_t time_index);

struct GateDecision {
  bool allowed = false;
  bool overridden = false;
  Verdict verdict = Verdict::Inconclusive;
  std::string reason;
};

/// Simulation requires a Converged existence verdict (gamma_time at T) unless overridden.
GateDecision existence_gate(const DiagonalModel& model, const ControlCoefficients& ctrl,
                            double horizon, bool override_gate);
/// The transport model fails the Dirichlet criterion; only the override lets it through.
GateDecision existence_gate(const TransportModel& model, double horizon, bool override_gate);

/// Raises PreconditionError when the gate refuses.
void enforce(const GateDecision& gate);

/// Transport on `cells` cells of width h = r / cells: noise enters the cell at
/// theta = 0 as dW / h and the content shifts one cell per step dt = h.
/// Every filled cell carries E|x|^2 h = d, so E ||X(T)||^2 = d * filled cells,
/// which grows without bound as h -> 0.
struct TruncatedTransportDemo {
  std::size_t cells = 0;
  std::size_t filled = 0;
  double expected_norm_squared = 0.0;
  double empirical_norm_squared = 0.0;
  double empirical_se = 0.0;
  PathEnsemble ensemble;
};

TruncatedTransportDemo truncated_transport_demo(const TransportModel& model, std::size_t cells,
                                                double horizon, std::size_t samples,
                                                std::uint64_t seed, bool override_gate);

}  // namespace bnoise
