#include "bnoise/stochastic_sim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

#include "bnoise/errors.hpp"
#include "bnoise/numerics.hpp"

namespace bnoise {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_inputs(const DiagonalModel& model, const ControlCoefficients& ctrl, double horizon,
                  const char* op) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw InvalidArgument(std::string(op) + ": horizon T must be a positive number");
  }
  if (ctrl.mode_count() != model.mode_count()) {
    throw InvalidArgument(std::string(op) + ": control table does not match the model");
  }
}

// Runs body(first, last) over contiguous sample ranges. Each sample writes
// only its own rows, so the split does not affect the result.
void parallel_samples(std::size_t samples, std::size_t workers,
                      const std::function<void(std::size_t, std::size_t)>& body) {
  workers = std::max<std::size_t>(1, std::min(workers, samples));
  if (workers == 1) {
    body(0, samples);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (samples + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t first = w * chunk;
    const std::size_t last = std::min(samples, first + chunk);
    threads.emplace_back([&, w, first, last] {
      try {
        if (first < last) body(first, last);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Symmetric factor L with L L^T = Q, from the eigendecomposition.
Eigen::MatrixXd symmetric_factor(const Eigen::MatrixXd& q) {
  if (q.size() == 0) return q;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
  if (es.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");
  const double trace = q.trace();
  const double floor = -1e-10 * std::max(trace, 0.0);
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < floor) {
      std::ostringstream os;
      os << "covariance is not positive semidefinite: eigenvalue " << ev(i) << " below "
         << floor;
      throw NumericalError(os.str());
    }
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal();
}

Eigen::MatrixXd covariance_entries(std::span<const double> eig, const Eigen::MatrixXd& beta,
                                   double horizon) {
  const Eigen::MatrixXd gram = beta * beta.transpose();
  const auto n = static_cast<Eigen::Index>(eig.size());
  Eigen::MatrixXd q(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double s = eig[static_cast<std::size_t>(i)] + eig[static_cast<std::size_t>(j)];
      // T phi1(s T) equals T exactly when s = 0.
      const double v = gram(i, j) * horizon * phi1(s * horizon);
      q(i, j) = v;
      q(j, i) = v;
    }
  }
  return q;
}

Eigen::VectorXd initial_state(const std::optional<ModeVector>& initial, std::size_t n) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  if (initial) {
    if (initial->size() != n) throw InvalidArgument("initial state size does not match the model");
    for (std::size_t i = 0; i < n; ++i) x(static_cast<Eigen::Index>(i)) = (*initial)[i];
  }
  return x;
}

}  // namespace

std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t sample, std::uint64_t channel) {
  std::uint64_t s = splitmix64(master);
  s = splitmix64(s ^ splitmix64(sample + 0x632be59bd9b4e019ULL));
  s = splitmix64(s ^ splitmix64(channel + 0x2545f4914f6cdd1dULL));
  return s;
}

CovarianceMatrix covariance_qt(const DiagonalModel& model, const ControlCoefficients& ctrl,
                               double horizon) {
  check_inputs(model, ctrl, horizon, "covariance_qt");
  CovarianceMatrix out;
  out.horizon = horizon;
  out.entries = covariance_entries(model.eigenvalues(), ctrl.values(), horizon);
  CompensatedSum tr;
  for (Eigen::Index i = 0; i < out.entries.rows(); ++i) tr.add(out.entries(i, i));
  out.trace_materialized = tr.value();
  const SeriesVerdict g = gamma_time(model, ctrl, horizon);
  out.trace_tail = {g.tail_lower, g.tail_upper};
  if (out.entries.size() > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.entries, Eigen::EigenvaluesOnly);
    out.min_eigenvalue = es.eigenvalues()(0);
  }
  return out;
}

PathEnsemble sample_exact(const DiagonalModel& model, const ControlCoefficients& ctrl,
                          double horizon, std::size_t samples, std::uint64_t seed,
                          const SamplingOptions& options) {
  check_inputs(model, ctrl, horizon, "sample_exact");
  if (samples < 1) throw InvalidArgument("sample_exact: need at least one sample");
  const std::size_t n = model.mode_count();
  const Eigen::MatrixXd factor = symmetric_factor(covariance_entries(model.eigenvalues(), ctrl.values(), horizon));
  Eigen::VectorXd mean = initial_state(options.initial, n);
  const auto eig = model.eigenvalues();
  for (std::size_t i = 0; i < n; ++i) mean(static_cast<Eigen::Index>(i)) *= std::exp(eig[i] * horizon);

  PathEnsemble out;
  out.samples = samples;
  out.seed = seed;
  out.scheme = "exact";
  out.times = {horizon};
  out.values.assign(1, Eigen::MatrixXd(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(n)));
  Eigen::MatrixXd& rows = out.values[0];
  parallel_samples(samples, options.workers, [&](std::size_t first, std::size_t last) {
    Eigen::VectorXd z(static_cast<Eigen::Index>(n));
    for (std::size_t s = first; s < last; ++s) {
      std::mt19937_64 rng(derive_stream_seed(seed, s, 0));
      std::normal_distribution<double> normal;
      for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
      rows.row(static_cast<Eigen::Index>(s)) = (mean + factor * z).transpose();
    }
  });
  return out;
}

std::string_view to_string(GridScheme scheme) noexcept {
  return scheme == GridScheme::SharedIncrement ? "shared_increment" : "exact_joint";
}

PathEnsemble sample_grid(const DiagonalModel& model, const ControlCoefficients& ctrl,
                         double horizon, double dt, std::size_t samples, std::uint64_t seed,
                         const GridOptions& options) {
  check_inputs(model, ctrl, horizon, "sample_grid");
  if (!(dt > 0.0)) throw InvalidArgument("sample_grid: dt must be > 0");
  if (dt > horizon * (1.0 + 1e-12)) throw InvalidArgument("sample_grid: dt must not exceed T");
  const double ratio = horizon / dt;
  const auto steps = static_cast<std::size_t>(std::llround(ratio));
  if (std::abs(ratio - static_cast<double>(steps)) > 1e-9 * ratio) {
    throw InvalidArgument("sample_grid: dt must divide T");
  }
  if (samples < 1) throw InvalidArgument("sample_grid: need at least one sample");
  if (options.record_stride < 1) throw InvalidArgument("sample_grid: record stride must be >= 1");
  const double h = horizon / static_cast<double>(steps);

  const std::size_t n = model.mode_count();
  const std::size_t channels = ctrl.channel_count();
  const auto eig = model.eigenvalues();
  Eigen::VectorXd decay(static_cast<Eigen::Index>(n));
  Eigen::VectorXd scale(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    decay(static_cast<Eigen::Index>(i)) = std::exp(eig[i] * h);
    scale(static_cast<Eigen::Index>(i)) = std::sqrt(phi1(2.0 * eig[i] * h));
  }
  const Eigen::MatrixXd& beta = ctrl.values();
  Eigen::MatrixXd factor;
  if (options.scheme == GridScheme::ExactJoint) {
    factor = symmetric_factor(covariance_entries(eig, beta, h));
  }
  const Eigen::VectorXd x0 = initial_state(options.initial, n);

  PathEnsemble out;
  out.samples = samples;
  out.seed = seed;
  out.scheme = std::string(to_string(options.scheme));
  std::vector<std::size_t> recorded;
  for (std::size_t j = 0; j <= steps; j += options.record_stride) recorded.push_back(j);
  if (recorded.back() != steps) recorded.push_back(steps);
  for (std::size_t j : recorded) out.times.push_back(static_cast<double>(j) * h);
  out.values.assign(recorded.size(),
                    Eigen::MatrixXd(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(n)));

  const double sqrt_h = std::sqrt(h);
  parallel_samples(samples, options.workers, [&](std::size_t first, std::size_t last) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(n));
    Eigen::VectorXd dw(static_cast<Eigen::Index>(channels));
    Eigen::VectorXd z(static_cast<Eigen::Index>(n));
    for (std::size_t s = first; s < last; ++s) {
      std::vector<std::mt19937_64> streams;
      const std::size_t stream_count = options.scheme == GridScheme::SharedIncrement ? channels : 1;
      for (std::size_t k = 0; k < stream_count; ++k) streams.emplace_back(derive_stream_seed(seed, s, k));
      std::vector<std::normal_distribution<double>> normal(stream_count);
      x = x0;
      std::size_t slot = 0;
      for (std::size_t j = 0; j <= steps; ++j) {
        if (j > 0) {
          if (options.scheme == GridScheme::SharedIncrement) {
            for (std::size_t k = 0; k < channels; ++k) {
              dw(static_cast<Eigen::Index>(k)) = sqrt_h * normal[k](streams[k]);
            }
            x = decay.cwiseProduct(x) + scale.cwiseProduct(beta * dw);
          } else {
            for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal[0](streams[0]);
            x = decay.cwiseProduct(x) + factor * z;
          }
        }
        if (slot < recorded.size() && recorded[slot] == j) {
          out.values[slot].row(static_cast<Eigen::Index>(s)) = x.transpose();
          ++slot;
        }
      }
    }
  });
  return out;
}

double mean_square_modulus(const DiagonalModel& model, const ControlCoefficients& ctrl, double s,
                           double t) {
  if (ctrl.mode_count() != model.mode_count()) {
    throw InvalidArgument("mean_square_modulus: control table does not match the model");
  }
  if (!(s >= 0.0)) throw InvalidArgument("mean_square_modulus: need s >= 0");
  if (s > t) throw InvalidArgument("mean_square_modulus: need s <= t");
  const double delta = t - s;
  const auto w = ctrl.weights();
  const auto eig = model.eigenvalues();
  CompensatedSum sum;
  for (std::size_t n = 0; n < w.size(); ++n) {
    // int_s^t e^{2 l (t-u)} du + (e^{l delta} - 1)^2 int_0^s e^{2 l (s-u)} du
    const double fresh = delta * phi1(2.0 * eig[n] * delta);
    const double jump = std::expm1(eig[n] * delta);
    const double old = jump * jump * s * phi1(2.0 * eig[n] * s);
    sum.add(w[n] * (fresh + old));
  }
  return sum.value();
}

EnsembleStats ensemble_stats(const Eigen::MatrixXd& samples) {
  const auto count = samples.rows();
  if (count < 2) throw InvalidArgument("ensemble_stats: need at least 2 samples");
  const auto n = samples.cols();
  EnsembleStats st;
  st.samples = static_cast<std::size_t>(count);
  st.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - st.mean.transpose();
  const double sc = static_cast<double>(count);
  st.covariance = centered.transpose() * centered / (sc - 1.0);
  st.mean_se = (st.covariance.diagonal() / sc).cwiseSqrt();
  st.covariance_se = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const Eigen::ArrayXd prod = centered.col(i).array() * centered.col(j).array();
      const double m = prod.mean();
      const double var = (prod - m).square().sum() / (sc - 1.0);
      const double se = std::sqrt(var / sc);
      st.covariance_se(i, j) = se;
      st.covariance_se(j, i) = se;
    }
  }
  return st;
}

EnsembleStats ensemble_stats(const PathEnsemble& ensemble, std::size_t time_index) {
  if (time_index >= ensemble.values.size()) throw InvalidArgument("ensemble_stats: time index out of range");
  return ensemble_stats(ensemble.values[time_index]);
}

GateDecision existence_gate(const DiagonalModel& model, const ControlCoefficients& ctrl,
                            double horizon, bool override_gate) {
  const SeriesVerdict v = gamma_time(model, ctrl, horizon);
  GateDecision g;
  g.verdict = v.verdict;
  if (v.verdict == Verdict::Converged) {
    g.allowed = true;
    g.reason = "existence verdict Converged: " + v.evidence;
    return g;
  }
  g.allowed = override_gate;
  g.overridden = override_gate;
  g.reason = "existence gate: gamma_time verdict " + std::string(to_string(v.verdict)) + " (" +
             v.evidence + "); no H-valued solution is certified";
  if (override_gate) g.reason += "; OVERRIDDEN for demonstration, results describe the truncation only";
  return g;
}

GateDecision existence_gate(const TransportModel& model, double horizon, bool override_gate) {
  const SeriesVerdict v = dirichlet_frequency_criterion(model, FrequencyGrid{1.0, horizon, 8});
  GateDecision g;
  g.verdict = v.verdict;
  g.allowed = override_gate;
  g.overridden = override_gate;
  g.reason = "existence gate: Dirichlet-operator criterion " + std::string(to_string(v.verdict)) +
             " (" + v.evidence + "); the transport system does not have a solution in H";
  if (override_gate) g.reason += "; OVERRIDDEN for demonstration, results describe the truncation only";
  return g;
}

void enforce(const GateDecision& gate) {
  if (!gate.allowed) throw PreconditionError(gate.reason);
}

TruncatedTransportDemo truncated_transport_demo(const TransportModel& model, std::size_t cells,
                                                double horizon, std::size_t samples,
                                                std::uint64_t seed, bool override_gate) {
  enforce(existence_gate(model, horizon, override_gate));
  if (model.countable()) {
    throw InvalidArgument("truncated_transport_demo: needs a finite noise dimension");
  }
  if (cells < 1) throw InvalidArgument("truncated_transport_demo: need at least one cell");
  if (samples < 2) throw InvalidArgument("truncated_transport_demo: need at least 2 samples");
  const std::size_t d = *model.noise_dim;
  const double h = model.delay / static_cast<double>(cells);
  const auto steps = static_cast<std::size_t>(std::floor(horizon / h + 1e-9));

  TruncatedTransportDemo demo;
  demo.cells = cells;
  demo.filled = std::min(steps, cells);
  demo.expected_norm_squared = static_cast<double>(d * demo.filled);
  demo.ensemble.samples = samples;
  demo.ensemble.seed = seed;
  demo.ensemble.scheme = "truncated_transport";
  demo.ensemble.times = {static_cast<double>(steps) * h};
  demo.ensemble.values.assign(1, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(samples),
                                                      static_cast<Eigen::Index>(cells * d)));
  Eigen::MatrixXd& rows = demo.ensemble.values[0];
  // Column c * d + k: channel k on cell c, cell 0 adjacent to theta = 0.
  // Cell c holds the increment injected c steps before the end.
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t k = 0; k < d; ++k) {
      std::mt19937_64 rng(derive_stream_seed(seed, s, k));
      std::normal_distribution<double> normal;
      std::vector<double> injected(steps);
      for (std::size_t j = 0; j < steps; ++j) injected[j] = std::sqrt(h) * normal(rng) / h;
      for (std::size_t c = 0; c < demo.filled; ++c) {
        rows(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c * d + k)) = injected[steps - 1 - c];
      }
    }
  }
  Eigen::ArrayXd norms = rows.rowwise().squaredNorm().array() * h;
  demo.empirical_norm_squared = norms.mean();
  demo.empirical_se =
      std::sqrt((norms - demo.empirical_norm_squared).square().sum() / (static_cast<double>(samples) - 1.0) /
                static_cast<double>(samples));
  return demo;
}

}  // namespace bnoise
