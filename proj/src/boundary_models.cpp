#include "bnoise/boundary_models.hpp"

#include <cmath>
#include <numbers>

#include "bnoise/errors.hpp"
#include "bnoise/numerics.hpp"

namespace bnoise {

namespace {

constexpr double kPi = std::numbers::pi;

double zero_mode_value(ZeroModeNormalization norm) {
  return norm == ZeroModeNormalization::Orthonormal ? 1.0 / std::sqrt(kPi) : std::sqrt(2.0 / kPi);
}

// 1 - e^{-2 z pi}, zero exactly on the spectrum (z = i n) and at z = 0.
Complex sinh_factor(Complex z) { return 1.0 - std::exp(-2.0 * kPi * z); }

}  // namespace

double heat_eigenfunction(std::size_t n, double xi, ZeroModeNormalization norm) {
  if (n == 0) return zero_mode_value(norm);
  return std::sqrt(2.0 / kPi) * std::cos(static_cast<double>(n) * xi);
}

double HeatNeumannModel::eigenfunction(std::size_t n, double xi) const {
  return heat_eigenfunction(n, xi, zero_mode);
}

double HeatNeumannModel::field_value(const ModeVector& x, double xi) const {
  if (x.size() > mode_count()) throw InvalidArgument("field_value: state has more modes than the model");
  double v = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) v += x[n] * eigenfunction(n, xi);
  return v;
}

std::optional<RankOnePerturbation> HeatNeumannModel::perturbation() const {
  if (!feedback) return std::nullopt;
  RankOnePerturbation p;
  p.b.resize(mode_count());
  for (std::size_t n = 0; n < mode_count(); ++n) p.b[n] = -eigenfunction(n, 0.0);
  p.m = *feedback;
  return p;
}

HeatNeumannModel build_heat_neumann(Side side, std::size_t modes,
                                    std::optional<std::vector<double>> feedback,
                                    ZeroModeNormalization norm) {
  if (modes < 1) throw InvalidArgument("build_heat_neumann: need N >= 1 modes");
  if (feedback && feedback->size() != modes) {
    throw InvalidArgument("build_heat_neumann: feedback has " + std::to_string(feedback->size()) +
                          " coefficients, expected " + std::to_string(modes));
  }
  HeatNeumannModel h;
  h.side = side;
  h.zero_mode = norm;
  h.feedback = std::move(feedback);
  h.model = DiagonalModel::power_family(1.0, 2.0, modes, true);
  Eigen::MatrixXd beta(static_cast<Eigen::Index>(modes), 1);
  for (std::size_t n = 0; n < modes; ++n) {
    beta(static_cast<Eigen::Index>(n), 0) =
        side == Side::Right ? heat_eigenfunction(n, kPi, norm) : -heat_eigenfunction(n, 0.0, norm);
  }
  h.control = ControlCoefficients(std::move(beta), ConstantWeightTail{2.0 / kPi});
  return h;
}

std::vector<double> heat_project(const std::function<double(double)>& f, std::size_t modes,
                                 ZeroModeNormalization norm, std::size_t panels) {
  if (panels < 1) throw InvalidArgument("heat_project: need at least one panel");
  std::vector<double> partition(panels + 1);
  for (std::size_t j = 0; j <= panels; ++j) partition[j] = kPi * static_cast<double>(j) / static_cast<double>(panels);
  std::vector<double> out(modes);
  for (std::size_t n = 0; n < modes; ++n) {
    out[n] = integrate_partition([&](double xi) { return f(xi) * heat_eigenfunction(n, xi, norm); },
                                 partition, 10);
  }
  return out;
}

std::vector<double> heat_constant_feedback(std::size_t modes, ZeroModeNormalization norm) {
  std::vector<double> m(modes, 0.0);
  if (modes > 0) m[0] = kPi * zero_mode_value(norm);
  return m;
}

Complex heat_dirichlet_closed_form(Complex lambda, double xi, Side side, double alpha) {
  if (!(xi >= 0.0 && xi <= kPi)) throw InvalidArgument("heat_dirichlet_closed_form: xi outside [0, pi]");
  const Complex z = std::sqrt(lambda);  // principal branch, Re z >= 0
  const Complex s = sinh_factor(z);
  if (std::abs(z) < 1e-300 || std::abs(s) <= 1e-14 * std::max(1.0, std::abs(z))) {
    throw SingularResolvent(static_cast<std::size_t>(std::lround(std::abs(z.imag()))),
                            "heat Dirichlet problem is singular: lambda is an eigenvalue");
  }
  // cosh(z u) / sinh(z pi) = (e^{z(u - pi)} + e^{-z(u + pi)}) / (1 - e^{-2 z pi}).
  const double u = side == Side::Right ? xi : kPi - xi;
  const Complex ratio = (std::exp(z * (u - kPi)) + std::exp(-z * (u + kPi))) / s;
  const double sign = side == Side::Right ? 1.0 : -1.0;
  return sign * alpha * ratio / z;
}

double heat_dirichlet_hs_norm_closed_form(Complex lambda) {
  const Complex z = std::sqrt(lambda);
  const double x = z.real();
  const double y = z.imag();
  if (std::abs(z) < 1e-300 || std::abs(sinh_factor(z)) <= 1e-14 * std::max(1.0, std::abs(z))) {
    throw SingularResolvent(static_cast<std::size_t>(std::lround(std::abs(y))),
                            "heat Dirichlet problem is singular: lambda is an eigenvalue");
  }
  // int_0^pi |cosh(z xi)|^2 = (sinh(2 x pi)/(2x) + sin(2 y pi)/(2y)) / 2 and
  // |sinh(z pi)|^2 = (cosh(2 x pi) - cos(2 y pi)) / 2; both scaled by e^{-2 x pi}.
  const double e = std::exp(-2.0 * x * kPi);
  const double sh = x == 0.0 ? kPi : -std::expm1(-4.0 * x * kPi) / (4.0 * x);  // e * sinh(2 x pi)/(2x)
  const double sn = y == 0.0 ? kPi : std::sin(2.0 * y * kPi) / (2.0 * y);
  const double num = 0.5 * (sh + e * sn);
  const double den = 0.5 * (0.5 * (1.0 + e * e) - e * std::cos(2.0 * y * kPi));
  return num / (std::norm(z) * den);
}

Eigen::MatrixXcd dirichlet_coefficients(const DiagonalModel& model, const ControlCoefficients& ctrl,
                                        Complex lambda) {
  if (ctrl.mode_count() != model.mode_count()) {
    throw InvalidArgument("dirichlet_coefficients: control table does not match the model");
  }
  const auto eig = model.eigenvalues();
  Eigen::MatrixXcd out(ctrl.values().rows(), ctrl.values().cols());
  for (std::size_t n = 0; n < eig.size(); ++n) {
    const Complex d = lambda - eig[n];
    if (std::abs(d) <= 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(eig[n]))) {
      throw SingularResolvent(n, "Dirichlet operator is singular at mode " + std::to_string(n));
    }
    for (Eigen::Index k = 0; k < out.cols(); ++k) {
      out(static_cast<Eigen::Index>(n), k) = ctrl.values()(static_cast<Eigen::Index>(n), k) / d;
    }
  }
  return out;
}

SeriesVerdict dirichlet_hs_norm_spectral(const DiagonalModel& model, const ControlCoefficients& ctrl,
                                         Complex lambda, const CriterionOptions& options) {
  return resolvent_hs_norm_squared(model, ctrl, lambda, options);
}

SeriesVerdict dirichlet_frequency_criterion(const DiagonalModel& model,
                                            const ControlCoefficients& ctrl,
                                            const FrequencyGrid& grid,
                                            const CriterionOptions& options) {
  return frequency_series_by_frequency(model, ctrl, grid, options);
}

double TransportModel::shift_value(const std::function<double(double)>& phi, double t,
                                   double theta) const {
  if (t < 0.0) throw InvalidArgument("shift_value: t must be >= 0");
  if (theta < -delay || theta > 0.0) throw InvalidArgument("shift_value: theta outside [-r, 0]");
  return theta + t <= 0.0 ? phi(theta + t) : 0.0;
}

Complex TransportModel::dirichlet_value(Complex lambda, double theta) const {
  if (theta < -delay || theta > 0.0) throw InvalidArgument("dirichlet_value: theta outside [-r, 0]");
  return std::exp(lambda * theta);
}

double TransportModel::dirichlet_hs_norm(Complex lambda) const {
  if (countable()) return kInf;
  const double a = lambda.real();
  return static_cast<double>(*noise_dim) * delay * phi1(-2.0 * a * delay);
}

double TransportModel::growth_bound() const noexcept { return -kInf; }

TransportModel build_transport(double delay, std::optional<std::size_t> noise_dim) {
  if (!(delay > 0.0) || !std::isfinite(delay)) throw InvalidArgument("build_transport: need r > 0");
  if (noise_dim && *noise_dim < 1) throw InvalidArgument("build_transport: noise_dim must be >= 1");
  return TransportModel{delay, noise_dim};
}

SeriesVerdict dirichlet_frequency_criterion(const TransportModel& model, const FrequencyGrid& grid,
                                            const CriterionOptions&) {
  grid.validate(model.growth_bound());
  if (model.countable()) {
    return make_diverged(kInf, {kInf},
                         "per-term value is infinite: ||D_lambda||_2^2 = sum over countably many "
                         "channels of (1 - e^{-2 Re(lambda) r}) / (2 Re(lambda))");
  }
  // Re(lambda) = omega on the whole grid, so every term is the same.
  std::vector<double> terms;
  CompensatedSum partial;
  const double term = model.dirichlet_hs_norm(Complex(grid.omega, 0.0));
  for (std::size_t i = 0; i < 2 * grid.terms + 1; ++i) {
    const long n = i == 0 ? 0 : (i % 2 == 1 ? -static_cast<long>((i + 1) / 2) : static_cast<long>(i / 2));
    terms.push_back(model.dirichlet_hs_norm(Complex(grid.omega, grid.frequency(n))));
    partial.add(terms.back());
  }
  return make_diverged(partial.value(), std::move(terms),
                       "terms constant in n: every term equals " + std::to_string(term) + " > 0");
}

SeriesVerdict gamma_time(const TransportModel&, const CoefficientTable&, double,
                         const CriterionOptions&) {
  throw UnsupportedRepresentation(
      "gamma_time: the transport model has no eigenbasis; use the Dirichlet-operator criterion");
}

SeriesVerdict frequency_series(const TransportModel&, const CoefficientTable&, const FrequencyGrid&,
                               const CriterionOptions&) {
  throw UnsupportedRepresentation(
      "frequency_series: the transport model has no eigenbasis; use the Dirichlet-operator criterion");
}

}  // namespace bnoise
