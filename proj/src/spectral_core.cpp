#include "bnoise/spectral_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bnoise/errors.hpp"

namespace bnoise {

double PowerFamily::eigenvalue_at(double mode_number) const noexcept {
  return shift - c * std::pow(mode_number, p);
}

DiagonalModel::DiagonalModel(std::vector<double> eigenvalues, std::optional<PowerFamily> family)
    : eigenvalues_(std::move(eigenvalues)), family_(family) {
  validate();
}

void DiagonalModel::validate() const {
  if (eigenvalues_.empty()) throw InvalidArgument("DiagonalModel: mode_count must be positive");
  for (std::size_t i = 0; i < eigenvalues_.size(); ++i) {
    if (!std::isfinite(eigenvalues_[i])) {
      throw InvalidArgument("DiagonalModel: eigenvalue " + std::to_string(i) + " is not finite");
    }
  }
  if (family_) {
    if (!(family_->c > 0.0) || !(family_->p > 0.0)) {
      throw InvalidArgument("DiagonalModel: power family needs c > 0 and p > 0");
    }
  }
}

DiagonalModel DiagonalModel::explicit_spectrum(std::vector<double> eigenvalues) {
  return DiagonalModel(std::move(eigenvalues), std::nullopt);
}

DiagonalModel DiagonalModel::power_family(double c, double p, std::size_t mode_count,
                                          bool include_zero_mode) {
  if (mode_count == 0) throw InvalidArgument("DiagonalModel: mode_count must be positive");
  if (!(c > 0.0) || !(p > 0.0)) {
    throw InvalidArgument("DiagonalModel: power family needs c > 0 and p > 0");
  }
  PowerFamily fam{c, p, include_zero_mode ? std::size_t{0} : std::size_t{1}, 0.0};
  std::vector<double> eig(mode_count);
  for (std::size_t i = 0; i < mode_count; ++i) {
    eig[i] = fam.eigenvalue_at(static_cast<double>(fam.first_mode + i));
  }
  return DiagonalModel(std::move(eig), fam);
}

double DiagonalModel::eigenvalue_rule(std::size_t i) const {
  if (i < eigenvalues_.size()) return eigenvalues_[i];
  if (!family_) {
    throw InvalidArgument("DiagonalModel: mode " + std::to_string(i) +
                          " is beyond a finite explicit spectrum");
  }
  return family_->eigenvalue_at(static_cast<double>(family_->first_mode + i));
}

DiagonalModel DiagonalModel::truncated(std::size_t n) const {
  if (n == 0 || n > eigenvalues_.size()) {
    throw InvalidArgument("DiagonalModel::truncated: n must be in [1, mode_count]");
  }
  return DiagonalModel(std::vector<double>(eigenvalues_.begin(), eigenvalues_.begin() + n),
                       family_);
}

DiagonalModel DiagonalModel::shifted(double omega) const {
  std::vector<double> eig = eigenvalues_;
  for (double& l : eig) l -= omega;
  std::optional<PowerFamily> fam = family_;
  if (fam) fam->shift -= omega;
  return DiagonalModel(std::move(eig), fam);
}

ModeVector ModeVector::unit(std::size_t n, std::size_t i) {
  ModeVector v = zero(n);
  v.coeffs.at(i) = 1.0;
  return v;
}

double ModeVector::norm() const noexcept {
  double s = 0.0;
  for (double c : coeffs) s += c * c;
  return std::sqrt(s);
}

std::string describe(const TailRule& rule) {
  struct Visitor {
    std::string operator()(const UnknownTail&) const { return "unknown"; }
    std::string operator()(const ZeroTail&) const { return "zero_tail"; }
    std::string operator()(const ConstantWeightTail& t) const {
      std::ostringstream os;
      os.precision(17);
      os << "constant(w=" << t.weight << ")";
      return os.str();
    }
    std::string operator()(const SquareSummableTail& t) const {
      std::ostringstream os;
      os.precision(17);
      os << "ell2:" << t.bound;
      return os.str();
    }
  };
  return std::visit(Visitor{}, rule);
}

CoefficientTable::CoefficientTable(Eigen::MatrixXd values, TailRule tail)
    : values_(std::move(values)), tail_(tail) {
  if (values_.rows() == 0 || values_.cols() == 0) {
    throw InvalidArgument("CoefficientTable: needs at least one mode and one channel");
  }
  if (!values_.allFinite()) throw InvalidArgument("CoefficientTable: non-finite coefficient");
  if (const auto* c = std::get_if<ConstantWeightTail>(&tail_); c && !(c->weight >= 0.0)) {
    throw InvalidArgument("CoefficientTable: constant tail weight must be >= 0");
  }
  if (const auto* s = std::get_if<SquareSummableTail>(&tail_); s && !(s->bound >= 0.0)) {
    throw InvalidArgument("CoefficientTable: ell2 tail bound must be >= 0");
  }
}

std::vector<double> CoefficientTable::weights() const {
  std::vector<double> w(mode_count());
  for (std::size_t n = 0; n < w.size(); ++n) {
    w[n] = values_.row(static_cast<Eigen::Index>(n)).squaredNorm();
  }
  return w;
}

CoefficientTable CoefficientTable::truncated(std::size_t n) const {
  if (n == 0 || n > mode_count()) {
    throw InvalidArgument("CoefficientTable::truncated: n must be in [1, mode_count]");
  }
  return CoefficientTable(values_.topRows(static_cast<Eigen::Index>(n)), tail_);
}

ControlCoefficients ControlCoefficients::scalar(std::vector<double> beta, TailRule tail) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(beta.size()), 1);
  for (std::size_t i = 0; i < beta.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = beta[i];
  return ControlCoefficients(std::move(m), tail);
}

ObservationCoefficients ObservationCoefficients::scalar(std::vector<double> gamma, TailRule tail) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(gamma.size()), 1);
  for (std::size_t i = 0; i < gamma.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = gamma[i];
  return ObservationCoefficients(std::move(m), tail);
}

namespace {

void require_paired(const DiagonalModel& model, const ModeVector& x, const char* op) {
  if (x.size() != model.mode_count()) {
    throw InvalidArgument(std::string(op) + ": state has " + std::to_string(x.size()) +
                          " modes, model has " + std::to_string(model.mode_count()));
  }
}

void check_off_spectrum(const DiagonalModel& model, Complex lambda) {
  const auto eig = model.eigenvalues();
  for (std::size_t n = 0; n < eig.size(); ++n) {
    const double scale = std::max(1.0, std::abs(eig[n]));
    if (std::abs(lambda - eig[n]) <= 64.0 * std::numeric_limits<double>::epsilon() * scale) {
      throw SingularResolvent(n, "resolvent is singular at mode " + std::to_string(n));
    }
  }
}

}  // namespace

ModeVector evaluate_semigroup(const DiagonalModel& model, double t, const ModeVector& x) {
  if (!(t >= 0.0)) throw InvalidArgument("evaluate_semigroup: t must be >= 0");
  require_paired(model, x, "evaluate_semigroup");
  ModeVector out = x;
  const auto eig = model.eigenvalues();
  for (std::size_t n = 0; n < eig.size(); ++n) out.coeffs[n] *= std::exp(eig[n] * t);
  return out;
}

std::vector<Complex> evaluate_resolvent(const DiagonalModel& model, Complex lambda,
                                        const ModeVector& x) {
  require_paired(model, x, "evaluate_resolvent");
  check_off_spectrum(model, lambda);
  const auto eig = model.eigenvalues();
  std::vector<Complex> out(eig.size());
  for (std::size_t n = 0; n < eig.size(); ++n) out[n] = x[n] / (lambda - eig[n]);
  return out;
}

double growth_bound(const DiagonalModel& model) {
  const auto eig = model.eigenvalues();
  // Power families are non-increasing, so unmaterialized modes never exceed
  // the materialized maximum.
  return *std::max_element(eig.begin(), eig.end());
}

YosidaResult yosida_apply(const DiagonalModel& model, const ObservationCoefficients& obs,
                          const ModeVector& x, std::span<const double> probe, double tolerance) {
  require_paired(model, x, "yosida_apply");
  if (obs.mode_count() != model.mode_count()) {
    throw InvalidArgument("yosida_apply: observation table does not match the model");
  }
  if (probe.empty()) throw InvalidArgument("yosida_apply: empty probe sequence");
  const double w0 = growth_bound(model);
  for (std::size_t i = 0; i < probe.size(); ++i) {
    if (!(probe[i] > w0)) {
      throw InvalidArgument("yosida_apply: probe value must exceed the growth bound");
    }
    if (i > 0 && !(probe[i] > probe[i - 1])) {
      throw InvalidArgument("yosida_apply: probe must be strictly increasing");
    }
  }
  const auto eig = model.eigenvalues();
  const auto& gamma = obs.values();
  YosidaResult result;
  for (double lambda : probe) {
    std::vector<double> row(obs.channel_count(), 0.0);
    for (std::size_t n = 0; n < eig.size(); ++n) {
      const double r = lambda / (lambda - eig[n]) * x[n];
      for (std::size_t j = 0; j < row.size(); ++j) {
        row[j] += gamma(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j)) * r;
      }
    }
    result.trajectory.push_back(std::move(row));
  }
  result.value = result.trajectory.back();
  if (result.trajectory.size() < 2) return result;
  const auto& prev = result.trajectory[result.trajectory.size() - 2];
  result.converged = true;
  for (std::size_t j = 0; j < result.value.size(); ++j) {
    const double v = result.value[j];
    if (std::abs(v - prev[j]) > tolerance * std::max(1.0, std::abs(v))) result.converged = false;
  }
  return result;
}

double extrapolation_norm(const DiagonalModel& model, const ModeVector& x, double beta) {
  require_paired(model, x, "extrapolation_norm");
  if (!(beta > growth_bound(model))) {
    throw InvalidArgument("extrapolation_norm: beta must exceed the growth bound");
  }
  const auto eig = model.eigenvalues();
  double s = 0.0;
  for (std::size_t n = 0; n < eig.size(); ++n) {
    const double r = x[n] / (beta - eig[n]);
    s += r * r;
  }
  return std::sqrt(s);
}

}  // namespace bnoise
