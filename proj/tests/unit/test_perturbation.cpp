#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "bnoise/admissibility.hpp"
#include "bnoise/boundary_models.hpp"
#include "bnoise/errors.hpp"
#include "bnoise/numerics.hpp"
#include "bnoise/perturbation.hpp"

using namespace bnoise;
using std::numbers::pi;

namespace {

using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

// exp(A t) by scaling, a long-double Taylor series and squaring.
MatrixL taylor_expm(const Eigen::MatrixXd& a, double t) {
  const MatrixL m = a.cast<long double>() * static_cast<long double>(t);
  const long double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  while (std::ldexp(norm, -squarings) > 0.25L) ++squarings;
  const MatrixL scaled = m * std::ldexp(1.0L, -squarings);
  MatrixL result = MatrixL::Identity(m.rows(), m.cols());
  MatrixL term = result;
  for (int k = 1; k < 30; ++k) {
    term = term * scaled / static_cast<long double>(k);
    result += term;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

struct RandomSystem {
  DiagonalModel model = DiagonalModel::explicit_spectrum({0.0});
  RankOnePerturbation pert;
  ControlCoefficients ctrl;
};

RandomSystem random_system(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> lam(-20.0, -0.1);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::vector<double> l(n);
  std::vector<double> b(n);
  std::vector<double> m(n);
  std::vector<double> beta(n);
  for (std::size_t i = 0; i < n; ++i) {
    l[i] = lam(rng);
    b[i] = coef(rng);
    m[i] = coef(rng);
    beta[i] = coef(rng);
  }
  return {DiagonalModel::explicit_spectrum(l), RankOnePerturbation{b, m}, ControlCoefficients::scalar(beta)};
}

VolterraProblem unit_problem(double sigma, std::vector<double> grid) {
  return VolterraProblem{[](double) { return 1.0; }, [](double) { return 1.0; }, sigma, std::move(grid)};
}

double erfc_oracle(double t) { return std::exp(pi * t) * std::erfc(-std::sqrt(pi * t)); }

}  // namespace

TEST(Generator, DiagonalPlusRankOne) {
  const auto m = DiagonalModel::explicit_spectrum({-1.0, -2.0});
  const RankOnePerturbation p{{1.0, 1.0}, {0.3, 0.4}};
  const Eigen::MatrixXd a = galerkin_perturbed_generator(m, p, 2);
  EXPECT_DOUBLE_EQ(a(0, 0), -0.7);
  EXPECT_DOUBLE_EQ(a(0, 1), 0.4);
  EXPECT_DOUBLE_EQ(a(1, 0), 0.3);
  EXPECT_DOUBLE_EQ(a(1, 1), -1.6);
  const RankOnePerturbation zero{{0.0, 0.0}, {0.3, 0.4}};
  EXPECT_TRUE(zero.is_zero());
  const Eigen::MatrixXd d = galerkin_perturbed_generator(m, zero, 2);
  EXPECT_EQ(d(0, 1), 0.0);
  EXPECT_EQ(d(1, 1), -2.0);
}

TEST(Generator, ValidationRejectsBadPerturbations) {
  RankOnePerturbation p{{1.0}, {1.0, 2.0}};
  EXPECT_THROW(p.validate(1), InvalidArgument);
  RankOnePerturbation q{{1.0}, {1.0}, UnknownTail{}};
  EXPECT_THROW(q.validate(1), InvalidArgument);
  RankOnePerturbation r{{1.0}, {1.0}, ConstantWeightTail{1.0}};
  EXPECT_THROW(r.validate(1), InvalidArgument);
  RankOnePerturbation ok{{1.0}, {1.0}, SquareSummableTail{1.0}};
  EXPECT_NO_THROW(ok.validate(1));
}

TEST(PerturbedSemigroup, SingleModeExample) {
  const auto m = DiagonalModel::explicit_spectrum({-1.0});
  const RankOnePerturbation p{{1.0}, {0.5}};
  const auto y = perturbed_semigroup_apply(m, p, 1.0, ModeVector({1.0}));
  EXPECT_NEAR(y[0], std::exp(-0.5), 1e-15);
  EXPECT_NEAR(y[0], 0.606531, 1e-6);
  const auto v = perturbed_semigroup_apply(m, p, 1.0, ModeVector({1.0}), PerturbedMethod::Volterra);
  EXPECT_NEAR(v[0], std::exp(-0.5), 1e-6);
}

TEST(PerturbedSemigroup, ZeroPerturbationIsTheDiagonalSemigroup) {
  const auto m = DiagonalModel::explicit_spectrum({-1.0, -3.0, -0.5});
  const RankOnePerturbation p{{1.0, 2.0, 3.0}, {0.0, 0.0, 0.0}};
  const ModeVector x({1.0, -2.0, 0.5});
  for (auto method : {PerturbedMethod::Galerkin, PerturbedMethod::Volterra}) {
    const auto y = perturbed_semigroup_apply(m, p, 0.7, x, method);
    const auto z = evaluate_semigroup(m, 0.7, x);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(y[i], z[i], 1e-14);
  }
}

TEST(PerturbedSemigroup, TwoModeMatchesTaylorOracle) {
  const auto m = DiagonalModel::explicit_spectrum({-1.0, -2.0});
  const RankOnePerturbation p{{1.0, 1.0}, {0.3, 0.4}};
  const Eigen::MatrixXd a = galerkin_perturbed_generator(m, p, 2);
  for (double t : {0.1, 0.5, 1.0, 3.0}) {
    const MatrixL e = taylor_expm(a, t);
    for (std::size_t j = 0; j < 2; ++j) {
      const auto y = perturbed_semigroup_apply(m, p, t, ModeVector::unit(2, j));
      const auto v = perturbed_semigroup_apply(m, p, t, ModeVector::unit(2, j), PerturbedMethod::Volterra);
      for (std::size_t i = 0; i < 2; ++i) {
        const double ref = static_cast<double>(e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        EXPECT_NEAR(y[i], ref, 1e-13 * std::max(1.0, std::abs(ref)));
        EXPECT_NEAR(v[i], ref, 1e-3 * std::max(1.0, std::abs(ref)));
      }
    }
  }
}

TEST(PerturbedSemigroup, RandomFamiliesGalerkinAndVolterraAgree) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 20; ++trial) {
    const auto sys = random_system(rng, 1 + static_cast<std::size_t>(trial % 8));
    ModeVector x = ModeVector::zero(sys.model.mode_count());
    for (double& c : x.coeffs) c = n(rng);
    for (double t : {0.1, 0.5, 1.0}) {
      const auto g = perturbed_semigroup_apply(sys.model, sys.pert, t, x);
      const auto v = perturbed_semigroup_apply(sys.model, sys.pert, t, x, PerturbedMethod::Volterra);
      const MatrixL e = taylor_expm(galerkin_perturbed_generator(sys.model, sys.pert, x.size()), t);
      for (std::size_t i = 0; i < x.size(); ++i) {
        long double ref = 0.0L;
        for (std::size_t j = 0; j < x.size(); ++j) {
          ref += e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * x[j];
        }
        EXPECT_NEAR(g[i], static_cast<double>(ref), 1e-10 * std::max(1.0, x.norm()));
        EXPECT_NEAR(v[i], g[i], 1e-3 * std::max(1.0, x.norm()));
      }
    }
  }
}

TEST(PerturbedSemigroup, VariationOfConstants) {
  const auto m = DiagonalModel::explicit_spectrum({-1.0, -4.0, -9.0});
  const RankOnePerturbation p{{0.8, -0.5, 1.2}, {0.3, 0.7, -0.2}};
  const ModeVector x({1.0, 0.5, -1.0});
  const double t = 1.3;
  const auto y = perturbed_semigroup_apply(m, p, t, x);
  auto feedback = [&](double s) {
    const auto ys = perturbed_semigroup_apply(m, p, s, x);
    double v = 0.0;
    for (std::size_t k = 0; k < 3; ++k) v += p.m[k] * ys[k];
    return v;
  };
  for (std::size_t i = 0; i < 3; ++i) {
    const double l = m.eigenvalue(i);
    auto f = [&](double s) { return std::exp(l * (t - s)) * p.b[i] * feedback(s); };
    const double integral = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, t, 8, 1e-13);
    EXPECT_NEAR(y[i], std::exp(l * t) * x[i] + integral, 1e-10);
  }
}

TEST(PerturbedSemigroup, SemigroupLaw) {
  const auto heat = build_heat_neumann(Side::Right, 16, heat_constant_feedback(16));
  const auto p = *heat.perturbation();
  ModeVector x = ModeVector::zero(16);
  for (std::size_t i = 0; i < 16; ++i) x.coeffs[i] = 1.0 / (1.0 + static_cast<double>(i));
  const auto a = perturbed_semigroup_apply(heat.model, p, 0.7, x);
  const auto b = perturbed_semigroup_apply(heat.model, p, 0.3, perturbed_semigroup_apply(heat.model, p, 0.4, x));
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(a[i], b[i], 1e-10 * std::max(1.0, std::abs(a[i])));
}

TEST(Volterra, ConstantKernelGivesExponential) {
  std::vector<double> grid;
  for (int j = 0; j <= 1000; ++j) grid.push_back(j / 1000.0);
  const auto s = volterra_resolve(unit_problem(0.0, grid));
  ASSERT_EQ(s.values.size(), grid.size());
  EXPECT_EQ(s.values.front(), 1.0);
  EXPECT_NEAR(s.values.back(), std::exp(1.0), 1e-4);

  const auto z = volterra_resolve(VolterraProblem{[](double t) { return t; }, [](double) { return 0.0; }, 0.0, grid});
  for (std::size_t j = 0; j < grid.size(); ++j) EXPECT_EQ(z.values[j], grid[j]);
}

TEST(Volterra, WeaklySingularKernelMatchesErfcOracle) {
  double previous = kInf;
  for (std::size_t n : {64u, 128u, 256u, 512u}) {
    const auto s = volterra_resolve(unit_problem(0.5, graded_partition(1.0, n, 2.0)));
    double err = 0.0;
    for (std::size_t j = 0; j < s.times.size(); ++j) {
      err = std::max(err, std::abs(s.values[j] - erfc_oracle(s.times[j])) / erfc_oracle(s.times[j]));
    }
    if (n == 512) EXPECT_LE(err, 1e-3);
    EXPECT_LT(err, previous) << "n=" << n;
    previous = err;
  }
}

TEST(Volterra, RejectsBadProblems) {
  std::vector<double> fine;
  for (int j = 0; j <= 64; ++j) fine.push_back(j / 64.0);
  EXPECT_THROW(volterra_resolve(unit_problem(1.0, fine)), InvalidArgument);
  EXPECT_THROW(volterra_resolve(unit_problem(-0.1, fine)), InvalidArgument);
  EXPECT_THROW(volterra_resolve(unit_problem(0.5, {0.0, 0.1, 0.5, 1.0})), ResolutionError);
  EXPECT_THROW(volterra_resolve(unit_problem(0.0, {0.0, 0.5, 0.3, 1.0})), InvalidArgument);
}

TEST(PerturbedGamma, SingleModeAndZeroPerturbation) {
  const auto m = DiagonalModel::explicit_spectrum({-1.0});
  const auto ctrl = ControlCoefficients::scalar({1.0});
  const auto g = perturbed_gamma_time(m, RankOnePerturbation{{1.0}, {0.5}}, ctrl, 1.0);
  ASSERT_EQ(g.verdict.verdict, Verdict::Converged);
  EXPECT_NEAR(g.verdict.total(), 1.0 - std::exp(-1.0), 1e-12);

  const auto heat = build_heat_neumann(Side::Right, 32);
  const RankOnePerturbation zero{std::vector<double>(32, 0.0), std::vector<double>(32, 1.0)};
  const auto z = perturbed_gamma_time(heat.model, zero, heat.control, 1.0);
  EXPECT_EQ(z.verdict.total(), gamma_time(heat.model, heat.control, 1.0).total());
}

TEST(PerturbedGamma, HeatFeedbackSettles) {
  const auto heat = build_heat_neumann(Side::Right, 64, heat_constant_feedback(64));
  const auto g = perturbed_gamma_time(heat.model, *heat.perturbation(), heat.control, 1.0);
  ASSERT_EQ(g.verdict.verdict, Verdict::Converged) << g.verdict.evidence;
  ASSERT_EQ(g.levels.size(), 3u);
  EXPECT_EQ(g.levels.back(), 64u);
  EXPECT_LE(std::abs(g.values[2] - g.values[1]), 1e-2 * g.values[2]);
  EXPECT_GT(g.verdict.total(), 0.0);
}

TEST(PerturbedGamma, RandomFiniteFamiliesNeverDiverge) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto sys = random_system(rng, 1 + static_cast<std::size_t>(trial % 10));
    const auto g = perturbed_gamma_time(sys.model, sys.pert, sys.ctrl, 1.0);
    EXPECT_NE(g.verdict.verdict, Verdict::Diverged);
    // Oracle: sum over t of ||e^{At} beta||^2 by Gauss-Kronrod on the Taylor exponential.
    const Eigen::MatrixXd a = galerkin_perturbed_generator(sys.model, sys.pert, sys.model.mode_count());
    auto f = [&](double t) {
      const MatrixL e = taylor_expm(a, t);
      const Eigen::VectorXd v = (e.cast<double>() * sys.ctrl.values()).col(0);
      return v.squaredNorm();
    };
    const double q = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, 1.0, 6, 1e-12);
    EXPECT_NEAR(g.verdict.total(), q, 1e-8 * std::max(q, 1e-12));
  }
}

TEST(PerturbedGamma, RequiresConvergedBase) {
  const auto m = DiagonalModel::power_family(1.0, 2.0, 8);
  const auto ctrl = ControlCoefficients::scalar(std::vector<double>(8, 1.0), UnknownTail{});
  const RankOnePerturbation p{std::vector<double>(8, 1.0), std::vector<double>(8, 0.1)};
  EXPECT_THROW(perturbed_gamma_time(m, p, ctrl, 1.0), PreconditionError);
}
