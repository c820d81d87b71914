#include "bnoise/numerics.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "bnoise/errors.hpp"

namespace bnoise {

double phi1(double z) noexcept {
  if (std::abs(z) < 1e-5) return 1.0 + z / 2.0 + z * z / 6.0;
  return std::expm1(z) / z;
}

double phi2(double z) noexcept {
  if (std::abs(z) < 1e-3) return 0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0;
  return (std::expm1(z) - z) / (z * z);
}

double exp_square_integral(double lambda, double horizon) noexcept {
  return horizon * phi1(2.0 * lambda * horizon);
}

const GaussLegendreRule& gauss_legendre(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, GaussLegendreRule> cache;
  std::lock_guard lock(mutex);
  if (auto it = cache.find(n); it != cache.end()) return it->second;
  if (n == 0) throw InvalidArgument("gauss_legendre: need at least one node");

  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = p2;
      }
      const double pn = n == 1 ? x : p1;
      const double pn1 = n == 1 ? 1.0 : p0;
      dp = static_cast<double>(n) * (x * pn - pn1) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    if (n == 1) {
      x = 0.0;
      dp = 1.0;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n == 1) rule.weights[0] = 2.0;
  return cache.emplace(n, std::move(rule)).first->second;
}

double integrate_partition(const std::function<double(double)>& f,
                           const std::vector<double>& partition, std::size_t points_per_cell) {
  const auto& rule = gauss_legendre(points_per_cell);
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < partition.size(); ++j) {
    const double a = partition[j];
    const double b = partition[j + 1];
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double cell = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      cell += rule.weights[q] * f(mid + half * rule.nodes[q]);
    }
    total += half * cell;
  }
  return total;
}

std::vector<double> geometric_partition(double horizon, double first_cell, double ratio) {
  if (!(horizon > 0.0) || !(first_cell > 0.0) || !(ratio > 1.0)) {
    throw InvalidArgument("geometric_partition: need T > 0, h0 > 0, ratio > 1");
  }
  std::vector<double> t{0.0};
  double next = std::min(first_cell, horizon);
  while (next < horizon) {
    t.push_back(next);
    next *= ratio;
  }
  t.push_back(horizon);
  return t;
}

std::vector<double> graded_partition(double horizon, std::size_t intervals, double grading) {
  if (!(horizon > 0.0) || intervals == 0 || !(grading >= 1.0)) {
    throw InvalidArgument("graded_partition: need T > 0, intervals >= 1, grading >= 1");
  }
  std::vector<double> t(intervals + 1);
  for (std::size_t j = 0; j <= intervals; ++j) {
    t[j] = horizon * std::pow(static_cast<double>(j) / static_cast<double>(intervals), grading);
  }
  t.back() = horizon;
  return t;
}

}  // namespace bnoise
