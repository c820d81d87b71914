#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace bnoise {

/// (e^z - 1)/z, equal to 1 at z = 0.
double phi1(double z) noexcept;
/// (e^z - 1 - z)/z^2, equal to 1/2 at z = 0.
double phi2(double z) noexcept;

/// int_0^T e^{2 lambda t} dt, with the lambda = 0 limit T.
double exp_square_integral(double lambda, double horizon) noexcept;

struct GaussLegendreRule {
  std::vector<double> nodes;    ///< on [-1, 1], ascending
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule (Newton on the Legendre recurrence). Rules
/// are cached per n; the returned reference stays valid for the process.
const GaussLegendreRule& gauss_legendre(std::size_t n);

/// Composite Gauss-Legendre over the cells of an increasing partition.
double integrate_partition(const std::function<double(double)>& f,
                           const std::vector<double>& partition, std::size_t points_per_cell);

/// Cells [0, h0], [h0, r h0], [r h0, r^2 h0], ... clipped to [0, T]: resolves
/// integrands with e^{-k t} transients for all k up to ~1/h0.
std::vector<double> geometric_partition(double horizon, double first_cell, double ratio);

/// t_j = T (j/n)^grading, j = 0..n.
std::vector<double> graded_partition(double horizon, std::size_t intervals, double grading);

}  // namespace bnoise
