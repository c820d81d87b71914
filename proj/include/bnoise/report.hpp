#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bnoise/series.hpp"
#include "bnoise/spectral_core.hpp"

namespace bnoise {

inline constexpr std::string_view kToolName = "bnoise";
inline constexpr std::string_view kToolVersion = "1.0.0";
inline constexpr int kReportFormatVersion = 1;

namespace provenance {
inline constexpr std::string_view kClosedForm = "closed_form";
inline constexpr std::string_view kQuadrature = "quadrature";
inline constexpr std::string_view kSeriesTail = "series+tail";
std::string monte_carlo(double standard_error);
}  // namespace provenance

/// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(std::string_view data);

/// JSON-safe real: non-finite values become the strings "inf", "-inf", "nan".
nlohmann::json real(double x);
/// {"value": x, "provenance": p}.
nlohmann::json quantity(double x, std::string_view prov);
nlohmann::json quantity(const std::vector<double>& xs, std::string_view prov);

nlohmann::json verdict_json(const SeriesVerdict& v, std::string_view prov = provenance::kSeriesTail);

/// Long-form CSV writers.
std::string covariance_csv(const Eigen::MatrixXd& q);
std::string series_csv(const std::vector<double>& terms);
std::string paths_csv(const std::vector<double>& times, const std::vector<Eigen::MatrixXd>& values);

/// Compact, locale-independent decimal rendering with round-trip precision.
std::string format_real(double x);

}  // namespace bnoise
