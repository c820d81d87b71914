#include "bnoise/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace bnoise {

using nlohmann::json;

std::string provenance::monte_carlo(double standard_error) {
  return "monte_carlo(se=" + format_real(standard_error) + ")";
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

json real(double x) {
  if (std::isfinite(x)) return x;
  return format_real(x);
}

json quantity(double x, std::string_view prov) {
  return json{{"value", real(x)}, {"provenance", std::string(prov)}};
}

json quantity(const std::vector<double>& xs, std::string_view prov) {
  json arr = json::array();
  for (double x : xs) arr.push_back(real(x));
  return json{{"value", arr}, {"provenance", std::string(prov)}};
}

json verdict_json(const SeriesVerdict& v, std::string_view prov) {
  json j;
  j["verdict"] = std::string(to_string(v.verdict));
  j["evidence"] = v.evidence;
  j["tail_status"] = std::string(to_string(v.tail_status));
  j["partial_value"] = quantity(v.partial_value, prov);
  j["tail_lower"] = quantity(v.tail_lower, prov);
  j["tail_upper"] = quantity(v.tail_upper, prov);
  j["total"] = quantity(v.total(), prov);
  j["uncertainty"] = quantity(v.uncertainty(), prov);
  j["materialized_terms"] = v.terms.size();
  return j;
}

std::string covariance_csv(const Eigen::MatrixXd& q) {
  std::string out = "n,m,value\n";
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      out += std::to_string(i) + "," + std::to_string(j) + "," + format_real(q(i, j)) + "\n";
    }
  }
  return out;
}

std::string series_csv(const std::vector<double>& terms) {
  std::string out = "index,term,cumulative\n";
  double acc = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    acc += terms[i];
    out += std::to_string(i) + "," + format_real(terms[i]) + "," + format_real(acc) + "\n";
  }
  return out;
}

std::string paths_csv(const std::vector<double>& times, const std::vector<Eigen::MatrixXd>& values) {
  std::string out = "sample,time,mode,value\n";
  if (values.empty()) return out;
  const Eigen::Index samples = values[0].rows();
  for (Eigen::Index s = 0; s < samples; ++s) {
    for (std::size_t t = 0; t < times.size(); ++t) {
      for (Eigen::Index m = 0; m < values[t].cols(); ++m) {
        out += std::to_string(s) + "," + format_real(times[t]) + "," + std::to_string(m) + "," +
               format_real(values[t](s, m)) + "\n";
      }
    }
  }
  return out;
}

}  // namespace bnoise
