#include "bnoise/errors.hpp"

namespace bnoise {

namespace {

std::string join_issues(const std::vector<SchemaIssue>& issues) {
  std::string out = "model spec rejected:";
  for (const auto& issue : issues) {
    out += "\n  ";
    out += issue.path.empty() ? std::string("<root>") : issue.path;
    out += ": ";
    out += issue.message;
  }
  return out;
}

}  // namespace

SingularResolvent::SingularResolvent(std::size_t mode, const std::string& what)
    : Error(what), mode_(mode) {}

SchemaError::SchemaError(std::vector<SchemaIssue> issues)
    : Error(join_issues(issues)), issues_(std::move(issues)) {}

}  // namespace bnoise
