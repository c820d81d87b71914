#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace bnoise {

/// Base of every error raised by the library. Divergent series are results,
/// not errors; only invalid inputs and failed preconditions throw.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A resolvent was requested at (or numerically on top of) an eigenvalue.
class SingularResolvent : public Error {
 public:
  SingularResolvent(std::size_t mode, const std::string& what);
  std::size_t mode() const noexcept { return mode_; }

 private:
  std::size_t mode_;
};

/// A hypothesis of the requested criterion does not hold for the input.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// The operation has no meaning for the given model representation
/// (e.g. time-domain criteria on the non-diagonal transport model).
class UnsupportedRepresentation : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Discretization too coarse for the declared singularity.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

struct SchemaIssue {
  std::string path;
  std::string message;
};

class SchemaError : public Error {
 public:
  explicit SchemaError(std::vector<SchemaIssue> issues);
  const std::vector<SchemaIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<SchemaIssue> issues_;
};

}  // namespace bnoise
