#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace surme {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A matrix that must be positive definite failed its Cholesky factorization.
class PdFailure : public Error {
 public:
  explicit PdFailure(std::string matrix_name)
      : Error("matrix '" + matrix_name + "' is not positive definite"),
        name_(std::move(matrix_name)) {}
  PdFailure(std::string matrix_name, const std::string& context)
      : Error("matrix '" + matrix_name + "' is not positive definite (" + context + ")"),
        name_(std::move(matrix_name)) {}

  const std::string& matrix_name() const noexcept { return name_; }

 private:
  std::string name_;
};

/// An argument lies outside the domain of a distribution or formula.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input data or configuration violates one or more invariants.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& item : items) {
      if (!out.empty()) out += "; ";
      out += item;
    }
    return out;
  }

  std::vector<std::string> problems_;
};

/// A design matrix is rank deficient.
class RankError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read or parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace surme
