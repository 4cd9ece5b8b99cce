#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pfgm {

// Base of every error thrown by the library. `code()` is the stable tag the
// CLI maps to exit codes and error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error("domain", what) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

// A query landed on a source point.
class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, std::size_t index)
      : Error("singularity", what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row)
      : Error("parse", what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

// |v_z| fell below the drift floor; the anchored ODE cannot divide by it.
class DegenerateFieldError : public Error {
 public:
  explicit DegenerateFieldError(const std::string& what)
      : Error("degenerate_field", what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error("numerical", what) {}
};

}  // namespace pfgm
