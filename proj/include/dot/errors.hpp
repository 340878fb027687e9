#pragma once

#include <stdexcept>
#include <string>

namespace dot {

// Error taxonomy used across the library. The CLI maps kinds onto exit
// statuses: usage/config -> 1, data/schema -> 2, numeric -> 3.
enum class ErrorKind {
  Shape,     // dimension mismatch
  Param,     // invalid argument value (scale <= 0, k out of range, ...)
  Input,     // malformed numeric input (NaN/Inf, row-sum violation, bad label)
  Numeric,   // solver/optimizer failure (non-convergence, NaN loss, underflow)
  Parse,     // file or schema parse failure
  Coverage,  // required class/label missing
  Capacity,  // instance exceeds a documented size bound
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error(ErrorKind::Shape, msg) {}
};
struct ParamError : Error {
  explicit ParamError(const std::string& msg) : Error(ErrorKind::Param, msg) {}
};
struct InputError : Error {
  explicit InputError(const std::string& msg) : Error(ErrorKind::Input, msg) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(ErrorKind::Numeric, msg) {}
};
struct ParseError : Error {
  explicit ParseError(const std::string& msg) : Error(ErrorKind::Parse, msg) {}
};
struct CoverageError : Error {
  explicit CoverageError(const std::string& msg) : Error(ErrorKind::Coverage, msg) {}
};
struct CapacityError : Error {
  explicit CapacityError(const std::string& msg) : Error(ErrorKind::Capacity, msg) {}
};

}  // namespace dot
