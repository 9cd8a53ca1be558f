#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xbar {

/// Machine-readable failure class. The CLI maps each category to an exit code.
enum class ErrorCategory {
  Shape,
  Range,
  Singular,
  Convergence,
  UndefinedNf,
  Calibration,
  Training,
  Config,
  Io,
  Format,
  Report,
};

std::string_view category_name(ErrorCategory c);
int exit_code(ErrorCategory c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error(ErrorCategory::Shape, w) {}
};
struct RangeError : Error {
  explicit RangeError(const std::string& w) : Error(ErrorCategory::Range, w) {}
};
struct SingularSystemError : Error {
  explicit SingularSystemError(const std::string& w) : Error(ErrorCategory::Singular, w) {}
};
struct UndefinedNfError : Error {
  explicit UndefinedNfError(const std::string& w) : Error(ErrorCategory::UndefinedNf, w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorCategory::Config, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorCategory::Io, w) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(ErrorCategory::Format, w) {}
};
struct ReportError : Error {
  explicit ReportError(const std::string& w) : Error(ErrorCategory::Report, w) {}
};

/// Nonlinear fixed-point iteration did not settle. `trace` holds the max node
/// voltage change of every iteration.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& w, std::vector<double> trace)
      : Error(ErrorCategory::Convergence, w), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

class CalibrationError : public Error {
 public:
  CalibrationError(const std::string& w, double lo, double hi)
      : Error(ErrorCategory::Calibration, w), achieved_lo_(lo), achieved_hi_(hi) {}
  double achieved_lo() const noexcept { return achieved_lo_; }
  double achieved_hi() const noexcept { return achieved_hi_; }

 private:
  double achieved_lo_;
  double achieved_hi_;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& w, int epoch)
      : Error(ErrorCategory::Training, w), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace xbar
