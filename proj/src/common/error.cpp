#include "xbar/common/error.hpp"

namespace xbar {

std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Shape: return "shape";
    case ErrorCategory::Range: return "range";
    case ErrorCategory::Singular: return "singular";
    case ErrorCategory::Convergence: return "convergence";
    case ErrorCategory::UndefinedNf: return "undefined-nf";
    case ErrorCategory::Calibration: return "calibration";
    case ErrorCategory::Training: return "training";
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Format: return "format";
    case ErrorCategory::Report: return "report";
  }
  return "unknown";
}

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Io: return 3;
    case ErrorCategory::Format: return 4;
    case ErrorCategory::Shape:
    case ErrorCategory::Range: return 5;
    case ErrorCategory::Singular:
    case ErrorCategory::Convergence:
    case ErrorCategory::UndefinedNf: return 6;
    case ErrorCategory::Calibration: return 7;
    case ErrorCategory::Training: return 8;
    case ErrorCategory::Report: return 9;
  }
  return 1;
}

}  // namespace xbar
