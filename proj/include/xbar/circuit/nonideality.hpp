#pragma once

#include <span>
#include <vector>

namespace xbar::circuit {

struct CurrentPair {
  std::vector<double> ideal;
  std::vector<double> nonideal;
};

inline constexpr double kNfRelativeThreshold = 1e-3;

/// Mean of (ideal - nonideal) / ideal over every element with |ideal| > threshold.
/// Throws UndefinedNfError when no element survives the threshold.
double nonideality_factor(std::span<const CurrentPair> pairs, double threshold);

/// Uses threshold = 1e-3 * max|ideal| over the whole batch.
double nonideality_factor(std::span<const CurrentPair> pairs);

double relative_threshold(std::span<const CurrentPair> pairs, double fraction = kNfRelativeThreshold);

}  // namespace xbar::circuit
