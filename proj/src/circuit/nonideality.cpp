#include "xbar/circuit/nonideality.hpp"

#include <algorithm>
#include <cmath>

#include "xbar/common/error.hpp"

namespace xbar::circuit {

double relative_threshold(std::span<const CurrentPair> pairs, double fraction) {
  double peak = 0.0;
  for (const auto& p : pairs)
    for (double x : p.ideal) peak = std::max(peak, std::abs(x));
  return fraction * peak;
}

double nonideality_factor(std::span<const CurrentPair> pairs, double threshold) {
  if (!(threshold >= 0.0)) throw RangeError("NF threshold must be >= 0");
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& p : pairs) {
    if (p.ideal.size() != p.nonideal.size())
      throw ShapeError("ideal and non-ideal current vectors differ in length");
    for (std::size_t k = 0; k < p.ideal.size(); ++k) {
      if (std::abs(p.ideal[k]) <= threshold) continue;
      sum += (p.ideal[k] - p.nonideal[k]) / p.ideal[k];
      ++count;
    }
  }
  if (count == 0) throw UndefinedNfError("no ideal current exceeds the NF threshold");
  return sum / static_cast<double>(count);
}

double nonideality_factor(std::span<const CurrentPair> pairs) {
  return nonideality_factor(pairs, relative_threshold(pairs));
}

}  // namespace xbar::circuit
