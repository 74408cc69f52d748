#pragma once

#include <span>

namespace kbo {

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
};

// Ordinary least squares y = intercept + slope * x. Needs at least three
// points with distinct abscissae.
SlopeFit fit_slope(std::span<const double> x, std::span<const double> y);

// Fit of log(error) against log(n); every value must be positive.
SlopeFit fit_loglog(std::span<const double> n, std::span<const double> error);

}  // namespace kbo
