#include "kbo/slope.hpp"

#include <cmath>
#include <vector>

#include "kbo/errors.hpp"

namespace kbo {

SlopeFit fit_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("fit_slope: abscissae and ordinates differ in length");
  const std::size_t k = x.size();
  if (k < 3) throw InputError("fit_slope: at least three points are required");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw NumericError("fit_slope: non-finite point");
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(k);
  my /= static_cast<double>(k);
  double sxx = 0.0, sxy = 0.0, sx2 = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    sx2 += x[i] * x[i];
  }
  if (!(sxx > 1e-20 * sx2) || sxx == 0.0) {
    throw InputError("fit_slope: abscissae are degenerate");
  }
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double e = y[i] - fit.intercept - fit.slope * x[i];
    sse += e * e;
  }
  fit.stderr_slope = std::sqrt(sse / static_cast<double>(k - 2) / sxx);
  return fit;
}

SlopeFit fit_loglog(std::span<const double> n, std::span<const double> error) {
  if (n.size() != error.size()) throw InputError("fit_loglog: length mismatch");
  std::vector<double> lx(n.size()), ly(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (!(n[i] > 0.0) || !(error[i] > 0.0)) throw InputError("fit_loglog: values must be positive");
    lx[i] = std::log(n[i]);
    ly[i] = std::log(error[i]);
  }
  return fit_slope(lx, ly);
}

}  // namespace kbo
