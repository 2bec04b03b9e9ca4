#pragma once

// Least-squares fits for scaling studies.

#include <cstddef>
#include <span>
#include <vector>

namespace mfchaos {

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double std_error = 0.0;  // of the slope
  double r_squared = 0.0;
  std::vector<double> residuals;
  std::size_t points = 0;
};

// Ordinary least squares y = intercept + slope x. Needs two distinct x.
FitResult fit_line(std::span<const double> x, std::span<const double> y);

// log y = intercept + slope log x; y must be positive.
FitResult fit_power_law(std::span<const double> x, std::span<const double> y);

// log y = intercept + slope t. The decay rate is -slope.
FitResult fit_exponential(std::span<const double> t, std::span<const double> y);

// Mean of the values whose time lies in the last `fraction` of [t.front(), t.back()].
double tail_mean(std::span<const double> t, std::span<const double> y, double fraction = 0.2);

struct DecayFit {
  double plateau = 0.0;
  double rate = 0.0;  // fitted decay rate of y - plateau
  FitResult fit;
  std::vector<std::size_t> window;  // indices used by the fit
  bool ok = false;                  // at least three window points
  bool plateau_reached = false;     // no point of the last 20% exceeds 2 * plateau
};

// Plateau = tail_mean over the last 20%; fits log(y - plateau) against t on
// the points where y > 2 * plateau.
DecayFit fit_decay_to_plateau(std::span<const double> t, std::span<const double> y);

}  // namespace mfchaos
