#include "mfchaos/experiments/fit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mfchaos {

FitResult fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("fit: x and y differ in length");
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("fit: need at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit: x values are all equal");
  FitResult f;
  f.points = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  f.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    f.residuals[i] = y[i] - (f.intercept + f.slope * x[i]);
    sse += f.residuals[i] * f.residuals[i];
  }
  f.std_error = n > 2 ? std::sqrt(sse / (n - 2) / sxx) : 0.0;
  f.r_squared = syy > 0.0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;
  for (double v : {f.slope, f.intercept, f.std_error}) {
    if (!std::isfinite(v)) throw std::domain_error("fit: non-finite result");
  }
  return f;
}

namespace {

std::vector<double> logs(std::span<const double> v, const char* what) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0)) throw std::domain_error(std::string(what) + " must be positive for a log fit");
    out[i] = std::log(v[i]);
  }
  return out;
}

}  // namespace

FitResult fit_power_law(std::span<const double> x, std::span<const double> y) {
  return fit_line(logs(x, "x"), logs(y, "y"));
}

FitResult fit_exponential(std::span<const double> t, std::span<const double> y) {
  return fit_line(t, logs(y, "y"));
}

double tail_mean(std::span<const double> t, std::span<const double> y, double fraction) {
  if (t.empty() || t.size() != y.size()) throw std::invalid_argument("tail_mean: bad series");
  const double cut = t.back() - fraction * (t.back() - t.front());
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] >= cut - 1e-12 * std::abs(cut)) {
      acc += y[i];
      ++n;
    }
  }
  return acc / n;
}

DecayFit fit_decay_to_plateau(std::span<const double> t, std::span<const double> y) {
  DecayFit d;
  d.plateau = tail_mean(t, y);
  const double cut = t.back() - 0.2 * (t.back() - t.front());
  std::vector<double> wt, wy;
  d.plateau_reached = true;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] >= cut && y[i] > 2.0 * d.plateau) d.plateau_reached = false;
    if (y[i] > 2.0 * d.plateau) {
      d.window.push_back(i);
      wt.push_back(t[i]);
      wy.push_back(y[i] - d.plateau);
    }
  }
  if (wt.size() >= 3) {
    d.fit = fit_exponential(wt, wy);
    d.rate = -d.fit.slope;
    d.ok = true;
  }
  return d;
}

}  // namespace mfchaos
