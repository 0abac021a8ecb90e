#include "trajembed/dwell.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trajembed/errors.hpp"

namespace trajembed {

namespace {

void check_rate(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw NonPositiveRateError("dwell rate must be positive and finite, got " +
                               std::to_string(rate));
  }
}

}  // namespace

DwellDistribution DwellDistribution::exponential(double rate) {
  check_rate(rate);
  DwellDistribution d;
  d.kind_ = Kind::kExponential;
  d.components_ = {{1.0, rate}};
  return d;
}

DwellDistribution DwellDistribution::exp_mixture(std::vector<ExpComponent> components) {
  if (components.empty()) {
    throw BadDensityError("dwell mixture needs at least one component");
  }
  double total = 0.0;
  for (const auto& c : components) {
    check_rate(c.rate);
    if (!(c.weight > 0.0) || !std::isfinite(c.weight)) {
      throw NonStochasticError("dwell mixture weight must be positive, got " +
                               std::to_string(c.weight));
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-10) {
    throw NonStochasticError("dwell mixture weights sum to " +
                             std::to_string(total));
  }
  DwellDistribution d;
  d.kind_ = Kind::kExpMixture;
  d.components_ = std::move(components);
  return d;
}

DwellDistribution DwellDistribution::tabulated(std::vector<double> t_grid,
                                               std::vector<double> density) {
  if (t_grid.size() < 2 || t_grid.size() != density.size()) {
    throw BadDensityError("tabulated dwell needs >= 2 aligned grid points");
  }
  if (t_grid.front() < 0.0) {
    throw NegativeTimeError("tabulated dwell grid starts before 0");
  }
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > t_grid[i - 1])) {
      throw BadDensityError("tabulated dwell grid is not strictly increasing");
    }
  }
  for (double v : density) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw BadDensityError("tabulated dwell density must be finite and >= 0");
    }
  }
  DwellDistribution d;
  d.kind_ = Kind::kTabulated;
  d.t_ = std::move(t_grid);
  d.f_ = std::move(density);
  // Exact integral of the piecewise-linear density at every grid point.
  d.cum_.assign(d.t_.size(), 0.0);
  for (std::size_t i = 1; i < d.t_.size(); ++i) {
    const double h = d.t_[i] - d.t_[i - 1];
    d.cum_[i] = d.cum_[i - 1] + 0.5 * (d.f_[i] + d.f_[i - 1]) * h;
  }
  if (std::abs(d.cum_.back() - 1.0) > 1e-6) {
    throw BadDensityError("tabulated dwell density integrates to " +
                          std::to_string(d.cum_.back()));
  }
  return d;
}

double DwellDistribution::density(double t) const {
  if (t < 0.0) return 0.0;
  if (kind_ != Kind::kTabulated) {
    double v = 0.0;
    for (const auto& c : components_) v += c.weight * c.rate * std::exp(-c.rate * t);
    return v;
  }
  if (t_.empty() || t < t_.front() || t > t_.back()) return 0.0;
  auto it = std::upper_bound(t_.begin(), t_.end(), t);
  std::size_t i = (it == t_.begin()) ? 1 : static_cast<std::size_t>(it - t_.begin());
  if (i >= t_.size()) i = t_.size() - 1;
  const double h = t_[i] - t_[i - 1];
  const double u = (t - t_[i - 1]) / h;
  return f_[i - 1] + u * (f_[i] - f_[i - 1]);
}

double DwellDistribution::tail(double t) const {
  if (t <= 0.0) return 1.0;
  if (kind_ != Kind::kTabulated) {
    double v = 0.0;
    for (const auto& c : components_) v += c.weight * std::exp(-c.rate * t);
    return v;
  }
  if (t_.empty() || t >= t_.back()) return 0.0;
  return std::max(cum_.back() - cdf(t), 0.0);
}

double DwellDistribution::interval_mass(double a, double b) const {
  if (b <= a) return 0.0;
  if (kind_ != Kind::kTabulated) {
    // w * (exp(-r a) - exp(-r b)) without cancellation for nearby a, b
    double v = 0.0;
    for (const auto& c : components_) {
      v += c.weight * std::exp(-c.rate * std::max(a, 0.0)) *
           (-std::expm1(-c.rate * (b - std::max(a, 0.0))));
    }
    return v;
  }
  return std::max(cdf(b) - cdf(a), 0.0);
}

double DwellDistribution::cdf(double t) const {
  if (t <= 0.0) return 0.0;
  if (kind_ != Kind::kTabulated) {
    double v = 0.0;
    for (const auto& c : components_) v += c.weight * (1.0 - std::exp(-c.rate * t));
    return v;
  }
  if (t_.empty() || t <= t_.front()) return 0.0;
  if (t >= t_.back()) return cum_.back();
  auto it = std::upper_bound(t_.begin(), t_.end(), t);
  std::size_t i = static_cast<std::size_t>(it - t_.begin());
  const double h = t_[i] - t_[i - 1];
  const double x = t - t_[i - 1];
  const double slope = (f_[i] - f_[i - 1]) / h;
  return cum_[i - 1] + f_[i - 1] * x + 0.5 * slope * x * x;
}

double DwellDistribution::mean() const {
  if (kind_ != Kind::kTabulated) {
    double v = 0.0;
    for (const auto& c : components_) v += c.weight / c.rate;
    return v;
  }
  // t * density(t) is quadratic on each cell, so Simpson is exact.
  double v = 0.0;
  for (std::size_t i = 1; i < t_.size(); ++i) {
    const double a = t_[i - 1], b = t_[i], m = 0.5 * (a + b);
    v += (b - a) / 6.0 * (a * f_[i - 1] + 4.0 * m * density(m) + b * f_[i]);
  }
  return v;
}

double DwellDistribution::sample(RngStream& rng) const {
  if (kind_ != Kind::kTabulated) {
    if (components_.size() == 1) return rng.exponential(components_[0].rate);
    std::vector<double> w(components_.size());
    for (std::size_t i = 0; i < components_.size(); ++i) w[i] = components_[i].weight;
    return rng.exponential(components_[rng.categorical(w)].rate);
  }
  // Invert the exact CDF of the piecewise-linear density cell by cell.
  const double u = rng.uniform01() * cum_.back();
  auto it = std::lower_bound(cum_.begin(), cum_.end(), u);
  std::size_t i = (it == cum_.begin()) ? 1 : static_cast<std::size_t>(it - cum_.begin());
  if (i >= t_.size()) i = t_.size() - 1;
  const double h = t_[i] - t_[i - 1];
  const double m = u - cum_[i - 1];
  const double f0 = f_[i - 1];
  const double slope = (f_[i] - f0) / h;
  double x;
  if (std::abs(slope) * h < 1e-14 * std::max(f0, 1e-300)) {
    x = m / std::max(f0, 1e-300);
  } else {
    const double disc = std::max(f0 * f0 + 2.0 * slope * m, 0.0);
    x = (std::sqrt(disc) - f0) / slope;
  }
  return t_[i - 1] + std::clamp(x, 0.0, h);
}

double DwellDistribution::tail_horizon(double eps) const {
  if (kind_ == Kind::kTabulated) return t_.empty() ? 0.0 : t_.back();
  double lo = 0.0, hi = 1.0;
  while (tail(hi) > eps) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e18) return hi;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-9 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (tail(mid) > eps ? lo : hi) = mid;
  }
  return hi;
}

void DwellDistribution::check(std::vector<std::string>& violations,
                              const std::string& where) const {
  if (kind_ != Kind::kTabulated) {
    if (components_.empty()) {
      violations.push_back(where + ": BadDensity: mixture has no components");
      return;
    }
    double total = 0.0;
    for (const auto& c : components_) {
      if (!(c.rate > 0.0) || !std::isfinite(c.rate))
        violations.push_back(where + ": NonPositiveRate: rate must be positive");
      if (!(c.weight > 0.0) || !std::isfinite(c.weight))
        violations.push_back(where + ": BadDensity: component weight must be positive");
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-6)
      violations.push_back(where + ": BadDensity: mixture weights sum to " +
                           std::to_string(total));
    return;
  }
  if (t_.size() < 2 || t_.size() != f_.size()) {
    violations.push_back(where + ": BadDensity: tabulated grid needs >= 2 aligned points");
    return;
  }
  if (t_.front() < 0.0)
    violations.push_back(where + ": NegativeTime: tabulated grid starts before 0");
  for (std::size_t i = 1; i < t_.size(); ++i)
    if (!(t_[i] > t_[i - 1])) {
      violations.push_back(where + ": BadDensity: grid not strictly increasing");
      break;
    }
  for (double v : f_)
    if (!(v >= 0.0) || !std::isfinite(v)) {
      violations.push_back(where + ": BadDensity: density must be finite and >= 0");
      break;
    }
  if (std::abs(cum_.back() - 1.0) > 1e-6)
    violations.push_back(where + ": BadDensity: tabulated density integrates to " +
                         std::to_string(cum_.back()));
}

}  // namespace trajembed
