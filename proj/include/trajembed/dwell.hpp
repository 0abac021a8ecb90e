#ifndef TRAJEMBED_DWELL_HPP
#define TRAJEMBED_DWELL_HPP

#include <string>
#include <vector>

#include "trajembed/rng.hpp"

namespace trajembed {

struct ExpComponent {
  double weight = 0.0;
  double rate = 0.0;
};

// Dwell-time law of a single branch. Exponential and ExpMixture are closed
// form; Tabulated is a piecewise-linear density on a finite grid, treated as
// exactly zero beyond the last grid point. All integrals of a Tabulated law
// (cdf, tail, sampling) integrate the piecewise-linear density exactly, so
// the sampler and the test statistics see one and the same distribution.
class DwellDistribution {
 public:
  enum class Kind { kExponential, kExpMixture, kTabulated };

  static DwellDistribution exponential(double rate);
  static DwellDistribution exp_mixture(std::vector<ExpComponent> components);
  static DwellDistribution tabulated(std::vector<double> t_grid,
                                     std::vector<double> density);

  Kind kind() const { return kind_; }

  double density(double t) const;
  double cdf(double t) const;
  // tail and interval_mass avoid the cancellation in 1 - cdf, so they stay
  // accurate in relative terms far into the tail.
  double tail(double t) const;
  double interval_mass(double a, double b) const;
  double mean() const;
  double sample(RngStream& rng) const;

  // Smallest T with tail(T) <= eps; Tabulated laws end at the grid.
  double tail_horizon(double eps) const;

  // Structural validation; violations are appended as messages.
  void check(std::vector<std::string>& violations, const std::string& where) const;

  const std::vector<ExpComponent>& components() const { return components_; }
  const std::vector<double>& t_grid() const { return t_; }
  const std::vector<double>& density_values() const { return f_; }

 private:
  DwellDistribution() = default;

  Kind kind_ = Kind::kExponential;
  std::vector<ExpComponent> components_;  // Exponential holds one entry
  std::vector<double> t_;                 // Tabulated grid
  std::vector<double> f_;                 // Tabulated density values
  std::vector<double> cum_;               // exact CDF at grid points
};

}  // namespace trajembed

#endif
