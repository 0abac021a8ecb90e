#ifndef TRAJEMBED_PROCESS_HPP
#define TRAJEMBED_PROCESS_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trajembed/dwell.hpp"
#include "trajembed/types.hpp"

namespace trajembed {

// One allowed transition out of a mode: emit `symbol`, move to mode `to`,
// with joint law prob * dwell(t).
struct Branch {
  std::string symbol;
  double prob = 0.0;
  std::string to;
  DwellDistribution dwell = DwellDistribution::exponential(1.0);
};

// Continuous-time hidden semi-Markov process. Branch order follows the spec
// file; that order is part of the deterministic gauge downstream.
struct ProcessSpec {
  std::vector<std::string> symbols;
  std::vector<std::string> modes;
  std::vector<std::vector<Branch>> branches;  // indexed like `modes`
};

struct DiscreteBranch {
  std::string symbol;
  double prob = 0.0;
  std::string to;
  double phase = 0.0;  // unitary phase attached to this emission
};

// Discrete-time hidden Markov process with deterministic successor per
// (state, symbol) and optional emission phases.
struct DiscreteProcessSpec {
  std::vector<std::string> symbols;
  std::vector<std::string> states;
  std::vector<std::vector<DiscreteBranch>> branches;  // indexed like `states`
};

// Structural checks; returns human-readable violations, empty when clean.
std::vector<std::string> check_spec(const ProcessSpec& spec);
std::vector<std::string> check_spec(const DiscreteProcessSpec& spec);

// Wrapper proving validation has run; all downstream operations take this.
class ValidatedSpec {
 public:
  explicit ValidatedSpec(ProcessSpec spec);  // throws ValidationError

  const ProcessSpec& spec() const { return spec_; }
  int n_modes() const { return static_cast<int>(spec_.modes.size()); }
  int n_symbols() const { return static_cast<int>(spec_.symbols.size()); }
  int mode_index(const std::string& name) const;
  int symbol_index(const std::string& name) const;
  const std::vector<Branch>& branches(int mode) const { return spec_.branches[mode]; }
  const Branch* branch(int mode, const std::string& symbol) const;
  int successor(int mode, const std::string& symbol) const;  // -1 when absent

 private:
  ProcessSpec spec_;
  std::map<std::string, int> mode_idx_;
  std::map<std::string, int> symbol_idx_;
};

class ValidatedDiscreteSpec {
 public:
  explicit ValidatedDiscreteSpec(DiscreteProcessSpec spec);

  const DiscreteProcessSpec& spec() const { return spec_; }
  int n_states() const { return static_cast<int>(spec_.states.size()); }
  int n_symbols() const { return static_cast<int>(spec_.symbols.size()); }
  int state_index(const std::string& name) const;
  int symbol_index(const std::string& name) const;
  const std::vector<DiscreteBranch>& branches(int state) const {
    return spec_.branches[state];
  }
  const DiscreteBranch* branch(int state, const std::string& symbol) const;

 private:
  DiscreteProcessSpec spec_;
  std::map<std::string, int> state_idx_;
  std::map<std::string, int> symbol_idx_;
};

// Modal survival: probability that no event has occurred by dwell time t
// after entering mode g.
double survival(const ValidatedSpec& v, int mode, double t);

// Joint density prob * dwell_density for the branch (mode, symbol).
double dwell_density(const ValidatedSpec& v, int mode, const std::string& symbol,
                     double t);

// Smallest horizon T with survival(g, T) <= eps for every mode g.
double survival_horizon(const ValidatedSpec& v, double eps);

// Stationary distribution of the embedded mode chain (rows: from-mode).
RealVector stationary_mode_dist(const ValidatedSpec& v);
RealVector stationary_state_dist(const ValidatedDiscreteSpec& v);

enum class MeasureFlavor { kClassical, kQuantum };

// Memory cost pair (D, C) in bits; divergent quantities leave the numeric
// fields empty.
struct MemoryMeasures {
  MeasureFlavor flavor = MeasureFlavor::kClassical;
  bool divergent = false;
  std::optional<double> dimension_bits;  // D
  std::optional<double> entropy_bits;    // C
  std::map<std::string, double> diagnostics;
};

// Continuous-time classical memory over (mode, age) diverges; the result
// carries the stationary weights and the mean event interval as diagnostics.
MemoryMeasures classical_measures(const ValidatedSpec& v);
MemoryMeasures classical_measures(const ValidatedDiscreteSpec& v);

// Mean time between events in the stationary ensemble (1/mu).
double mean_event_interval(const ValidatedSpec& v);

}  // namespace trajembed

#endif
