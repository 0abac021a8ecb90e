#ifndef TRAJEMBED_KRAUS_HPP
#define TRAJEMBED_KRAUS_HPP

#include <string>
#include <vector>

#include "trajembed/basis.hpp"
#include "trajembed/process.hpp"
#include "trajembed/types.hpp"

namespace trajembed {

// One discretization rung: no-event operator k0 plus one emission operator
// per symbol, acting on the memory space. k0^dag k0 + sum k^dag k = identity
// within 1e-8.
struct KrausSet {
  double dt = 0.0;
  std::vector<std::string> symbols;
  Matrix k0;
  std::vector<Matrix> k;

  Matrix completeness() const;
  double completeness_defect() const;
};

struct KrausOptions {
  double resid_tol = 1e-6;         // action consistency on sampled nodes
  double completeness_tol = 1e-8;  // defect of the resolved set
};

// Resolves the operators from their required action on a spanning family of
// memory states: the no-event branch ages every state by dt, the emission
// branches restart the successor state with the branch weight over [t, t+dt).
// Throws InsufficientSpanError when the sampled states do not span the basis
// and InconsistentActionError when no operator reproduces the action.
KrausSet build_kraus(const ValidatedSpec& v, const MemoryBasis& basis,
                     double dt, const KrausOptions& opts = {});

// Discrete model: unitary-piece operators per symbol with
// sum_x K_x^dag K_x = identity; no no-event branch.
struct DiscreteModel {
  Matrix gram;
  MemoryBasis basis;
  std::vector<std::string> symbols;
  std::vector<Matrix> kraus;
};

DiscreteModel discrete_model(const ValidatedDiscreteSpec& v,
                             double rank_tol = 1e-10,
                             const KrausOptions& opts = {});

// Continuous-time dilution of a discrete model: events fire at rate `gamma`,
// between events nothing happens.
KrausSet lift_discrete_kraus(const DiscreteModel& m, double gamma, double dt);

}  // namespace trajembed

#endif
