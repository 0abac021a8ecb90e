#ifndef TRAJEMBED_MEASURES_HPP
#define TRAJEMBED_MEASURES_HPP

#include "trajembed/basis.hpp"
#include "trajembed/process.hpp"
#include "trajembed/types.hpp"

namespace trajembed {

// Stationary quantum memory state in the basis frame: the event-averaged
// mixture of aged memory states, weighted by the stationary mode distribution
// and normalized by the mean event interval. Closed form on the analytic
// pathway, trapezoid over the stored nodes on the lattice pathway.
Matrix stationary_quantum_state(const ValidatedSpec& v,
                                const MemoryBasis& basis);

// Stationary mixture of the discrete state vectors.
Matrix stationary_quantum_state(const ValidatedDiscreteSpec& v,
                                const MemoryBasis& basis);

// Von Neumann entropy in bits; eigenvalues below the cutoff are dropped.
double von_neumann_entropy_bits(const Matrix& rho, double cutoff = 1e-12);

// Numerical rank of a density matrix at a relative eigenvalue cutoff.
int density_rank(const Matrix& rho, double rel_cutoff = 1e-10);

// Quantum memory cost: dimension_bits = log2(rank of the stationary state),
// entropy_bits = its von Neumann entropy.
MemoryMeasures quantum_measures(const ValidatedSpec& v,
                                const MemoryBasis& basis);
MemoryMeasures quantum_measures(const ValidatedDiscreteSpec& v,
                                const MemoryBasis& basis);

}  // namespace trajembed

#endif
