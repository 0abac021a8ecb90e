#ifndef TRAJEMBED_GRAM_HPP
#define TRAJEMBED_GRAM_HPP

#include <string>
#include <vector>

#include "trajembed/process.hpp"
#include "trajembed/types.hpp"

namespace trajembed {

// Overlap matrix of the memory states on the time lattice
// {(mode g, k*dt) : 0 <= k <= steps}. Node index is mode-major.
struct GramLattice {
  double dt = 0.0;
  double t_max = 0.0;
  int steps = 0;
  std::vector<std::string> modes;
  Matrix overlaps;      // Hermitian, unit diagonal, PSD
  double residual = 0;  // self-consistency residual over interior node pairs
  int iterations = 0;   // fixed-point sweeps for the zero-node block

  int n_nodes() const { return static_cast<int>(modes.size()) * (steps + 1); }
  int node_index(int mode, int k) const { return mode * (steps + 1) + k; }
};

// Fixed point of the overlap self-consistency relation. The relation closes
// on the zero-age nodes once its survival term is unrolled geometrically, so
// the iteration runs on that block and the lattice is assembled from it.
// Requires survival(g, t_max) < 1e-12 for every mode.
GramLattice gram_fixed_point(const ValidatedSpec& v, double dt, double t_max,
                             double tol = 1e-12);

// Zero-age block alone: overlaps[g][g'] between fresh memory states.
Matrix mode_zero_overlaps(const ValidatedSpec& v, double dt, double tol = 1e-12,
                          int* iterations = nullptr);

// Single overlap <s_{g,t} | s_{g',t'}> on the dt lattice, evaluated from the
// unrolled relation without materializing the full matrix.
Complex lattice_overlap(const ValidatedSpec& v, const Matrix& g0, int mode_a,
                        double ta, int mode_b, double tb, double dt);

// Overlap fixed point of a discrete model over its states.
Matrix discrete_gram(const ValidatedDiscreteSpec& v, double tol = 1e-12,
                     int* iterations = nullptr);

}  // namespace trajembed

#endif
