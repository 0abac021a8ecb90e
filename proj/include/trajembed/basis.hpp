#ifndef TRAJEMBED_BASIS_HPP
#define TRAJEMBED_BASIS_HPP

#include <string>
#include <vector>

#include "trajembed/gram.hpp"
#include "trajembed/process.hpp"
#include "trajembed/types.hpp"

namespace trajembed {

// Concrete memory-state vectors in a fixed orthonormal frame of dimension
// dim(). Three construction pathways share this interface:
//  - kAnalytic: closed form for specs whose branch dwells factor through a
//    common bank of exponential generators; evaluable at any age t.
//  - kNumericLattice: columns extracted from a Gram lattice; evaluable only
//    on lattice nodes.
//  - kDiscrete: one vector per hidden state, age is always zero.
class MemoryBasis {
 public:
  enum class Pathway { kAnalytic, kNumericLattice, kDiscrete };

  struct Node {
    int mode = 0;  // index into modes()
    double t = 0.0;
  };

  Pathway pathway() const { return pathway_; }
  int dim() const { return dim_; }
  const std::vector<std::string>& modes() const { return modes_; }

  // Memory state for (mode, age t); unit norm. Lattice/discrete pathways
  // require t to sit on a stored node.
  Vector state(int mode, double t) const;

  // Overlap <state(a, ta) | state(b, tb)>.
  Complex overlap(int mode_a, double ta, int mode_b, double tb) const;

  // Nodes with stored vectors (all nodes for lattice/discrete pathways; a
  // zero-age node per mode for the analytic pathway).
  const std::vector<Node>& nodes() const { return nodes_; }
  const Matrix& node_vectors() const { return vectors_; }  // dim x n_nodes

  // Analytic pathway only: decay rate of each generator direction.
  const std::vector<double>& generator_rates() const;
  // Analytic pathway only: weight of generator r in mode g at age zero.
  const RealMatrix& generator_weights() const;

  double lattice_dt() const { return lattice_dt_; }

  static MemoryBasis analytic(std::vector<std::string> modes,
                              std::vector<double> rates, RealMatrix weights);
  static MemoryBasis from_nodes(Pathway pathway, std::vector<std::string> modes,
                                std::vector<Node> nodes, Matrix vectors,
                                double lattice_dt);

 private:
  Pathway pathway_ = Pathway::kAnalytic;
  int dim_ = 0;
  std::vector<std::string> modes_;
  std::vector<Node> nodes_;
  Matrix vectors_;  // dim x n_nodes, unit columns
  double lattice_dt_ = 0.0;

  // analytic pathway
  std::vector<double> rates_;
  RealMatrix weights_;  // n_modes x dim, rows sum to 1

  int find_node(int mode, double t) const;
};

// Closed-form basis for specs where every branch dwell is exponential and the
// branches factor through mode-independent per-rate emission splits. Throws
// UnsupportedDwellFamilyError when the factorization does not exist.
MemoryBasis analytic_gram(const ValidatedSpec& v);

// Rank-revealing extraction of node vectors from a Gram lattice. Columns are
// gauged by orthonormalizing in node order with real positive pivots, which
// makes the output deterministic. Throws NotPSDError below -1e-10 relative.
MemoryBasis extract_states(const GramLattice& lat, double rank_tol = 1e-10);

// Same extraction for a discrete state Gram.
MemoryBasis extract_discrete_states(const ValidatedDiscreteSpec& v,
                                    const Matrix& gram,
                                    double rank_tol = 1e-10);

}  // namespace trajembed

#endif
