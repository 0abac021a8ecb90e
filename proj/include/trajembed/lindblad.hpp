#ifndef TRAJEMBED_LINDBLAD_HPP
#define TRAJEMBED_LINDBLAD_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "trajembed/types.hpp"

namespace trajembed {

// Open-system model: Hermitian Hamiltonian plus one jump operator per symbol.
// The effective (non-Hermitian) generator is always derived from these, so it
// cannot drift out of sync with its parts.
struct Lindblad {
  Matrix h;                          // Hermitian
  std::vector<std::string> symbols;  // aligned with jumps
  std::vector<Matrix> jumps;

  // Optional start ensemble for trajectory sampling (labels usually name the
  // source modes, weights their stationary probabilities).
  std::vector<std::string> start_labels;
  std::vector<double> start_weights;
  std::vector<Vector> start_states;

  int dim() const { return static_cast<int>(h.rows()); }
  Matrix jump_sum() const;  // sum over x of J_x^dag J_x
  Matrix h_eff() const;     // h - (i/2) jump_sum()
};

// Structural checks: square matching dimensions, Hermitian h within 1e-8,
// normalized start ensemble when present. Throws on violation.
void check_lindblad(const Lindblad& lb);

nlohmann::json lindblad_to_json(const Lindblad& lb);
// Rejects files whose stored effective Hamiltonian disagrees with the one
// derived from h and the jumps by more than 1e-8.
Lindblad lindblad_from_json(const nlohmann::json& j);

}  // namespace trajembed

#endif
