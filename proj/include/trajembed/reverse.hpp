#ifndef TRAJEMBED_REVERSE_HPP
#define TRAJEMBED_REVERSE_HPP

#include <optional>
#include <string>
#include <vector>

#include "trajembed/embedding.hpp"
#include "trajembed/lindblad.hpp"
#include "trajembed/process.hpp"
#include "trajembed/types.hpp"

namespace trajembed {

// Rank-one factorization of every live jump channel: J_x = psi_x phi_x^dag
// with unit psi_x. An erasing model forgets the pre-jump state, so the
// post-jump state depends only on the emitted symbol.
struct ErasingStructure {
  std::vector<std::string> symbols;   // live channels only
  std::vector<Vector> post_states;    // unit psi_x
  std::vector<Vector> weight_vectors; // phi_x (carries the channel scale)
};

struct ErasingCheck {
  bool erasing = false;
  double worst_ratio = 0.0;  // largest second-to-first singular value ratio
  std::string offending;     // channel with the worst ratio
  std::optional<ErasingStructure> structure;  // set when erasing
};

ErasingCheck is_erasing(const Lindblad& lb, double tol = 1e-8);

struct ReverseOptions {
  double grid_max = 0.0;        // 0: automatic decay horizon
  int grid_points = 400;        // dwell tabulation grid
  double quad_rel_tol = 1e-8;
  double survival_eps = 1e-10;  // decay level defining the horizon
  int max_exp_order = 4;        // exponential-mixture refit cap
  double refit_resid_tol = 1e-8;
};

// Maps an erasing model back to a semi-Markov process over its symbols: mode
// x holds the post-jump state of symbol x, branch probabilities integrate the
// next-event densities, and dwell laws are refit as exponential mixtures when
// possible (tabulated otherwise). Throws NotErasingError on non-erasing
// input and GridTooShortError when the grid cuts surviving weight.
ProcessSpec extract_hsmm(const Lindblad& lb, const ReverseOptions& opts = {});

// Joint density of (next symbol = to, wait = t) given the post-jump state of
// symbol `from`.
double next_event_density(const Lindblad& lb, const ErasingStructure& es,
                          int from, int to, double t);

struct RoundtripReport {
  double max_prob_err = 0.0;
  double max_density_err = 0.0;
  bool pass = false;
};

// Embeds a spec and extracts it back; compares branch probabilities and dwell
// densities over the extraction grid.
RoundtripReport roundtrip_check(const ValidatedSpec& v,
                                const EmbedOptions& eopts = {},
                                const ReverseOptions& ropts = {},
                                double tol = 1e-6);

}  // namespace trajembed

#endif
