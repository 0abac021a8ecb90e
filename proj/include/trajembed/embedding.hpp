#ifndef TRAJEMBED_EMBEDDING_HPP
#define TRAJEMBED_EMBEDDING_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "trajembed/kraus.hpp"
#include "trajembed/lindblad.hpp"
#include "trajembed/process.hpp"
#include "trajembed/types.hpp"

namespace trajembed {

// Per-rung small-step estimates of the generators.
struct RungEstimates {
  double dt = 0.0;
  Matrix h_log;             // i * log(k0) / dt, principal branch
  Matrix h_linear;          // -i * (k0 - identity) / dt
  std::vector<Matrix> j;    // k_x / sqrt(dt)
};

struct EmbeddingReport {
  std::vector<std::string> symbols;
  std::vector<RungEstimates> rungs;   // descending dt
  Matrix h_eff;                       // extrapolated to dt = 0 (log route)
  Matrix h_eff_linear;                // extrapolated first-difference route
  std::vector<Matrix> jumps;          // extrapolated to dt = 0
  Matrix h;                           // Hermitian part, symmetrized
  double h_herm_residual = 0.0;       // pre-symmetrization deviation
  double h_extrap_residual = 0.0;     // last Neville correction, log route
  double h_linear_extrap_residual = 0.0;
  std::vector<double> j_extrap_residuals;
};

// Principal-branch matrix logarithm of a no-event operator. Throws
// LogBranchFailureError when an eigenvalue sits on the cut or at zero.
Matrix principal_log(const Matrix& k0);

// Polynomial extrapolation of matrix-valued rung estimates to dt = 0
// (Neville tableau). `residual` receives the final correction size.
// Throws NonConvergentLimitError when successive rung differences grow.
Matrix extrapolate_to_zero(const std::vector<double>& dts,
                           const std::vector<Matrix>& vals,
                           double* residual = nullptr);

// First-level extrapolant differences for order diagnostics: with rungs that
// halve dt and a first-order error term, successive entries shrink about 4x.
std::vector<double> convergence_ratios(const std::vector<double>& dts,
                                       const std::vector<Matrix>& vals);

// Generator extraction from a ladder of rungs with descending dt.
EmbeddingReport extract_generators(const std::vector<KrausSet>& ladder);

// Recombine the Hermitian Hamiltonian from the effective one and the jumps.
// Returns the symmetrized matrix and the pre-symmetrization residual; throws
// NotHermitianError above 1e-6.
std::pair<Matrix, double> natural_hamiltonian(const Matrix& h_eff,
                                              const std::vector<Matrix>& jumps);

struct EmbedOptions {
  std::vector<double> dt_ladder = {1e-2, 5e-3, 2.5e-3};
  double rank_tol = 1e-10;
  double lattice_t_max = 0.0;  // 0: survival horizon at 1e-12
  KrausOptions kraus;
  bool force_numeric = false;  // skip the closed-form pathway
};

struct EmbedResult {
  Lindblad lindblad;
  EmbeddingReport report;
  MemoryBasis basis;
};

// Full pipeline: memory basis (closed form when the dwell family allows,
// numeric lattice otherwise), Kraus ladder, generator extraction, start
// ensemble from the stationary mode distribution.
EmbedResult embed_process(const ValidatedSpec& v, const EmbedOptions& opts = {});

// Discrete pipeline: jumps sqrt(gamma) * K_x, zero Hamiltonian.
EmbedResult embed_discrete(const ValidatedDiscreteSpec& v, double gamma,
                           double rank_tol = 1e-10);

struct VerifyReport {
  double completeness_defect = 0.0;  // first-order Kraus set at dt
  double completeness_bound = 0.0;   // dt^2 scale it must stay under
  double trace_drift = 0.0;          // one master step on the maximally mixed state
  bool pass = false;
};

// Consistency of an extracted model at step dt.
VerifyReport verify_embedding(const Lindblad& lb, double dt);

nlohmann::json to_json(const EmbeddingReport& report);
void print_report(const EmbeddingReport& report, std::ostream& out);

}  // namespace trajembed

#endif
