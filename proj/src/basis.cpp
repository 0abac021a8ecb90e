#include "trajembed/basis.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>

#include "trajembed/errors.hpp"

namespace trajembed {

namespace {

constexpr double kRateMergeTol = 1e-12;
constexpr double kPsdTol = 1e-10;

// Rank-revealing factor E (dim x n) with E^dag E = gram, gauged by
// orthonormalizing the columns in index order with real positive pivots.
Matrix gauge_extract(const Matrix& gram, double rank_tol) {
  const int n = static_cast<int>(gram.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  if (eig.info() != Eigen::Success) {
    throw NotPSDError("overlap matrix eigendecomposition failed");
  }
  const RealVector vals = eig.eigenvalues();
  const double lam_max = vals(n - 1);
  if (lam_max <= 0.0) {
    throw NotPSDError("overlap matrix has no positive spectrum");
  }
  if (vals(0) < -kPsdTol * lam_max) {
    throw NotPSDError("overlap matrix eigenvalue " + std::to_string(vals(0)) +
                      " below -1e-10 relative");
  }
  int dim = 0;
  for (int i = 0; i < n; ++i) {
    if (vals(i) > rank_tol * lam_max) ++dim;
  }
  if (dim == 0) throw NotPSDError("overlap matrix has numerical rank zero");

  // Raw factor from the top eigenpairs, descending.
  Matrix raw(dim, n);
  for (int j = 0; j < dim; ++j) {
    const int src = n - 1 - j;
    raw.row(j) = std::sqrt(vals(src)) * eig.eigenvectors().col(src).adjoint();
  }

  // Pivoted modified Gram-Schmidt in column order. The pivot residuals are
  // real positive by construction, which fixes the gauge.
  Matrix q(dim, dim);
  std::vector<int> pivots;
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  double threshold = 1e-7;
  while (static_cast<int>(pivots.size()) < dim && threshold > 1e-15) {
    for (int i = 0; i < n && static_cast<int>(pivots.size()) < dim; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      Vector r = raw.col(i);
      for (std::size_t j = 0; j < pivots.size(); ++j) {
        r -= q.col(static_cast<int>(j)) * q.col(static_cast<int>(j)).dot(r);
      }
      const double nr = r.norm();
      if (nr > threshold) {
        q.col(static_cast<int>(pivots.size())) = r / nr;
        used[static_cast<std::size_t>(i)] = 1;
        pivots.push_back(i);
      }
    }
    threshold *= 1e-2;
  }
  if (static_cast<int>(pivots.size()) < dim) {
    throw NotPSDError("could not orthonormalize a full pivot set");
  }

  Matrix e = q.adjoint() * raw;
  // Columns of a unit-diagonal Gram are unit vectors up to truncation noise;
  // pin them exactly.
  for (int i = 0; i < n; ++i) {
    const double ni = e.col(i).norm();
    if (ni > 0.0) e.col(i) /= ni;
  }
  return e;
}

}  // namespace

int MemoryBasis::find_node(int mode, double t) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].mode == mode &&
        std::abs(nodes_[i].t - t) <= 1e-9 * std::max(1.0, std::abs(t))) {
      return static_cast<int>(i);
    }
  }
  throw ValidationError("no stored memory state for mode index " +
                        std::to_string(mode) + " at age " + std::to_string(t));
}

Vector MemoryBasis::state(int mode, double t) const {
  if (mode < 0 || mode >= static_cast<int>(modes_.size())) {
    throw ValidationError("mode index out of range");
  }
  if (t < 0.0) throw NegativeTimeError("memory state age must be nonnegative");
  if (pathway_ == Pathway::kAnalytic) {
    Vector amps(dim_);
    for (int r = 0; r < dim_; ++r) {
      amps(r) = std::sqrt(weights_(mode, r) * std::exp(-rates_[r] * t));
    }
    const double nn = amps.norm();
    if (nn <= 0.0) {
      throw ValidationError("memory state vanishes at the requested age");
    }
    return amps / nn;
  }
  return vectors_.col(find_node(mode, t));
}

Complex MemoryBasis::overlap(int mode_a, double ta, int mode_b,
                             double tb) const {
  return state(mode_a, ta).dot(state(mode_b, tb));
}

const std::vector<double>& MemoryBasis::generator_rates() const {
  if (pathway_ != Pathway::kAnalytic) {
    throw ValidationError("generator rates exist only on the analytic pathway");
  }
  return rates_;
}

const RealMatrix& MemoryBasis::generator_weights() const {
  if (pathway_ != Pathway::kAnalytic) {
    throw ValidationError(
        "generator weights exist only on the analytic pathway");
  }
  return weights_;
}

MemoryBasis MemoryBasis::analytic(std::vector<std::string> modes,
                                  std::vector<double> rates,
                                  RealMatrix weights) {
  MemoryBasis b;
  b.pathway_ = Pathway::kAnalytic;
  b.dim_ = static_cast<int>(rates.size());
  b.modes_ = std::move(modes);
  b.rates_ = std::move(rates);
  b.weights_ = std::move(weights);
  const int n_modes = static_cast<int>(b.modes_.size());
  b.nodes_.reserve(static_cast<std::size_t>(n_modes));
  b.vectors_.resize(b.dim_, n_modes);
  for (int g = 0; g < n_modes; ++g) {
    b.nodes_.push_back(Node{g, 0.0});
    b.vectors_.col(g) = b.state(g, 0.0);
  }
  return b;
}

MemoryBasis MemoryBasis::from_nodes(Pathway pathway,
                                    std::vector<std::string> modes,
                                    std::vector<Node> nodes, Matrix vectors,
                                    double lattice_dt) {
  if (vectors.cols() != static_cast<Eigen::Index>(nodes.size())) {
    throw DimensionMismatchError("node list and vector columns disagree");
  }
  MemoryBasis b;
  b.pathway_ = pathway;
  b.dim_ = static_cast<int>(vectors.rows());
  b.modes_ = std::move(modes);
  b.nodes_ = std::move(nodes);
  b.vectors_ = std::move(vectors);
  b.lattice_dt_ = lattice_dt;
  return b;
}

MemoryBasis analytic_gram(const ValidatedSpec& v) {
  const int n_modes = v.n_modes();

  std::vector<double> rates;
  auto rate_slot = [&](double r) {
    for (std::size_t i = 0; i < rates.size(); ++i) {
      if (std::abs(rates[i] - r) <= kRateMergeTol * std::max(rates[i], r)) {
        return static_cast<int>(i);
      }
    }
    rates.push_back(r);
    return static_cast<int>(rates.size()) - 1;
  };

  // Branch dwells must be single-rate exponentials; a branch-level mixture of
  // distinct rates cannot be routed through one generator per rate.
  struct BranchInfo {
    int mode;
    const Branch* branch;
    int slot;
  };
  std::vector<BranchInfo> infos;
  for (int g = 0; g < n_modes; ++g) {
    for (const Branch& b : v.branches(g)) {
      if (b.prob <= 0.0) continue;
      if (b.dwell.kind() == DwellDistribution::Kind::kTabulated) {
        throw UnsupportedDwellFamilyError(
            "branch ('" + v.spec().modes[g] + "', '" + b.symbol +
            "') has a tabulated dwell; no closed-form overlap family applies");
      }
      const auto& comps = b.dwell.components();
      const double r0 = comps.front().rate;
      for (const ExpComponent& c : comps) {
        if (std::abs(c.rate - r0) > kRateMergeTol * std::max(c.rate, r0)) {
          throw UnsupportedDwellFamilyError(
              "branch ('" + v.spec().modes[g] + "', '" + b.symbol +
              "') mixes distinct dwell rates; its memory state family is not "
              "finitely generated");
        }
      }
      infos.push_back(BranchInfo{g, &b, rate_slot(r0)});
    }
  }
  const int dim = static_cast<int>(rates.size());

  // Zero-age generator weights per mode.
  RealMatrix weights = RealMatrix::Zero(n_modes, dim);
  for (const BranchInfo& bi : infos) {
    weights(bi.mode, bi.slot) += bi.branch->prob;
  }

  // Factorization check: within one rate slot, the split of its weight across
  // symbols and the successor per symbol must not depend on the mode,
  // otherwise aged states of different modes leave the claimed span.
  for (int slot = 0; slot < dim; ++slot) {
    struct SymbolUse {
      double beta = -1.0;
      int succ = -1;
      std::vector<char> seen;
    };
    std::map<std::string, SymbolUse> uses;
    for (const BranchInfo& bi : infos) {
      if (bi.slot != slot) continue;
      SymbolUse& u = uses[bi.branch->symbol];
      if (u.seen.empty()) u.seen.assign(static_cast<std::size_t>(n_modes), 0);
      u.seen[static_cast<std::size_t>(bi.mode)] = 1;
      const double beta = bi.branch->prob / weights(bi.mode, slot);
      const int succ = v.mode_index(bi.branch->to);
      if (u.beta < 0.0) {
        u.beta = beta;
        u.succ = succ;
      } else {
        if (std::abs(u.beta - beta) > 1e-10) {
          throw UnsupportedDwellFamilyError(
              "emission split of symbol '" + bi.branch->symbol +
              "' at rate " + std::to_string(rates[slot]) +
              " depends on the mode; overlaps do not close in finite rank");
        }
        if (u.succ != succ) {
          throw UnsupportedDwellFamilyError(
              "successor of symbol '" + bi.branch->symbol + "' at rate " +
              std::to_string(rates[slot]) +
              " depends on the mode; overlaps do not close in finite rank");
        }
      }
    }
    for (auto& [sym, u] : uses) {
      for (int g = 0; g < n_modes; ++g) {
        if (weights(g, slot) > 0.0 && !u.seen[static_cast<std::size_t>(g)]) {
          throw UnsupportedDwellFamilyError(
              "mode '" + v.spec().modes[g] + "' carries rate " +
              std::to_string(rates[slot]) + " but does not emit symbol '" +
              sym + "' from it; overlaps do not close in finite rank");
        }
      }
    }
  }

  return MemoryBasis::analytic(v.spec().modes, std::move(rates),
                               std::move(weights));
}

MemoryBasis extract_states(const GramLattice& lat, double rank_tol) {
  Matrix e = gauge_extract(lat.overlaps, rank_tol);
  std::vector<MemoryBasis::Node> nodes;
  nodes.reserve(static_cast<std::size_t>(lat.n_nodes()));
  for (int g = 0; g < static_cast<int>(lat.modes.size()); ++g) {
    for (int k = 0; k <= lat.steps; ++k) {
      nodes.push_back(MemoryBasis::Node{g, k * lat.dt});
    }
  }
  return MemoryBasis::from_nodes(MemoryBasis::Pathway::kNumericLattice,
                                 lat.modes, std::move(nodes), std::move(e),
                                 lat.dt);
}

MemoryBasis extract_discrete_states(const ValidatedDiscreteSpec& v,
                                    const Matrix& gram, double rank_tol) {
  if (gram.rows() != v.n_states() || gram.cols() != v.n_states()) {
    throw DimensionMismatchError("state overlap matrix has the wrong shape");
  }
  Matrix e = gauge_extract(gram, rank_tol);
  std::vector<MemoryBasis::Node> nodes;
  for (int s = 0; s < v.n_states(); ++s) {
    nodes.push_back(MemoryBasis::Node{s, 0.0});
  }
  return MemoryBasis::from_nodes(MemoryBasis::Pathway::kDiscrete,
                                 v.spec().states, std::move(nodes),
                                 std::move(e), 0.0);
}

}  // namespace trajembed
