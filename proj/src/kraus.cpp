#include "trajembed/kraus.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>

#include "trajembed/errors.hpp"

namespace trajembed {

namespace {

// Ages at which each mode's memory state is sampled on the analytic pathway:
// nine points from zero to the age where ninety percent of the dwell mass has
// passed, so the samples probe every generator direction that carries weight.
std::vector<double> analytic_sample_ages(const ValidatedSpec& v, int mode) {
  double lo = 0.0;
  double hi = 1.0;
  while (survival(v, mode, hi) > 0.1) {
    hi *= 2.0;
    if (hi > 1e12) {
      throw HorizonTooShortError("mode survival does not reach 0.1");
    }
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (survival(v, mode, mid) > 0.1 ? lo : hi) = mid;
  }
  std::vector<double> ages;
  for (int j = 0; j <= 8; ++j) ages.push_back(hi * j / 8.0);
  return ages;
}

struct SampledNodes {
  std::vector<int> modes;
  std::vector<double> ages;
};

SampledNodes choose_nodes(const ValidatedSpec& v, const MemoryBasis& basis,
                          double dt) {
  SampledNodes s;
  if (basis.pathway() == MemoryBasis::Pathway::kAnalytic) {
    for (int g = 0; g < v.n_modes(); ++g) {
      for (double t : analytic_sample_ages(v, g)) {
        s.modes.push_back(g);
        s.ages.push_back(t);
      }
    }
    return s;
  }
  if (basis.pathway() == MemoryBasis::Pathway::kDiscrete) {
    throw ValidationError(
        "discrete bases have no dwell structure; lift a discrete model "
        "instead");
  }
  // Lattice pathway: every node whose aged partner t + dt is still stored.
  const double lat_dt = basis.lattice_dt();
  const double ratio = dt / lat_dt;
  const long long m = std::llround(ratio);
  if (m < 1 || std::abs(ratio - static_cast<double>(m)) > 1e-9) {
    throw ValidationError(
        "kraus step must be an integer multiple of the lattice step");
  }
  const auto& nodes = basis.nodes();
  double t_top = 0.0;
  for (const auto& nd : nodes) t_top = std::max(t_top, nd.t);
  for (const auto& nd : nodes) {
    if (nd.t + dt <= t_top + 1e-9 * lat_dt) {
      s.modes.push_back(nd.mode);
      s.ages.push_back(nd.t);
    }
  }
  return s;
}

// Least-squares operator with action op * m_cols = targets on the sampled
// states; the sampled family must span the space for the answer to be unique.
Matrix resolve_operator(const Matrix& m_cols, const Matrix& targets,
                        double resid_tol, const std::string& what) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(m_cols.transpose());
  Matrix op = cod.solve(targets.transpose()).transpose();
  const Matrix gap = op * m_cols - targets;
  for (Eigen::Index i = 0; i < gap.cols(); ++i) {
    if (gap.col(i).norm() > resid_tol) {
      throw InconsistentActionError(
          "required action of " + what + " on sampled state " +
          std::to_string(i) + " is inconsistent (residual " +
          std::to_string(gap.col(i).norm()) + ")");
    }
  }
  return op;
}

void require_span(const Matrix& m_cols, int dim, const std::string& what) {
  Eigen::ColPivHouseholderQR<Matrix> qr(m_cols);
  if (qr.rank() < dim) {
    throw InsufficientSpanError(what + ": sampled states span rank " +
                                std::to_string(qr.rank()) + " of " +
                                std::to_string(dim));
  }
}

}  // namespace

Matrix KrausSet::completeness() const {
  Matrix c = k0.adjoint() * k0;
  for (const Matrix& kx : k) c += kx.adjoint() * kx;
  return c;
}

double KrausSet::completeness_defect() const {
  const Matrix c = completeness();
  return max_abs(Matrix(c - Matrix::Identity(c.rows(), c.cols())));
}

KrausSet build_kraus(const ValidatedSpec& v, const MemoryBasis& basis,
                     double dt, const KrausOptions& opts) {
  if (dt <= 0.0) throw ValidationError("kraus step must be positive");
  const int dim = basis.dim();
  const SampledNodes nodes = choose_nodes(v, basis, dt);
  const int m = static_cast<int>(nodes.modes.size());

  Matrix cols(dim, m);
  for (int i = 0; i < m; ++i) {
    cols.col(i) = basis.state(nodes.modes[i], nodes.ages[i]);
  }
  require_span(cols, dim, "kraus construction");

  KrausSet ks;
  ks.dt = dt;
  ks.symbols = v.spec().symbols;

  // No-event branch: age every sampled state by dt with its survival weight.
  Matrix targets(dim, m);
  for (int i = 0; i < m; ++i) {
    const int g = nodes.modes[i];
    const double t = nodes.ages[i];
    const double phi_t = survival(v, g, t);
    const double phi_next = survival(v, g, t + dt);
    targets.col(i) =
        std::sqrt(phi_next / phi_t) * basis.state(g, t + dt);
  }
  ks.k0 = resolve_operator(cols, targets, opts.resid_tol, "the no-event branch");

  // Emission branches: restart the successor with the branch mass over
  // [t, t + dt).
  for (const std::string& sym : ks.symbols) {
    targets.setZero();
    for (int i = 0; i < m; ++i) {
      const int g = nodes.modes[i];
      const Branch* b = v.branch(g, sym);
      if (b == nullptr || b->prob <= 0.0) continue;
      const double t = nodes.ages[i];
      const double phi_t = survival(v, g, t);
      const double mass = b->prob * b->dwell.interval_mass(t, t + dt);
      targets.col(i) =
          std::sqrt(mass / phi_t) * basis.state(v.mode_index(b->to), 0.0);
    }
    ks.k.push_back(resolve_operator(cols, targets, opts.resid_tol,
                                    "the '" + sym + "' branch"));
  }

  const double defect = ks.completeness_defect();
  if (defect > opts.completeness_tol) {
    throw InconsistentActionError("kraus completeness defect " +
                                  std::to_string(defect) + " exceeds " +
                                  std::to_string(opts.completeness_tol));
  }
  return ks;
}

DiscreteModel discrete_model(const ValidatedDiscreteSpec& v, double rank_tol,
                             const KrausOptions& opts) {
  DiscreteModel model;
  model.gram = discrete_gram(v);
  model.basis = extract_discrete_states(v, model.gram, rank_tol);
  model.symbols = v.spec().symbols;

  const int dim = model.basis.dim();
  const int n = v.n_states();
  Matrix cols = model.basis.node_vectors();
  require_span(cols, dim, "discrete kraus construction");

  for (const std::string& sym : model.symbols) {
    Matrix targets = Matrix::Zero(dim, n);
    for (int s = 0; s < n; ++s) {
      const DiscreteBranch* b = v.branch(s, sym);
      if (b == nullptr || b->prob <= 0.0) continue;
      targets.col(s) = std::sqrt(b->prob) * std::exp(kImag * b->phase) *
                       model.basis.state(v.state_index(b->to), 0.0);
    }
    model.kraus.push_back(resolve_operator(cols, targets, opts.resid_tol,
                                           "the '" + sym + "' branch"));
  }

  Matrix c = Matrix::Zero(dim, dim);
  for (const Matrix& kx : model.kraus) c += kx.adjoint() * kx;
  const double defect = max_abs(Matrix(c - Matrix::Identity(dim, dim)));
  if (defect > opts.completeness_tol) {
    throw InconsistentActionError("discrete kraus completeness defect " +
                                  std::to_string(defect) + " exceeds " +
                                  std::to_string(opts.completeness_tol));
  }
  return model;
}

KrausSet lift_discrete_kraus(const DiscreteModel& m, double gamma, double dt) {
  if (gamma <= 0.0) throw NonPositiveRateError("event rate must be positive");
  if (dt <= 0.0) throw ValidationError("kraus step must be positive");
  const int dim = m.basis.dim();
  const double p_event = 1.0 - std::exp(-gamma * dt);
  KrausSet ks;
  ks.dt = dt;
  ks.symbols = m.symbols;
  ks.k0 = std::sqrt(1.0 - p_event) * Matrix::Identity(dim, dim);
  for (const Matrix& kx : m.kraus) {
    ks.k.push_back(std::sqrt(p_event) * kx);
  }
  return ks;
}

}  // namespace trajembed
