#include "trajembed/measures.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "trajembed/errors.hpp"

namespace trajembed {

Matrix stationary_quantum_state(const ValidatedSpec& v,
                                const MemoryBasis& basis) {
  const RealVector pi = stationary_mode_dist(v);
  const double mu = 1.0 / mean_event_interval(v);
  const int dim = basis.dim();
  Matrix rho = Matrix::Zero(dim, dim);
  double raw_trace;

  if (basis.pathway() == MemoryBasis::Pathway::kAnalytic) {
    // Unnormalized aged state amplitudes are sqrt(w_gr) exp(-rate_r t / 2),
    // so the age integral of each outer-product entry is explicit.
    const auto& rates = basis.generator_rates();
    const RealMatrix& w = basis.generator_weights();
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < dim; ++c) {
        double acc = 0.0;
        for (int g = 0; g < v.n_modes(); ++g) {
          acc += pi(g) * std::sqrt(w(g, r) * w(g, c));
        }
        rho(r, c) = mu * acc * 2.0 / (rates[r] + rates[c]);
      }
    }
    raw_trace = std::real(rho.trace());
  } else if (basis.pathway() == MemoryBasis::Pathway::kNumericLattice) {
    // Trapezoid over the stored nodes; tails beyond the lattice horizon carry
    // survival weight below the lattice truncation level.
    const double dt = basis.lattice_dt();
    const auto& nodes = basis.nodes();
    double t_top = 0.0;
    for (const auto& nd : nodes) t_top = std::max(t_top, nd.t);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& nd = nodes[i];
      const double edge = (nd.t == 0.0 || nd.t >= t_top - 0.5 * dt) ? 0.5 : 1.0;
      const double weight =
          mu * pi(nd.mode) * survival(v, nd.mode, nd.t) * edge * dt;
      const Vector s = basis.node_vectors().col(static_cast<Eigen::Index>(i));
      rho += weight * (s * s.adjoint());
    }
    raw_trace = std::real(rho.trace());
    rho /= raw_trace;  // trapezoid defect is O(dt^2); renormalize
  } else {
    throw ValidationError(
        "stationary age mixture requires an analytic or lattice basis");
  }

  rho = 0.5 * (rho + rho.adjoint().eval());
  Matrix out = rho;
  if (basis.pathway() == MemoryBasis::Pathway::kAnalytic) {
    if (std::abs(raw_trace - 1.0) > 1e-9) {
      throw BadDensityError("stationary state trace " +
                            std::to_string(raw_trace) + " deviates from one");
    }
  }
  return out;
}

Matrix stationary_quantum_state(const ValidatedDiscreteSpec& v,
                                const MemoryBasis& basis) {
  if (basis.pathway() != MemoryBasis::Pathway::kDiscrete) {
    throw ValidationError("discrete stationary state needs a discrete basis");
  }
  const RealVector pi = stationary_state_dist(v);
  const int dim = basis.dim();
  Matrix rho = Matrix::Zero(dim, dim);
  for (int s = 0; s < v.n_states(); ++s) {
    const Vector vec = basis.state(s, 0.0);
    rho += pi(s) * (vec * vec.adjoint());
  }
  return 0.5 * (rho + rho.adjoint().eval());
}

double von_neumann_entropy_bits(const Matrix& rho, double cutoff) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(rho);
  double h = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    const double lam = eig.eigenvalues()(i);
    if (lam > cutoff) h -= lam * std::log2(lam);
  }
  return h;
}

int density_rank(const Matrix& rho, double rel_cutoff) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(rho);
  const double lam_max = eig.eigenvalues().maxCoeff();
  if (lam_max <= 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    if (eig.eigenvalues()(i) > rel_cutoff * lam_max) ++rank;
  }
  return rank;
}

namespace {

MemoryMeasures measures_of(const Matrix& rho) {
  MemoryMeasures m;
  m.flavor = MeasureFlavor::kQuantum;
  m.divergent = false;
  const int rank = density_rank(rho);
  m.dimension_bits = std::log2(static_cast<double>(rank));
  m.entropy_bits = von_neumann_entropy_bits(rho);
  m.diagnostics["rank"] = static_cast<double>(rank);
  return m;
}

}  // namespace

MemoryMeasures quantum_measures(const ValidatedSpec& v,
                                const MemoryBasis& basis) {
  MemoryMeasures m = measures_of(stationary_quantum_state(v, basis));
  m.diagnostics["mean_event_interval"] = mean_event_interval(v);
  return m;
}

MemoryMeasures quantum_measures(const ValidatedDiscreteSpec& v,
                                const MemoryBasis& basis) {
  return measures_of(stationary_quantum_state(v, basis));
}

}  // namespace trajembed
