#include "trajembed/gram.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "trajembed/errors.hpp"

namespace trajembed {

namespace {

constexpr double kTailFloor = 1e-12;
constexpr int kMaxSweeps = 10000;
constexpr std::size_t kMaxSeriesTerms = 100000000;

// Sum over n of sqrt of the two branch masses on [t + n*dt, t + (n+1)*dt),
// truncated once the joint survival weight drops below `floor` (Cauchy-
// Schwarz bounds the discarded tail by that weight).
double bhattacharyya_series(const DwellDistribution& da, double ta,
                            const DwellDistribution& db, double tb, double dt,
                            double floor) {
  double sum = 0.0;
  for (std::size_t n = 0; n < kMaxSeriesTerms; ++n) {
    const double t_lo = static_cast<double>(n) * dt;
    const double t_next = static_cast<double>(n + 1) * dt;
    const double ia = da.interval_mass(ta + t_lo, ta + t_next);
    const double ib = db.interval_mass(tb + t_lo, tb + t_next);
    sum += std::sqrt(ia * ib);
    const double joint_tail =
        std::sqrt(da.tail(ta + t_next) * db.tail(tb + t_next));
    if (joint_tail < floor) return sum;
  }
  throw NoConvergenceError("overlap series did not meet its tail cut within " +
                           std::to_string(kMaxSeriesTerms) + " terms");
}

struct PairTerm {
  double coeff = 0.0;  // sqrt(Ta * Tb) * Bhattacharyya mass
  int succ_a = 0;
  int succ_b = 0;
};

std::vector<std::vector<std::vector<PairTerm>>> build_pair_terms(
    const ValidatedSpec& v, double dt) {
  const int n = v.n_modes();
  std::vector<std::vector<std::vector<PairTerm>>> terms(
      n, std::vector<std::vector<PairTerm>>(n));
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      for (const Branch& ba : v.spec().branches[a]) {
        if (ba.prob <= 0.0) continue;
        const Branch* bb = v.branch(b, ba.symbol);
        if (bb == nullptr || bb->prob <= 0.0) continue;
        PairTerm t;
        t.coeff = std::sqrt(ba.prob * bb->prob) *
                  bhattacharyya_series(ba.dwell, 0.0, bb->dwell, 0.0, dt,
                                       kTailFloor);
        t.succ_a = v.mode_index(ba.to);
        t.succ_b = v.mode_index(bb->to);
        terms[a][b].push_back(t);
      }
    }
  }
  return terms;
}

}  // namespace

Matrix mode_zero_overlaps(const ValidatedSpec& v, double dt, double tol,
                          int* iterations) {
  if (dt <= 0.0) throw ValidationError("lattice step must be positive");
  const int n = v.n_modes();
  const auto terms = build_pair_terms(v, dt);
  Matrix g = Matrix::Ones(n, n);
  for (int sweep = 1; sweep <= kMaxSweeps; ++sweep) {
    Matrix next = Matrix::Identity(n, n);
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        Complex acc = 0.0;
        for (const PairTerm& t : terms[a][b]) {
          acc += t.coeff * g(t.succ_a, t.succ_b);
        }
        next(a, b) = acc;
        next(b, a) = std::conj(acc);
      }
    }
    const double delta = max_abs_diff(next, g);
    g = std::move(next);
    if (delta < tol) {
      if (iterations != nullptr) *iterations = sweep;
      return g;
    }
  }
  throw NoConvergenceError("zero-age overlap iteration exceeded " +
                           std::to_string(kMaxSweeps) + " sweeps");
}

Complex lattice_overlap(const ValidatedSpec& v, const Matrix& g0, int mode_a,
                        double ta, int mode_b, double tb, double dt) {
  const double phi_a = survival(v, mode_a, ta);
  const double phi_b = survival(v, mode_b, tb);
  if (phi_a <= 0.0 || phi_b <= 0.0) {
    throw ValidationError("memory state undefined where survival vanishes");
  }
  const double scale = std::sqrt(phi_a * phi_b);
  Complex acc = 0.0;
  for (const Branch& ba : v.spec().branches[mode_a]) {
    if (ba.prob <= 0.0) continue;
    const Branch* bb = v.branch(mode_b, ba.symbol);
    if (bb == nullptr || bb->prob <= 0.0) continue;
    const double mass = bhattacharyya_series(ba.dwell, ta, bb->dwell, tb, dt,
                                             kTailFloor * scale);
    acc += std::sqrt(ba.prob * bb->prob) * mass *
           g0(v.mode_index(ba.to), v.mode_index(bb->to));
  }
  return acc / scale;
}

GramLattice gram_fixed_point(const ValidatedSpec& v, double dt, double t_max,
                             double tol) {
  if (dt <= 0.0 || t_max <= 0.0) {
    throw ValidationError("lattice step and horizon must be positive");
  }
  const int n_modes = v.n_modes();
  const int steps = static_cast<int>(std::llround(t_max / dt));
  if (steps < 1) throw ValidationError("lattice horizon shorter than one step");

  for (int g = 0; g < n_modes; ++g) {
    if (survival(v, g, t_max) >= kTailFloor) {
      throw HorizonTooShortError(
          "survival of mode '" + v.spec().modes[g] + "' at t_max=" +
          std::to_string(t_max) + " is not below 1e-12");
    }
  }

  GramLattice lat;
  lat.dt = dt;
  lat.t_max = t_max;
  lat.steps = steps;
  lat.modes = v.spec().modes;

  Matrix g0 = mode_zero_overlaps(v, dt, tol, &lat.iterations);

  // Survival per mode per lattice step.
  RealMatrix phi(n_modes, steps + 1);
  for (int g = 0; g < n_modes; ++g) {
    for (int k = 0; k <= steps; ++k) {
      phi(g, k) = survival(v, g, k * dt);
    }
  }
  const double min_phi = phi.minCoeff();

  // Per-branch interval masses on the lattice, extended far enough past the
  // horizon that the discarded weight is negligible relative to the smallest
  // node survival.
  const double mass_cut = kTailFloor * min_phi;
  auto tabulate = [&](const DwellDistribution& d) {
    std::vector<double> mass;
    for (std::size_t j = 0; j < kMaxSeriesTerms; ++j) {
      const double t_next = static_cast<double>(j + 1) * dt;
      mass.push_back(d.interval_mass(static_cast<double>(j) * dt, t_next));
      if (d.tail(t_next) < mass_cut && j >= static_cast<std::size_t>(steps)) {
        return mass;
      }
    }
    throw NoConvergenceError("dwell mass table did not close within " +
                             std::to_string(kMaxSeriesTerms) + " steps");
  };

  std::vector<std::vector<std::vector<double>>> masses(n_modes);
  std::vector<std::vector<const Branch*>> branches(n_modes);
  for (int g = 0; g < n_modes; ++g) {
    for (const Branch& b : v.spec().branches[g]) {
      if (b.prob <= 0.0) continue;
      branches[g].push_back(&b);
      masses[g].push_back(tabulate(b.dwell));
    }
  }

  const int n_nodes = n_modes * (steps + 1);
  Matrix big = Matrix::Zero(n_nodes, n_nodes);

  // Unnormalized block accumulator; entry (k, l) collects
  // sum_x sqrt(Ta Tb) * S_x(k, l) * g0(succ_a, succ_b) where S_x obeys
  // S(k, l) = sqrt(ma[k] * mb[l]) + S(k + 1, l + 1), marched inward along
  // each diagonal from its out-of-lattice tail.
  Matrix block(steps + 1, steps + 1);
  for (int a = 0; a < n_modes; ++a) {
    for (int b = a; b < n_modes; ++b) {
      block.setZero();
      for (std::size_t ia = 0; ia < branches[a].size(); ++ia) {
        const Branch* ba = branches[a][ia];
        for (std::size_t ib = 0; ib < branches[b].size(); ++ib) {
          const Branch* bb = branches[b][ib];
          if (ba->symbol != bb->symbol) continue;
          const std::vector<double>& ma = masses[a][ia];
          const std::vector<double>& mb = masses[b][ib];
          const double amp = std::sqrt(ba->prob * bb->prob);
          const Complex gsucc =
              g0(v.mode_index(ba->to), v.mode_index(bb->to));
          for (int d = -steps; d <= steps; ++d) {
            const int k0 = d < 0 ? -d : 0;
            const int l0 = k0 + d;
            const int len = steps + 1 - std::max(k0, l0);
            // Number of lattice offsets along this diagonal where both mass
            // tables still have entries.
            const std::size_t avail = std::min(
                ma.size() > static_cast<std::size_t>(k0) ? ma.size() - k0 : 0,
                mb.size() > static_cast<std::size_t>(l0) ? mb.size() - l0 : 0);
            double s = 0.0;
            for (int j = static_cast<int>(avail) - 1; j >= len; --j) {
              s += std::sqrt(ma[k0 + j] * mb[l0 + j]);
            }
            for (int j = len - 1; j >= 0; --j) {
              if (static_cast<std::size_t>(j) < avail) {
                s += std::sqrt(ma[k0 + j] * mb[l0 + j]);
              }
              block(k0 + j, l0 + j) += amp * s * gsucc;
            }
          }
        }
      }
      for (int k = 0; k <= steps; ++k) {
        for (int l = 0; l <= steps; ++l) {
          const Complex val = block(k, l) / std::sqrt(phi(a, k) * phi(b, l));
          big(lat.node_index(a, k), lat.node_index(b, l)) = val;
          big(lat.node_index(b, l), lat.node_index(a, k)) = std::conj(val);
        }
      }
    }
  }

  // Same-node entries are exactly one; the deviation of the accumulated value
  // from one measures the truncation error.
  double diag_err = 0.0;
  for (int i = 0; i < n_nodes; ++i) {
    diag_err = std::max(diag_err, std::abs(big(i, i) - Complex(1.0)));
    big(i, i) = 1.0;
  }

  // Self-consistency residual over interior node pairs: shifting both ages by
  // one step and adding the fresh-state terms must reproduce the entry.
  double resid = diag_err;
  for (int a = 0; a < n_modes; ++a) {
    for (int b = 0; b < n_modes; ++b) {
      for (int k = 0; k < steps; ++k) {
        for (int l = 0; l < steps; ++l) {
          Complex rhs = std::sqrt(phi(a, k + 1) * phi(b, l + 1)) *
                        big(lat.node_index(a, k + 1), lat.node_index(b, l + 1));
          for (std::size_t ia = 0; ia < branches[a].size(); ++ia) {
            const Branch* ba = branches[a][ia];
            for (std::size_t ib = 0; ib < branches[b].size(); ++ib) {
              const Branch* bb = branches[b][ib];
              if (ba->symbol != bb->symbol) continue;
              const double va = static_cast<std::size_t>(k) < masses[a][ia].size()
                                    ? masses[a][ia][k]
                                    : 0.0;
              const double vb = static_cast<std::size_t>(l) < masses[b][ib].size()
                                    ? masses[b][ib][l]
                                    : 0.0;
              rhs += std::sqrt(ba->prob * bb->prob * va * vb) *
                     g0(v.mode_index(ba->to), v.mode_index(bb->to));
            }
          }
          const Complex lhs = std::sqrt(phi(a, k) * phi(b, l)) *
                              big(lat.node_index(a, k), lat.node_index(b, l));
          resid = std::max(resid, std::abs(lhs - rhs) /
                                      std::sqrt(phi(a, k) * phi(b, l)));
        }
      }
    }
  }
  lat.residual = resid;
  lat.overlaps = std::move(big);
  return lat;
}

Matrix discrete_gram(const ValidatedDiscreteSpec& v, double tol,
                     int* iterations) {
  const int n = v.n_states();
  Matrix g = Matrix::Ones(n, n);
  for (int sweep = 1; sweep <= kMaxSweeps; ++sweep) {
    Matrix next = Matrix::Identity(n, n);
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        Complex acc = 0.0;
        for (const DiscreteBranch& ba : v.spec().branches[a]) {
          if (ba.prob <= 0.0) continue;
          const DiscreteBranch* bb = v.branch(b, ba.symbol);
          if (bb == nullptr || bb->prob <= 0.0) continue;
          const Complex phase = std::exp(kImag * (bb->phase - ba.phase));
          acc += std::sqrt(ba.prob * bb->prob) * phase *
                 g(v.state_index(ba.to), v.state_index(bb->to));
        }
        next(a, b) = acc;
        next(b, a) = std::conj(acc);
      }
    }
    const double delta = max_abs_diff(next, g);
    g = std::move(next);
    if (delta < tol) {
      if (iterations != nullptr) *iterations = sweep;
      return g;
    }
  }
  throw NoConvergenceError("state overlap iteration exceeded " +
                           std::to_string(kMaxSweeps) + " sweeps");
}

}  // namespace trajembed
