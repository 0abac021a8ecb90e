#include "trajembed/embedding.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <unsupported/Eigen/MatrixFunctions>

#include "trajembed/errors.hpp"
#include "trajembed/gram.hpp"
#include "trajembed/json_io.hpp"

namespace trajembed {

namespace {

constexpr double kHermTol = 1e-6;

bool all_finite(const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag())) {
        return false;
      }
    }
  }
  return true;
}

// Growth of successive rung differences marks a family with no small-step
// limit; a first-order family halves them instead.
void probe_convergence(const std::vector<Matrix>& vals,
                       const std::string& what) {
  double scale = 0.0;
  for (const Matrix& v : vals) scale = std::max(scale, max_abs(v));
  double prev = -1.0;
  for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
    const double d = max_abs_diff(vals[i + 1], vals[i]);
    if (prev >= 0.0 && d > 1.05 * prev && d > 1e-9 * scale) {
      throw NonConvergentLimitError(
          what + " rung differences grow (" + std::to_string(prev) + " -> " +
          std::to_string(d) + "); the small-step limit does not exist");
    }
    prev = d;
  }
}

}  // namespace

Matrix principal_log(const Matrix& k0) {
  Eigen::ComplexEigenSolver<Matrix> eig(k0);
  if (eig.info() != Eigen::Success) {
    throw LogBranchFailureError("no-event operator eigendecomposition failed");
  }
  const Vector vals = eig.eigenvalues();
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    const Complex lam = vals(i);
    if (std::abs(lam) < 1e-14) {
      throw LogBranchFailureError(
          "no-event operator is singular; the logarithm diverges");
    }
    if (lam.real() < 0.0 && std::abs(lam.imag()) <= 1e-12 * std::abs(lam)) {
      throw LogBranchFailureError(
          "no-event operator has a negative real eigenvalue on the principal "
          "branch cut");
    }
  }
  const Matrix v = eig.eigenvectors();
  Eigen::JacobiSVD<Matrix> svd(v);
  const double cond = svd.singularValues()(0) /
                      svd.singularValues()(svd.singularValues().size() - 1);
  Matrix result;
  if (std::isfinite(cond) && cond < 1e8) {
    Vector logs(vals.size());
    for (Eigen::Index i = 0; i < vals.size(); ++i) logs(i) = std::log(vals(i));
    result = v * logs.asDiagonal() * v.inverse();
  } else {
    // Defective or near-defective operator: Schur-based logarithm.
    result = k0.log();
  }
  if (!all_finite(result)) {
    throw LogBranchFailureError("matrix logarithm produced non-finite entries");
  }
  return result;
}

Matrix extrapolate_to_zero(const std::vector<double>& dts,
                           const std::vector<Matrix>& vals, double* residual) {
  const std::size_t n = dts.size();
  if (n == 0 || vals.size() != n) {
    throw ValidationError("extrapolation needs matching nonempty ladders");
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (!(dts[i] > dts[i + 1]) || dts[i + 1] <= 0.0) {
      throw ValidationError("rung steps must be positive and descending");
    }
  }
  if (n == 1) {
    if (residual != nullptr) *residual = 0.0;
    return vals[0];
  }
  std::vector<Matrix> p = vals;
  Matrix prev_best;
  for (std::size_t k = 1; k < n; ++k) {
    if (k == n - 1) prev_best = p[1];
    for (std::size_t i = 0; i + k < n; ++i) {
      p[i] = (dts[i + k] * p[i] - dts[i] * p[i + 1]) / (dts[i + k] - dts[i]);
    }
  }
  if (residual != nullptr) *residual = max_abs_diff(p[0], prev_best);
  return p[0];
}

std::vector<double> convergence_ratios(const std::vector<double>& dts,
                                       const std::vector<Matrix>& vals) {
  const std::size_t n = dts.size();
  if (vals.size() != n || n < 3) return {};
  // First-level extrapolants from adjacent rung pairs.
  std::vector<Matrix> e;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    e.push_back((dts[i + 1] * vals[i] - dts[i] * vals[i + 1]) /
                (dts[i + 1] - dts[i]));
  }
  std::vector<double> diffs;
  for (std::size_t i = 0; i + 1 < e.size(); ++i) {
    diffs.push_back(max_abs_diff(e[i + 1], e[i]));
  }
  std::vector<double> ratios;
  for (std::size_t i = 0; i + 1 < diffs.size(); ++i) {
    ratios.push_back(diffs[i + 1] > 0.0 ? diffs[i] / diffs[i + 1]
                                        : std::numeric_limits<double>::infinity());
  }
  return ratios;
}

EmbeddingReport extract_generators(const std::vector<KrausSet>& ladder) {
  if (ladder.empty()) throw ValidationError("generator ladder is empty");
  EmbeddingReport rep;
  rep.symbols = ladder.front().symbols;
  const std::size_t n_sym = rep.symbols.size();

  std::vector<double> dts;
  std::vector<Matrix> h_logs, h_lins;
  std::vector<std::vector<Matrix>> js(n_sym);
  for (const KrausSet& ks : ladder) {
    if (ks.symbols != rep.symbols) {
      throw ValidationError("ladder rungs disagree on the symbol set");
    }
    RungEstimates r;
    r.dt = ks.dt;
    r.h_log = kImag * principal_log(ks.k0) / ks.dt;
    r.h_linear =
        kImag *
        Matrix(ks.k0 - Matrix::Identity(ks.k0.rows(), ks.k0.cols())) / ks.dt;
    const double root = std::sqrt(ks.dt);
    for (std::size_t x = 0; x < n_sym; ++x) {
      r.j.push_back(ks.k[x] / root);
      js[x].push_back(r.j.back());
    }
    dts.push_back(ks.dt);
    h_logs.push_back(r.h_log);
    h_lins.push_back(r.h_linear);
    rep.rungs.push_back(std::move(r));
  }

  probe_convergence(h_logs, "effective-hamiltonian (log route)");
  probe_convergence(h_lins, "effective-hamiltonian (difference route)");
  rep.h_eff = extrapolate_to_zero(dts, h_logs, &rep.h_extrap_residual);
  rep.h_eff_linear =
      extrapolate_to_zero(dts, h_lins, &rep.h_linear_extrap_residual);
  for (std::size_t x = 0; x < n_sym; ++x) {
    probe_convergence(js[x], "jump operator '" + rep.symbols[x] + "'");
    double resid = 0.0;
    rep.jumps.push_back(extrapolate_to_zero(dts, js[x], &resid));
    rep.j_extrap_residuals.push_back(resid);
  }

  auto [h, herm] = natural_hamiltonian(rep.h_eff, rep.jumps);
  rep.h = std::move(h);
  rep.h_herm_residual = herm;
  return rep;
}

std::pair<Matrix, double> natural_hamiltonian(
    const Matrix& h_eff, const std::vector<Matrix>& jumps) {
  Matrix s = Matrix::Zero(h_eff.rows(), h_eff.cols());
  for (const Matrix& j : jumps) s += j.adjoint() * j;
  const Matrix h = h_eff + 0.5 * kImag * s;
  const double resid = max_abs(Matrix(h - h.adjoint()));
  if (resid > kHermTol) {
    throw NotHermitianError(
        "recombined Hamiltonian deviates from Hermitian by " +
        std::to_string(resid));
  }
  return {Matrix(0.5 * (h + h.adjoint())), resid};
}

EmbedResult embed_process(const ValidatedSpec& v, const EmbedOptions& opts) {
  if (opts.dt_ladder.empty()) {
    throw ValidationError("the discretization ladder is empty");
  }
  for (std::size_t i = 0; i + 1 < opts.dt_ladder.size(); ++i) {
    if (!(opts.dt_ladder[i] > opts.dt_ladder[i + 1])) {
      throw ValidationError("the discretization ladder must descend");
    }
  }
  if (opts.dt_ladder.back() <= 0.0) {
    throw ValidationError("discretization steps must be positive");
  }

  EmbedResult res;
  bool have_basis = false;
  if (!opts.force_numeric) {
    try {
      res.basis = analytic_gram(v);
      have_basis = true;
    } catch (const UnsupportedDwellFamilyError&) {
      have_basis = false;
    }
  }
  if (!have_basis) {
    const double dt_lat = opts.dt_ladder.back();
    double horizon = opts.lattice_t_max > 0.0 ? opts.lattice_t_max
                                              : survival_horizon(v, 1e-12);
    const int steps =
        static_cast<int>(std::ceil(horizon / dt_lat - 1e-9));
    const double t_max = steps * dt_lat;
    const long long n_nodes =
        static_cast<long long>(v.n_modes()) * (steps + 1);
    if (n_nodes > 6000) {
      throw ValidationError(
          "numeric overlap lattice would need " + std::to_string(n_nodes) +
          " nodes; use a coarser ladder or a shorter lattice horizon");
    }
    res.basis = extract_states(gram_fixed_point(v, dt_lat, t_max),
                               opts.rank_tol);
  }

  std::vector<KrausSet> ladder;
  for (double dt : opts.dt_ladder) {
    ladder.push_back(build_kraus(v, res.basis, dt, opts.kraus));
  }
  res.report = extract_generators(ladder);

  Lindblad lb;
  lb.h = res.report.h;
  lb.symbols = res.report.symbols;
  lb.jumps = res.report.jumps;
  const RealVector pi = stationary_mode_dist(v);
  for (int g = 0; g < v.n_modes(); ++g) {
    lb.start_labels.push_back(v.spec().modes[g]);
    lb.start_weights.push_back(pi(g));
    lb.start_states.push_back(res.basis.state(g, 0.0));
  }
  check_lindblad(lb);
  res.lindblad = std::move(lb);
  return res;
}

EmbedResult embed_discrete(const ValidatedDiscreteSpec& v, double gamma,
                           double rank_tol) {
  if (gamma <= 0.0) throw NonPositiveRateError("event rate must be positive");
  DiscreteModel model = discrete_model(v, rank_tol);
  EmbedResult res;

  Lindblad lb;
  lb.h = Matrix::Zero(model.basis.dim(), model.basis.dim());
  lb.symbols = model.symbols;
  for (const Matrix& kx : model.kraus) {
    lb.jumps.push_back(std::sqrt(gamma) * kx);
  }
  const RealVector pi = stationary_state_dist(v);
  for (int s = 0; s < v.n_states(); ++s) {
    lb.start_labels.push_back(v.spec().states[s]);
    lb.start_weights.push_back(pi(s));
    lb.start_states.push_back(model.basis.state(s, 0.0));
  }
  check_lindblad(lb);

  res.report.symbols = lb.symbols;
  res.report.h_eff = lb.h_eff();
  res.report.h_eff_linear = res.report.h_eff;
  res.report.jumps = lb.jumps;
  res.report.h = lb.h;
  res.report.j_extrap_residuals.assign(lb.jumps.size(), 0.0);
  res.basis = std::move(model.basis);
  res.lindblad = std::move(lb);
  return res;
}

VerifyReport verify_embedding(const Lindblad& lb, double dt) {
  check_lindblad(lb);
  if (dt <= 0.0) throw ValidationError("verification step must be positive");
  VerifyReport rep;
  const int d = lb.dim();
  const Matrix heff = lb.h_eff();
  const Matrix k0 = Matrix::Identity(d, d) - kImag * dt * heff;
  Matrix c = k0.adjoint() * k0;
  for (const Matrix& j : lb.jumps) c += dt * (j.adjoint() * j);
  rep.completeness_defect = max_abs(Matrix(c - Matrix::Identity(d, d)));
  rep.completeness_bound = dt * dt * (max_abs(Matrix(heff.adjoint() * heff)) + 1.0);

  // One fourth-order step of the master equation on the maximally mixed
  // state; the generator is trace free, so any drift is numerical.
  const auto rhs = [&](const Matrix& rho) {
    Matrix out = -kImag * (heff * rho - rho * heff.adjoint());
    for (const Matrix& j : lb.jumps) out += j * rho * j.adjoint();
    return out;
  };
  const Matrix rho0 = Matrix::Identity(d, d) / static_cast<double>(d);
  const Matrix k1 = rhs(rho0);
  const Matrix k2 = rhs(rho0 + 0.5 * dt * k1);
  const Matrix k3 = rhs(rho0 + 0.5 * dt * k2);
  const Matrix k4 = rhs(rho0 + dt * k3);
  const Matrix rho1 = rho0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  rep.trace_drift = std::abs(rho1.trace() - Complex(1.0));

  rep.pass = rep.completeness_defect <= rep.completeness_bound &&
             rep.trace_drift <= 1e-8;
  return rep;
}

nlohmann::json to_json(const EmbeddingReport& report) {
  nlohmann::json j;
  j["symbols"] = report.symbols;
  j["H_eff"] = matrix_to_json(report.h_eff);
  j["H_eff_linear"] = matrix_to_json(report.h_eff_linear);
  j["H"] = matrix_to_json(report.h);
  nlohmann::json jumps = nlohmann::json::object();
  for (std::size_t x = 0; x < report.symbols.size(); ++x) {
    jumps[report.symbols[x]] = matrix_to_json(report.jumps[x]);
  }
  j["jumps"] = jumps;
  j["h_herm_residual"] = report.h_herm_residual;
  j["h_extrap_residual"] = report.h_extrap_residual;
  j["h_linear_extrap_residual"] = report.h_linear_extrap_residual;
  j["j_extrap_residuals"] = report.j_extrap_residuals;
  nlohmann::json rungs = nlohmann::json::array();
  for (const RungEstimates& r : report.rungs) {
    nlohmann::json jr;
    jr["dt"] = r.dt;
    jr["h_log_gap"] = max_abs_diff(r.h_log, report.h_eff);
    jr["h_linear_gap"] = max_abs_diff(r.h_linear, report.h_eff);
    nlohmann::json gaps = nlohmann::json::object();
    for (std::size_t x = 0; x < report.symbols.size(); ++x) {
      gaps[report.symbols[x]] = max_abs_diff(r.j[x], report.jumps[x]);
    }
    jr["jump_gaps"] = gaps;
    rungs.push_back(jr);
  }
  j["rungs"] = rungs;
  return j;
}

void print_report(const EmbeddingReport& report, std::ostream& out) {
  out << "generator extraction over " << report.rungs.size() << " rungs\n";
  out << std::scientific << std::setprecision(3);
  for (const RungEstimates& r : report.rungs) {
    out << "  dt=" << r.dt
        << "  |H_log - H_eff|=" << max_abs_diff(r.h_log, report.h_eff)
        << "  |H_lin - H_eff|=" << max_abs_diff(r.h_linear, report.h_eff);
    for (std::size_t x = 0; x < report.symbols.size(); ++x) {
      out << "  |J_" << report.symbols[x]
          << " gap|=" << max_abs_diff(r.j[x], report.jumps[x]);
    }
    out << "\n";
  }
  out << "  extrapolation residuals: H(log)=" << report.h_extrap_residual
      << " H(linear)=" << report.h_linear_extrap_residual;
  for (std::size_t x = 0; x < report.symbols.size(); ++x) {
    out << " J_" << report.symbols[x] << "="
        << report.j_extrap_residuals[x];
  }
  out << "\n  hermiticity residual: " << report.h_herm_residual << "\n";
  out << std::defaultfloat;
}

}  // namespace trajembed
