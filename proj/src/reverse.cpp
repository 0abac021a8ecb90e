#include "trajembed/reverse.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <map>

#include "trajembed/errors.hpp"
#include "trajembed/quad.hpp"
#include "trajembed/trajectory.hpp"

namespace trajembed {

namespace {

constexpr double kDeadChannel = 1e-14;
constexpr double kBranchFloor = 1e-9;

// Rotates a unit vector so its largest-magnitude entry is real positive;
// returns the applied phase.
Vector phase_fix(const Vector& u, Complex* phase_out) {
  Eigen::Index arg = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (std::abs(u(i)) > best) {
      best = std::abs(u(i));
      arg = i;
    }
  }
  const Complex z = u(arg);
  const Complex phase = std::abs(z) > 0.0 ? Complex(std::conj(z) / std::abs(z))
                                          : Complex(1.0);
  if (phase_out != nullptr) *phase_out = phase;
  return phase * u;
}

struct ExpFit {
  bool ok = false;
  std::vector<ExpComponent> comps;
  double resid = 0.0;
};

// Refit of uniform density samples as a positive exponential mixture: linear
// prediction for the decay factors, then least squares for the amplitudes.
// Validated against every sample; any rejection falls back to tabulation.
ExpFit exp_mixture_refit(const std::vector<double>& y, double delta,
                         int max_order, double resid_tol) {
  ExpFit fit;
  const int n_all = static_cast<int>(y.size());
  double ymax = 0.0;
  for (double v : y) ymax = std::max(ymax, std::abs(v));
  if (!(ymax > 0.0)) return fit;

  // Fitting window: the leading samples above 1e-6 relative, where the
  // prediction problem is well conditioned.
  int win = n_all;
  for (int i = 0; i < n_all; ++i) {
    if (y[static_cast<std::size_t>(i)] < 1e-6 * ymax) {
      win = i;
      break;
    }
  }

  for (int m = 1; m <= max_order; ++m) {
    if (win < 2 * m + 2) break;
    const int rows = win - m;
    RealMatrix a(rows, m);
    RealVector rhs(rows);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < m; ++c) a(r, c) = y[static_cast<std::size_t>(r + c)];
      rhs(r) = y[static_cast<std::size_t>(r + m)];
    }
    const RealVector coef = a.colPivHouseholderQr().solve(rhs);

    RealMatrix comp = RealMatrix::Zero(m, m);
    for (int i = 1; i < m; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < m; ++i) comp(i, m - 1) = coef(i);
    Eigen::EigenSolver<RealMatrix> roots(comp);
    if (roots.info() != Eigen::Success) continue;

    std::vector<double> z;
    bool reject = false;
    for (int i = 0; i < m; ++i) {
      const Complex lam = roots.eigenvalues()(i);
      if (std::abs(lam.imag()) > 1e-8 * std::max(1.0, std::abs(lam))) {
        reject = true;
        break;
      }
      const double zr = lam.real();
      if (zr <= 1e-12 || zr >= 1.0 - 1e-12) {
        reject = true;
        break;
      }
      z.push_back(zr);
    }
    if (reject || z.size() != static_cast<std::size_t>(m)) continue;
    std::sort(z.begin(), z.end());
    for (std::size_t i = 0; i + 1 < z.size(); ++i) {
      if (z[i + 1] - z[i] <= 1e-8 * z[i + 1]) reject = true;
    }
    if (reject) continue;

    RealMatrix design(win, m);
    for (int i = 0; i < m; ++i) {
      double p = 1.0;
      for (int j = 0; j < win; ++j) {
        design(j, i) = p;
        p *= z[static_cast<std::size_t>(i)];
      }
    }
    RealVector target(win);
    for (int j = 0; j < win; ++j) target(j) = y[static_cast<std::size_t>(j)];
    const RealVector amp = design.colPivHouseholderQr().solve(target);
    for (int i = 0; i < m; ++i) {
      if (!(amp(i) > 0.0)) reject = true;
    }
    if (reject) continue;

    // Validate against every sample, including the discarded tail.
    double resid = 0.0;
    for (int j = 0; j < n_all; ++j) {
      double f = 0.0;
      for (int i = 0; i < m; ++i) {
        f += amp(i) * std::pow(z[static_cast<std::size_t>(i)], j);
      }
      resid = std::max(resid, std::abs(f - y[static_cast<std::size_t>(j)]));
    }
    if (resid > resid_tol * ymax) continue;

    std::vector<ExpComponent> comps;
    double wsum = 0.0;
    for (int i = 0; i < m; ++i) {
      ExpComponent c;
      c.rate = -std::log(z[static_cast<std::size_t>(i)]) / delta;
      c.weight = amp(i) / c.rate;
      wsum += c.weight;
      comps.push_back(c);
    }
    if (std::abs(wsum - 1.0) > 1e-6) continue;
    for (ExpComponent& c : comps) c.weight /= wsum;
    fit.ok = true;
    fit.comps = std::move(comps);
    fit.resid = resid;
    return fit;
  }
  return fit;
}

}  // namespace

ErasingCheck is_erasing(const Lindblad& lb, double tol) {
  check_lindblad(lb);
  ErasingCheck ec;
  ErasingStructure es;
  double global_scale = 0.0;
  for (const Matrix& j : lb.jumps) global_scale = std::max(global_scale, max_abs(j));

  for (std::size_t x = 0; x < lb.jumps.size(); ++x) {
    const Matrix& j = lb.jumps[x];
    if (max_abs(j) < kDeadChannel * std::max(1.0, global_scale)) continue;
    Eigen::JacobiSVD<Matrix> svd(j, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double ratio = sv.size() > 1 ? sv(1) / sv(0) : 0.0;
    if (ratio > ec.worst_ratio) {
      ec.worst_ratio = ratio;
      ec.offending = lb.symbols[x];
    }
    Complex phase;
    es.symbols.push_back(lb.symbols[x]);
    es.post_states.push_back(phase_fix(svd.matrixU().col(0), &phase));
    es.weight_vectors.push_back(Vector(sv(0) * phase * svd.matrixV().col(0)));
  }
  ec.erasing = !es.symbols.empty() && ec.worst_ratio <= tol;
  if (ec.erasing) ec.structure = std::move(es);
  return ec;
}

double next_event_density(const Lindblad& lb, const ErasingStructure& es,
                          int from, int to, double t) {
  const Propagator prop(lb);
  const Vector evolved =
      prop.apply(es.post_states[static_cast<std::size_t>(from)], t);
  std::size_t jump_idx = 0;
  bool found = false;
  for (std::size_t x = 0; x < lb.symbols.size(); ++x) {
    if (lb.symbols[x] == es.symbols[static_cast<std::size_t>(to)]) {
      jump_idx = x;
      found = true;
    }
  }
  if (!found) throw NoSuchBranchError("unknown target channel");
  return (lb.jumps[jump_idx] * evolved).squaredNorm();
}

ProcessSpec extract_hsmm(const Lindblad& lb, const ReverseOptions& opts) {
  const ErasingCheck ec = is_erasing(lb);
  if (!ec.erasing) {
    throw NotErasingError(
        "jump channel '" + ec.offending + "' has singular value ratio " +
        std::to_string(ec.worst_ratio) +
        "; post-jump states remember the pre-jump state");
  }
  const ErasingStructure& es = *ec.structure;
  const int n = static_cast<int>(es.symbols.size());
  if (opts.grid_points < 8) {
    throw ValidationError("dwell grid needs at least 8 points");
  }
  const Propagator prop(lb);

  ProcessSpec out;
  out.symbols = es.symbols;
  out.modes = es.symbols;
  out.branches.resize(static_cast<std::size_t>(n));

  for (int i = 0; i < n; ++i) {
    const Vector& psi = es.post_states[static_cast<std::size_t>(i)];
    const auto surv = [&](double t) { return prop.survival(psi, t); };

    double horizon = 1.0 / prop.rate_scale();
    while (surv(horizon) > opts.survival_eps) {
      horizon *= 2.0;
      if (horizon > 1e14) {
        throw HorizonTooShortError(
            "survival after symbol '" + es.symbols[static_cast<std::size_t>(i)] +
            "' never decays below " + std::to_string(opts.survival_eps));
      }
    }
    const double grid_max = opts.grid_max > 0.0 ? opts.grid_max : horizon;
    if (surv(grid_max) > opts.survival_eps) {
      throw GridTooShortError(
          "survival at the grid end is " + std::to_string(surv(grid_max)) +
          "; extend grid_max past the decay horizon");
    }

    // Joint next-event densities and their integrals.
    std::vector<std::vector<double>> dens(static_cast<std::size_t>(n));
    std::vector<double> probs(static_cast<std::size_t>(n), 0.0);
    std::vector<std::size_t> jump_of(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      bool found = false;
      for (std::size_t x = 0; x < lb.symbols.size(); ++x) {
        if (lb.symbols[x] == es.symbols[static_cast<std::size_t>(j)]) {
          jump_of[static_cast<std::size_t>(j)] = x;
          found = true;
        }
      }
      if (!found) throw NoSuchBranchError("channel symbol missing from model");
    }
    for (int j = 0; j < n; ++j) {
      const Matrix& jump = lb.jumps[jump_of[static_cast<std::size_t>(j)]];
      const auto pdf = [&](double t) {
        return (jump * prop.apply(psi, t)).squaredNorm();
      };
      probs[static_cast<std::size_t>(j)] =
          adaptive_simpson(pdf, 0.0, grid_max, opts.quad_rel_tol, 1e-14);
    }
    double row = 0.0;
    for (double p : probs) row += p;
    const double defect = std::abs(row + surv(grid_max) - 1.0);
    if (defect > 1e-6) {
      throw NoConvergenceError(
          "next-event probabilities plus surviving weight deviate from one "
          "by " + std::to_string(defect));
    }

    for (int j = 0; j < n; ++j) {
      const double t_prob = probs[static_cast<std::size_t>(j)] / row;
      if (t_prob < kBranchFloor) continue;
      const Matrix& jump = lb.jumps[jump_of[static_cast<std::size_t>(j)]];

      std::vector<double> grid(static_cast<std::size_t>(opts.grid_points));
      std::vector<double> y(static_cast<std::size_t>(opts.grid_points));
      const double h = grid_max / (opts.grid_points - 1);
      for (int k = 0; k < opts.grid_points; ++k) {
        grid[static_cast<std::size_t>(k)] = k * h;
        y[static_cast<std::size_t>(k)] =
            (jump * prop.apply(psi, k * h)).squaredNorm() /
            probs[static_cast<std::size_t>(j)];
      }

      Branch b;
      b.symbol = es.symbols[static_cast<std::size_t>(j)];
      b.prob = t_prob;
      b.to = es.symbols[static_cast<std::size_t>(j)];
      const ExpFit fit =
          exp_mixture_refit(y, h, opts.max_exp_order, opts.refit_resid_tol);
      if (fit.ok) {
        b.dwell = DwellDistribution::exp_mixture(fit.comps);
      } else {
        // Tabulated fallback: renormalize to unit piecewise-linear mass.
        double mass = 0.0;
        for (int k = 0; k + 1 < opts.grid_points; ++k) {
          mass += 0.5 *
                  (y[static_cast<std::size_t>(k)] +
                   y[static_cast<std::size_t>(k + 1)]) *
                  h;
        }
        if (!(mass > 0.0)) {
          throw NoConvergenceError("dwell density mass vanished on the grid");
        }
        for (double& v : y) v /= mass;
        b.dwell = DwellDistribution::tabulated(grid, y);
      }
      out.branches[static_cast<std::size_t>(i)].push_back(std::move(b));
    }
  }
  return out;
}

RoundtripReport roundtrip_check(const ValidatedSpec& v,
                                const EmbedOptions& eopts,
                                const ReverseOptions& ropts, double tol) {
  const EmbedResult er = embed_process(v, eopts);
  const ProcessSpec extracted = extract_hsmm(er.lindblad, ropts);
  const ValidatedSpec v2{extracted};

  // The comparison keys branches by the previous symbol, which requires the
  // source successor map to depend only on the symbol.
  std::map<std::string, int> succ_of;
  for (int g = 0; g < v.n_modes(); ++g) {
    for (const Branch& b : v.branches(g)) {
      if (b.prob <= 0.0) continue;
      const int succ = v.mode_index(b.to);
      const auto it = succ_of.find(b.symbol);
      if (it == succ_of.end()) {
        succ_of[b.symbol] = succ;
      } else if (it->second != succ) {
        throw ValidationError(
            "source successor map depends on the mode; symbol-keyed "
            "comparison is undefined");
      }
    }
  }

  RoundtripReport rep;
  const double horizon = survival_horizon(v, 1e-9);
  for (const auto& [sym, src_mode] : succ_of) {
    const int ext_mode = v2.mode_index(sym);
    // Union of branch symbols on both sides.
    std::map<std::string, std::pair<const Branch*, const Branch*>> pairs;
    for (const Branch& b : v.branches(src_mode)) {
      if (b.prob > 0.0) pairs[b.symbol].first = &b;
    }
    for (const Branch& b : v2.branches(ext_mode)) {
      if (b.prob > 0.0) pairs[b.symbol].second = &b;
    }
    for (const auto& [next_sym, pr] : pairs) {
      const double p_src = pr.first != nullptr ? pr.first->prob : 0.0;
      const double p_ext = pr.second != nullptr ? pr.second->prob : 0.0;
      rep.max_prob_err = std::max(rep.max_prob_err, std::abs(p_src - p_ext));
      if (pr.first == nullptr || pr.second == nullptr) continue;
      if (p_src < 1e-6) continue;
      for (int k = 0; k < 200; ++k) {
        const double t = horizon * k / 199.0;
        const double d_src = pr.first->dwell.density(t);
        const double d_ext = pr.second->dwell.density(t);
        rep.max_density_err =
            std::max(rep.max_density_err, std::abs(d_src - d_ext));
      }
    }
  }
  rep.pass = rep.max_prob_err <= tol && rep.max_density_err <= tol;
  return rep;
}

}  // namespace trajembed
