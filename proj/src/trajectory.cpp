#include "trajembed/trajectory.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>
#include <unsupported/Eigen/MatrixFunctions>

#include "trajembed/errors.hpp"

namespace trajembed {

namespace {

bool finite_vec(const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v(i).real()) || !std::isfinite(v(i).imag())) {
      return false;
    }
  }
  return true;
}

}  // namespace

Propagator::Propagator(const Lindblad& lb) {
  check_lindblad(lb);
  dim_ = lb.dim();
  h_eff_ = lb.h_eff();
  const Matrix a = -kImag * h_eff_;
  Eigen::ComplexEigenSolver<Matrix> eig(a);
  if (eig.info() != Eigen::Success) {
    throw ExpFailureError("no-jump generator eigendecomposition failed");
  }
  eigs_ = eig.eigenvalues();
  double max_decay = 0.0;
  for (Eigen::Index i = 0; i < eigs_.size(); ++i) {
    max_decay = std::max(max_decay, std::abs(eigs_(i).real()));
  }
  rate_scale_ = std::max(max_decay, 1e-12);

  const Matrix v = eig.eigenvectors();
  Eigen::JacobiSVD<Matrix> svd(v);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  const double cond =
      smin > 0.0 ? svd.singularValues()(0) / smin
                 : std::numeric_limits<double>::infinity();
  if (std::isfinite(cond) && cond < 1e8) {
    spectral_ = true;
    v_ = v;
    v_inv_ = v.inverse();
  }
}

Vector Propagator::apply(const Vector& psi, double t) const {
  if (t < 0.0) throw NegativeTimeError("propagation time must be nonnegative");
  if (psi.size() != dim_) {
    throw DimensionMismatchError("state dimension mismatch");
  }
  if (spectral_) {
    Vector c = v_inv_ * psi;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      c(i) *= std::exp(eigs_(i) * t);
    }
    return v_ * c;
  }
  const Matrix u = Matrix(-kImag * t * h_eff_).exp();
  if (!u.allFinite()) {
    throw ExpFailureError("dense propagator exponential failed");
  }
  return u * psi;
}

double Propagator::survival(const Vector& psi, double t) const {
  return apply(psi, t).squaredNorm();
}

Vector Propagator::apply_normalized(const Vector& psi, double t,
                                    double* survival_out) const {
  if (spectral_) {
    // Shift out the dominant decay so long horizons cannot underflow.
    Vector c = v_inv_ * psi;
    double shift = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      shift = std::max(shift, eigs_(i).real() * t);
    }
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      c(i) *= std::exp(eigs_(i) * t - shift);
    }
    Vector u = v_ * c;
    const double nn = u.norm();
    if (!(nn > 0.0) || !finite_vec(u)) {
      throw DeadStateError("propagated state vanished");
    }
    if (survival_out != nullptr) {
      const double log_s = 2.0 * (std::log(nn) + shift);
      *survival_out = log_s < -745.0 ? 0.0 : std::exp(log_s);
    }
    return u / nn;
  }
  Vector u = apply(psi, t);
  const double nn = u.norm();
  if (!(nn > 0.0) || !finite_vec(u)) {
    throw DeadStateError("propagated state vanished");
  }
  if (survival_out != nullptr) *survival_out = nn * nn;
  return u / nn;
}

double sample_jump_time(const Propagator& prop, const Vector& psi, double r,
                        const JumpTimeOptions& opts) {
  if (!(r > 0.0) || r > 1.0) {
    throw ValidationError("survival threshold must lie in (0, 1]");
  }
  Vector p = psi / psi.norm();
  if (r >= 1.0) return 0.0;

  // Bracket by doubling from the fastest decay scale.
  double lo = 0.0;
  double hi = 1.0 / prop.rate_scale();
  double s_lo = 1.0;
  double s_hi = prop.survival(p, hi);
  while (s_hi > r) {
    lo = hi;
    s_lo = s_hi;
    hi *= 2.0;
    if (hi > opts.horizon_cap) {
      throw HorizonExceededError(
          "survival plateaus at " + std::to_string(s_hi) + " above draw " +
          std::to_string(r) + "; a dark subspace never emits");
    }
    s_hi = prop.survival(p, hi);
  }

  // Brent on survival(t) - r over [lo, hi].
  double a = lo, b = hi;
  double fa = s_lo - r, fb = s_hi - r;
  double c = a, fc = fa, d = b - a, e = d;
  for (int it = 0; it < 200; ++it) {
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol = 2.0 * std::numeric_limits<double>::epsilon() *
                           std::abs(b) +
                       0.5 * opts.time_tol;
    const double xm = 0.5 * (c - b);
    if (std::abs(xm) <= tol || fb == 0.0) return b;
    if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
      const double s = fb / fa;
      double pq_p, pq_q;
      if (a == c) {
        pq_p = 2.0 * xm * s;
        pq_q = 1.0 - s;
      } else {
        const double q = fa / fc;
        const double r2 = fb / fc;
        pq_p = s * (2.0 * xm * q * (q - r2) - (b - a) * (r2 - 1.0));
        pq_q = (q - 1.0) * (r2 - 1.0) * (s - 1.0);
      }
      if (pq_p > 0.0) pq_q = -pq_q;
      pq_p = std::abs(pq_p);
      if (2.0 * pq_p < std::min(3.0 * xm * pq_q - std::abs(tol * pq_q),
                                std::abs(e * pq_q))) {
        e = d;
        d = pq_p / pq_q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += std::abs(d) > tol ? d : (xm > 0.0 ? tol : -tol);
    fb = prop.survival(p, b) - r;
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = b - a;
      e = d;
    }
  }
  throw NoConvergenceError("jump-time inversion did not converge");
}

std::pair<int, Vector> select_jump(const Lindblad& lb, const Vector& psi,
                                   RngStream& rng) {
  std::vector<double> weights;
  std::vector<Vector> posts;
  weights.reserve(lb.jumps.size());
  double total = 0.0;
  for (const Matrix& j : lb.jumps) {
    Vector u = j * psi;
    const double w = u.squaredNorm();
    weights.push_back(w);
    posts.push_back(std::move(u));
    total += w;
  }
  if (!(total > 1e-280)) {
    throw DeadStateError("every jump channel annihilates the current state");
  }
  const int idx = rng.categorical(weights);
  return {idx, Vector(posts[static_cast<std::size_t>(idx)] /
                      posts[static_cast<std::size_t>(idx)].norm())};
}

std::array<double, 3> bloch_vector(const Vector& psi) {
  if (psi.size() != 2) {
    throw DimensionMismatchError("Bloch coordinates need a two-level state");
  }
  const Complex r01 = psi(0) * std::conj(psi(1));
  return {2.0 * r01.real(), -2.0 * r01.imag(),
          std::norm(psi(0)) - std::norm(psi(1))};
}

void write_state_path_csv(const StatePath& path, std::ostream& out) {
  const int dim =
      path.points.empty() ? 0 : static_cast<int>(path.points.front().psi_pre.size());
  out << "t,symbol";
  for (int i = 0; i < dim; ++i) out << ",pre_re_" << i << ",pre_im_" << i;
  for (int i = 0; i < dim; ++i) out << ",post_re_" << i << ",post_im_" << i;
  if (dim == 2) out << ",bloch_x,bloch_y,bloch_z";
  out << "\n";
  char buf[32];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << ',' << buf;
  };
  for (const PathPoint& p : path.points) {
    std::snprintf(buf, sizeof buf, "%.17g", p.t);
    out << buf << ',' << p.symbol;
    for (int i = 0; i < dim; ++i) {
      put(p.psi_pre(i).real());
      put(p.psi_pre(i).imag());
    }
    for (int i = 0; i < dim; ++i) {
      put(p.psi_post(i).real());
      put(p.psi_post(i).imag());
    }
    if (dim == 2) {
      const auto b = bloch_vector(p.psi_post);
      put(b[0]);
      put(b[1]);
      put(b[2]);
    }
    out << "\n";
  }
}

TrajectoryResult run_trajectory(const Lindblad& lb, const Propagator& prop,
                                const Vector& psi0, RngStream& rng,
                                const StopRule& stop,
                                const TrajectoryOptions& opts) {
  const bool by_events = stop.n_events > 0;
  const bool by_time = stop.t_total > 0.0;
  if (by_events == by_time) {
    throw ValidationError("exactly one stop rule must be set");
  }
  if (psi0.size() != lb.dim()) {
    throw DimensionMismatchError("initial state dimension mismatch");
  }

  TrajectoryResult res;
  res.log.generator = "quantum_trajectory";
  Vector psi = psi0 / psi0.norm();
  if (opts.record_path) {
    res.path.points.push_back(PathPoint{0.0, "", psi, psi});
  }

  double t_abs = 0.0;
  std::int64_t emitted = 0;
  for (;;) {
    const double r = rng.uniform01();
    double wait = 0.0;
    bool plateau = false;
    try {
      wait = sample_jump_time(prop, psi, r, opts.jump);
    } catch (const HorizonExceededError&) {
      plateau = true;
    }
    if (plateau) {
      res.truncated = true;
      res.log.truncated = true;
      if (by_time) {
        res.final_state = prop.apply_normalized(psi, stop.t_total - t_abs);
        res.final_time = stop.t_total;
      } else {
        res.final_state = psi;
        res.final_time = t_abs;
      }
      return res;
    }
    if (by_time && t_abs + wait >= stop.t_total) {
      res.final_state = prop.apply_normalized(psi, stop.t_total - t_abs);
      res.final_time = stop.t_total;
      return res;
    }
    const Vector psi_pre = prop.apply_normalized(psi, wait);
    auto [idx, psi_post] = select_jump(lb, psi_pre, rng);
    t_abs += wait;
    EventRecord rec;
    rec.x = lb.symbols[static_cast<std::size_t>(idx)];
    rec.t = wait;
    res.log.records.push_back(rec);
    if (opts.record_path) {
      res.path.points.push_back(PathPoint{t_abs, rec.x, psi_pre, psi_post});
    }
    psi = psi_post;
    ++emitted;
    if (by_events && emitted >= stop.n_events) {
      res.final_state = psi;
      res.final_time = t_abs;
      return res;
    }
  }
}

Vector draw_start_state(const Lindblad& lb, RngStream& rng) {
  if (lb.start_states.empty()) {
    Vector e0 = Vector::Zero(lb.dim());
    e0(0) = 1.0;
    return e0;
  }
  const int idx = rng.categorical(lb.start_weights);
  return lb.start_states[static_cast<std::size_t>(idx)];
}

Matrix ensemble_density(const Lindblad& lb, double t, int n_traj,
                        std::uint64_t seed, int threads) {
  if (n_traj < 1) throw ValidationError("ensemble needs at least one trajectory");
  if (t < 0.0) throw NegativeTimeError("ensemble time must be nonnegative");
  const Propagator prop(lb);
  std::vector<Vector> finals(static_cast<std::size_t>(n_traj));

  int n_threads = threads;
  if (n_threads <= 0) {
    n_threads = static_cast<int>(
        std::min<unsigned>(std::thread::hardware_concurrency(), 8));
    if (n_threads < 1) n_threads = 1;
  }
  n_threads = std::min(n_threads, n_traj);

  std::exception_ptr first_error;
  std::mutex err_mutex;
  const auto worker = [&](int begin, int end) {
    try {
      for (int i = begin; i < end; ++i) {
        RngStream rng = RngStream::child(seed, static_cast<std::uint64_t>(i));
        const Vector psi0 = draw_start_state(lb, rng);
        if (t == 0.0) {
          finals[static_cast<std::size_t>(i)] = psi0;
          continue;
        }
        StopRule stop;
        stop.t_total = t;
        TrajectoryResult r = run_trajectory(lb, prop, psi0, rng, stop);
        finals[static_cast<std::size_t>(i)] = std::move(r.final_state);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(err_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };

  if (n_threads == 1) {
    worker(0, n_traj);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (n_traj + n_threads - 1) / n_threads;
    for (int k = 0; k < n_threads; ++k) {
      const int begin = k * chunk;
      const int end = std::min(n_traj, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(worker, begin, end);
    }
    for (std::thread& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  // Fixed-order reduction: identical bytes for any thread count.
  Matrix rho = Matrix::Zero(lb.dim(), lb.dim());
  for (int i = 0; i < n_traj; ++i) {
    const Vector& f = finals[static_cast<std::size_t>(i)];
    rho += f * f.adjoint();
  }
  return rho / static_cast<double>(n_traj);
}

Matrix master_equation_evolve(const Lindblad& lb, const Matrix& rho0, double t,
                              double dt) {
  check_lindblad(lb);
  const int d = lb.dim();
  if (rho0.rows() != d || rho0.cols() != d) {
    throw DimensionMismatchError("density matrix dimension mismatch");
  }
  if (max_abs(Matrix(rho0 - rho0.adjoint())) > 1e-8 ||
      std::abs(rho0.trace() - Complex(1.0)) > 1e-8) {
    throw BadDensityError("initial density matrix is not Hermitian unit trace");
  }
  if (t < 0.0) throw NegativeTimeError("evolution time must be nonnegative");
  if (dt <= 0.0) throw ValidationError("integration step must be positive");

  const Matrix heff = lb.h_eff();
  Eigen::JacobiSVD<Matrix> svd(heff);
  const double hnorm = svd.singularValues()(0);
  if (dt * hnorm >= 0.05) {
    throw StepTooLargeError("dt * |H_eff| = " + std::to_string(dt * hnorm) +
                            " must stay below 0.05");
  }
  if (t == 0.0) return rho0;

  const auto rhs = [&](const Matrix& rho) {
    Matrix out = -kImag * (heff * rho - rho * heff.adjoint());
    for (const Matrix& j : lb.jumps) out += j * rho * j.adjoint();
    return out;
  };

  const long long n = static_cast<long long>(std::ceil(t / dt - 1e-12));
  const double h = t / static_cast<double>(n);
  Matrix rho = rho0;
  for (long long sIdx = 0; sIdx < n; ++sIdx) {
    const Matrix k1 = rhs(rho);
    const Matrix k2 = rhs(Matrix(rho + 0.5 * h * k1));
    const Matrix k3 = rhs(Matrix(rho + 0.5 * h * k2));
    const Matrix k4 = rhs(Matrix(rho + h * k3));
    rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    rho = 0.5 * (rho + rho.adjoint().eval());
  }
  return rho;
}

double trace_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatchError("trace distance needs equal shapes");
  }
  Matrix diff = a - b;
  diff = 0.5 * (diff + diff.adjoint().eval());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(diff);
  return 0.5 * eig.eigenvalues().cwiseAbs().sum();
}

}  // namespace trajembed
