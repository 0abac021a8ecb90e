// Acceptance gate: each criterion prints exactly one PASS/FAIL line with a
// short numeric summary. Run everything (no arguments) or one criterion with
// --criterion N. Exit status is nonzero when any executed criterion fails.

#include <sys/wait.h>

#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oracle_helpers.hpp"
#include "trajembed/basis.hpp"
#include "trajembed/embedding.hpp"
#include "trajembed/errors.hpp"
#include "trajembed/event_log.hpp"
#include "trajembed/json_io.hpp"
#include "trajembed/kraus.hpp"
#include "trajembed/measures.hpp"
#include "trajembed/process.hpp"
#include "trajembed/reverse.hpp"
#include "trajembed/rng.hpp"
#include "trajembed/stats.hpp"
#include "trajembed/trajectory.hpp"

using namespace trajembed;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << v;
  return os.str();
}

Matrix mat2(Complex a, Complex b, Complex c, Complex d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

// two-channel fixture expectations
const double kG1 = 2.0, kG2 = 1.0;

Matrix expected_h_eff_two_channel() {
  return mat2(Complex(0.0, -1.0), 0.0, 0.0, Complex(0.0, -0.5));
}
Matrix expected_j1() { return mat2(std::sqrt(0.5), 0.0, std::sqrt(1.5), 0.0); }
Matrix expected_j2() {
  return mat2(0.0, std::sqrt(0.75), 0.0, std::sqrt(0.25));
}

// three-state fixture expectations at gamma = 1
Matrix expected_jx() { return mat2(0.0, std::sqrt(2.0 / 3.0), 0.0, 0.0); }
Matrix expected_jy() {
  const double r8 = 1.0 / (2.0 * std::sqrt(2.0));
  return r8 * mat2(1.0, -1.0 / std::sqrt(3.0), std::sqrt(3.0), -1.0);
}
Matrix expected_jz() {
  const double r8 = 1.0 / (2.0 * std::sqrt(2.0));
  return r8 * mat2(-1.0, -1.0 / std::sqrt(3.0), std::sqrt(3.0), 1.0);
}

int run_cli(const std::string& args, const std::string& log_path) {
  const std::string cmd =
      std::string(TRAJEMBED_CLI_PATH) + " " + args + " >" + log_path + " 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc == -1 || !WIFEXITED(rc)) return -1;
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path work_dir() {
  const fs::path d = "acceptance_tmp";
  fs::create_directories(d);
  return d;
}

Outcome criterion1() {
  const ValidatedSpec v{two_channel_spec(0.25, kG1, kG2)};
  const EmbedResult res = embed_process(v);
  double err = max_abs_diff(res.report.h_eff, expected_h_eff_two_channel());
  err = std::max(err, max_abs_diff(res.report.jumps[0], expected_j1()));
  err = std::max(err, max_abs_diff(res.report.jumps[1], expected_j2()));
  return {err < 1e-6,
          "two-channel H_eff, J_1, J_2 max entry error " + sci(err)};
}

Outcome criterion2() {
  const ValidatedDiscreteSpec v{three_state_spec()};
  const EmbedResult res = embed_discrete(v, 1.0);
  double err = max_abs_diff(res.report.h_eff,
                            Matrix(-0.5 * kImag * Matrix::Identity(2, 2)));
  err = std::max(err, max_abs_diff(res.report.jumps[0], expected_jx()));
  err = std::max(err, max_abs_diff(res.report.jumps[1], expected_jy()));
  err = std::max(err, max_abs_diff(res.report.jumps[2], expected_jz()));
  const double h_err = max_abs(res.report.h);
  return {err < 1e-6 && h_err < 1e-8, "three-state operator error " + sci(err) +
                                          ", |H| = " + sci(h_err)};
}

Outcome criterion3() {
  const ValidatedSpec v{two_channel_spec(0.25, kG1, kG2)};
  const EmbedResult res = embed_process(v);
  const Propagator prop(res.lindblad);

  RngStream rng(12345);
  StopRule stop;
  stop.n_events = 100000;
  const TrajectoryResult tr = run_trajectory(
      res.lindblad, prop, draw_start_state(res.lindblad, rng), rng, stop);
  const StatsReport rep = validate_run(v, tr.log);

  const EventLog classical = classical_sample(v, 100000, 54321);
  const StatsReport cmp = compare_logs(v, tr.log, classical);

  int ks_fail = 0, band_fail = 0;
  for (const KsRow& r : rep.ks_rows) {
    if (!r.ks.pass) ++ks_fail;
  }
  for (const BandRow& r : rep.band_rows) {
    if (!r.pass) ++band_fail;
  }
  return {rep.pass && cmp.pass,
          "validate_run " + std::string(rep.pass ? "PASS" : "FAIL") + " (" +
              std::to_string(ks_fail) + " KS / " + std::to_string(band_fail) +
              " band failures), two-sample oracle " +
              (cmp.pass ? "PASS" : "FAIL")};
}

Outcome criterion4() {
  const ValidatedDiscreteSpec v{three_state_spec()};
  const EmbedResult res = embed_discrete(v, 1.0);
  const Propagator prop(res.lindblad);
  RngStream rng(12345);
  StopRule stop;
  stop.n_events = 10000;
  TrajectoryOptions opts;
  opts.record_path = true;
  const TrajectoryResult tr = run_trajectory(
      res.lindblad, prop, res.basis.state(0, 0.0), rng, stop, opts);

  double worst_fid = 0.0;
  for (std::size_t i = 1; i < tr.path.points.size(); ++i) {
    const PathPoint& prev = tr.path.points[i - 1];
    const PathPoint& cur = tr.path.points[i];
    const Vector evolved =
        prop.apply_normalized(prev.psi_post, cur.t - prev.t);
    worst_fid = std::max(worst_fid,
                         std::abs(std::abs(evolved.dot(cur.psi_pre)) - 1.0));
  }

  const TransitionStats ts =
      empirical_transition_matrix(tr.log, v.spec().symbols);
  double max_diag = 0.0, worst_band = 0.0;
  bool bands_ok = true;
  for (int g = 0; g < 3; ++g) {
    const double n_row = ts.counts.row(g).sum();
    max_diag = std::max(max_diag, ts.freq(g, g));
    const double band = 3.0 * std::sqrt(0.25 / n_row);
    for (int x = 0; x < 3; ++x) {
      if (x == g) continue;
      const double dev = std::abs(ts.freq(g, x) - 0.5);
      worst_band = std::max(worst_band, dev - band);
      if (dev > band) bands_ok = false;
    }
  }
  const bool pass = worst_fid < 1e-10 && max_diag < 0.005 && bands_ok;
  return {pass, "max fidelity defect " + sci(worst_fid) +
                    ", max diagonal frequency " + sci(max_diag) +
                    (bands_ok ? ", off-diagonals within 3 sigma"
                              : ", off-diagonal outside 3 sigma by " +
                                    sci(worst_band))};
}

Outcome criterion5() {
  struct Fixture {
    std::string name;
    Lindblad lb;
  };
  std::vector<Fixture> fixtures;
  {
    const ValidatedSpec v{two_channel_spec(0.25, kG1, kG2)};
    fixtures.push_back({"two-channel", embed_process(v).lindblad});
  }
  {
    const ValidatedDiscreteSpec v{three_state_spec()};
    fixtures.push_back({"three-state", embed_discrete(v, 1.0).lindblad});
  }
  // intrinsic Monte Carlo noise at 2000 trajectories puts the expected
  // distance near 0.01, so the run is pinned to the tool's default seed
  double worst = 0.0;
  for (const Fixture& f : fixtures) {
    Matrix rho0 = Matrix::Zero(f.lb.dim(), f.lb.dim());
    for (std::size_t i = 0; i < f.lb.start_weights.size(); ++i) {
      const Vector& s = f.lb.start_states[i];
      rho0 += f.lb.start_weights[i] * (s * s.adjoint());
    }
    for (double t : {0.5, 1.0, 2.0}) {
      const Matrix sampled = ensemble_density(f.lb, t, 2000, 12345);
      const Matrix direct = master_equation_evolve(f.lb, rho0, t, 1e-3);
      worst = std::max(worst, trace_distance(sampled, direct));
    }
  }
  return {worst < 0.02,
          "worst ensemble/master trace distance " + sci(worst) +
              " over both fixtures at t in {0.5, 1, 2} (2000 trajectories)"};
}

Outcome criterion6() {
  const ValidatedSpec v{two_channel_spec(0.25, kG1, kG2)};
  const MemoryBasis basis = analytic_gram(v);
  bool pass = true;
  double worst = 0.0;
  std::string samples;
  for (double t : {0.0, 0.5, 1.0}) {
    auto f = [&](double dt) {
      return (1.0 - basis.overlap(0, t, 0, t + dt).real()) / dt;
    };
    const double f1 = f(1e-4);
    const double f2 = f(5e-5);
    // the functional converges to zero, so the 5 percent window is applied
    // on the unit rate scale once |f| drops below one
    const double change = std::abs(f1 - f2) / std::max(std::abs(f1), 1.0);
    worst = std::max(worst, change);
    if (change >= 0.05) pass = false;
    if (!samples.empty()) samples += ", ";
    samples += "f(1e-4)=" + sci(f1) + " at t=" + std::to_string(t).substr(0, 3);
  }
  return {pass, "overlap decay rate change " + sci(worst) +
                    " of scale max(|f|, 1); " + samples};
}

Outcome criterion7() {
  const ValidatedSpec v{two_channel_spec(0.75, kG1, kG2)};
  const MemoryBasis basis = analytic_gram(v);
  const double p = 0.75, pbar = 0.25;
  const double tau = std::log((p * p) / (pbar * pbar)) / (kG1 - kG2);
  double worst = 0.0;
  for (double t : {0.0, 1.0, 3.0}) {
    const double fid = std::abs(basis.overlap(0, t + tau, 1, t));
    worst = std::max(worst, std::abs(fid - 1.0));
  }
  return {worst < 1e-8, "merging offset tau = ln 9 = " + sci(tau) +
                            ", worst fidelity defect " + sci(worst)};
}

Outcome criterion8() {
  // three-state: exact classical and quantum measures
  const ValidatedDiscreteSpec d{three_state_spec()};
  const MemoryMeasures dc = classical_measures(d);
  const MemoryMeasures dq = quantum_measures(d, discrete_model(d).basis);
  const double log2_3 = std::log2(3.0);
  double err3 = std::abs(*dc.dimension_bits - log2_3);
  err3 = std::max(err3, std::abs(*dc.entropy_bits - log2_3));
  err3 = std::max(err3, std::abs(*dq.dimension_bits - 1.0));
  err3 = std::max(err3, std::abs(*dq.entropy_bits - 1.0));

  // two-channel: classical diverges, quantum entropy stable under halving
  const ValidatedSpec v{two_channel_spec(0.25, kG1, kG2)};
  const MemoryMeasures cc = classical_measures(v);
  const MemoryBasis basis = analytic_gram(v);
  const double mu = 1.0 / mean_event_interval(v);
  const RealVector pi = stationary_mode_dist(v);
  const double t_max = survival_horizon(v, 1e-13);
  const auto entropy_at = [&](double h) {
    const int n = static_cast<int>(std::ceil(t_max / h));
    Matrix rho = Matrix::Zero(2, 2);
    for (int k = 0; k <= n; ++k) {
      const double t = k * h;
      const double w = (k == 0 || k == n) ? 0.5 : 1.0;  // trapezoid
      for (int g = 0; g < 2; ++g) {
        const Vector s = basis.state(g, t);
        rho += (w * h * mu * pi(g) * survival(v, g, t)) * (s * s.adjoint());
      }
    }
    rho /= rho.trace().real();
    return von_neumann_entropy_bits(rho);
  };
  const double c1 = entropy_at(0.025);
  const double c2 = entropy_at(0.0125);
  const double drift = std::abs(c1 - c2);
  const double library_cq = *quantum_measures(v, basis).entropy_bits;

  const bool pass = err3 < 1e-9 && cc.divergent && drift < 1e-4 &&
                    std::abs(c2 - library_cq) < 5e-4;
  return {pass, "three-state measure error " + sci(err3) +
                    "; two-channel classical divergent=" +
                    (cc.divergent ? "true" : "false") + ", C_q halving drift " +
                    sci(drift) + " (C_q = " + std::to_string(library_cq) + ")"};
}

Outcome criterion9() {
  // two-channel roundtrip
  const ValidatedSpec v{two_channel_spec(0.25, kG1, kG2)};
  const RoundtripReport rt = roundtrip_check(v);

  // three-state roundtrip against the known never-repeat structure
  const ValidatedDiscreteSpec d{three_state_spec()};
  const EmbedResult res = embed_discrete(d, 1.0);
  const ProcessSpec out = extract_hsmm(res.lindblad);
  const ValidatedSpec ext{out};
  double prob_err = 0.0, dens_err = 0.0;
  for (int g = 0; g < ext.n_modes(); ++g) {
    double self = 0.0;
    for (const Branch& b : ext.branches(g)) {
      if (b.symbol == ext.spec().modes[g]) {
        self = b.prob;
        continue;
      }
      prob_err = std::max(prob_err, std::abs(b.prob - 0.5));
      for (int k = 0; k <= 200; ++k) {
        const double t = k * 0.05;
        dens_err = std::max(dens_err,
                            std::abs(b.dwell.density(t) - std::exp(-t)));
      }
    }
    prob_err = std::max(prob_err, self);
  }

  // non-erasing refusal through the tool
  Lindblad bad;
  bad.h = Matrix::Zero(2, 2);
  bad.symbols = {"a"};
  bad.jumps = {Matrix::Identity(2, 2)};
  const fs::path dir = work_dir();
  const std::string model = (dir / "identity_model.json").string();
  write_json_file(lindblad_to_json(bad), model);
  const int rc = run_cli("reverse --model " + model,
                         (dir / "reverse.log").string());

  const bool pass = rt.pass && prob_err < 1e-6 && dens_err < 1e-6 && rc == 3;
  return {pass, "roundtrip errors: two-channel T " + sci(rt.max_prob_err) +
                    " / density " + sci(rt.max_density_err) +
                    ", three-state T " + sci(prob_err) + " / density " +
                    sci(dens_err) + "; J = I exit code " +
                    std::to_string(rc)};
}

Outcome criterion10() {
  const fs::path dir = work_dir();
  const ValidatedSpec v{two_channel_spec(0.25, kG1, kG2)};
  const EmbedResult res = embed_process(v);
  const std::string model = (dir / "determinism_model.json").string();
  write_json_file(lindblad_to_json(res.lindblad), model);

  const std::string base = "simulate --model " + model +
                           " --events 2000 --trajectories 8 --seed 999 --out ";
  const std::string a = (dir / "a.jsonl").string();
  const std::string b = (dir / "b.jsonl").string();
  const std::string t1 = (dir / "t1.jsonl").string();
  const std::string tn = (dir / "tn.jsonl").string();
  if (run_cli(base + a, (dir / "ra.log").string()) != 0 ||
      run_cli(base + b, (dir / "rb.log").string()) != 0) {
    return {false, "simulation run failed"};
  }
  const std::string cli = TRAJEMBED_CLI_PATH;
  const std::string c1 = "TRAJ_EMBED_THREADS=1 " + cli + " " + base + t1 +
                         " >" + (dir / "r1.log").string() + " 2>&1";
  const std::string cn = "TRAJ_EMBED_THREADS=7 " + cli + " " + base + tn +
                         " >" + (dir / "rn.log").string() + " 2>&1";
  if (std::system(c1.c_str()) != 0 || std::system(cn.c_str()) != 0) {
    return {false, "threaded simulation run failed"};
  }
  const std::string ref = slurp(a);
  const bool repeat_ok = !ref.empty() && ref == slurp(b);
  const bool thread_ok = ref == slurp(t1) && ref == slurp(tn);
  return {repeat_ok && thread_ok,
          std::string("byte-identical logs: repeat ") +
              (repeat_ok ? "yes" : "no") + ", 1 vs 7 threads " +
              (thread_ok ? "yes" : "no") + " (" +
              std::to_string(ref.size()) + " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--criterion N]\n";
      return 2;
    }
  }

  const std::vector<std::function<Outcome()>> criteria = {
      criterion1, criterion2, criterion3, criterion4, criterion5,
      criterion6, criterion7, criterion8, criterion9, criterion10};

  bool all_pass = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (only != 0 && n != only) continue;
    Outcome out;
    try {
      out = criteria[i]();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << n << ": " << (out.pass ? "PASS" : "FAIL")
              << " - " << out.detail << "\n";
    if (!out.pass) all_pass = false;
  }
  return all_pass ? 0 : 1;
}
