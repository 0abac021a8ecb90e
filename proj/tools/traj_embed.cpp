// Command-line frontend: spec -> model -> embedding -> simulation ->
// validation -> reverse extraction, plus memory-measure reporting.
//
// Exit codes: 0 success/PASS, 1 validation or input failure, 2 statistical
// FAIL, 3 non-erasing model on reverse, 4 numerical non-convergence.

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "trajembed/basis.hpp"
#include "trajembed/embedding.hpp"
#include "trajembed/errors.hpp"
#include "trajembed/event_log.hpp"
#include "trajembed/gram.hpp"
#include "trajembed/json_io.hpp"
#include "trajembed/kraus.hpp"
#include "trajembed/lindblad.hpp"
#include "trajembed/measures.hpp"
#include "trajembed/process.hpp"
#include "trajembed/reverse.hpp"
#include "trajembed/rng.hpp"
#include "trajembed/stats.hpp"
#include "trajembed/trajectory.hpp"

namespace te = trajembed;

namespace {

int env_thread_cap() {
  const char* s = std::getenv("TRAJ_EMBED_THREADS");
  if (s == nullptr || *s == '\0') return 0;
  const long v = std::strtol(s, nullptr, 10);
  return v > 0 ? static_cast<int>(v) : 0;
}

int pick_threads(int n_tasks) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  const int cap = env_thread_cap();
  const int want = cap > 0 ? cap : std::min(hw, 8);
  return std::max(1, std::min(want, n_tasks));
}

std::string format_complex(const te::Complex& z) {
  std::ostringstream os;
  os << std::showpos << std::fixed << std::setprecision(6) << z.real()
     << z.imag() << "i";
  return os.str();
}

void print_matrix(const std::string& name, const te::Matrix& m,
                  std::ostream& out) {
  const std::string pad(name.size() + 3, ' ');
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << (r == 0 ? name + " = " : pad) << "[ ";
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out << format_complex(m(r, c)) << (c + 1 < m.cols() ? "  " : "");
    }
    out << " ]\n";
  }
}

void print_operators(const te::Lindblad& lb, std::ostream& out) {
  print_matrix("H_eff", lb.h_eff(), out);
  print_matrix("H    ", lb.h, out);
  for (std::size_t x = 0; x < lb.symbols.size(); ++x) {
    print_matrix("J_" + lb.symbols[x] + (lb.symbols[x].size() < 2 ? "  " : ""),
                 lb.jumps[x], out);
  }
}

std::string measure_cell(const te::MemoryMeasures& m, bool dimension) {
  if (m.divergent) return "divergent";
  const auto& v = dimension ? m.dimension_bits : m.entropy_bits;
  if (!v.has_value()) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(9) << *v;
  return os.str();
}

struct EmbedArgs {
  std::string spec_path;
  std::string out_path = "lindblad.json";
  std::string report_path;
  std::vector<double> dt_ladder;
  double rank_tol = 1e-10;
  double lattice_t_max = 0.0;
  bool force_numeric = false;
  double rate = 1.0;  // event rate for discrete-time specs
};

int cmd_embed(const EmbedArgs& a) {
  const nlohmann::json j = te::load_json_file(a.spec_path);
  te::EmbedResult er;
  if (te::spec_kind(j) == te::SpecKind::kHsmm) {
    const te::ValidatedSpec v{te::process_spec_from_json(j)};
    te::EmbedOptions opts;
    if (!a.dt_ladder.empty()) opts.dt_ladder = a.dt_ladder;
    opts.rank_tol = a.rank_tol;
    opts.lattice_t_max = a.lattice_t_max;
    opts.force_numeric = a.force_numeric;
    er = te::embed_process(v, opts);
  } else {
    const te::ValidatedDiscreteSpec v{te::discrete_spec_from_json(j)};
    er = te::embed_discrete(v, a.rate, a.rank_tol);
  }
  te::write_json_file(te::lindblad_to_json(er.lindblad), a.out_path);
  print_operators(er.lindblad, std::cout);
  te::print_report(er.report, std::cout);
  if (!a.report_path.empty()) {
    te::write_json_file(te::to_json(er.report), a.report_path);
  }
  std::cout << "wrote " << a.out_path << "\n";
  return 0;
}

struct SimulateArgs {
  std::string model_path;
  std::string out_path = "events.jsonl";
  std::string state_path;
  std::uint64_t seed = 12345;
  std::int64_t n_events = 0;
  double t_total = 0.0;
  int trajectories = 1;
};

int cmd_simulate(const SimulateArgs& a) {
  if ((a.n_events > 0) == (a.t_total > 0.0)) {
    throw te::ValidationError("pass exactly one of --events and --time");
  }
  if (a.trajectories < 1) {
    throw te::ValidationError("--trajectories must be positive");
  }
  if (!a.state_path.empty() && a.trajectories != 1) {
    throw te::ValidationError("--state-path records a single trajectory");
  }
  const te::Lindblad lb =
      te::lindblad_from_json(te::load_json_file(a.model_path));
  const te::Propagator prop(lb);
  te::StopRule stop;
  stop.n_events = a.n_events;
  stop.t_total = a.t_total;
  te::TrajectoryOptions topts;
  topts.record_path = !a.state_path.empty();

  const int m = a.trajectories;
  std::vector<te::TrajectoryResult> results(static_cast<std::size_t>(m));
  const int n_threads = pick_threads(m);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_threads));
  const int chunk = (m + n_threads - 1) / n_threads;
  for (int w = 0; w < n_threads; ++w) {
    const int lo = w * chunk;
    const int hi = std::min(m, lo + chunk);
    pool.emplace_back([&, w, lo, hi]() {
      try {
        for (int i = lo; i < hi; ++i) {
          te::RngStream rng = te::RngStream::child(
              a.seed, static_cast<std::uint64_t>(i));
          const te::Vector psi0 = te::draw_start_state(lb, rng);
          results[static_cast<std::size_t>(i)] =
              te::run_trajectory(lb, prop, psi0, rng, stop, topts);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  te::EventLog merged;
  merged.generator = "traj_embed simulate";
  merged.model_hash = te::model_hash(te::lindblad_to_json(lb));
  merged.seed = a.seed;
  for (int i = 0; i < m; ++i) {
    const te::TrajectoryResult& r = results[static_cast<std::size_t>(i)];
    merged.truncated = merged.truncated || r.truncated;
    for (te::EventRecord rec : r.log.records) {
      if (m > 1) rec.traj = i;
      merged.records.push_back(std::move(rec));
    }
  }
  te::write_jsonl_file(merged, a.out_path);
  if (!a.state_path.empty()) {
    std::ofstream os(a.state_path);
    if (!os) throw te::ValidationError("cannot open " + a.state_path);
    te::write_state_path_csv(results[0].path, os);
  }
  std::cout << "wrote " << merged.records.size() << " events from " << m
            << (m == 1 ? " trajectory" : " trajectories") << " to "
            << a.out_path << (merged.truncated ? " (truncated)" : "") << "\n";
  return 0;
}

struct ValidateArgs {
  std::string spec_path;
  std::string events_path;
  std::string out_path;
  double alpha = 0.01;
  std::size_t min_bucket = 50;
};

int cmd_validate(const ValidateArgs& a) {
  const nlohmann::json j = te::load_json_file(a.spec_path);
  if (te::spec_kind(j) != te::SpecKind::kHsmm) {
    throw te::ValidationError("event validation needs a continuous-time spec");
  }
  const te::ValidatedSpec v{te::process_spec_from_json(j)};
  const te::EventLog log = te::read_event_file(a.events_path);
  te::ValidateOptions opts;
  opts.alpha = a.alpha;
  opts.min_bucket = a.min_bucket;
  const te::StatsReport rep = te::validate_run(v, log, opts);
  if (!a.out_path.empty()) te::write_json_file(te::to_json(rep), a.out_path);
  te::print_summary(rep, std::cout);
  return rep.pass ? 0 : 2;
}

struct MeasuresArgs {
  std::string spec_path;
  double rate = 1.0;
  double lattice_dt = 0.01;
  double rank_tol = 1e-10;
};

int cmd_measures(const MeasuresArgs& a) {
  const nlohmann::json j = te::load_json_file(a.spec_path);
  te::MemoryMeasures mc, mq;
  if (te::spec_kind(j) == te::SpecKind::kHsmm) {
    const te::ValidatedSpec v{te::process_spec_from_json(j)};
    mc = te::classical_measures(v);
    te::MemoryBasis basis = [&] {
      try {
        return te::analytic_gram(v);
      } catch (const te::UnsupportedDwellFamilyError&) {
        const double t_max = te::survival_horizon(v, 1e-12);
        const double steps = std::ceil(t_max / a.lattice_dt);
        return te::extract_states(
            te::gram_fixed_point(v, a.lattice_dt, steps * a.lattice_dt),
            a.rank_tol);
      }
    }();
    mq = te::quantum_measures(v, basis);
  } else {
    const te::ValidatedDiscreteSpec v{te::discrete_spec_from_json(j)};
    mc = te::classical_measures(v);
    const te::DiscreteModel dm = te::discrete_model(v, a.rank_tol);
    mq = te::quantum_measures(v, dm.basis);
  }
  std::cout << std::left << std::setw(10) << "measure" << std::setw(16)
            << "classical" << "quantum\n";
  std::cout << std::setw(10) << "D (bits)" << std::setw(16)
            << measure_cell(mc, true) << measure_cell(mq, true) << "\n";
  std::cout << std::setw(10) << "C (bits)" << std::setw(16)
            << measure_cell(mc, false) << measure_cell(mq, false) << "\n";
  if (mc.divergent) {
    std::cout << "classical memory diverges; quantum model stays finite\n";
  }
  return 0;
}

struct ReverseArgs {
  std::string model_path;
  std::string out_path = "extracted_spec.json";
  double grid_max = 0.0;
  int grid_points = 400;
};

int cmd_reverse(const ReverseArgs& a) {
  const te::Lindblad lb =
      te::lindblad_from_json(te::load_json_file(a.model_path));
  te::ReverseOptions opts;
  opts.grid_max = a.grid_max;
  opts.grid_points = a.grid_points;
  const te::ProcessSpec spec = te::extract_hsmm(lb, opts);
  const te::ValidatedSpec v{spec};
  te::write_json_file(te::to_json(spec), a.out_path);
  std::cout << "extracted " << v.n_modes() << " modes over "
            << spec.symbols.size() << " symbols; wrote " << a.out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantum embeddings of classical stochastic processes"};
  app.require_subcommand(1);

  EmbedArgs ea;
  CLI::App* embed = app.add_subcommand(
      "embed", "build a quantum model and extract its generators");
  embed->add_option("--spec", ea.spec_path, "process spec JSON")->required();
  embed->add_option("--out", ea.out_path, "output model JSON");
  embed->add_option("--report", ea.report_path, "convergence report JSON");
  embed->add_option("--dt-ladder", ea.dt_ladder,
                    "descending time steps for the extrapolation");
  embed->add_option("--rank-tol", ea.rank_tol, "basis rank cutoff");
  embed->add_option("--lattice-t-max", ea.lattice_t_max,
                    "numeric lattice horizon (0 = automatic)");
  embed->add_flag("--force-numeric", ea.force_numeric,
                  "skip the closed-form pathway");
  embed->add_option("--rate", ea.rate, "event rate for discrete-time specs");

  SimulateArgs sa;
  CLI::App* simulate =
      app.add_subcommand("simulate", "sample quantum trajectories");
  simulate->add_option("--model", sa.model_path, "model JSON")->required();
  simulate->add_option("--out", sa.out_path, "event log path (.jsonl)");
  simulate->add_option("--state-path", sa.state_path,
                       "per-jump state CSV (single trajectory)");
  simulate->add_option("--seed", sa.seed, "master seed");
  CLI::Option* ev = simulate->add_option("--events", sa.n_events,
                                         "events per trajectory");
  simulate->add_option("--time", sa.t_total, "stop time per trajectory")
      ->excludes(ev);
  simulate->add_option("--trajectories", sa.trajectories,
                       "independent trajectories");

  ValidateArgs va;
  CLI::App* validate = app.add_subcommand(
      "validate", "test an event log against a process spec");
  validate->add_option("--spec", va.spec_path, "process spec JSON")
      ->required();
  validate->add_option("--events", va.events_path, "event log (.jsonl/.csv)")
      ->required();
  validate->add_option("--out", va.out_path, "stats report JSON");
  validate->add_option("--alpha", va.alpha, "per-test significance level");
  validate->add_option("--min-bucket", va.min_bucket,
                       "smallest sample size tested");

  MeasuresArgs ma;
  CLI::App* measures = app.add_subcommand(
      "measures", "classical vs quantum memory requirements");
  measures->add_option("--spec", ma.spec_path, "process spec JSON")
      ->required();
  measures->add_option("--rate", ma.rate, "event rate for discrete specs");
  measures->add_option("--lattice-dt", ma.lattice_dt,
                       "grid step for the numeric pathway");
  measures->add_option("--rank-tol", ma.rank_tol, "basis rank cutoff");

  ReverseArgs ra;
  CLI::App* reverse = app.add_subcommand(
      "reverse", "map an erasing model back to a semi-Markov process");
  reverse->add_option("--model", ra.model_path, "model JSON")->required();
  reverse->add_option("--out", ra.out_path, "extracted spec JSON");
  reverse->add_option("--grid-max", ra.grid_max,
                      "dwell grid horizon (0 = automatic)");
  reverse->add_option("--grid-points", ra.grid_points, "dwell grid size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (embed->parsed()) return cmd_embed(ea);
    if (simulate->parsed()) return cmd_simulate(sa);
    if (validate->parsed()) return cmd_validate(va);
    if (measures->parsed()) return cmd_measures(ma);
    if (reverse->parsed()) return cmd_reverse(ra);
  } catch (const te::NotErasingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const te::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
