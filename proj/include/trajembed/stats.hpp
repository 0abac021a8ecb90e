#ifndef TRAJEMBED_STATS_HPP
#define TRAJEMBED_STATS_HPP

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "trajembed/event_log.hpp"
#include "trajembed/process.hpp"
#include "trajembed/types.hpp"

namespace trajembed {

// Tail of the Kolmogorov distribution Q(x) = P(K > x); series chosen by x.
double kolmogorov_q(double x);

// Upper tail of the chi-square distribution with `dof` degrees of freedom.
double chi_square_tail(double stat, int dof);

struct KsResult {
  std::size_t n = 0;
  double stat = 0.0;
  double p = 1.0;
  bool pass = true;
};

// One-sample Kolmogorov-Smirnov against a continuous CDF. Throws
// TooFewSamplesError below 50 samples, where the asymptotic p is unreliable.
KsResult ks_test(std::vector<double> samples,
                 const std::function<double(double)>& cdf, double alpha);

// Two-sample Kolmogorov-Smirnov.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b,
                       double alpha);

// Consecutive-symbol counts (rows: previous symbol, cols: next symbol),
// restarted at trajectory boundaries. Symbol order is taken from `symbols`
// when given, otherwise sorted from the log.
struct TransitionStats {
  std::vector<std::string> symbols;
  RealMatrix counts;
  RealMatrix freq;  // rows normalized where a row has mass
};
TransitionStats empirical_transition_matrix(
    const EventLog& log, std::vector<std::string> symbols = {});

struct KsRow {
  std::string mode;    // "*" for pooled rows
  std::string symbol;  // "*" for pooled rows
  KsResult ks;
};

struct BandRow {
  std::string mode;
  std::string symbol;
  std::size_t n_mode = 0;   // attributed events leaving the mode
  double expected = 0.0;    // branch probability
  double observed = 0.0;    // empirical frequency
  double band = 0.0;        // three-sigma binomial half width
  bool pass = true;
};

struct StatsReport {
  double alpha = 0.0;
  std::vector<KsRow> ks_rows;
  std::vector<BandRow> band_rows;
  TransitionStats transitions;
  double chi_stat = 0.0;
  int chi_dof = 0;
  double chi_p = 1.0;
  bool chi_pass = true;
  std::size_t n_events = 0;
  std::size_t n_attributed = 0;
  bool impossible_sequence = false;
  std::vector<std::string> notes;
  bool pass = false;
};

struct ValidateOptions {
  double alpha = 0.01;
  std::size_t min_bucket = 50;  // KS buckets below this are skipped
};

// Full distributional comparison of an event log against a process spec:
// per-(mode, symbol) KS on waits, pooled per-mode KS against the dwell
// mixture, chi-square on marginal symbol frequencies, and three-sigma bands
// on per-mode branch frequencies. Events are attributed to modes through the
// deterministic successor map (or the log's ground-truth mode fields).
StatsReport validate_run(const ValidatedSpec& v, const EventLog& log,
                         const ValidateOptions& opts = {});

// Two-sample variant comparing per-bucket wait distributions of two logs
// attributed through the same spec.
StatsReport compare_logs(const ValidatedSpec& v, const EventLog& a,
                         const EventLog& b, const ValidateOptions& opts = {});

nlohmann::json to_json(const StatsReport& report);
void print_summary(const StatsReport& report, std::ostream& out);

}  // namespace trajembed

#endif
