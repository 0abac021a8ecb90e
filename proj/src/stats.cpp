#include "trajembed/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <utility>

#include "trajembed/errors.hpp"

namespace trajembed {

namespace {

constexpr double kPi = 3.14159265358979323846;

double ks_p_value(double d, double n_eff) {
  const double rn = std::sqrt(n_eff);
  return kolmogorov_q((rn + 0.12 + 0.11 / rn) * d);
}

// Regularized lower incomplete gamma by series, for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 2000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (term < sum * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma by continued fraction, for x >= a + 1.
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 2000; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double kolmogorov_q(double x) {
  if (x <= 1e-8) return 1.0;
  if (x < 1.18) {
    // Theta-series for the CDF, accurate where the tail sum converges slowly.
    const double t = std::exp(-kPi * kPi / (8.0 * x * x));
    const double cdf = std::sqrt(2.0 * kPi) / x *
                       (t + std::pow(t, 9.0) + std::pow(t, 25.0) +
                        std::pow(t, 49.0));
    return std::max(0.0, std::min(1.0, 1.0 - cdf));
  }
  double q = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = 2.0 * std::exp(-2.0 * k * k * x * x);
    q += sign * term;
    sign = -sign;
    if (term < 1e-16) break;
  }
  return std::max(0.0, std::min(1.0, q));
}

double chi_square_tail(double stat, int dof) {
  if (dof < 1) throw ValidationError("chi-square needs at least one dof");
  if (stat < 0.0) throw ValidationError("chi-square statistic is negative");
  if (stat == 0.0) return 1.0;
  const double a = 0.5 * dof;
  const double x = 0.5 * stat;
  const double q =
      x < a + 1.0 ? 1.0 - gamma_p_series(a, x) : gamma_q_cf(a, x);
  return std::max(0.0, std::min(1.0, q));
}

KsResult ks_test(std::vector<double> samples,
                 const std::function<double(double)>& cdf, double alpha) {
  const std::size_t n = samples.size();
  if (n < 50) {
    throw TooFewSamplesError("KS test needs at least 50 samples, got " +
                             std::to_string(n));
  }
  std::sort(samples.begin(), samples.end());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = cdf(samples[i]);
    if (f < -1e-12 || f > 1.0 + 1e-12) {
      throw ValidationError("reference CDF left [0, 1]");
    }
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
  }
  KsResult r;
  r.n = n;
  r.stat = d;
  r.p = ks_p_value(d, static_cast<double>(n));
  r.pass = r.p > alpha;
  return r;
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b,
                       double alpha) {
  if (a.size() < 50 || b.size() < 50) {
    throw TooFewSamplesError("two-sample KS needs at least 50 samples each");
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double va = a[i];
    const double vb = b[j];
    if (va <= vb) ++i;
    if (vb <= va) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na -
                             static_cast<double>(j) / nb));
  }
  KsResult r;
  r.n = a.size() + b.size();
  r.stat = d;
  r.p = ks_p_value(d, na * nb / (na + nb));
  r.pass = r.p > alpha;
  return r;
}

TransitionStats empirical_transition_matrix(const EventLog& log,
                                            std::vector<std::string> symbols) {
  if (log.records.empty()) {
    throw EmptyLogError("transition matrix needs at least one event");
  }
  TransitionStats ts;
  if (symbols.empty()) {
    std::set<std::string> seen;
    for (const EventRecord& r : log.records) seen.insert(r.x);
    symbols.assign(seen.begin(), seen.end());
  }
  ts.symbols = std::move(symbols);
  const int s = static_cast<int>(ts.symbols.size());
  std::map<std::string, int> idx;
  for (int k = 0; k < s; ++k) idx[ts.symbols[k]] = k;
  ts.counts = RealMatrix::Zero(s, s);

  int prev = -1;
  int prev_traj = std::numeric_limits<int>::min();
  for (const EventRecord& r : log.records) {
    const auto it = idx.find(r.x);
    const int cur = it == idx.end() ? -1 : it->second;
    if (r.traj != prev_traj) {
      prev_traj = r.traj;
      prev = -1;
    }
    if (prev >= 0 && cur >= 0) ts.counts(prev, cur) += 1.0;
    prev = cur;
  }
  ts.freq = ts.counts;
  for (int r = 0; r < s; ++r) {
    const double total = ts.counts.row(r).sum();
    if (total > 0.0) ts.freq.row(r) /= total;
  }
  return ts;
}

namespace {

struct Attribution {
  std::map<std::pair<int, int>, std::vector<double>> pair_waits;
  std::map<int, std::vector<double>> mode_waits;
  RealMatrix branch_counts;  // modes x symbols
  std::vector<double> symbol_counts;
  std::size_t attributed = 0;
  bool impossible = false;
  std::string note;
};

Attribution attribute(const ValidatedSpec& v, const EventLog& log) {
  Attribution at;
  const int n_modes = v.n_modes();
  const int n_sym = v.n_symbols();
  at.branch_counts = RealMatrix::Zero(n_modes, n_sym);
  at.symbol_counts.assign(static_cast<std::size_t>(n_sym), 0.0);

  std::vector<char> cand(static_cast<std::size_t>(n_modes), 1);
  int cur_traj = std::numeric_limits<int>::min();
  for (const EventRecord& rec : log.records) {
    if (rec.traj != cur_traj) {
      cur_traj = rec.traj;
      std::fill(cand.begin(), cand.end(), 1);
    }
    int sym = -1;
    try {
      sym = v.symbol_index(rec.x);
    } catch (const ValidationError&) {
      at.impossible = true;
      at.note = "symbol '" + rec.x + "' is not in the spec alphabet";
      return at;
    }
    at.symbol_counts[static_cast<std::size_t>(sym)] += 1.0;

    int known = -1;
    if (!rec.mode.empty()) {
      known = v.mode_index(rec.mode);
    } else {
      int only = -1, count = 0;
      for (int g = 0; g < n_modes; ++g) {
        if (cand[static_cast<std::size_t>(g)]) {
          only = g;
          ++count;
        }
      }
      if (count == 1) known = only;
    }

    if (known >= 0) {
      const Branch* b = v.branch(known, rec.x);
      if (b == nullptr || b->prob <= 0.0) {
        at.impossible = true;
        at.note = "mode '" + v.spec().modes[known] +
                  "' cannot emit symbol '" + rec.x + "'";
        return at;
      }
      at.pair_waits[{known, sym}].push_back(rec.t);
      at.mode_waits[known].push_back(rec.t);
      at.branch_counts(known, sym) += 1.0;
      ++at.attributed;
    }

    std::vector<char> next(static_cast<std::size_t>(n_modes), 0);
    if (known >= 0) {
      next[static_cast<std::size_t>(v.successor(known, rec.x))] = 1;
    } else {
      bool any = false;
      for (int g = 0; g < n_modes; ++g) {
        if (!cand[static_cast<std::size_t>(g)]) continue;
        const Branch* b = v.branch(g, rec.x);
        if (b != nullptr && b->prob > 0.0) {
          next[static_cast<std::size_t>(v.mode_index(b->to))] = 1;
          any = true;
        }
      }
      if (!any) {
        at.impossible = true;
        at.note = "symbol sequence is impossible under the spec";
        return at;
      }
    }
    cand = std::move(next);
  }
  return at;
}

}  // namespace

StatsReport validate_run(const ValidatedSpec& v, const EventLog& log,
                         const ValidateOptions& opts) {
  if (log.records.empty()) {
    throw EmptyLogError("event log holds no records");
  }
  StatsReport rep;
  rep.alpha = opts.alpha;
  rep.n_events = log.records.size();
  rep.transitions = empirical_transition_matrix(log, v.spec().symbols);

  const Attribution at = attribute(v, log);
  rep.n_attributed = at.attributed;
  rep.impossible_sequence = at.impossible;
  if (at.impossible) rep.notes.push_back(at.note);

  bool all_pass = !at.impossible;

  // Per-branch waits against the conditional dwell law.
  for (const auto& [key, waits] : at.pair_waits) {
    const auto& [g, sym] = key;
    const std::string& mode_name = v.spec().modes[g];
    const std::string& sym_name = v.spec().symbols[sym];
    if (waits.size() < opts.min_bucket) {
      rep.notes.push_back("skipped KS for (" + mode_name + ", " + sym_name +
                          "): " + std::to_string(waits.size()) + " < " +
                          std::to_string(opts.min_bucket) + " samples");
      continue;
    }
    const Branch* b = v.branch(g, sym_name);
    KsRow row;
    row.mode = mode_name;
    row.symbol = sym_name;
    row.ks = ks_test(
        waits, [&](double t) { return b->dwell.cdf(t); }, opts.alpha);
    all_pass = all_pass && row.ks.pass;
    rep.ks_rows.push_back(std::move(row));
  }

  // Pooled waits per mode against the dwell mixture.
  for (const auto& [g, waits] : at.mode_waits) {
    const std::string& mode_name = v.spec().modes[g];
    if (waits.size() < opts.min_bucket) {
      rep.notes.push_back("skipped pooled KS for " + mode_name + ": " +
                          std::to_string(waits.size()) + " < " +
                          std::to_string(opts.min_bucket) + " samples");
      continue;
    }
    const auto& branches = v.branches(g);
    KsRow row;
    row.mode = mode_name;
    row.symbol = "*";
    row.ks = ks_test(
        waits,
        [&](double t) {
          double f = 0.0;
          for (const Branch& b : branches) f += b.prob * b.dwell.cdf(t);
          return f;
        },
        opts.alpha);
    all_pass = all_pass && row.ks.pass;
    rep.ks_rows.push_back(std::move(row));
  }

  // Three-sigma binomial bands on attributed branch frequencies.
  for (int g = 0; g < v.n_modes(); ++g) {
    const double n_mode = at.branch_counts.row(g).sum();
    if (n_mode < static_cast<double>(opts.min_bucket)) continue;
    for (int s = 0; s < v.n_symbols(); ++s) {
      const Branch* b = v.branch(g, v.spec().symbols[s]);
      const double expected = b == nullptr ? 0.0 : b->prob;
      const double observed = at.branch_counts(g, s) / n_mode;
      if (expected <= 0.0 && observed <= 0.0) continue;
      BandRow row;
      row.mode = v.spec().modes[g];
      row.symbol = v.spec().symbols[s];
      row.n_mode = static_cast<std::size_t>(n_mode);
      row.expected = expected;
      row.observed = observed;
      row.band = 3.0 * std::sqrt(expected * (1.0 - expected) / n_mode);
      row.pass = std::abs(observed - expected) <= row.band;
      all_pass = all_pass && row.pass;
      rep.band_rows.push_back(row);
    }
  }

  // Marginal symbol frequencies against the stationary mixture.
  if (!at.impossible) {
    const RealVector pi = stationary_mode_dist(v);
    double chi = 0.0;
    int cells = 0;
    const double total = static_cast<double>(rep.n_events);
    for (int s = 0; s < v.n_symbols(); ++s) {
      double p = 0.0;
      for (int g = 0; g < v.n_modes(); ++g) {
        const Branch* b = v.branch(g, v.spec().symbols[s]);
        if (b != nullptr) p += pi(g) * b->prob;
      }
      const double observed = at.symbol_counts[static_cast<std::size_t>(s)];
      if (p <= 0.0) {
        if (observed > 0.0) {
          rep.impossible_sequence = true;
          rep.notes.push_back("symbol '" + v.spec().symbols[s] +
                              "' observed but has zero stationary weight");
          all_pass = false;
        }
        continue;
      }
      const double expected = total * p;
      chi += (observed - expected) * (observed - expected) / expected;
      ++cells;
    }
    if (cells >= 2) {
      rep.chi_stat = chi;
      rep.chi_dof = cells - 1;
      rep.chi_p = chi_square_tail(chi, rep.chi_dof);
      rep.chi_pass = rep.chi_p > opts.alpha;
      all_pass = all_pass && rep.chi_pass;
    } else {
      rep.notes.push_back("single-symbol alphabet: chi-square skipped");
    }
  }

  rep.pass = all_pass;
  return rep;
}

StatsReport compare_logs(const ValidatedSpec& v, const EventLog& a,
                         const EventLog& b, const ValidateOptions& opts) {
  if (a.records.empty() || b.records.empty()) {
    throw EmptyLogError("event log holds no records");
  }
  StatsReport rep;
  rep.alpha = opts.alpha;
  rep.n_events = a.records.size() + b.records.size();
  rep.transitions = empirical_transition_matrix(a, v.spec().symbols);

  const Attribution at_a = attribute(v, a);
  const Attribution at_b = attribute(v, b);
  rep.n_attributed = at_a.attributed + at_b.attributed;
  rep.impossible_sequence = at_a.impossible || at_b.impossible;
  if (at_a.impossible) rep.notes.push_back("first log: " + at_a.note);
  if (at_b.impossible) rep.notes.push_back("second log: " + at_b.note);
  bool all_pass = !rep.impossible_sequence;

  for (const auto& [key, waits_a] : at_a.pair_waits) {
    const auto it = at_b.pair_waits.find(key);
    if (it == at_b.pair_waits.end()) continue;
    const std::string& mode_name = v.spec().modes[key.first];
    const std::string& sym_name = v.spec().symbols[key.second];
    if (waits_a.size() < opts.min_bucket || it->second.size() < opts.min_bucket) {
      rep.notes.push_back("skipped two-sample KS for (" + mode_name + ", " +
                          sym_name + "): undersized bucket");
      continue;
    }
    KsRow row;
    row.mode = mode_name;
    row.symbol = sym_name;
    row.ks = ks_two_sample(waits_a, it->second, opts.alpha);
    all_pass = all_pass && row.ks.pass;
    rep.ks_rows.push_back(std::move(row));
  }
  for (const auto& [g, waits_a] : at_a.mode_waits) {
    const auto it = at_b.mode_waits.find(g);
    if (it == at_b.mode_waits.end()) continue;
    if (waits_a.size() < opts.min_bucket || it->second.size() < opts.min_bucket) {
      continue;
    }
    KsRow row;
    row.mode = v.spec().modes[g];
    row.symbol = "*";
    row.ks = ks_two_sample(waits_a, it->second, opts.alpha);
    all_pass = all_pass && row.ks.pass;
    rep.ks_rows.push_back(std::move(row));
  }

  // Homogeneity of the marginal symbol counts.
  double chi = 0.0;
  int cells = 0;
  const double na = static_cast<double>(a.records.size());
  const double nb = static_cast<double>(b.records.size());
  for (int s = 0; s < v.n_symbols(); ++s) {
    const double ca = at_a.symbol_counts[static_cast<std::size_t>(s)];
    const double cb = at_b.symbol_counts[static_cast<std::size_t>(s)];
    const double tot = ca + cb;
    if (tot <= 0.0) continue;
    const double ea = tot * na / (na + nb);
    const double eb = tot * nb / (na + nb);
    chi += (ca - ea) * (ca - ea) / ea + (cb - eb) * (cb - eb) / eb;
    ++cells;
  }
  if (cells >= 2) {
    rep.chi_stat = chi;
    rep.chi_dof = cells - 1;
    rep.chi_p = chi_square_tail(chi, rep.chi_dof);
    rep.chi_pass = rep.chi_p > opts.alpha;
    all_pass = all_pass && rep.chi_pass;
  }

  rep.pass = all_pass;
  return rep;
}

nlohmann::json to_json(const StatsReport& report) {
  nlohmann::json j;
  j["alpha"] = report.alpha;
  j["n_events"] = report.n_events;
  j["n_attributed"] = report.n_attributed;
  j["impossible_sequence"] = report.impossible_sequence;
  nlohmann::json ks = nlohmann::json::array();
  for (const KsRow& row : report.ks_rows) {
    ks.push_back({{"mode", row.mode},
                  {"symbol", row.symbol},
                  {"n", row.ks.n},
                  {"stat", row.ks.stat},
                  {"p", row.ks.p},
                  {"pass", row.ks.pass}});
  }
  j["ks"] = ks;
  nlohmann::json bands = nlohmann::json::array();
  for (const BandRow& row : report.band_rows) {
    bands.push_back({{"mode", row.mode},
                     {"symbol", row.symbol},
                     {"n_mode", row.n_mode},
                     {"expected", row.expected},
                     {"observed", row.observed},
                     {"band", row.band},
                     {"pass", row.pass}});
  }
  j["bands"] = bands;
  j["chi2"] = {{"stat", report.chi_stat},
               {"dof", report.chi_dof},
               {"p", report.chi_p},
               {"pass", report.chi_pass}};
  nlohmann::json sym_rows = nlohmann::json::array();
  for (std::size_t r = 0; r < report.transitions.symbols.size(); ++r) {
    nlohmann::json row;
    row["from"] = report.transitions.symbols[r];
    nlohmann::json freq = nlohmann::json::object();
    for (std::size_t c = 0; c < report.transitions.symbols.size(); ++c) {
      freq[report.transitions.symbols[c]] =
          report.transitions.freq(static_cast<int>(r), static_cast<int>(c));
    }
    row["freq"] = freq;
    sym_rows.push_back(row);
  }
  j["transitions"] = sym_rows;
  j["notes"] = report.notes;
  j["pass"] = report.pass;
  return j;
}

void print_summary(const StatsReport& report, std::ostream& out) {
  out << "events: " << report.n_events << " (attributed "
      << report.n_attributed << ")\n";
  out << std::fixed << std::setprecision(4);
  for (const KsRow& row : report.ks_rows) {
    out << "  KS waits (mode=" << row.mode << ", symbol=" << row.symbol
        << "): n=" << row.ks.n << " D=" << row.ks.stat << " p=" << row.ks.p
        << (row.ks.pass ? " PASS" : " FAIL") << "\n";
  }
  for (const BandRow& row : report.band_rows) {
    out << "  band (mode=" << row.mode << ", symbol=" << row.symbol
        << "): obs=" << row.observed << " exp=" << row.expected
        << " band=" << row.band << (row.pass ? " PASS" : " FAIL") << "\n";
  }
  if (report.chi_dof > 0) {
    out << "  chi2 symbols: stat=" << report.chi_stat
        << " dof=" << report.chi_dof << " p=" << report.chi_p
        << (report.chi_pass ? " PASS" : " FAIL") << "\n";
  }
  for (const std::string& note : report.notes) {
    out << "  note: " << note << "\n";
  }
  out << "verdict: " << (report.pass ? "PASS" : "FAIL") << "\n";
  out << std::defaultfloat;
}

}  // namespace trajembed
