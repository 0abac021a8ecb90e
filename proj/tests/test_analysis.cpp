#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "oracle_helpers.hpp"
#include "trajembed/embedding.hpp"
#include "trajembed/errors.hpp"
#include "trajembed/event_log.hpp"
#include "trajembed/process.hpp"
#include "trajembed/stats.hpp"
#include "trajembed/trajectory.hpp"

using namespace trajembed;
using namespace testutil;

namespace {

EventLog make_log(const std::vector<std::pair<std::string, double>>& events) {
  EventLog log;
  for (const auto& [x, t] : events) {
    EventRecord r;
    r.x = x;
    r.t = t;
    log.records.push_back(r);
  }
  return log;
}

}  // namespace

TEST_CASE("kolmogorov tail against reference values") {
  // reference values computed from the theta-series at 60-digit precision
  CHECK(kolmogorov_q(0.3) == doctest::Approx(0.99999069419866543).epsilon(1e-12));
  CHECK(kolmogorov_q(0.5) == doctest::Approx(0.96394524366487509).epsilon(1e-12));
  CHECK(kolmogorov_q(0.8) == doctest::Approx(0.54414241157419815).epsilon(1e-12));
  CHECK(kolmogorov_q(1.0) == doctest::Approx(0.26999967167735452).epsilon(1e-12));
  CHECK(kolmogorov_q(1.5) == doctest::Approx(0.022217962616525129).epsilon(1e-12));
  CHECK(kolmogorov_q(2.0) ==
        doctest::Approx(0.00067092525577969535).epsilon(1e-10));

  // continuity where the two series meet
  const double left = kolmogorov_q(1.18 - 1e-9);
  const double right = kolmogorov_q(1.18 + 1e-9);
  CHECK(std::abs(left - right) < 1e-8);
  CHECK(kolmogorov_q(1.18) ==
        doctest::Approx(0.12345380942976568).epsilon(1e-10));

  CHECK(kolmogorov_q(0.0) == doctest::Approx(1.0));
  CHECK(kolmogorov_q(10.0) < 1e-15);
}

TEST_CASE("chi-square tail against reference values") {
  // dof 1 at stat 1 is erfc(1/sqrt(2))
  CHECK(chi_square_tail(1.0, 1) ==
        doctest::Approx(0.3173105078629141).epsilon(1e-12));
  // dof 2 is exp(-stat/2)
  CHECK(chi_square_tail(2.0, 2) ==
        doctest::Approx(0.36787944117144232).epsilon(1e-12));
  // the canonical 5 percent critical value at dof 3
  CHECK(chi_square_tail(7.814727903251179, 3) ==
        doctest::Approx(0.05).epsilon(1e-10));
  // series branch (stat < dof + 1)
  CHECK(chi_square_tail(5.0, 10) ==
        doctest::Approx(0.89117801891415124).epsilon(1e-12));
  // continued-fraction branch (stat well above dof)
  CHECK(chi_square_tail(20.0, 4) ==
        doctest::Approx(0.00049939922738733337).epsilon(1e-10));

  CHECK(chi_square_tail(0.0, 5) == doctest::Approx(1.0));
  CHECK_THROWS_AS(chi_square_tail(1.0, 0), ValidationError);
}

TEST_CASE("one-sample ks on a hand-computed case") {
  // samples i/50 against the uniform cdf: D = 1/50 exactly
  std::vector<double> u;
  for (int i = 1; i <= 50; ++i) u.push_back(i / 50.0);
  const auto uniform = [](double x) { return std::min(1.0, std::max(0.0, x)); };
  const KsResult r = ks_test(u, uniform, 0.01);
  CHECK(r.n == 50);
  CHECK(r.stat == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(r.p > 0.999);
  CHECK(r.pass);

  std::vector<double> few(49, 0.5);
  CHECK_THROWS_AS(ks_test(few, uniform, 0.01), TooFewSamplesError);
}

TEST_CASE("ks calibration and power") {
  const auto exp_cdf = [](double x) { return 1.0 - std::exp(-x); };

  int passes = 0;
  for (int seed = 0; seed < 100; ++seed) {
    RngStream rng(1000 + seed);
    std::vector<double> s;
    for (int i = 0; i < 10000; ++i) s.push_back(rng.exponential(1.0));
    if (ks_test(s, exp_cdf, 0.01).pass) ++passes;
  }
  CHECK(passes >= 96);  // alpha 0.01 makes ~99 expected

  // power: rate-2 samples against the rate-1 cdf are decisively rejected
  RngStream rng(7);
  std::vector<double> wrong;
  for (int i = 0; i < 10000; ++i) wrong.push_back(rng.exponential(2.0));
  const KsResult r = ks_test(wrong, exp_cdf, 0.01);
  CHECK_FALSE(r.pass);
  CHECK(r.p < 1e-6);
}

TEST_CASE("two-sample ks") {
  RngStream rng(21);
  std::vector<double> a, b, c;
  for (int i = 0; i < 5000; ++i) {
    a.push_back(rng.exponential(1.0));
    b.push_back(rng.exponential(1.0));
    c.push_back(rng.exponential(2.0));
  }
  CHECK(ks_two_sample(a, b, 0.01).pass);
  const KsResult bad = ks_two_sample(a, c, 0.01);
  CHECK_FALSE(bad.pass);
  CHECK(bad.p < 1e-6);
}

TEST_CASE("empirical transition matrix") {
  const EventLog log = make_log(
      {{"a", 1.0}, {"b", 1.0}, {"a", 1.0}, {"a", 1.0}, {"b", 1.0}});
  const TransitionStats ts = empirical_transition_matrix(log);
  REQUIRE(ts.symbols == std::vector<std::string>{"a", "b"});
  // pairs: ab, ba, aa, ab
  CHECK(ts.counts(0, 0) == doctest::Approx(1.0));
  CHECK(ts.counts(0, 1) == doctest::Approx(2.0));
  CHECK(ts.counts(1, 0) == doctest::Approx(1.0));
  CHECK(ts.counts(1, 1) == doctest::Approx(0.0));
  CHECK(ts.freq(0, 1) == doctest::Approx(2.0 / 3.0));
  CHECK(ts.freq(1, 0) == doctest::Approx(1.0));

  // trajectory boundaries break pairs
  EventLog multi = make_log({{"a", 1.0}, {"b", 1.0}, {"a", 1.0}, {"b", 1.0}});
  multi.records[0].traj = 0;
  multi.records[1].traj = 0;
  multi.records[2].traj = 1;
  multi.records[3].traj = 1;
  const TransitionStats mts = empirical_transition_matrix(multi);
  CHECK(mts.counts(0, 1) == doctest::Approx(2.0));
  CHECK(mts.counts(1, 0) == doctest::Approx(0.0));

  // deterministic cycle gives a permutation matrix
  const EventLog cyc = make_log(
      {{"a", 1.0}, {"b", 1.0}, {"c", 1.0}, {"a", 1.0}, {"b", 1.0}, {"c", 1.0}});
  const TransitionStats cts = empirical_transition_matrix(cyc);
  CHECK(cts.freq(0, 1) == doctest::Approx(1.0));
  CHECK(cts.freq(1, 2) == doctest::Approx(1.0));
  CHECK(cts.freq(2, 0) == doctest::Approx(1.0));

  CHECK_THROWS_AS(empirical_transition_matrix(EventLog{}), EmptyLogError);
}

TEST_CASE("classical runs validate against their own spec") {
  const ValidatedSpec v{two_channel_spec(0.25)};
  const EventLog log = classical_sample(v, 20000, 31415);
  const StatsReport rep = validate_run(v, log);
  CHECK(rep.pass);
  CHECK(rep.n_events == 20000);
  CHECK(rep.n_attributed > 19000);
  CHECK_FALSE(rep.impossible_sequence);
  bool pooled_seen = false;
  for (const KsRow& row : rep.ks_rows) {
    if (row.symbol == "*") pooled_seen = true;
  }
  CHECK(pooled_seen);
}

TEST_CASE("quantum trajectories validate against the source process") {
  const ValidatedSpec v{two_channel_spec(0.25)};
  const EmbedResult res = embed_process(v);
  const Propagator prop(res.lindblad);
  RngStream rng(2718);
  StopRule stop;
  stop.n_events = 20000;
  const TrajectoryResult tr =
      run_trajectory(res.lindblad, prop, draw_start_state(res.lindblad, rng),
                     rng, stop);
  const StatsReport rep = validate_run(v, tr.log);
  CHECK(rep.pass);
}

TEST_CASE("wrong branch probabilities are caught") {
  const ValidatedSpec right{two_channel_spec(0.25)};
  const ValidatedSpec wrong{two_channel_spec(0.75)};
  const EventLog log = classical_sample(right, 20000, 99);
  const StatsReport rep = validate_run(wrong, log);
  CHECK_FALSE(rep.pass);
  bool band_failed = false;
  for (const BandRow& row : rep.band_rows) {
    if (!row.pass) band_failed = true;
  }
  CHECK(band_failed);
}

TEST_CASE("impossible sequences are flagged") {
  const ValidatedSpec v{two_channel_spec(0.25)};
  {
    EventLog log = classical_sample(v, 200, 5);
    log.records[100].x = "zebra";
    const StatsReport rep = validate_run(v, log);
    CHECK(rep.impossible_sequence);
    CHECK_FALSE(rep.pass);
  }
  {
    // strictly alternating process: two equal symbols in a row are impossible
    ProcessSpec s;
    s.symbols = {"a", "b"};
    s.modes = {"A", "B"};
    s.branches.resize(2);
    Branch ba;
    ba.symbol = "a";
    ba.prob = 1.0;
    ba.to = "B";
    ba.dwell = DwellDistribution::exponential(1.0);
    Branch bb;
    bb.symbol = "b";
    bb.prob = 1.0;
    bb.to = "A";
    bb.dwell = DwellDistribution::exponential(1.0);
    s.branches[0].push_back(ba);
    s.branches[1].push_back(bb);
    const ValidatedSpec alt{s};
    EventLog log = make_log({{"a", 0.5}, {"b", 0.5}, {"b", 0.5}, {"a", 0.5}});
    for (int i = 0; i < 60; ++i) {
      log.records.push_back(log.records[i % 2]);
    }
    const StatsReport rep = validate_run(alt, log);
    CHECK(rep.impossible_sequence);
    CHECK_FALSE(rep.pass);
  }
}

TEST_CASE("validation pass rate is calibrated") {
  const ValidatedSpec v{poisson_spec(1.0)};
  int passes = 0;
  for (int seed = 0; seed < 100; ++seed) {
    const EventLog log = classical_sample(v, 2000, 40000 + seed);
    if (validate_run(v, log).pass) ++passes;
  }
  CHECK(passes >= 95);
}

TEST_CASE("single-symbol alphabets skip the chi-square") {
  const ValidatedSpec v{poisson_spec(1.0)};
  const EventLog log = classical_sample(v, 2000, 8);
  const StatsReport rep = validate_run(v, log);
  CHECK(rep.chi_pass);
  bool noted = false;
  for (const std::string& n : rep.notes) {
    if (n.find("chi-square") != std::string::npos) noted = true;
  }
  CHECK(noted);
}

TEST_CASE("two logs from the same process compare equal") {
  const ValidatedSpec v{two_channel_spec(0.25)};
  const EventLog a = classical_sample(v, 15000, 1);
  const EventLog b = classical_sample(v, 15000, 2);
  CHECK(compare_logs(v, a, b).pass);

  const ValidatedSpec other{two_channel_spec(0.25, 6.0, 1.0)};
  const EventLog c = classical_sample(other, 15000, 3);
  CHECK_FALSE(compare_logs(v, a, c).pass);
}

TEST_CASE("report serialization and printing") {
  const ValidatedSpec v{two_channel_spec(0.25)};
  const EventLog log = classical_sample(v, 5000, 77);
  const StatsReport rep = validate_run(v, log);

  const nlohmann::json j = to_json(rep);
  CHECK(j.at("pass").get<bool>() == rep.pass);
  CHECK(j.at("alpha").get<double>() == rep.alpha);
  CHECK(j.at("n_events").get<std::size_t>() == rep.n_events);

  std::ostringstream out;
  print_summary(rep, out);
  const std::string text = out.str();
  CHECK(text.find("PASS") != std::string::npos);
}
