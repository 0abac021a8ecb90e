#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "oracle_helpers.hpp"
#include "trajembed/dwell.hpp"
#include "trajembed/errors.hpp"
#include "trajembed/event_log.hpp"
#include "trajembed/process.hpp"
#include "trajembed/rng.hpp"

using namespace trajembed;
using namespace testutil;

TEST_CASE("exponential dwell closed forms") {
  const auto d = DwellDistribution::exponential(2.0);
  CHECK(d.density(0.0) == doctest::Approx(2.0));
  CHECK(d.density(1.0) == doctest::Approx(2.0 * std::exp(-2.0)));
  CHECK(d.cdf(0.0) == doctest::Approx(0.0));
  CHECK(d.cdf(std::log(2.0) / 2.0) == doctest::Approx(0.5));
  CHECK(d.interval_mass(0.5, 1.0) ==
        doctest::Approx(std::exp(-1.0) - std::exp(-2.0)));
  CHECK_THROWS_AS(DwellDistribution::exponential(0.0), NonPositiveRateError);
  CHECK_THROWS_AS(DwellDistribution::exponential(-1.0), NonPositiveRateError);
}

TEST_CASE("mixture dwell mean and normalization") {
  const auto d = DwellDistribution::exp_mixture({{0.25, 2.0}, {0.75, 1.0}});
  // mean = sum of weight / rate
  const double mean = simpson([&](double t) { return t * d.density(t); }, 0.0,
                              60.0, 40000);
  CHECK(mean == doctest::Approx(0.25 / 2.0 + 0.75 / 1.0).epsilon(1e-8));
  CHECK(d.cdf(1e9) == doctest::Approx(1.0));
  CHECK_THROWS_AS(DwellDistribution::exp_mixture({{0.5, 1.0}, {0.6, 2.0}}),
                  NonStochasticError);
}

TEST_CASE("tabulated dwell is an exact piecewise-linear law") {
  // triangle density on [0, 2], peak 1 at t = 1
  const std::vector<double> grid{0.0, 1.0, 2.0};
  const std::vector<double> dens{0.0, 1.0, 0.0};
  const auto d = DwellDistribution::tabulated(grid, dens);
  CHECK(d.cdf(1.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d.cdf(0.5) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(d.cdf(3.0) == doctest::Approx(1.0));
  CHECK(d.density(0.5) == doctest::Approx(0.5));
  // badly normalized table is rejected
  CHECK_THROWS_AS(DwellDistribution::tabulated(grid, {0.0, 2.0, 0.0}),
                  BadDensityError);
  CHECK_THROWS_AS(DwellDistribution::tabulated(grid, {0.0, -1.0, 2.0}),
                  BadDensityError);
}

TEST_CASE("dwell sampling matches the law") {
  RngStream rng(991);
  const auto exp1 = DwellDistribution::exponential(1.0);
  double acc = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) acc += exp1.sample(rng);
  // exponential(1): mean 1, sd 1; allow 4 sigma
  CHECK(std::abs(acc / n - 1.0) < 4.0 / std::sqrt(double(n)));

  const auto tab =
      DwellDistribution::tabulated({0.0, 1.0, 2.0}, {0.0, 1.0, 0.0});
  RngStream rng2(17);
  for (int i = 0; i < 1000; ++i) {
    const double t = tab.sample(rng2);
    CHECK(t >= 0.0);
    CHECK(t <= 2.0);
  }
}

TEST_CASE("spec validation accepts the fixtures") {
  CHECK(check_spec(two_channel_spec(0.25)).empty());
  CHECK(check_spec(poisson_spec()).empty());
  CHECK(check_spec(three_state_spec()).empty());
  CHECK_NOTHROW(ValidatedSpec{two_channel_spec(0.25)});
}

TEST_CASE("spec validation rejects structural violations") {
  {
    auto s = two_channel_spec(0.25);
    s.branches[0][0].prob = 0.5;
    s.branches[0][1].prob = 0.6;
    CHECK_THROWS_AS(ValidatedSpec{s}, NonStochasticError);
  }
  {
    auto s = two_channel_spec(0.25);
    s.branches[0][1].symbol = "1";  // duplicate symbol in mode 1
    CHECK_THROWS_AS(ValidatedSpec{s}, DuplicateSymbolBranchError);
  }
  {
    auto s = two_channel_spec(0.25);
    s.branches[0][0].to = "nowhere";
    CHECK_THROWS_AS(ValidatedSpec{s}, NoSuchBranchError);
  }
  {
    // two disconnected self-loop modes
    auto s = two_channel_spec(0.25);
    s.branches[0][0].prob = 1.0;
    s.branches[0].resize(1);
    s.branches[1][1].prob = 1.0;
    s.branches[1].erase(s.branches[1].begin());
    CHECK_THROWS_AS(ValidatedSpec{s}, UnreachableModeError);
  }
}

TEST_CASE("survival closed forms and quadrature oracle") {
  const ValidatedSpec v{two_channel_spec(0.25)};
  const int g1 = v.mode_index("1");
  CHECK(survival(v, g1, 0.0) == doctest::Approx(1.0));
  CHECK(survival(v, g1, 1.0) ==
        doctest::Approx(0.25 * std::exp(-2.0) + 0.75 * std::exp(-1.0))
            .epsilon(1e-12));
  CHECK(survival(v, g1, 1.0) == doctest::Approx(0.309743).epsilon(1e-5));
  // independent oracle: 1 - integral of the joint next-event density
  const double mass = simpson(
      [&](double t) {
        return dwell_density(v, g1, "1", t) + dwell_density(v, g1, "2", t);
      },
      0.0, 1.0, 2000);
  CHECK(survival(v, g1, 1.0) == doctest::Approx(1.0 - mass).epsilon(1e-10));
  CHECK_THROWS_AS(survival(v, g1, -0.1), NegativeTimeError);

  const ValidatedSpec pois{poisson_spec(1.0)};
  CHECK(survival(pois, 0, std::log(2.0)) == doctest::Approx(0.5));
}

TEST_CASE("dwell density values and missing branches") {
  const ValidatedSpec v{two_channel_spec(0.25)};
  const int g1 = v.mode_index("1");
  CHECK(dwell_density(v, g1, "1", 0.0) == doctest::Approx(0.5));  // p * gamma1
  CHECK(dwell_density(v, g1, "1", 40.0) < 1e-12);
  CHECK_THROWS_AS(dwell_density(v, g1, "missing", 0.1), NoSuchBranchError);

  const ValidatedSpec pois{poisson_spec(1.5)};
  CHECK(dwell_density(pois, 0, "tick", 0.7) ==
        doctest::Approx(1.5 * std::exp(-1.5 * 0.7)));
}

TEST_CASE("survival slope equals the total event density") {
  const ValidatedSpec v{two_channel_spec(0.25)};
  for (int g = 0; g < v.n_modes(); ++g) {
    for (double t : {0.1, 0.5, 1.0, 2.0, 4.0}) {
      const double slope =
          fd_derivative([&](double s) { return survival(v, g, s); }, t);
      double dens = 0.0;
      for (const Branch& b : v.branches(g)) {
        dens += dwell_density(v, g, b.symbol, t);
      }
      CHECK(slope == doctest::Approx(-dens).epsilon(1e-6));
    }
  }
}

TEST_CASE("stationary mode distribution") {
  const ValidatedSpec v{two_channel_spec(0.25)};
  const RealVector pi = stationary_mode_dist(v);
  CHECK(pi(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pi(1) == doctest::Approx(0.5).epsilon(1e-12));

  // asymmetric chain checked against power iteration
  ProcessSpec s = two_channel_spec(0.25);
  s.branches[0][0].prob = 0.9;
  s.branches[0][1].prob = 0.1;
  const ValidatedSpec va{s};
  const RealVector pa = stationary_mode_dist(va);
  RealMatrix t(2, 2);
  t << 0.9, 0.75, 0.1, 0.25;  // column-stochastic from-mode transitions
  const RealVector oracle = power_stationary(t);
  CHECK(pa(0) == doctest::Approx(oracle(0)).epsilon(1e-10));
  CHECK(pa(1) == doctest::Approx(oracle(1)).epsilon(1e-10));

  // invariance under one chain step
  RealVector stepped = t * pa;
  CHECK((stepped - pa).cwiseAbs().maxCoeff() < 1e-12);

  const ValidatedDiscreteSpec d{three_state_spec()};
  const RealVector pd = stationary_state_dist(d);
  for (int i = 0; i < 3; ++i) {
    CHECK(pd(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }

  const ValidatedSpec pois{poisson_spec()};
  CHECK(stationary_mode_dist(pois)(0) == doctest::Approx(1.0));
}

TEST_CASE("classical memory measures") {
  const ValidatedDiscreteSpec d{three_state_spec()};
  const MemoryMeasures md = classical_measures(d);
  CHECK(md.flavor == MeasureFlavor::kClassical);
  CHECK_FALSE(md.divergent);
  CHECK(*md.dimension_bits == doctest::Approx(std::log2(3.0)).epsilon(1e-12));
  CHECK(*md.entropy_bits == doctest::Approx(std::log2(3.0)).epsilon(1e-12));

  const ValidatedSpec v{two_channel_spec(0.25)};
  const MemoryMeasures mc = classical_measures(v);
  CHECK(mc.divergent);
  CHECK_FALSE(mc.dimension_bits.has_value());
  CHECK_FALSE(mc.entropy_bits.has_value());
  CHECK(mean_event_interval(v) == doctest::Approx(0.75).epsilon(1e-12));

  // single-state discrete process has zero memory
  DiscreteProcessSpec one;
  one.symbols = {"a"};
  one.states = {"s"};
  one.branches = {{{"a", 1.0, "s", 0.0}}};
  const MemoryMeasures m1 = classical_measures(ValidatedDiscreteSpec{one});
  CHECK(*m1.dimension_bits == doctest::Approx(0.0));
  CHECK(*m1.entropy_bits == doctest::Approx(0.0));
}

TEST_CASE("classical sampling statistics") {
  const ValidatedSpec pois{poisson_spec(1.0)};
  const EventLog log = classical_sample(pois, 100000, 42);
  REQUIRE(log.records.size() == 100000);
  double mean = 0.0;
  for (const auto& r : log.records) mean += r.t;
  mean /= log.records.size();
  CHECK(std::abs(mean - 1.0) < 0.01);  // three sigma is ~0.0095

  // determinism
  const EventLog again = classical_sample(pois, 1000, 42);
  for (std::size_t i = 0; i < again.records.size(); ++i) {
    CHECK(again.records[i].x == log.records[i].x);
    CHECK(again.records[i].t == log.records[i].t);
  }
}

TEST_CASE("never-repeat structure survives the continuous lift") {
  const ValidatedSpec v{three_state_lift_spec()};
  const EventLog log = classical_sample(v, 20000, 7);
  for (std::size_t i = 1; i < log.records.size(); ++i) {
    CHECK(log.records[i].x != log.records[i - 1].x);
  }
}

TEST_CASE("branch frequencies sit in three-sigma binomial bands") {
  const ValidatedSpec v{two_channel_spec(0.25)};
  SampleOptions opts;
  opts.record_modes = true;
  const EventLog log = classical_sample(v, 100000, 2024, opts);
  std::map<std::string, std::map<std::string, int>> counts;
  std::map<std::string, int> totals;
  for (const auto& r : log.records) {
    counts[r.mode][r.x] += 1;
    totals[r.mode] += 1;
  }
  for (int g = 0; g < v.n_modes(); ++g) {
    const std::string mode = v.spec().modes[g];
    const int n = totals[mode];
    REQUIRE(n > 1000);
    for (const Branch& b : v.branches(g)) {
      const double freq = double(counts[mode][b.symbol]) / n;
      const double band = 3.0 * std::sqrt(b.prob * (1.0 - b.prob) / n);
      CHECK(std::abs(freq - b.prob) <= band);
    }
  }
}

TEST_CASE("zero events yields an empty log") {
  const ValidatedSpec pois{poisson_spec()};
  CHECK(classical_sample(pois, 0, 1).records.empty());
}

TEST_CASE("event log serialization round trips") {
  EventLog log;
  log.generator = "unit-test";
  log.model_hash = "cafebabe";
  log.seed = 77;
  log.records = {{"1", 0.25, "1", -1}, {"2", 1.75, "2", -1}};

  std::stringstream jsonl;
  write_jsonl(log, jsonl);
  const EventLog back = read_jsonl(jsonl);
  REQUIRE(back.records.size() == log.records.size());
  CHECK(back.generator == log.generator);
  CHECK(back.model_hash == log.model_hash);
  CHECK(back.seed == log.seed);
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    CHECK(back.records[i].x == log.records[i].x);
    CHECK(back.records[i].t == log.records[i].t);
  }
  // write -> read -> write is byte-identical
  std::stringstream second;
  write_jsonl(back, second);
  CHECK(second.str() == jsonl.str());

  std::stringstream csv;
  write_csv(log, csv);
  const EventLog csv_back = read_csv(csv);
  REQUIRE(csv_back.records.size() == log.records.size());
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    CHECK(csv_back.records[i].x == log.records[i].x);
    CHECK(csv_back.records[i].t == doctest::Approx(log.records[i].t));
  }
}
