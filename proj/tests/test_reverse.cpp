#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "oracle_helpers.hpp"
#include "trajembed/embedding.hpp"
#include "trajembed/errors.hpp"
#include "trajembed/process.hpp"
#include "trajembed/reverse.hpp"
#include "trajembed/trajectory.hpp"

using namespace trajembed;
using namespace testutil;

namespace {

Lindblad identity_jump_model() {
  Lindblad lb;
  lb.h = Matrix::Zero(2, 2);
  lb.symbols = {"a"};
  lb.jumps = {Matrix::Identity(2, 2)};
  return lb;
}

int symbol_slot(const ErasingStructure& es, const std::string& sym) {
  for (std::size_t i = 0; i < es.symbols.size(); ++i) {
    if (es.symbols[i] == sym) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

TEST_CASE("erasing detection on the two-channel model") {
  const ValidatedSpec v{two_channel_spec(0.25)};
  const EmbedResult res = embed_process(v);
  const ErasingCheck chk = is_erasing(res.lindblad);
  REQUIRE(chk.erasing);
  CHECK(chk.worst_ratio < 1e-8);
  REQUIRE(chk.structure.has_value());
  const ErasingStructure& es = *chk.structure;
  REQUIRE(es.symbols.size() == 2);

  // post-jump state of symbol 1 restarts mode 1: amplitudes (sqrt p, sqrt(1-p))
  const int s1 = symbol_slot(es, "1");
  REQUIRE(s1 >= 0);
  CHECK(std::abs(es.post_states[s1](0) - Complex(0.5)) < 1e-9);
  CHECK(std::abs(es.post_states[s1](1) - Complex(std::sqrt(0.75))) < 1e-9);

  // rank-one reconstruction recovers each jump operator
  for (std::size_t i = 0; i < es.symbols.size(); ++i) {
    int idx = -1;
    for (std::size_t k = 0; k < res.lindblad.symbols.size(); ++k) {
      if (res.lindblad.symbols[k] == es.symbols[i]) idx = static_cast<int>(k);
    }
    REQUIRE(idx >= 0);
    const Matrix rebuilt =
        es.post_states[i] * es.weight_vectors[i].adjoint();
    CHECK(max_abs_diff(rebuilt, res.lindblad.jumps[idx]) < 1e-8);
  }
}

TEST_CASE("non-erasing and degenerate channels") {
  const ErasingCheck chk = is_erasing(identity_jump_model());
  CHECK_FALSE(chk.erasing);
  CHECK(chk.worst_ratio == doctest::Approx(1.0));
  CHECK(chk.offending == "a");

  // zero channels are skipped rather than misread as rank one
  Lindblad lb = identity_jump_model();
  lb.symbols = {"a", "quiet"};
  lb.jumps = {Matrix(std::sqrt(0.5) *
                     (Vector::Unit(2, 0) * Vector::Unit(2, 1).adjoint())),
              Matrix::Zero(2, 2)};
  const ErasingCheck ok = is_erasing(lb);
  CHECK(ok.erasing);
  REQUIRE(ok.structure.has_value());
  CHECK(ok.structure->symbols == std::vector<std::string>{"a"});
}

TEST_CASE("lifted never-repeat chain is erasing") {
  const ValidatedDiscreteSpec v{three_state_spec()};
  const EmbedResult res = embed_discrete(v, 1.0);
  const ErasingCheck chk = is_erasing(res.lindblad);
  REQUIRE(chk.erasing);
  REQUIRE(chk.structure->symbols.size() == 3);

  // every post-jump state is the memory state of the emitted symbol
  const ErasingStructure& es = *chk.structure;
  for (int s = 0; s < 3; ++s) {
    const int slot = symbol_slot(es, v.spec().symbols[s]);
    REQUIRE(slot >= 0);
    const double fid =
        std::abs(es.post_states[slot].dot(res.basis.state(s, 0.0)));
    CHECK(std::abs(fid - 1.0) < 1e-12);
  }
}

TEST_CASE("next-event density closed form") {
  const ValidatedSpec v{two_channel_spec(0.25)};
  const EmbedResult res = embed_process(v);
  const ErasingCheck chk = is_erasing(res.lindblad);
  REQUIRE(chk.erasing);
  const ErasingStructure& es = *chk.structure;
  const int s1 = symbol_slot(es, "1");
  const int s2 = symbol_slot(es, "2");

  // from the restart of symbol 1 (mode 1): joint density p gamma_1 exp(-g1 t)
  for (double t : {0.0, 0.3, 1.0, 2.5}) {
    const double d11 = next_event_density(res.lindblad, es, s1, s1, t);
    CHECK(std::abs(d11 - 0.25 * 2.0 * std::exp(-2.0 * t)) < 1e-7);
    const double d12 = next_event_density(res.lindblad, es, s1, s2, t);
    CHECK(std::abs(d12 - 0.75 * 1.0 * std::exp(-1.0 * t)) < 1e-7);
  }
  CHECK(next_event_density(res.lindblad, es, s1, s1, 100.0) < 1e-12);

  // survival identity: total emitted mass complements the no-jump survival
  const Propagator prop(res.lindblad);
  const double t_end = 1.7;
  double emitted = 0.0;
  for (int to : {s1, s2}) {
    emitted += simpson(
        [&](double t) { return next_event_density(res.lindblad, es, s1, to, t); },
        0.0, t_end, 4000);
  }
  CHECK(std::abs(emitted + prop.survival(es.post_states[s1], t_end) - 1.0) <
        1e-6);
}

TEST_CASE("next-event density respects forbidden transitions") {
  const ValidatedDiscreteSpec v{three_state_spec()};
  const EmbedResult res = embed_discrete(v, 1.0);
  const ErasingCheck chk = is_erasing(res.lindblad);
  REQUIRE(chk.erasing);
  const ErasingStructure& es = *chk.structure;
  const int sx = symbol_slot(es, "x");
  REQUIRE(sx >= 0);
  // after emitting x the chain sits in the x state, which never repeats x
  for (double t : {0.1, 0.5, 2.0}) {
    CHECK(next_event_density(res.lindblad, es, sx, sx, t) < 1e-12);
  }
}

TEST_CASE("gauge covariance of the erasing structure") {
  const ValidatedSpec v{two_channel_spec(0.25)};
  const EmbedResult res = embed_process(v);

  // conjugating the whole model by a fixed unitary rotates the states but
  // leaves every observable density unchanged
  const double th = 0.4;
  Matrix u(2, 2);
  u << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  Lindblad rotated = res.lindblad;
  rotated.h = u * rotated.h * u.adjoint();
  for (Matrix& j : rotated.jumps) j = u * j * u.adjoint();
  for (Vector& s : rotated.start_states) s = u * s;

  const ErasingCheck a = is_erasing(res.lindblad);
  const ErasingCheck b = is_erasing(rotated);
  REQUIRE(a.erasing);
  REQUIRE(b.erasing);
  for (double t : {0.2, 1.1}) {
    for (int from = 0; from < 2; ++from) {
      for (int to = 0; to < 2; ++to) {
        CHECK(std::abs(
                  next_event_density(res.lindblad, *a.structure, from, to, t) -
                  next_event_density(rotated, *b.structure, from, to, t)) <
              1e-10);
      }
    }
  }
}

TEST_CASE("extraction recovers the two-channel process") {
  const ValidatedSpec src{two_channel_spec(0.25)};
  const EmbedResult res = embed_process(src);
  const ProcessSpec out = extract_hsmm(res.lindblad);
  const ValidatedSpec v{out};
  REQUIRE(v.n_modes() == 2);
  REQUIRE(v.n_symbols() == 2);

  const int m1 = v.mode_index("1");
  const Branch* b11 = v.branch(m1, "1");
  const Branch* b12 = v.branch(m1, "2");
  REQUIRE(b11 != nullptr);
  REQUIRE(b12 != nullptr);
  CHECK(b11->prob == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(b12->prob == doctest::Approx(0.75).epsilon(1e-6));
  CHECK(b11->to == "1");
  CHECK(b12->to == "2");

  // dwell laws come back as exponentials with the source rates
  REQUIRE(b11->dwell.kind() == DwellDistribution::Kind::kExpMixture);
  const auto& comps = b11->dwell.components();
  REQUIRE(comps.size() == 1);
  CHECK(comps[0].rate == doctest::Approx(2.0).epsilon(1e-5));
  for (double t : {0.1, 0.6, 2.0}) {
    CHECK(b11->dwell.density(t) ==
          doctest::Approx(2.0 * std::exp(-2.0 * t)).epsilon(1e-5));
  }
}

TEST_CASE("extraction of the lifted chain is rate covariant") {
  const ValidatedDiscreteSpec chain{three_state_spec()};
  for (double gamma : {1.0, 3.0}) {
    const EmbedResult res = embed_discrete(chain, gamma);
    const ProcessSpec out = extract_hsmm(res.lindblad);
    const ValidatedSpec v{out};
    REQUIRE(v.n_modes() == 3);
    for (int g = 0; g < 3; ++g) {
      double self = 0.0;
      for (const Branch& b : v.branches(g)) {
        if (b.symbol == v.spec().modes[g]) {
          self = b.prob;
          continue;
        }
        CHECK(b.prob == doctest::Approx(0.5).epsilon(1e-6));
        REQUIRE(b.dwell.kind() == DwellDistribution::Kind::kExpMixture);
        REQUIRE(b.dwell.components().size() == 1);
        CHECK(b.dwell.components()[0].rate ==
              doctest::Approx(gamma).epsilon(1e-5));
      }
      // a symbol never repeats, so there is no self branch
      CHECK(self == doctest::Approx(0.0));
    }
  }
}

TEST_CASE("single-channel model extracts to a renewal process") {
  const ValidatedSpec src{poisson_spec(1.3)};
  const EmbedResult res = embed_process(src);
  const ProcessSpec out = extract_hsmm(res.lindblad);
  const ValidatedSpec v{out};
  REQUIRE(v.n_modes() == 1);
  const Branch* b = v.branch(0, v.spec().symbols[0]);
  REQUIRE(b != nullptr);
  CHECK(b->prob == doctest::Approx(1.0));
  CHECK(b->dwell.components()[0].rate == doctest::Approx(1.3).epsilon(1e-6));
}

TEST_CASE("extraction refuses bad input") {
  CHECK_THROWS_AS(extract_hsmm(identity_jump_model()), NotErasingError);

  const ValidatedSpec src{two_channel_spec(0.25)};
  const EmbedResult res = embed_process(src);
  ReverseOptions opts;
  opts.grid_max = 1.0;  // far too short for a rate-1 channel
  CHECK_THROWS_AS(extract_hsmm(res.lindblad, opts), GridTooShortError);

  ReverseOptions coarse;
  coarse.grid_points = 4;
  CHECK_THROWS_AS(extract_hsmm(res.lindblad, coarse), ValidationError);
}

TEST_CASE("random erasing models extract to valid specs") {
  RngStream rng(4242);
  for (int trial = 0; trial < 3; ++trial) {
    // two random unit post states and random positive weight rows
    auto rand_unit = [&]() {
      Vector v(2);
      v << Complex(rng.uniform01() - 0.5, rng.uniform01() - 0.5),
          Complex(rng.uniform01() - 0.5, rng.uniform01() - 0.5);
      return Vector(v / v.norm());
    };
    Lindblad lb;
    lb.h = Matrix::Zero(2, 2);
    lb.symbols = {"u", "v"};
    for (int x = 0; x < 2; ++x) {
      Vector phi(2);
      phi << 0.4 + rng.uniform01(), 0.4 + rng.uniform01();
      lb.jumps.push_back(Matrix(rand_unit() * phi.adjoint()));
    }
    const ErasingCheck chk = is_erasing(lb);
    REQUIRE(chk.erasing);
    const ProcessSpec out = extract_hsmm(lb);
    const ValidatedSpec v{out};
    CHECK(v.n_modes() == 2);
    for (int g = 0; g < 2; ++g) {
      double mass = 0.0;
      for (const Branch& b : v.branches(g)) mass += b.prob;
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("roundtrip through the quantum model") {
  {
    const ValidatedSpec v{two_channel_spec(0.25)};
    const RoundtripReport rep = roundtrip_check(v);
    CHECK(rep.pass);
    CHECK(rep.max_prob_err < 1e-6);
    CHECK(rep.max_density_err < 1e-6);
  }
  {
    const ValidatedSpec v{two_channel_spec(0.75)};
    const RoundtripReport rep = roundtrip_check(v);
    CHECK(rep.pass);
  }
}
