#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "reference_matrix.hpp"
#include "selex/sequence.hpp"
#include "selex/thermo.hpp"

using namespace selex;

namespace {

EnergyMatrix random_matrix(Rng& rng, int l, double lo = -5.0, double hi = 0.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  EnergyMatrix m(l);
  for (int p = 0; p < l; ++p)
    for (int b = 0; b < kAlphabet; ++b) m.at(p, b) = u(rng);
  return m;
}

SelexModel random_model(Rng& rng, int l, int rounds, double c_junk = 0.0) {
  SelexModel model;
  model.matrix = random_matrix(rng, l);
  std::uniform_real_distribution<double> u(-3.0, 0.0);
  for (int r = 0; r < rounds; ++r) model.log_tf.push_back(u(rng));
  model.c_junk = c_junk;
  return model;
}

}  // namespace

TEST_CASE("stable logistic helpers") {
  REQUIRE(sigmoid(0.0) == 0.5);
  REQUIRE(sigmoid(50.0) == Catch::Approx(1.0));
  REQUIRE(sigmoid(-745.0) > 0.0);
  for (double a : {-700.0, -30.0, -1.0, 0.0, 1.0, 30.0, 700.0}) {
    REQUIRE(std::exp(log_sigmoid(a)) == Catch::Approx(sigmoid(a)).epsilon(1e-12));
    REQUIRE(sigmoid(a) > 0.0);
    REQUIRE(sigmoid(a) <= 1.0);
  }
}

TEST_CASE("junk mixture bounds and limits") {
  for (double t : {1e-9, 0.3, 0.999}) {
    REQUIRE(junk_mix(t, 0.0) == t);
    REQUIRE(junk_mix(t, 1.0) == 1.0);
    REQUIRE(junk_mix(t, 0.25) >= t);
    REQUIRE(junk_mix(t, 0.25) <= 1.0);
  }
  for (double a : {-40.0, -3.0, 0.0, 2.0}) {
    for (double c : {0.0, 1e-3, 0.3, 1.0}) {
      const double direct = junk_mix(sigmoid(a), c);
      REQUIRE(std::exp(log_bind_prob_mixed(a, c)) == Catch::Approx(direct).epsilon(1e-12));
    }
  }
}

TEST_CASE("binding probability lies in (0,1) and grows with concentration") {
  Rng rng = make_rng(51);
  SelexModel model = random_model(rng, 4, 3);
  model.log_tf = {-2.0, 0.0, 2.0};
  const Sequence s = Sequence::from_code(rng() & packed_mask(9), 9);
  double prev = 0.0;
  for (int r = 1; r <= 3; ++r) {
    const double t = bind_prob(model, s, r);
    REQUIRE(t > 0.0);
    REQUIRE(t < 1.0);
    REQUIRE(t > prev);
    prev = t;
  }
  REQUIRE_THROWS_AS(bind_prob(model, s, 0), std::out_of_range);
  REQUIRE_THROWS_AS(bind_prob(model, s, 4), std::out_of_range);
}

TEST_CASE("log odds equals concentration plus best-site score") {
  Rng rng = make_rng(53);
  std::uniform_real_distribution<double> ut(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    SelexModel model;
    model.matrix = random_matrix(rng, 6);
    model.log_tf = {ut(rng)};
    const Sequence s = Sequence::from_code(rng() & packed_mask(10), 10);
    const double expected = model.log_tf[0] + best_site(model.matrix, s).energy;
    REQUIRE(std::abs(log_odds(model, s, 1) - expected) < 1e-12);
  }
}

TEST_CASE("row shift compensated by concentration leaves probabilities unchanged") {
  Rng rng = make_rng(59);
  for (int trial = 0; trial < 50; ++trial) {
    SelexModel model = random_model(rng, 5, 2, 0.05);
    SelexModel shifted = model;
    const double c = 1.7;
    const int row = static_cast<int>(rng() % 5);
    for (int b = 0; b < kAlphabet; ++b) shifted.matrix.at(row, b) += c;
    for (double& v : shifted.log_tf) v -= c;
    const Sequence s = Sequence::from_code(rng() & packed_mask(8), 8);
    for (int r = 1; r <= 2; ++r) {
      REQUIRE(bind_prob_mixed(shifted, s, r) ==
              Catch::Approx(bind_prob_mixed(model, s, r)).epsilon(1e-12));
    }
    REQUIRE(log_selection_weight(shifted, s, 2) ==
            Catch::Approx(log_selection_weight(model, s, 2)).epsilon(1e-12));
  }
}

TEST_CASE("selection weight is the product of per-round retention") {
  Rng rng = make_rng(61);
  SelexModel model = random_model(rng, 3, 4, 0.1);
  const Sequence s = Sequence::from_code(rng() & packed_mask(7), 7);
  double prod = 1.0;
  for (int r = 1; r <= 4; ++r) {
    prod *= bind_prob_mixed(model, s, r);
    REQUIRE(selection_weight(model, s, r) == Catch::Approx(prod).epsilon(1e-12));
  }
}

TEST_CASE("exact denominator on a hand-checked one-base model") {
  SelexModel model;
  model.matrix = EnergyMatrix::from_rows({{0.0, -1.0, -2.0, -3.0}});
  model.log_tf = {0.0};
  // Strand classes for k=1: {A,T} scored max(0,-3)=0 and {C,G} scored
  // max(-1,-2)=-1.
  const double expected = 0.5 + sigmoid(-1.0);
  REQUIRE(exact_denominator(model, 1, 1) == Catch::Approx(expected).epsilon(1e-15));
}

TEST_CASE("round probabilities sum to one over all strand classes") {
  Rng rng = make_rng(67);
  SelexModel model = random_model(rng, 3, 2, 0.02);
  const int k = 4;
  DenominatorEstimate denom;
  denom.value = exact_denominator(model, 2, k);
  double total = 0.0;
  for (std::uint64_t code = 0; code < (1ULL << (2 * k)); ++code) {
    if (code > revcomp_code(code, k)) continue;
    total += round_prob(model, Sequence::from_code(code, k), 2, denom);
  }
  REQUIRE(total == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("universe log denominators agree with linear estimates") {
  Rng rng = make_rng(71);
  SelexModel model = random_model(rng, 3, 3, 0.01);
  const Universe exact = Universe::exact(5, 3);
  const Universe mc = Universe::monte_carlo(5, 3, 5000, 77);
  for (const Universe* u : {&exact, &mc}) {
    Universe::Scratch scratch;
    std::vector<double> ld(3);
    u->log_denominators(model, ld, scratch);
    for (int r = 1; r <= 3; ++r)
      REQUIRE(std::exp(ld[static_cast<std::size_t>(r - 1)]) ==
              Catch::Approx(u->estimate(model, r).value).epsilon(1e-10));
  }
}

TEST_CASE("sampled denominator is reproducible, worker independent, near exact") {
  Rng rng = make_rng(73);
  SelexModel model = random_model(rng, 3, 2);
  const int k = 4;
  const double exact = exact_denominator(model, 2, k);
  const DenominatorEstimate a = mc_denominator(model, k, 2, 20000, 5, 1);
  const DenominatorEstimate b = mc_denominator(model, k, 2, 20000, 5, 3);
  REQUIRE(a.value == b.value);
  REQUIRE(a.standard_error == b.standard_error);
  REQUIRE(a.sample_size == 20000);
  REQUIRE(a.standard_error > 0.0);
  REQUIRE(std::abs(a.value - exact) <= 4.0 * a.standard_error);
  const DenominatorEstimate c = mc_denominator(model, k, 2, 20000, 6, 1);
  REQUIRE(c.value != a.value);
}

TEST_CASE("model validation rejects malformed parameters") {
  SelexModel model;
  model.matrix = EnergyMatrix(2);
  REQUIRE_THROWS_AS(model.validate(), std::invalid_argument);  // no rounds
  model.log_tf = {0.0};
  model.c_junk = 1.5;
  REQUIRE_THROWS_AS(model.validate(), std::invalid_argument);
  model.c_junk = 0.5;
  REQUIRE_NOTHROW(model.validate());
  model.log_tf = {std::nan("")};
  REQUIRE_THROWS_AS(model.validate(), std::invalid_argument);
}
