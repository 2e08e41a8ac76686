#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "reference_matrix.hpp"
#include "selex/energy.hpp"
#include "selex/sequence.hpp"

using namespace selex;

namespace {

EnergyMatrix random_matrix(Rng& rng, int l, double lo = -5.0, double hi = 0.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  EnergyMatrix m(l);
  for (int p = 0; p < l; ++p)
    for (int b = 0; b < kAlphabet; ++b) m.at(p, b) = u(rng);
  return m;
}

}  // namespace

TEST_CASE("additive site scores on the reference matrix") {
  const EnergyMatrix m = reference_matrix();
  REQUIRE(m.site_length() == 10);
  REQUIRE(delta_g(m, Sequence::parse("GGATTAGGGG")) == 0.0);
  REQUIRE(delta_g(m, Sequence::parse("AGATTAGGGG")) == -4.722516);
  REQUIRE(delta_g(m, Sequence::parse("GGATTAGGGC")) == -1.539663);
  REQUIRE_THROWS_AS(delta_g(m, Sequence::parse("ACGT")), std::invalid_argument);
}

TEST_CASE("single-base substitutions shift the score by the entry difference") {
  Rng rng = make_rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const int l = 2 + static_cast<int>(rng() % 10);
    const EnergyMatrix m = random_matrix(rng, l);
    const Sequence site = Sequence::from_code(rng() & packed_mask(l), l);
    const double base_score = delta_g(m, site);
    const int pos = static_cast<int>(rng() % static_cast<std::uint64_t>(l));
    const int nb = static_cast<int>(rng() % 4);
    std::vector<std::uint8_t> codes = site.codes();
    const int ob = codes[static_cast<std::size_t>(pos)];
    codes[static_cast<std::size_t>(pos)] = static_cast<std::uint8_t>(nb);
    const double mutated = delta_g(m, Sequence(std::move(codes)));
    REQUIRE(mutated - base_score == Catch::Approx(m.at(pos, nb) - m.at(pos, ob)).margin(1e-12));
  }
}

TEST_CASE("best site finds a planted consensus on either strand") {
  const EnergyMatrix m = reference_matrix();
  const Sequence s = Sequence::parse("AAAGGATTAGGGGCCC");
  const SiteScore hit = best_site(m, s);
  REQUIRE(hit.energy == 0.0);
  REQUIRE(hit.offset == 3);
  REQUIRE(hit.strand == Strand::forward);
  REQUIRE(hit.site.to_string() == "GGATTAGGGG");

  const SiteScore mirrored = best_site(m, reverse_complement(s));
  REQUIRE(mirrored.energy == 0.0);
  REQUIRE(mirrored.strand == Strand::reverse);
  REQUIRE(mirrored.offset == 3);
  REQUIRE(mirrored.site.to_string() == "GGATTAGGGG");
}

TEST_CASE("best site tie-break prefers forward strand then smallest offset") {
  const EnergyMatrix flat(2, 0.0);
  const SiteScore hit = best_site(flat, Sequence::parse("ACGT"));
  REQUIRE(hit.energy == 0.0);
  REQUIRE(hit.offset == 0);
  REQUIRE(hit.strand == Strand::forward);
  REQUIRE(hit.site.to_string() == "AC");
}

TEST_CASE("best site equals the max over explicit windows") {
  Rng rng = make_rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 4 + static_cast<int>(rng() % 13);
    const int l = 1 + static_cast<int>(rng() % k);
    const EnergyMatrix m = random_matrix(rng, l);
    const Sequence s = Sequence::from_code(rng() & packed_mask(k), k);
    const SiteScore hit = best_site(m, s);
    double mx = -1e300;
    for (const Window& w : windows(s, l)) mx = std::max(mx, delta_g(m, w.site));
    REQUIRE(hit.energy == mx);
    REQUIRE(delta_g(m, hit.site) == hit.energy);
    // Strand symmetry of the score.
    REQUIRE(best_site(m, reverse_complement(s)).energy == hit.energy);
  }
}

TEST_CASE("normalization pins row maxima at zero and is idempotent") {
  Rng rng = make_rng(29);
  const EnergyMatrix m = random_matrix(rng, 6, -8.0, 4.0);
  const NormalizedMatrix n = normalize_ddg(m);
  double shift = 0.0;
  for (int p = 0; p < 6; ++p) {
    double mx = -1e300;
    for (int b = 0; b < kAlphabet; ++b) mx = std::max(mx, n.matrix.at(p, b));
    REQUIRE(mx == 0.0);
    double orig = -1e300;
    for (int b = 0; b < kAlphabet; ++b) orig = std::max(orig, m.at(p, b));
    shift += orig;
  }
  REQUIRE(n.shift == Catch::Approx(shift).margin(1e-12));
  const NormalizedMatrix again = normalize_ddg(n.matrix);
  REQUIRE(again.shift == 0.0);
  REQUIRE(again.matrix == n.matrix);

  // Scores shift uniformly by -shift.
  const Sequence site = Sequence::parse("ACGTAC");
  REQUIRE(delta_g(n.matrix, site) == Catch::Approx(delta_g(m, site) - n.shift).margin(1e-9));

  const NormalizedMatrix ref = normalize_ddg(reference_matrix());
  REQUIRE(ref.shift == 0.0);
  REQUIRE(ref.matrix == reference_matrix());
}

TEST_CASE("consensus of the reference matrix") {
  REQUIRE(consensus(reference_matrix()).to_string() == "GGATTAGGGG");
  REQUIRE(four_names(consensus(reference_matrix())).front().to_string() == "CCCCTAATCC");
}

TEST_CASE("relabel transforms rows and columns as named") {
  Rng rng = make_rng(31);
  const int l = 5;
  const EnergyMatrix m = random_matrix(rng, l);
  const EnergyMatrix r = relabel(m, Naming::reverse);
  const EnergyMatrix c = relabel(m, Naming::complement);
  const EnergyMatrix rc = relabel(m, Naming::reverse_complement);
  for (int p = 0; p < l; ++p)
    for (int b = 0; b < kAlphabet; ++b) {
      REQUIRE(r.at(p, b) == m.at(l - 1 - p, b));
      REQUIRE(c.at(p, b) == m.at(p, complement_code(b)));
      REQUIRE(rc.at(p, b) == m.at(l - 1 - p, complement_code(b)));
    }
  REQUIRE(relabel(r, Naming::reverse) == m);
  REQUIRE(relabel(c, Naming::complement) == m);
  REQUIRE(relabel(rc, Naming::reverse_complement) == m);
  REQUIRE(relabel(m, Naming::identity) == m);
  // Consensus transforms with the naming.
  REQUIRE(consensus(rc) == reverse_complement(consensus(m)));
}

TEST_CASE("reverse-complement relabeling preserves best-site energies") {
  Rng rng = make_rng(37);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 6 + static_cast<int>(rng() % 11);
    const int l = 2 + static_cast<int>(rng() % 5);
    const EnergyMatrix m = random_matrix(rng, l);
    const EnergyMatrix rc = relabel(m, Naming::reverse_complement);
    const Sequence s = Sequence::from_code(rng() & packed_mask(k), k);
    REQUIRE(best_site(rc, s).energy == Catch::Approx(best_site(m, s).energy).margin(1e-12));
    // A single site scores under rc as its reverse complement scores under m.
    const Sequence site = Sequence::from_code(rng() & packed_mask(l), l);
    REQUIRE(delta_g(rc, site) == Catch::Approx(delta_g(m, reverse_complement(site))).margin(1e-12));
  }
}

TEST_CASE("window table reproduces best-site energies for any worker count") {
  Rng rng = make_rng(41);
  const int k = 16, l = 10;
  std::vector<std::uint64_t> codes(500);
  for (auto& c : codes) c = rng() & packed_mask(k);
  const WindowTable table(codes, k, l);
  REQUIRE(table.size() == codes.size());
  REQUIRE(table.n_windows() == 14);
  const EnergyMatrix m = reference_matrix();
  std::vector<double> got(codes.size()), got3(codes.size());
  table.best_energies(m, got, 1);
  table.best_energies(m, got3, 3);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    REQUIRE(got[i] == got3[i]);
    // Grouped summation may differ from the sequential site sum by rounding.
    REQUIRE(got[i] ==
            Catch::Approx(best_site(m, Sequence::from_code(codes[i], k)).energy).margin(1e-12));
  }
}

TEST_CASE("matrix constructors validate") {
  REQUIRE_THROWS_AS(EnergyMatrix(0), std::invalid_argument);
  REQUIRE_THROWS_AS(EnergyMatrix(64), std::invalid_argument);
  std::vector<std::array<double, 4>> bad = {{0.0, 0.0, std::nan(""), 0.0}};
  REQUIRE_THROWS_AS(EnergyMatrix::from_rows(bad), std::invalid_argument);
  EnergyMatrix m(3);
  REQUIRE_THROWS_AS(m.at(3, 0), std::out_of_range);
  REQUIRE_THROWS_AS(m.at(0, 4), std::out_of_range);
}
