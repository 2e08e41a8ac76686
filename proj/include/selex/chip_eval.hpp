#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "selex/energy.hpp"
#include "selex/genome.hpp"
#include "selex/parallel.hpp"
#include "selex/rng.hpp"
#include "selex/sequence.hpp"

namespace selex {

struct ChipConfig {
  std::size_t n_peaks = 100;       // strongest peaks profiled
  std::int64_t half_window = 4000; // bases flanking each summit on each side
  std::size_t n_background = 100;  // background tiles for threshold calibration
  double alpha = 0.999;            // per-tile score quantile (see null_threshold)
  int smoothing = 201;             // centered moving-average width, odd
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

// Best site score starting at each position of a genomic stretch: the max of
// the forward-strand window and the reverse-strand window at the same start.
// Positions whose window touches an N score NaN.
inline std::vector<double> scan_best_scores(std::string_view bases, const EnergyMatrix& m) {
  const int l = m.site_length();
  const std::int64_t len = static_cast<std::int64_t>(bases.size());
  if (len < l) return {};
  const EnergyMatrix mrc = relabel(m, Naming::reverse_complement);
  const double* fwd = m.flat().data();
  const double* rev = mrc.flat().data();

  std::vector<std::int8_t> code(bases.size());
  std::vector<std::int32_t> bad(bases.size() + 1, 0);  // prefix count of non-ACGT
  for (std::size_t i = 0; i < bases.size(); ++i) {
    code[i] = static_cast<std::int8_t>(base_code(bases[i]));
    bad[i + 1] = bad[i] + (code[i] < 0 ? 1 : 0);
  }

  std::vector<double> out(static_cast<std::size_t>(len - l + 1));
  for (std::int64_t p = 0; p + l <= len; ++p) {
    if (bad[static_cast<std::size_t>(p + l)] - bad[static_cast<std::size_t>(p)] > 0) {
      out[static_cast<std::size_t>(p)] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double sf = 0.0, sr = 0.0;
    for (int j = 0; j < l; ++j) {
      const int b = code[static_cast<std::size_t>(p + j)];
      sf += fwd[j * kAlphabet + b];
      sr += rev[j * kAlphabet + b];
    }
    out[static_cast<std::size_t>(p)] = std::max(sf, sr);
  }
  return out;
}

// Centered moving average; width must be odd and no longer than the input.
// Output is shorter by width-1 (edges without full support are dropped).
inline std::vector<double> moving_average(std::span<const double> v, int width) {
  if (width < 1 || width % 2 == 0) throw std::invalid_argument("smoothing width must be odd");
  if (static_cast<std::size_t>(width) > v.size())
    throw std::invalid_argument("smoothing width exceeds input length");
  std::vector<double> out(v.size() - static_cast<std::size_t>(width) + 1);
  double s = 0.0;
  for (int i = 0; i < width; ++i) s += v[static_cast<std::size_t>(i)];
  out[0] = s / width;
  for (std::size_t i = 1; i < out.size(); ++i) {
    s += v[i + static_cast<std::size_t>(width) - 1] - v[i - 1];
    out[i] = s / width;
  }
  return out;
}

struct NullCalibration {
  double threshold = 0.0;    // score cutoff: a hit is score > threshold
  double p_null = 0.0;       // empirical exceedance rate in the background
  std::size_t tiles = 0;     // background tiles scored
  std::size_t positions = 0; // scoreable background positions
};

namespace detail {

struct Tile {
  const Contig* contig;
  std::int64_t start;
  std::int64_t length;
};

// Nearest-rank quantile of a sorted vector.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return sorted[rank - 1];
}

}  // namespace detail

// Calibrates the hit threshold on affinity-blind territory: tiles of length
// 2*half_window that avoid the excluded regions, sampled without
// replacement. Each tile contributes its alpha-quantile score and the
// threshold is the median of those. alpha names an upper-tail level on both
// sides of 0.5: for alpha <= 0.5 the (1-alpha)-quantile is used, otherwise
// the alpha-quantile, so 0.001 and 0.999 describe the same cutoff. p_null is
// the fraction of all scored background positions that exceed the threshold,
// which is what the profile normalization needs.
inline NullCalibration null_threshold(const Genome& genome, const EnergyMatrix& m,
                                      const ChipConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
    throw std::invalid_argument("alpha must lie in (0,1)");
  if (cfg.half_window < m.site_length())
    throw std::invalid_argument("half window shorter than a binding site");
  if (cfg.n_background < 1) throw std::invalid_argument("need at least one background tile");

  const std::int64_t tile_len = 2 * cfg.half_window;
  std::vector<detail::Tile> candidates;
  for (const std::string& name : genome.sorted_names()) {
    const Contig& c = genome.contig(name);
    const std::int64_t len = static_cast<std::int64_t>(c.bases.size());
    for (std::int64_t start = 0; start + tile_len <= len; start += tile_len) {
      bool excluded = false;
      for (const Region& r : genome.exclusions()) {
        if (r.contig != c.name) continue;
        if (start < r.end && r.start < start + tile_len) {
          excluded = true;
          break;
        }
      }
      if (!excluded) candidates.push_back(detail::Tile{&c, start, tile_len});
    }
  }
  if (candidates.size() < cfg.n_background)
    throw std::runtime_error("only " + std::to_string(candidates.size()) +
                             " background tiles available, need " +
                             std::to_string(cfg.n_background));

  // Floyd's sampling over candidate indices keeps the draw deterministic.
  Rng rng = make_rng(cfg.seed, {seed_tag::background});
  std::unordered_set<std::uint64_t> chosen;
  const std::uint64_t n = candidates.size();
  for (std::uint64_t j = n - cfg.n_background; j < n; ++j) {
    std::uniform_int_distribution<std::uint64_t> pick(0, j);
    const std::uint64_t t = pick(rng);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  std::vector<std::size_t> picked(chosen.begin(), chosen.end());
  std::sort(picked.begin(), picked.end());

  const double q = cfg.alpha <= 0.5 ? 1.0 - cfg.alpha : cfg.alpha;
  std::vector<std::vector<double>> tile_scores(picked.size());
  for_each_chunk(picked.size(), 1, cfg.workers, [&](std::size_t i, std::size_t, std::size_t) {
    const detail::Tile& t = candidates[picked[i]];
    const std::string_view stretch(t.contig->bases.data() + t.start,
                                   static_cast<std::size_t>(t.length));
    std::vector<double> scores = scan_best_scores(stretch, m);
    scores.erase(std::remove_if(scores.begin(), scores.end(),
                                [](double s) { return !std::isfinite(s); }),
                 scores.end());
    tile_scores[i] = std::move(scores);
  });

  std::vector<double> tile_quantiles;
  std::size_t total_positions = 0;
  for (auto& scores : tile_scores) {
    if (scores.empty())
      throw std::runtime_error("background tile has no scoreable positions");
    std::sort(scores.begin(), scores.end());
    tile_quantiles.push_back(detail::quantile_sorted(scores, q));
    total_positions += scores.size();
  }
  std::sort(tile_quantiles.begin(), tile_quantiles.end());

  NullCalibration cal;
  cal.tiles = tile_quantiles.size();
  cal.positions = total_positions;
  const std::size_t h = tile_quantiles.size() / 2;
  cal.threshold = tile_quantiles.size() % 2 == 1
                      ? tile_quantiles[h]
                      : 0.5 * (tile_quantiles[h - 1] + tile_quantiles[h]);
  std::size_t exceed = 0;
  for (const auto& scores : tile_scores)
    for (double s : scores)
      if (s > cal.threshold) ++exceed;
  cal.p_null = total_positions > 0
                   ? static_cast<double>(exceed) / static_cast<double>(total_positions)
                   : 0.0;
  return cal;
}

// 0/1 hit calls for every site start in the stretch; NaN scores (windows
// touching N) are non-hits.
inline std::vector<std::uint8_t> hit_vector(std::string_view bases, const EnergyMatrix& m,
                                            double threshold) {
  const std::vector<double> scores = scan_best_scores(bases, m);
  std::vector<std::uint8_t> hits(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) hits[i] = scores[i] > threshold ? 1 : 0;
  return hits;
}

struct EnrichmentProfile {
  std::int64_t first_position = 0;  // summit-relative position of enrichment[0]
  std::vector<double> enrichment;   // smoothed hit rate over expected null rate
  NullCalibration calibration;
  std::size_t peaks_used = 0;
  std::size_t peaks_dropped = 0;  // peaks whose full window left the contig
};

// Motif enrichment around peak summits: sums per-position hit indicators
// over the strongest n_peaks peaks, smooths with a centered moving average,
// and normalizes by the expected hit count under the background rate
// (peaks_used * p_null). A flat profile near 1 means no positional signal.
inline EnrichmentProfile enrichment_profile(const Genome& genome, const std::vector<Peak>& peaks,
                                            const EnergyMatrix& m, const ChipConfig& cfg) {
  if (cfg.n_peaks < 1) throw std::invalid_argument("need at least one peak");
  const NullCalibration cal = null_threshold(genome, m, cfg);
  if (!(cal.p_null > 0.0))
    throw std::runtime_error("background exceedance rate is zero; profile undefined");

  for (const Peak& p : peaks) {
    const Contig& c = genome.contig(p.contig);  // throws on unknown contig
    if (p.position < 0 || p.position >= static_cast<std::int64_t>(c.bases.size()))
      throw std::invalid_argument("peak position " + std::to_string(p.position) +
                                  " outside contig " + p.contig);
  }
  const std::vector<Peak> strongest = top_peaks(peaks, cfg.n_peaks);

  const int l = m.site_length();
  const std::int64_t w = cfg.half_window;
  const std::size_t span = static_cast<std::size_t>(2 * w + 1);
  std::vector<std::uint32_t> counts(span, 0);
  std::size_t used = 0, dropped = 0;
  for (const Peak& p : strongest) {
    const Contig& c = genome.contig(p.contig);
    const std::int64_t lo = p.position - w;
    const std::int64_t hi = p.position + w + l;  // exclusive end of last window
    if (lo < 0 || hi > static_cast<std::int64_t>(c.bases.size())) {
      ++dropped;
      continue;
    }
    const std::string_view stretch(c.bases.data() + lo, static_cast<std::size_t>(hi - lo));
    const std::vector<std::uint8_t> hits = hit_vector(stretch, m, cal.threshold);
    for (std::size_t i = 0; i < span; ++i) counts[i] += hits[i];
    ++used;
  }
  if (used == 0) throw std::runtime_error("no peak window fits inside its contig");

  std::vector<double> raw(span);
  for (std::size_t i = 0; i < span; ++i) raw[i] = static_cast<double>(counts[i]);
  const std::vector<double> smooth = moving_average(raw, cfg.smoothing);

  EnrichmentProfile prof;
  prof.calibration = cal;
  prof.peaks_used = used;
  prof.peaks_dropped = dropped;
  prof.first_position = -w + (cfg.smoothing - 1) / 2;
  prof.enrichment.resize(smooth.size());
  const double expected = static_cast<double>(used) * cal.p_null;
  for (std::size_t i = 0; i < smooth.size(); ++i) prof.enrichment[i] = smooth[i] / expected;
  return prof;
}

}
