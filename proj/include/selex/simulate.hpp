#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "selex/counts.hpp"
#include "selex/energy.hpp"
#include "selex/parallel.hpp"
#include "selex/rng.hpp"
#include "selex/sequence.hpp"
#include "selex/thermo.hpp"

namespace selex {

namespace detail {

// Fenwick tree over per-entry molecule counts; supports categorical draws
// proportional to current counts with O(log n) updates.
class Fenwick {
 public:
  explicit Fenwick(const std::vector<PoolEntry>& entries) : tree_(entries.size() + 1, 0) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      tree_[i + 1] += entries[i].count;
      const std::size_t j = i + 1 + ((i + 1) & (~i));
      if (j < tree_.size()) tree_[j] += tree_[i + 1];
    }
    total_ = 0;
    for (const auto& e : entries) total_ += e.count;
  }

  std::uint64_t total() const { return total_; }

  void add(std::size_t i, std::uint64_t delta) {
    for (std::size_t j = i + 1; j < tree_.size(); j += j & (~j + 1)) tree_[j] += delta;
    total_ += delta;
  }

  // Index of the entry containing cumulative position u (0-based, u < total).
  std::size_t find(std::uint64_t u) const {
    std::size_t pos = 0;
    std::size_t mask = 1;
    while (mask * 2 < tree_.size()) mask *= 2;
    for (; mask > 0; mask /= 2) {
      const std::size_t next = pos + mask;
      if (next < tree_.size() && tree_[next] <= u) {
        u -= tree_[next];
        pos = next;
      }
    }
    return pos;
  }

 private:
  std::vector<std::uint64_t> tree_;
  std::uint64_t total_ = 0;
};

}  // namespace detail

// One selection round: each molecule of each type independently survives
// with the type's mixed retention probability. Survivor counts are drawn
// from per-type binomials whose RNG streams are keyed by (seed, select,
// type code), so results are identical for any worker count. An empty
// survivor pool is a legitimate result; callers decide how to react.
inline SequencePool select_round(const SequencePool& pool, const SelexModel& model, int round,
                                 std::uint64_t seed, unsigned workers = 1) {
  model.validate();
  if (round < 1 || round > model.rounds()) throw std::out_of_range("round out of range");
  if (pool.k < model.matrix.site_length())
    throw std::invalid_argument("pool sequences shorter than binding sites");
  const std::size_t n = pool.entries.size();
  std::vector<std::uint64_t> codes(n);
  for (std::size_t i = 0; i < n; ++i) codes[i] = pool.entries[i].code;
  const WindowTable wt(codes, pool.k, model.matrix.site_length());
  std::vector<double> eps(n);
  wt.best_energies(model.matrix, eps, workers);

  const double ltf = model.log_tf[static_cast<std::size_t>(round - 1)];
  std::vector<std::uint64_t> kept(n, 0);
  for_each_chunk(n, kDefaultChunk, workers, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const double t = junk_mix(sigmoid(ltf + eps[i]), model.c_junk);
      Rng rng = make_rng(seed, {seed_tag::select, static_cast<std::uint64_t>(round), codes[i]});
      std::binomial_distribution<std::uint64_t> bin(pool.entries[i].count, t);
      kept[i] = bin(rng);
    }
  });

  SequencePool out;
  out.k = pool.k;
  for (std::size_t i = 0; i < n; ++i)
    if (kept[i] > 0) out.entries.push_back(PoolEntry{codes[i], kept[i]});
  return out;
}

// Amplifies the pool back to `target` molecules by sequential draw-and-
// duplicate: each step copies one molecule chosen proportional to current
// counts. Creates no new types and never decreases a count.
inline SequencePool pcr_amplify(const SequencePool& pool, std::uint64_t target,
                                std::uint64_t seed) {
  if (pool.entries.empty()) throw std::invalid_argument("cannot amplify an empty pool");
  const std::uint64_t size = pool.total();
  if (target < size)
    throw std::invalid_argument("amplification target " + std::to_string(target) +
                                " below current pool size " + std::to_string(size));
  SequencePool out = pool;
  detail::Fenwick tree(out.entries);
  Rng rng = make_rng(seed, {seed_tag::pcr});
  for (std::uint64_t step = size; step < target; ++step) {
    std::uniform_int_distribution<std::uint64_t> pick(0, tree.total() - 1);
    const std::size_t idx = tree.find(pick(rng));
    tree.add(idx, 1);
    ++out.entries[idx].count;
  }
  return out;
}

struct SampleResult {
  std::vector<TypeCount> sample;  // sorted by type, aggregated
  SequencePool remainder;         // pool minus the sampled molecules
};

// Draws m distinct molecules (not types) uniformly without replacement and
// removes them from the pool. Sampled molecule indices come from Floyd's
// algorithm, so the draw count is fixed and the result depends only on the
// seed.
inline SampleResult sequence_sample(const SequencePool& pool, std::uint64_t m,
                                    std::uint64_t seed) {
  const std::uint64_t n = pool.total();
  if (m < 1) throw std::invalid_argument("sample size must be positive");
  if (m > n)
    throw std::invalid_argument("sample size " + std::to_string(m) +
                                " exceeds pool size " + std::to_string(n));
  Rng rng = make_rng(seed, {seed_tag::sample});
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(static_cast<std::size_t>(m) * 2);
  for (std::uint64_t j = n - m; j < n; ++j) {
    std::uniform_int_distribution<std::uint64_t> pick(0, j);
    const std::uint64_t t = pick(rng);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  std::vector<std::uint64_t> idx(chosen.begin(), chosen.end());
  std::sort(idx.begin(), idx.end());

  SampleResult out;
  out.remainder.k = pool.k;
  std::size_t entry = 0;
  std::uint64_t base = 0;
  std::size_t i = 0;
  for (; entry < pool.entries.size(); ++entry) {
    const PoolEntry& e = pool.entries[entry];
    std::uint64_t taken = 0;
    while (i < idx.size() && idx[i] < base + e.count) {
      ++taken;
      ++i;
    }
    if (taken > 0)
      out.sample.push_back(TypeCount{Sequence::from_code(e.code, pool.k), taken});
    if (e.count > taken)
      out.remainder.entries.push_back(PoolEntry{e.code, e.count - taken});
    base += e.count;
  }
  return out;
}

struct SimConfig {
  std::uint64_t pool_size = 0;         // molecules per round after amplification
  int k = 16;                          // oligo length
  std::uint64_t sample_per_round = 0;  // reads sequenced per round
  SelexModel model;                    // truth model; rounds() sets the round count
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

// Full multi-round experiment: uniform initial pool, then per round
// selection, amplification back to the initial size, and sequencing of m
// molecules without replacement (sequenced molecules leave the pool). The
// initial pool is collapsed onto canonical types, which is equivalent to
// tracking molecules strand-symmetrically. Aborts with a diagnostic naming
// the round if selection empties the pool.
inline RoundCounts simulate_selex(const SimConfig& cfg) {
  cfg.model.validate();
  if (cfg.pool_size < 1) throw std::invalid_argument("pool size must be positive");
  if (cfg.sample_per_round < 1) throw std::invalid_argument("sample size must be positive");
  if (cfg.sample_per_round > cfg.pool_size)
    throw std::invalid_argument("cannot sequence more molecules than the pool holds");
  if (cfg.k < cfg.model.matrix.site_length())
    throw std::invalid_argument("oligo length below site length");

  SequencePool pool = canonicalize_pool(
      random_pool(cfg.pool_size, cfg.k, derive_seed(cfg.seed, {seed_tag::pool}), cfg.workers));

  RoundCounts data(cfg.model.rounds());
  for (int r = 1; r <= cfg.model.rounds(); ++r) {
    const std::uint64_t round_seed =
        derive_seed(cfg.seed, {static_cast<std::uint64_t>(r)});
    SequencePool survivors = select_round(pool, cfg.model, r, round_seed, cfg.workers);
    if (survivors.entries.empty())
      throw std::runtime_error("selection emptied the pool in round " + std::to_string(r));
    SequencePool amplified = pcr_amplify(survivors, cfg.pool_size, round_seed);
    SampleResult drawn = sequence_sample(amplified, cfg.sample_per_round, round_seed);
    for (const TypeCount& tc : drawn.sample) data.add(r, tc.seq, tc.count);
    pool = std::move(drawn.remainder);
  }
  return data;
}

}
