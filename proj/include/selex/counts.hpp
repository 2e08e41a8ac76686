#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "selex/sequence.hpp"

namespace selex {

struct TypeCount {
  Sequence seq;
  std::uint64_t count = 0;
};

// Observed read counts per selection round, keyed by canonical type. Rounds
// are 1-based; every stored sequence is its own canonical representative and
// rows within a round are sorted, so iteration order is deterministic.
class RoundCounts {
 public:
  RoundCounts() = default;
  explicit RoundCounts(int rounds) : per_round_(static_cast<std::size_t>(check_rounds(rounds))) {}

  int rounds() const { return static_cast<int>(per_round_.size()); }
  int k() const { return k_; }

  bool empty() const {
    for (const auto& v : per_round_)
      if (!v.empty()) return false;
    return true;
  }

  // Adds reads, canonicalizing and merging into the round's sorted table.
  // Grows the round range as needed; enforces one uniform read length.
  void add(int round, const Sequence& seq, std::uint64_t count) {
    if (round < 1) throw std::invalid_argument("round indices are 1-based");
    if (count < 1) throw std::invalid_argument("counts must be positive");
    if (k_ == 0)
      k_ = seq.length();
    else if (seq.length() != k_)
      throw std::invalid_argument("read length " + std::to_string(seq.length()) +
                                  " differs from established length " + std::to_string(k_));
    if (round > rounds()) per_round_.resize(static_cast<std::size_t>(round));
    Sequence canon = canonical_type(seq);
    auto& v = per_round_[static_cast<std::size_t>(round - 1)];
    auto it = std::lower_bound(v.begin(), v.end(), canon,
                               [](const TypeCount& a, const Sequence& b) { return a.seq < b; });
    if (it != v.end() && it->seq == canon)
      it->count += count;
    else
      v.insert(it, TypeCount{std::move(canon), count});
  }

  const std::vector<TypeCount>& round(int r) const {
    if (r < 1 || r > rounds()) throw std::out_of_range("round out of range");
    return per_round_[static_cast<std::size_t>(r - 1)];
  }

  std::uint64_t total_count() const {
    std::uint64_t t = 0;
    for (const auto& v : per_round_)
      for (const auto& tc : v) t += tc.count;
    return t;
  }

  std::size_t distinct_types() const {
    std::size_t n = 0;
    for (const auto& v : per_round_) n += v.size();
    return n;
  }

 private:
  static int check_rounds(int r) {
    if (r < 0) throw std::invalid_argument("round count must be non-negative");
    return r;
  }
  int k_ = 0;
  std::vector<std::vector<TypeCount>> per_round_;
};

}
