#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "selex/parallel.hpp"
#include "selex/rng.hpp"

namespace selex {

// Bases are coded A=0, C=1, G=2, T=3; all orderings in the project are the
// lexicographic order induced by these codes.
inline constexpr int kAlphabet = 4;
inline constexpr char kBaseLetter[kAlphabet + 1] = "ACGT";

inline int base_code(char c) {
  switch (c) {
    case 'A': case 'a': return 0;
    case 'C': case 'c': return 1;
    case 'G': case 'g': return 2;
    case 'T': case 't': return 3;
    default: return -1;
  }
}

inline int complement_code(int code) { return 3 - code; }

namespace detail {

// Per-byte reversal of 2-bit groups, for reversing packed sequences.
inline constexpr std::array<std::uint8_t, 256> make_rev2_table() {
  std::array<std::uint8_t, 256> t{};
  for (int b = 0; b < 256; ++b) {
    int out = 0;
    for (int g = 0; g < 4; ++g) out |= ((b >> (2 * g)) & 3) << (2 * (3 - g));
    t[b] = static_cast<std::uint8_t>(out);
  }
  return t;
}

inline constexpr std::array<std::uint8_t, 256> kRev2 = make_rev2_table();

}  // namespace detail

// All 2k low bits set; the packed-code complement mask.
inline std::uint64_t packed_mask(int k) {
  return k >= 32 ? ~0ULL : ((1ULL << (2 * k)) - 1);
}

// Reverses the k 2-bit groups of a packed code.
inline std::uint64_t reverse_code(std::uint64_t code, int k) {
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) {
    out = (out << 8) | detail::kRev2[(code >> (8 * i)) & 0xFF];
  }
  return out >> (64 - 2 * k);
}

// Packed code of the reverse complement. Complement is a bitwise XOR in this
// coding (A<->T, C<->G), so the pair commutes with group reversal.
inline std::uint64_t revcomp_code(std::uint64_t code, int k) {
  return reverse_code(code ^ packed_mask(k), k);
}

inline std::uint64_t canonical_code(std::uint64_t code, int k) {
  return std::min(code, revcomp_code(code, k));
}

// An immutable DNA string over {A,C,G,T}, stored as base codes. Sequences
// compare lexicographically.
class Sequence {
 public:
  Sequence() = default;

  explicit Sequence(std::vector<std::uint8_t> codes) : codes_(std::move(codes)) {
    if (codes_.empty()) throw std::invalid_argument("sequence must be non-empty");
    for (std::uint8_t c : codes_)
      if (c >= kAlphabet) throw std::invalid_argument("sequence code out of range");
  }

  // Parses an A/C/G/T string (case-insensitive). Reports the 1-based
  // position of the first invalid character.
  static Sequence parse(std::string_view text) {
    if (text.empty()) throw std::invalid_argument("sequence must be non-empty");
    std::vector<std::uint8_t> codes;
    codes.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
      const int c = base_code(text[i]);
      if (c < 0)
        throw std::invalid_argument("invalid character '" + std::string(1, text[i]) +
                                    "' at position " + std::to_string(i + 1));
      codes.push_back(static_cast<std::uint8_t>(c));
    }
    return Sequence(std::move(codes), Unchecked{});
  }

  // Decodes a packed 2-bit representation (first base in the highest bits,
  // so packed order equals lexicographic order). Requires 1 <= k <= 32.
  static Sequence from_code(std::uint64_t code, int k) {
    if (k < 1 || k > 32) throw std::invalid_argument("packed sequence length must be in [1,32]");
    std::vector<std::uint8_t> codes(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
      codes[static_cast<std::size_t>(i)] =
          static_cast<std::uint8_t>((code >> (2 * (k - 1 - i))) & 3);
    return Sequence(std::move(codes), Unchecked{});
  }

  int length() const { return static_cast<int>(codes_.size()); }
  std::uint8_t operator[](int i) const { return codes_[static_cast<std::size_t>(i)]; }
  const std::vector<std::uint8_t>& codes() const { return codes_; }

  std::uint64_t packed() const {
    if (codes_.size() > 32) throw std::invalid_argument("sequence too long to pack (max 32)");
    std::uint64_t code = 0;
    for (std::uint8_t c : codes_) code = (code << 2) | c;
    return code;
  }

  std::string to_string() const {
    std::string s(codes_.size(), ' ');
    for (std::size_t i = 0; i < codes_.size(); ++i) s[i] = kBaseLetter[codes_[i]];
    return s;
  }

  Sequence subsequence(int offset, int len) const {
    if (offset < 0 || len < 1 || offset + len > length())
      throw std::out_of_range("subsequence out of range");
    return Sequence(std::vector<std::uint8_t>(codes_.begin() + offset,
                                              codes_.begin() + offset + len),
                    Unchecked{});
  }

  friend bool operator==(const Sequence& a, const Sequence& b) { return a.codes_ == b.codes_; }
  friend bool operator!=(const Sequence& a, const Sequence& b) { return !(a == b); }
  friend bool operator<(const Sequence& a, const Sequence& b) { return a.codes_ < b.codes_; }

 private:
  struct Unchecked {};
  Sequence(std::vector<std::uint8_t> codes, Unchecked) : codes_(std::move(codes)) {}
  std::vector<std::uint8_t> codes_;
};

inline Sequence reverse_sequence(const Sequence& s) {
  std::vector<std::uint8_t> c(s.codes().rbegin(), s.codes().rend());
  return Sequence(std::move(c));
}

inline Sequence complement_sequence(const Sequence& s) {
  std::vector<std::uint8_t> c(s.codes());
  for (auto& b : c) b = static_cast<std::uint8_t>(complement_code(b));
  return Sequence(std::move(c));
}

inline Sequence reverse_complement(const Sequence& s) {
  std::vector<std::uint8_t> c(s.codes().size());
  for (std::size_t i = 0; i < c.size(); ++i)
    c[i] = static_cast<std::uint8_t>(complement_code(s.codes()[c.size() - 1 - i]));
  return Sequence(std::move(c));
}

// The distinct namings of a physical molecule: the string itself, its
// reverse, its complement, and its reverse complement. Sorted, deduplicated
// (palindromic cases collapse).
inline std::vector<Sequence> four_names(const Sequence& s) {
  std::vector<Sequence> v{s, reverse_sequence(s), complement_sequence(s), reverse_complement(s)};
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Canonical representative of the strand-equivalence class {s, revcomp(s)}:
// the lexicographically smaller naming. Both strands of a molecule map to
// the same type.
inline Sequence canonical_type(const Sequence& s) {
  Sequence rc = reverse_complement(s);
  return rc < s ? rc : s;
}

enum class Strand { forward, reverse };

inline const char* strand_name(Strand s) { return s == Strand::forward ? "forward" : "reverse"; }

// One candidate binding site: the l-mer read at `offset` on the given strand.
// Reverse-strand offsets index into the reverse complement of the parent
// sequence, so offset 0 is the site at the parent's right edge.
struct Window {
  Sequence site;
  int offset = 0;
  Strand strand = Strand::forward;
};

// All 2*(k-l+1) candidate sites of s in deterministic order: forward offsets
// ascending, then reverse-strand offsets ascending.
inline std::vector<Window> windows(const Sequence& s, int l) {
  const int k = s.length();
  if (l < 1 || l > k)
    throw std::invalid_argument("window length " + std::to_string(l) +
                                " invalid for sequence of length " + std::to_string(k));
  std::vector<Window> out;
  out.reserve(2 * static_cast<std::size_t>(k - l + 1));
  for (int o = 0; o + l <= k; ++o)
    out.push_back(Window{s.subsequence(o, l), o, Strand::forward});
  const Sequence rc = reverse_complement(s);
  for (int o = 0; o + l <= k; ++o)
    out.push_back(Window{rc.subsequence(o, l), o, Strand::reverse});
  return out;
}

// Closed-form count 2^(k-1) + 4^(k-1) of distinct oligo types, kept as the
// traditional convention for reporting. It undercounts the true number of
// strand-equivalence classes (see revcomp_class_count / brute_force_type_count);
// sampling estimators in this project use the exact class count.
inline std::uint64_t count_distinct_types(int k) {
  if (k < 1) throw std::invalid_argument("k must be positive");
  if (k > 32) throw std::overflow_error("type count overflows 64 bits for k > 32");
  const std::uint64_t pal = 1ULL << (k - 1);
  const std::uint64_t rest = 1ULL << (2 * (k - 1));
  return pal + rest;
}

// Exact number of strand-equivalence classes of k-mers:
// (4^k + p) / 2 with p = 4^(k/2) palindromes for even k, p = 0 for odd k.
inline std::uint64_t revcomp_class_count(int k) {
  if (k < 1) throw std::invalid_argument("k must be positive");
  if (k > 31) throw std::overflow_error("class count overflows 64 bits for k > 31");
  const std::uint64_t total = 1ULL << (2 * k);
  const std::uint64_t pal = (k % 2 == 0) ? (1ULL << k) : 0;
  return (total + pal) / 2;
}

// Enumeration cross-check for revcomp_class_count; guarded to small k.
inline std::uint64_t brute_force_type_count(int k) {
  if (k < 1) throw std::invalid_argument("k must be positive");
  if (k > 12) throw std::invalid_argument("brute-force type count limited to k <= 12");
  const std::uint64_t total = 1ULL << (2 * k);
  std::uint64_t n = 0;
  for (std::uint64_t code = 0; code < total; ++code)
    if (code <= revcomp_code(code, k)) ++n;
  return n;
}

// A multiset of same-length oligo types, aggregated and sorted by packed
// code. Entries carry molecule counts; codes are unique within a pool.
struct PoolEntry {
  std::uint64_t code = 0;
  std::uint64_t count = 0;
};

struct SequencePool {
  int k = 0;
  std::vector<PoolEntry> entries;

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto& e : entries) t += e.count;
    return t;
  }
};

namespace detail {

// Sorts raw codes and collapses runs into aggregated entries.
inline std::vector<PoolEntry> aggregate_codes(std::vector<std::uint64_t>& codes) {
  std::sort(codes.begin(), codes.end());
  std::vector<PoolEntry> entries;
  for (std::size_t i = 0; i < codes.size();) {
    std::size_t j = i;
    while (j < codes.size() && codes[j] == codes[i]) ++j;
    entries.push_back(PoolEntry{codes[i], j - i});
    i = j;
  }
  return entries;
}

}  // namespace detail

// Uniform random pool of `count` k-mers. Generation is chunked with one RNG
// substream per chunk derived from (seed, chunk), so results do not depend
// on the worker count.
inline SequencePool random_pool(std::uint64_t count, int k, std::uint64_t seed,
                                unsigned workers = 1) {
  if (count < 1) throw std::invalid_argument("pool size must be positive");
  if (k < 1 || k > 32) throw std::invalid_argument("pool k must be in [1,32]");
  const std::uint64_t mask = packed_mask(k);
  std::vector<std::uint64_t> codes(count);
  constexpr std::size_t kChunk = 65536;
  for_each_chunk(count, kChunk, workers, [&](std::size_t chunk, std::size_t b, std::size_t e) {
    Rng rng = make_rng(seed, {seed_tag::pool, chunk});
    for (std::size_t i = b; i < e; ++i) codes[i] = rng() & mask;
  });
  SequencePool pool;
  pool.k = k;
  pool.entries = detail::aggregate_codes(codes);
  return pool;
}

// Collapses a pool onto canonical strand-class representatives.
inline SequencePool canonicalize_pool(const SequencePool& pool) {
  std::vector<std::uint64_t> codes;
  codes.reserve(pool.entries.size());
  SequencePool out;
  out.k = pool.k;
  std::vector<PoolEntry> mapped;
  mapped.reserve(pool.entries.size());
  for (const auto& e : pool.entries)
    mapped.push_back(PoolEntry{canonical_code(e.code, pool.k), e.count});
  std::sort(mapped.begin(), mapped.end(),
            [](const PoolEntry& a, const PoolEntry& b) { return a.code < b.code; });
  for (std::size_t i = 0; i < mapped.size();) {
    std::size_t j = i;
    std::uint64_t n = 0;
    while (j < mapped.size() && mapped[j].code == mapped[i].code) n += mapped[j++].count;
    out.entries.push_back(PoolEntry{mapped[i].code, n});
    i = j;
  }
  return out;
}

}
