#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "selex/parallel.hpp"
#include "selex/sequence.hpp"

namespace selex {

// Position-specific additive affinity matrix over l site positions. Entries
// are scores in units of R*T: larger is stronger binding, and in normalized
// form each row's maximum is exactly 0 (the consensus base), so off-consensus
// entries are <= 0 and -entry is the mutation's binding penalty.
class EnergyMatrix {
 public:
  EnergyMatrix() = default;

  explicit EnergyMatrix(int l, double fill = 0.0)
      : l_(l), e_(static_cast<std::size_t>(check_length(l)) * kAlphabet, fill) {}

  static EnergyMatrix from_rows(const std::vector<std::array<double, 4>>& rows) {
    EnergyMatrix m(static_cast<int>(rows.size()));
    for (std::size_t p = 0; p < rows.size(); ++p)
      for (int b = 0; b < kAlphabet; ++b) {
        if (!std::isfinite(rows[p][static_cast<std::size_t>(b)]))
          throw std::invalid_argument("energy matrix entries must be finite");
        m.at(static_cast<int>(p), b) = rows[p][static_cast<std::size_t>(b)];
      }
    return m;
  }

  int site_length() const { return l_; }

  double& at(int pos, int base) { return e_[index(pos, base)]; }
  double at(int pos, int base) const { return e_[index(pos, base)]; }

  // Row-major [pos*4 + base] view for tight scoring loops.
  std::span<const double> flat() const { return e_; }

  friend bool operator==(const EnergyMatrix& a, const EnergyMatrix& b) {
    return a.l_ == b.l_ && a.e_ == b.e_;
  }

 private:
  static int check_length(int l) {
    if (l < 1 || l > 63) throw std::invalid_argument("site length must be in [1,63]");
    return l;
  }
  std::size_t index(int pos, int base) const {
    if (pos < 0 || pos >= l_ || base < 0 || base >= kAlphabet)
      throw std::out_of_range("energy matrix index out of range");
    return static_cast<std::size_t>(pos) * kAlphabet + static_cast<std::size_t>(base);
  }
  int l_ = 0;
  std::vector<double> e_;
};

// Additive site score: sum over positions of the entry for the site's base.
inline double delta_g(const EnergyMatrix& m, const Sequence& site) {
  if (site.length() != m.site_length())
    throw std::invalid_argument("site length " + std::to_string(site.length()) +
                                " does not match matrix length " +
                                std::to_string(m.site_length()));
  const std::span<const double> e = m.flat();
  double s = 0.0;
  for (int j = 0; j < site.length(); ++j)
    s += e[static_cast<std::size_t>(j) * kAlphabet + site[j]];
  return s;
}

struct SiteScore {
  Sequence site;
  int offset = 0;
  Strand strand = Strand::forward;
  double energy = 0.0;
};

// Strongest candidate site of s under m, over both strands. Ties are broken
// toward the forward strand, then the smallest offset; with the window order
// produced by windows() that is simply the first maximal window.
inline SiteScore best_site(const EnergyMatrix& m, const Sequence& s) {
  const std::vector<Window> ws = windows(s, m.site_length());
  SiteScore best;
  best.energy = -std::numeric_limits<double>::infinity();
  bool first = true;
  for (const Window& w : ws) {
    const double e = delta_g(m, w.site);
    if (first || e > best.energy) {
      best = SiteScore{w.site, w.offset, w.strand, e};
      first = false;
    }
  }
  return best;
}

// Per-position argmax base, ties toward the alphabetically first base.
inline Sequence consensus(const EnergyMatrix& m) {
  std::vector<std::uint8_t> codes(static_cast<std::size_t>(m.site_length()));
  for (int p = 0; p < m.site_length(); ++p) {
    int best = 0;
    for (int b = 1; b < kAlphabet; ++b)
      if (m.at(p, b) > m.at(p, best)) best = b;
    codes[static_cast<std::size_t>(p)] = static_cast<std::uint8_t>(best);
  }
  return Sequence(std::move(codes));
}

struct NormalizedMatrix {
  EnergyMatrix matrix;
  double shift = 0.0;  // total score removed; add to any global offset to compensate
};

// Shifts each row so its maximum is exactly 0 and returns the summed shift.
// Site scores change by exactly -shift, so shifting a global concentration
// term by +shift preserves every model probability.
inline NormalizedMatrix normalize_ddg(const EnergyMatrix& m) {
  NormalizedMatrix out{m, 0.0};
  for (int p = 0; p < m.site_length(); ++p) {
    double mx = m.at(p, 0);
    for (int b = 1; b < kAlphabet; ++b) mx = std::max(mx, m.at(p, b));
    for (int b = 0; b < kAlphabet; ++b) out.matrix.at(p, b) = m.at(p, b) - mx;
    out.shift += mx;
  }
  return out;
}

enum class Naming { identity, reverse, complement, reverse_complement };

// Rewrites the matrix to score the renamed sequence: reverse flips the row
// order, complement swaps each row's A<->T and C<->G columns, and
// reverse_complement does both. Only identity and reverse_complement leave
// best-site energies of physical molecules unchanged; the other two are
// provided for completeness and reporting.
inline EnergyMatrix relabel(const EnergyMatrix& m, Naming naming) {
  const int l = m.site_length();
  EnergyMatrix out(l);
  const bool rev = naming == Naming::reverse || naming == Naming::reverse_complement;
  const bool comp = naming == Naming::complement || naming == Naming::reverse_complement;
  for (int p = 0; p < l; ++p)
    for (int b = 0; b < kAlphabet; ++b) {
      const int sp = rev ? l - 1 - p : p;
      const int sb = comp ? complement_code(b) : b;
      out.at(p, b) = m.at(sp, sb);
    }
  return out;
}

// Precomputed site codes of every candidate window of a batch of
// equal-length packed sequences, both strands. Site positions are packed
// into groups of up to four, so a window scores as a handful of lookups
// into per-group sum tables rebuilt once per matrix; grouping reassociates
// the position sum, so energies may differ from delta_g by rounding ulps.
class WindowTable {
 public:
  WindowTable() = default;

  WindowTable(std::span<const std::uint64_t> codes, int k, int l) : k_(k), l_(l) {
    if (l < 1 || l > k) throw std::invalid_argument("window table needs 1 <= l <= k");
    if (k > 32) throw std::invalid_argument("window table limited to k <= 32");
    n_windows_ = 2 * (k - l + 1);
    count_ = codes.size();
    // Group g covers site positions [4g, min(4g+4, l)); its sum table has
    // 4^width entries laid out after the previous groups' tables.
    n_groups_ = (l + 3) / 4;
    group_base_.assign(static_cast<std::size_t>(n_groups_) + 1, 0);
    for (int g = 0; g < n_groups_; ++g) {
      const int width = std::min(4, l - 4 * g);
      group_base_[static_cast<std::size_t>(g) + 1] =
          group_base_[static_cast<std::size_t>(g)] + (std::size_t{1} << (2 * width));
    }
    idx_.resize(count_ * stride());
    std::vector<std::uint8_t> bases(static_cast<std::size_t>(k));
    std::vector<std::uint8_t> site(static_cast<std::size_t>(l));
    std::uint16_t* p = idx_.data();
    for (std::size_t i = 0; i < count_; ++i) {
      const std::uint64_t code = codes[i];
      for (int j = 0; j < k; ++j)
        bases[static_cast<std::size_t>(j)] =
            static_cast<std::uint8_t>((code >> (2 * (k - 1 - j))) & 3);
      for (int o = 0; o + l <= k; ++o) {
        for (int j = 0; j < l; ++j) site[static_cast<std::size_t>(j)] = bases[static_cast<std::size_t>(o + j)];
        p = encode_window(site, p);
      }
      // Reverse strand: site base j is the complement of parent base k-1-o-j.
      for (int o = 0; o + l <= k; ++o) {
        for (int j = 0; j < l; ++j)
          site[static_cast<std::size_t>(j)] =
              complement_code(bases[static_cast<std::size_t>(k - 1 - o - j)]);
        p = encode_window(site, p);
      }
    }
  }

  std::size_t size() const { return count_; }
  int n_windows() const { return n_windows_; }

  // Per-matrix group sum tables; rebuild whenever the matrix changes.
  struct SumTables {
    std::vector<double> values;
  };

  void build_tables(const EnergyMatrix& m, SumTables& t) const {
    if (m.site_length() != l_) throw std::invalid_argument("matrix length mismatch");
    t.values.resize(group_base_.back());
    const double* e = m.flat().data();
    for (int g = 0; g < n_groups_; ++g) {
      const int lo = 4 * g, width = std::min(4, l_ - lo);
      double* out = t.values.data() + group_base_[static_cast<std::size_t>(g)];
      const std::size_t n = std::size_t{1} << (2 * width);
      for (std::size_t c = 0; c < n; ++c) {
        double s = 0.0;
        for (int j = 0; j < width; ++j)
          s += e[(lo + j) * kAlphabet + ((c >> (2 * (width - 1 - j))) & 3)];
        out[c] = s;
      }
    }
  }

  double best_energy(const SumTables& t, std::size_t i) const {
    const double* v = t.values.data();
    const std::uint16_t* p = idx_.data() + i * stride();
    double best = -std::numeric_limits<double>::infinity();
    for (int w = 0; w < n_windows_; ++w) {
      double s = 0.0;
      for (int g = 0; g < n_groups_; ++g) s += v[p[g]];
      p += n_groups_;
      if (s > best) best = s;
    }
    return best;
  }

  double best_energy(const EnergyMatrix& m, std::size_t i) const {
    SumTables t;
    build_tables(m, t);
    return best_energy(t, i);
  }

  // Fills out[i] with the best-site energy of sequence i. Chunked so the
  // result is identical for every worker count.
  void best_energies(const EnergyMatrix& m, std::span<double> out, unsigned workers = 1) const {
    if (out.size() != count_) throw std::invalid_argument("output span size mismatch");
    SumTables t;
    build_tables(m, t);
    for_each_chunk(count_, kDefaultChunk, workers,
                   [&](std::size_t, std::size_t b, std::size_t e2) {
                     for (std::size_t i = b; i < e2; ++i) out[i] = best_energy(t, i);
                   });
  }

  // Fills out[i] with exp(-best_energy(i)), evaluated as a min of per-group
  // exponential products so the hot loop carries no transcendentals. Agrees
  // with exp(-best_energies(...)) up to rounding; can overflow to +inf for
  // very deep energies, which callers must tolerate.
  void neg_exp_energies(const EnergyMatrix& m, std::span<double> out, unsigned workers = 1) const {
    if (out.size() != count_) throw std::invalid_argument("output span size mismatch");
    if (m.site_length() != l_) throw std::invalid_argument("matrix length mismatch");
    SumTables t;
    build_tables(m, t);
    for (double& v : t.values) v = std::exp(-v);
    for_each_chunk(count_, kDefaultChunk, workers,
                   [&](std::size_t, std::size_t b, std::size_t e2) {
                     const double* v = t.values.data();
                     for (std::size_t i = b; i < e2; ++i) {
                       const std::uint16_t* p = idx_.data() + i * stride();
                       double best = std::numeric_limits<double>::infinity();
                       for (int w = 0; w < n_windows_; ++w) {
                         double s = 1.0;
                         for (int g = 0; g < n_groups_; ++g) s *= v[p[g]];
                         p += n_groups_;
                         if (s < best) best = s;
                       }
                       out[i] = best;
                     }
                   });
  }

 private:
  std::size_t stride() const { return static_cast<std::size_t>(n_windows_) * n_groups_; }

  // Appends one window as n_groups_ table offsets.
  std::uint16_t* encode_window(const std::vector<std::uint8_t>& site, std::uint16_t* p) const {
    for (int g = 0; g < n_groups_; ++g) {
      const int lo = 4 * g, width = std::min(4, l_ - lo);
      std::size_t c = 0;
      for (int j = 0; j < width; ++j) c = (c << 2) | site[static_cast<std::size_t>(lo + j)];
      *p++ = static_cast<std::uint16_t>(group_base_[static_cast<std::size_t>(g)] + c);
    }
    return p;
  }

  int k_ = 0, l_ = 0, n_windows_ = 0, n_groups_ = 0;
  std::size_t count_ = 0;
  std::vector<std::size_t> group_base_;
  std::vector<std::uint16_t> idx_;
};

}
