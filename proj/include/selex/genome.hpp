#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace selex {

// 0-based half-open interval on a named contig.
struct Region {
  std::string contig;
  std::int64_t start = 0;
  std::int64_t end = 0;
  std::string label;
};

struct Contig {
  std::string name;
  std::string bases;  // uppercase A/C/G/T/N
};

// A reference sequence set plus regions to keep out of background sampling.
// Contigs keep their input order for reporting, but everything that depends
// on traversal order processes them sorted by name, so results do not depend
// on the order of records in the source file.
class Genome {
 public:
  void add_contig(std::string name, std::string bases) {
    if (name.empty()) throw std::invalid_argument("contig name must be non-empty");
    if (index_.count(name)) throw std::invalid_argument("duplicate contig name: " + name);
    for (char& c : bases) {
      switch (c) {
        case 'a': c = 'A'; break;
        case 'c': c = 'C'; break;
        case 'g': c = 'G'; break;
        case 't': c = 'T'; break;
        case 'n': c = 'N'; break;
        case 'A': case 'C': case 'G': case 'T': case 'N': break;
        default:
          throw std::invalid_argument("contig " + name + " contains invalid character '" +
                                      std::string(1, c) + "'");
      }
    }
    index_[name] = contigs_.size();
    contigs_.push_back(Contig{std::move(name), std::move(bases)});
  }

  void add_exclusion(Region r) {
    if (!has_contig(r.contig))
      throw std::invalid_argument("exclusion references unknown contig " + r.contig);
    if (r.start < 0 || r.end < r.start)
      throw std::invalid_argument("exclusion interval invalid on contig " + r.contig);
    exclusions_.push_back(std::move(r));
  }

  bool has_contig(const std::string& name) const { return index_.count(name) > 0; }

  const Contig& contig(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("unknown contig " + name);
    return contigs_[it->second];
  }

  const std::vector<Contig>& contigs() const { return contigs_; }
  const std::vector<Region>& exclusions() const { return exclusions_; }

  // Contig names in lexicographic order; the canonical traversal order.
  std::vector<std::string> sorted_names() const {
    std::vector<std::string> names;
    names.reserve(contigs_.size());
    for (const auto& c : contigs_) names.push_back(c.name);
    std::sort(names.begin(), names.end());
    return names;
  }

 private:
  std::vector<Contig> contigs_;
  std::map<std::string, std::size_t> index_;
  std::vector<Region> exclusions_;
};

struct Peak {
  std::string contig;
  std::int64_t position = 0;  // 0-based summit coordinate
  double score = 0.0;
};

// The strongest n peaks by score, ties broken by (contig, position) so the
// result is independent of input order.
inline std::vector<Peak> top_peaks(std::vector<Peak> peaks, std::size_t n) {
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.contig != b.contig) return a.contig < b.contig;
    return a.position < b.position;
  });
  if (peaks.size() > n) peaks.resize(n);
  return peaks;
}

}
