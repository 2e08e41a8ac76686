#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "selex/chip_eval.hpp"
#include "selex/counts.hpp"
#include "selex/energy.hpp"
#include "selex/fit.hpp"
#include "selex/genome.hpp"
#include "selex/sequence.hpp"

namespace selex {

namespace detail {

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string() + " for reading");
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

[[noreturn]] inline void fail_at(const std::filesystem::path& path, std::size_t line,
                                 const std::string& what) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

inline double parse_double(const std::string& tok, const std::filesystem::path& path,
                           std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    fail_at(path, line, "expected a number, got '" + tok + "'");
  }
  if (used != tok.size()) fail_at(path, line, "trailing junk in number '" + tok + "'");
  return v;
}

inline std::uint64_t parse_count(const std::string& tok, const std::filesystem::path& path,
                                 std::size_t line) {
  for (char c : tok)
    if (c < '0' || c > '9') fail_at(path, line, "expected a non-negative integer, got '" + tok + "'");
  try {
    return std::stoull(tok);
  } catch (const std::exception&) {
    fail_at(path, line, "integer out of range: '" + tok + "'");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Energy matrix: header "A C G T", then one row per site position holding the
// 1-based position index and four fixed-point values. '#' starts a comment.
// write/read round-trips are value-exact at six fractional digits.
// ---------------------------------------------------------------------------

inline void write_energy_matrix(std::ostream& out, const EnergyMatrix& m) {
  out << "A\tC\tG\tT\n";
  out << std::fixed << std::setprecision(6);
  for (int p = 0; p < m.site_length(); ++p) {
    out << (p + 1);
    for (int b = 0; b < kAlphabet; ++b) out << '\t' << m.at(p, b);
    out << '\n';
  }
}

inline void write_energy_matrix(const std::filesystem::path& path, const EnergyMatrix& m) {
  auto out = detail::open_output(path);
  write_energy_matrix(out, m);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline EnergyMatrix read_energy_matrix(std::istream& in, const std::filesystem::path& path = "<stream>") {
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  std::vector<std::array<double, 4>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::vector<std::string> tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (!header_seen) {
      if (tok.size() != 4 || tok[0] != "A" || tok[1] != "C" || tok[2] != "G" || tok[3] != "T")
        detail::fail_at(path, lineno, "expected header 'A C G T'");
      header_seen = true;
      continue;
    }
    if (tok.size() != 5)
      detail::fail_at(path, lineno, "expected 5 columns (position + 4 values), got " +
                                        std::to_string(tok.size()));
    const double idx = detail::parse_double(tok[0], path, lineno);
    if (idx != static_cast<double>(rows.size() + 1))
      detail::fail_at(path, lineno, "expected position " + std::to_string(rows.size() + 1));
    std::array<double, 4> row{};
    for (int b = 0; b < 4; ++b) {
      row[static_cast<std::size_t>(b)] = detail::parse_double(tok[static_cast<std::size_t>(b + 1)], path, lineno);
      if (!std::isfinite(row[static_cast<std::size_t>(b)]))
        detail::fail_at(path, lineno, "matrix entries must be finite");
    }
    rows.push_back(row);
  }
  if (!header_seen) throw std::runtime_error(path.string() + ": missing matrix header");
  if (rows.empty()) throw std::runtime_error(path.string() + ": matrix has no rows");
  return EnergyMatrix::from_rows(rows);
}

inline EnergyMatrix read_energy_matrix(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return read_energy_matrix(in, path);
}

// ---------------------------------------------------------------------------
// Round counts: "sequence<TAB>count<TAB>round", '#' comments, 1-based rounds.
// Reads aggregate onto canonical types; writing emits rounds ascending and
// types in canonical order.
// ---------------------------------------------------------------------------

inline RoundCounts read_round_counts(std::istream& in,
                                     const std::filesystem::path& path = "<stream>") {
  RoundCounts data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::vector<std::string> tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 3)
      detail::fail_at(path, lineno,
                      "expected 3 columns (sequence, count, round), got " + std::to_string(tok.size()));
    Sequence seq = [&] {
      try {
        return Sequence::parse(tok[0]);
      } catch (const std::exception& e) {
        detail::fail_at(path, lineno, e.what());
      }
    }();
    const std::uint64_t count = detail::parse_count(tok[1], path, lineno);
    if (count < 1) detail::fail_at(path, lineno, "counts must be positive");
    const std::uint64_t round = detail::parse_count(tok[2], path, lineno);
    if (round < 1) detail::fail_at(path, lineno, "rounds are 1-based");
    if (round > 1000) detail::fail_at(path, lineno, "round index implausibly large");
    try {
      data.add(static_cast<int>(round), seq, count);
    } catch (const std::exception& e) {
      detail::fail_at(path, lineno, e.what());
    }
  }
  if (data.empty()) throw std::runtime_error(path.string() + ": no reads found");
  return data;
}

inline RoundCounts read_round_counts(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return read_round_counts(in, path);
}

inline void write_round_counts(std::ostream& out, const RoundCounts& data) {
  for (int r = 1; r <= data.rounds(); ++r)
    for (const TypeCount& tc : data.round(r))
      out << tc.seq.to_string() << '\t' << tc.count << '\t' << r << '\n';
}

inline void write_round_counts(const std::filesystem::path& path, const RoundCounts& data) {
  auto out = detail::open_output(path);
  write_round_counts(out, data);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// FASTA (A/C/G/T/N, case-insensitive), exclusion regions and peak lists.
// ---------------------------------------------------------------------------

inline Genome read_fasta(std::istream& in, const std::filesystem::path& path = "<stream>") {
  Genome g;
  std::string line, name, bases;
  std::size_t lineno = 0;
  auto flush = [&] {
    if (name.empty()) return;
    try {
      g.add_contig(name, std::move(bases));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ": " + e.what());
    }
    bases.clear();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '>') {
      flush();
      std::istringstream ss(line.substr(1));
      name.clear();
      ss >> name;
      if (name.empty()) detail::fail_at(path, lineno, "empty FASTA header");
    } else {
      if (name.empty()) detail::fail_at(path, lineno, "sequence data before any header");
      bases += line;
    }
  }
  flush();
  if (g.contigs().empty()) throw std::runtime_error(path.string() + ": no contigs found");
  return g;
}

inline Genome read_fasta(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return read_fasta(in, path);
}

// Regions: contig<TAB>start<TAB>end[<TAB>label], 0-based half-open.
inline std::vector<Region> read_regions(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<Region> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::vector<std::string> tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 3 && tok.size() != 4)
      detail::fail_at(path, lineno, "expected 3 or 4 columns (contig, start, end[, label])");
    Region r;
    r.contig = tok[0];
    r.start = static_cast<std::int64_t>(detail::parse_count(tok[1], path, lineno));
    r.end = static_cast<std::int64_t>(detail::parse_count(tok[2], path, lineno));
    if (r.end < r.start) detail::fail_at(path, lineno, "region end precedes start");
    if (tok.size() == 4) r.label = tok[3];
    out.push_back(std::move(r));
  }
  return out;
}

// Peaks: contig<TAB>position<TAB>score.
inline std::vector<Peak> read_peaks(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<Peak> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::vector<std::string> tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 3)
      detail::fail_at(path, lineno, "expected 3 columns (contig, position, score)");
    Peak p;
    p.contig = tok[0];
    p.position = static_cast<std::int64_t>(detail::parse_count(tok[1], path, lineno));
    p.score = detail::parse_double(tok[2], path, lineno);
    out.push_back(std::move(p));
  }
  if (out.empty()) throw std::runtime_error(path.string() + ": no peaks found");
  return out;
}

// One sequence per line; '#' comments.
inline std::vector<Sequence> read_sequence_list(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<Sequence> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::vector<std::string> tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 1) detail::fail_at(path, lineno, "expected one sequence per line");
    try {
      out.push_back(Sequence::parse(tok[0]));
    } catch (const std::exception& e) {
      detail::fail_at(path, lineno, e.what());
    }
  }
  if (out.empty()) throw std::runtime_error(path.string() + ": no sequences found");
  return out;
}

// ---------------------------------------------------------------------------
// Enrichment profile: '#' metadata, then "relative_position<TAB>enrichment".
// ---------------------------------------------------------------------------

inline void write_profile(std::ostream& out, const EnrichmentProfile& prof) {
  out << std::setprecision(10);
  out << "# threshold\t" << prof.calibration.threshold << '\n';
  out << "# p_null\t" << prof.calibration.p_null << '\n';
  out << "# background_tiles\t" << prof.calibration.tiles << '\n';
  out << "# peaks_used\t" << prof.peaks_used << '\n';
  out << "# peaks_dropped\t" << prof.peaks_dropped << '\n';
  out << std::fixed << std::setprecision(6);
  for (std::size_t i = 0; i < prof.enrichment.size(); ++i)
    out << (prof.first_position + static_cast<std::int64_t>(i)) << '\t' << prof.enrichment[i]
        << '\n';
}

inline void write_profile(const std::filesystem::path& path, const EnrichmentProfile& prof) {
  auto out = detail::open_output(path);
  write_profile(out, prof);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Fit report: human-readable summary of a multi-start fit.
// ---------------------------------------------------------------------------

inline void write_fit_report(std::ostream& out, const FitResult& fit, const FitConfig& cfg) {
  out << "status\t" << (fit.ok ? "ok" : "failed") << '\n';
  out << std::setprecision(10);
  out << "log_likelihood\t" << fit.log_likelihood << '\n';
  out << "best_restart\t" << fit.best_restart << '\n';
  out << "restarts\t" << cfg.restarts << '\n';
  out << "denominator\t"
      << (cfg.exact_denominator ? std::string("exact")
                                : "monte_carlo:" + std::to_string(cfg.mc_sample_size))
      << '\n';
  out << "seed\t" << cfg.seed << '\n';
  if (fit.ok) {
    out << "consensus\t" << consensus(fit.matrix).to_string() << '\n';
    out << "canonical_label\t" << four_names(consensus(fit.matrix)).front().to_string() << '\n';
    out << "c_junk\t" << fit.c_junk << '\n';
    out << "log_tf";
    for (double v : fit.log_tf) out << '\t' << v;
    out << '\n';
  }
  std::size_t converged = 0;
  for (const RestartTrace& t : fit.restarts) converged += t.converged ? 1 : 0;
  out << "converged_restarts\t" << converged << '\n';
  out << "restart_values";
  out << std::setprecision(10);
  for (const RestartTrace& t : fit.restarts) out << '\t' << t.value;
  out << '\n';
}

inline void write_fit_report(const std::filesystem::path& path, const FitResult& fit,
                             const FitConfig& cfg) {
  auto out = detail::open_output(path);
  write_fit_report(out, fit, cfg);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Run manifest: inputs with digests, parameters, outputs. FNV-1a over raw
// bytes is plenty for change detection and keeps the project dependency-free.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string() + " for digest");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (got < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  return h;
}

}
