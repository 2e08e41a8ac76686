// Command-line front end: simulation, fitting, scoring, genome scanning,
// ChIP enrichment evaluation and small-scale oracles. Every subcommand that
// uses randomness requires an explicit --seed, and every run writes a JSON
// manifest with digests of its inputs and outputs so results can be traced
// and reproduced.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "selex/chip_eval.hpp"
#include "selex/counts.hpp"
#include "selex/energy.hpp"
#include "selex/fit.hpp"
#include "selex/genome.hpp"
#include "selex/io.hpp"
#include "selex/sequence.hpp"
#include "selex/simulate.hpp"
#include "selex/thermo.hpp"
#include "selex/version.hpp"

namespace {

using nlohmann::json;

std::string iso_utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

json file_entry(const std::string& path) {
  json j;
  j["path"] = path;
  j["bytes"] = static_cast<std::uint64_t>(std::filesystem::file_size(path));
  j["fnv1a64"] = hex64(selex::fnv1a64_file(path));
  return j;
}

// Collects everything a manifest records, then writes it once the
// subcommand's outputs are on disk (so output digests are real).
struct ManifestWriter {
  std::string subcommand;
  std::string path;
  json parameters = json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  void write() const {
    json j;
    j["tool"] = "selex";
    j["version"] = std::string(selex::kVersion);
    j["subcommand"] = subcommand;
    j["created"] = iso_utc_now();
    j["parameters"] = parameters;
    j["inputs"] = json::array();
    for (const auto& p : inputs) j["inputs"].push_back(file_entry(p));
    j["outputs"] = json::array();
    for (const auto& p : outputs) j["outputs"].push_back(file_entry(p));
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
  }
};

selex::SelexModel load_model(const std::string& matrix_path, const std::vector<double>& log_tf,
                             double c_junk) {
  selex::SelexModel model;
  model.matrix = selex::read_energy_matrix(matrix_path);
  model.log_tf = log_tf;
  model.c_junk = c_junk;
  model.validate();
  return model;
}

int run_simulate(const std::string& truth_path, const std::vector<double>& log_tf, double c_junk,
                 std::uint64_t n0, int k, std::uint64_t sample, std::uint64_t seed,
                 unsigned workers, const std::string& out_path, const std::string& truth_out,
                 std::string manifest_path) {
  selex::SimConfig cfg;
  cfg.model = load_model(truth_path, log_tf, c_junk);
  cfg.pool_size = n0;
  cfg.k = k;
  cfg.sample_per_round = sample;
  cfg.seed = seed;
  cfg.workers = workers;
  const selex::RoundCounts data = selex::simulate_selex(cfg);
  selex::write_round_counts(out_path, data);

  ManifestWriter mw;
  mw.subcommand = "simulate";
  mw.path = manifest_path.empty() ? out_path + ".manifest.json" : std::move(manifest_path);
  mw.parameters = {{"n0", n0},       {"k", k},           {"sample", sample},
                   {"seed", seed},   {"workers", workers}, {"c_junk", c_junk},
                   {"log_tf", log_tf}, {"rounds", log_tf.size()}};
  mw.inputs.push_back(truth_path);
  mw.outputs.push_back(out_path);
  if (!truth_out.empty()) {
    selex::write_energy_matrix(truth_out, cfg.model.matrix);
    mw.outputs.push_back(truth_out);
  }
  mw.write();
  std::cerr << "simulate: " << data.total_count() << " reads over " << data.rounds()
            << " rounds -> " << out_path << '\n';
  return 0;
}

int run_fit(const std::string& reads_path, selex::FitConfig cfg, const std::string& out_prefix,
            std::string manifest_path) {
  const selex::RoundCounts data = selex::read_round_counts(reads_path);
  if (!cfg.supplied_log_tf.empty()) cfg.fit_log_tf = false;
  const selex::FitResult fit = selex::multi_start_fit(data, cfg);

  const std::string matrix_path = out_prefix + ".matrix.tsv";
  const std::string report_path = out_prefix + ".report.txt";
  selex::write_fit_report(report_path, fit, cfg);

  ManifestWriter mw;
  mw.subcommand = "fit";
  mw.path = manifest_path.empty() ? out_prefix + ".manifest.json" : std::move(manifest_path);
  mw.parameters = {{"site_length", cfg.site_length},
                   {"fit_log_tf", cfg.fit_log_tf},
                   {"supplied_log_tf", cfg.supplied_log_tf},
                   {"fit_junk", cfg.fit_junk},
                   {"c_junk", cfg.c_junk},
                   {"restarts", cfg.restarts},
                   {"mc_samples", cfg.mc_sample_size},
                   {"exact_denominator", cfg.exact_denominator},
                   {"seed", cfg.seed},
                   {"workers", cfg.workers},
                   {"f_tol", cfg.f_tol},
                   {"x_tol", cfg.x_tol},
                   {"max_iterations", cfg.max_iterations}};
  mw.inputs.push_back(reads_path);
  mw.outputs.push_back(report_path);

  if (!fit.ok) {
    mw.write();
    std::cerr << "error: every restart diverged; see " << report_path << '\n';
    return 1;
  }
  selex::write_energy_matrix(matrix_path, fit.matrix);
  mw.outputs.push_back(matrix_path);
  mw.write();
  std::cerr << "fit: log-likelihood " << std::setprecision(10) << fit.log_likelihood
            << ", consensus " << selex::consensus(fit.matrix).to_string() << " -> " << matrix_path
            << '\n';
  return 0;
}

int run_score(const std::string& matrix_path, const std::string& seq_path,
              const std::string& out_path, std::optional<double> rt, std::string manifest_path) {
  const selex::EnergyMatrix m = selex::read_energy_matrix(matrix_path);
  const std::vector<selex::Sequence> seqs = selex::read_sequence_list(seq_path);
  std::ostringstream body;
  body << "sequence\tsite\toffset\tstrand\tscore";
  if (rt) body << "\tdelta_g";
  body << '\n';
  body << std::fixed << std::setprecision(6);
  for (const selex::Sequence& s : seqs) {
    const selex::SiteScore best = selex::best_site(m, s);
    body << s.to_string() << '\t' << best.site.to_string() << '\t' << best.offset << '\t'
         << selex::strand_name(best.strand) << '\t' << best.energy;
    if (rt) body << '\t' << (-best.energy * *rt);
    body << '\n';
  }
  ManifestWriter mw;
  mw.subcommand = "score";
  mw.parameters = {{"rt", rt ? json(*rt) : json()}};
  mw.inputs = {matrix_path, seq_path};
  if (out_path.empty() || out_path == "-") {
    std::cout << body.str();
    mw.path = manifest_path.empty() ? "selex_score.manifest.json" : std::move(manifest_path);
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open " + out_path + " for writing");
    out << body.str();
    out.close();
    mw.outputs.push_back(out_path);
    mw.path = manifest_path.empty() ? out_path + ".manifest.json" : std::move(manifest_path);
  }
  mw.write();
  return 0;
}

int run_scan(const std::string& matrix_path, const std::string& fasta_path, double threshold,
             const std::string& out_path, std::string manifest_path) {
  const selex::EnergyMatrix m = selex::read_energy_matrix(matrix_path);
  const selex::Genome g = selex::read_fasta(fasta_path);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open " + out_path + " for writing");
  out << "contig\tposition\tscore\n" << std::fixed << std::setprecision(6);
  std::uint64_t hits = 0;
  for (const std::string& name : g.sorted_names()) {
    const selex::Contig& c = g.contig(name);
    const std::vector<double> scores = selex::scan_best_scores(c.bases, m);
    for (std::size_t p = 0; p < scores.size(); ++p)
      if (scores[p] > threshold) {
        out << name << '\t' << p << '\t' << scores[p] << '\n';
        ++hits;
      }
  }
  out.close();
  ManifestWriter mw;
  mw.subcommand = "scan";
  mw.path = manifest_path.empty() ? out_path + ".manifest.json" : std::move(manifest_path);
  mw.parameters = {{"threshold", threshold}};
  mw.inputs = {matrix_path, fasta_path};
  mw.outputs = {out_path};
  mw.write();
  std::cerr << "scan: " << hits << " sites above " << threshold << " -> " << out_path << '\n';
  return 0;
}

int run_chip_eval(const std::string& matrix_path, const std::string& fasta_path,
                  const std::string& peaks_path, const std::string& exclude_path,
                  selex::ChipConfig cfg, const std::string& out_path, std::string manifest_path) {
  const selex::EnergyMatrix m = selex::read_energy_matrix(matrix_path);
  selex::Genome g = selex::read_fasta(fasta_path);
  if (!exclude_path.empty())
    for (selex::Region& r : selex::read_regions(exclude_path)) g.add_exclusion(std::move(r));
  const std::vector<selex::Peak> peaks = selex::read_peaks(peaks_path);
  const selex::EnrichmentProfile prof = selex::enrichment_profile(g, peaks, m, cfg);
  selex::write_profile(out_path, prof);
  if (prof.peaks_dropped > 0)
    std::cerr << "warning: dropped " << prof.peaks_dropped
              << " peaks whose windows left their contig\n";

  ManifestWriter mw;
  mw.subcommand = "chip-eval";
  mw.path = manifest_path.empty() ? out_path + ".manifest.json" : std::move(manifest_path);
  mw.parameters = {{"n_peaks", cfg.n_peaks},      {"half_window", cfg.half_window},
                   {"n_background", cfg.n_background}, {"alpha", cfg.alpha},
                   {"smoothing", cfg.smoothing},  {"seed", cfg.seed},
                   {"workers", cfg.workers}};
  mw.inputs = {matrix_path, fasta_path, peaks_path};
  if (!exclude_path.empty()) mw.inputs.push_back(exclude_path);
  mw.outputs = {out_path};
  mw.write();
  std::cerr << "chip-eval: threshold " << prof.calibration.threshold << ", p_null "
            << prof.calibration.p_null << ", peaks " << prof.peaks_used << " -> " << out_path
            << '\n';
  return 0;
}

int run_oracle_counts(int k, std::string manifest_path) {
  std::cout << "k\t" << k << '\n';
  std::cout << "closed_form\t" << selex::count_distinct_types(k) << '\n';
  std::cout << "strand_classes\t" << selex::revcomp_class_count(k) << '\n';
  if (k <= 12) std::cout << "enumerated\t" << selex::brute_force_type_count(k) << '\n';
  ManifestWriter mw;
  mw.subcommand = "oracle-counts";
  mw.path = manifest_path.empty() ? "selex_oracle.manifest.json" : std::move(manifest_path);
  mw.parameters = {{"k", k}};
  mw.write();
  return 0;
}

int run_oracle_denominator(const std::string& matrix_path, const std::vector<double>& log_tf,
                           double c_junk, int k, int prefix, std::uint64_t mc_samples,
                           std::optional<std::uint64_t> seed, unsigned workers,
                           std::string manifest_path) {
  const selex::SelexModel model = load_model(matrix_path, log_tf, c_junk);
  const int pre = prefix > 0 ? prefix : model.rounds();
  std::cout << std::setprecision(12);
  std::cout << "exact\t" << selex::exact_denominator(model, pre, k, workers) << '\n';
  if (mc_samples > 0) {
    if (!seed) throw std::runtime_error("--mc-samples requires --seed");
    const selex::DenominatorEstimate est =
        selex::mc_denominator(model, k, pre, mc_samples, *seed, workers);
    std::cout << "mc\t" << est.value << '\n';
    std::cout << "mc_se\t" << est.standard_error << '\n';
    std::cout << "mc_samples\t" << est.sample_size << '\n';
  }
  ManifestWriter mw;
  mw.subcommand = "oracle-denominator";
  mw.path = manifest_path.empty() ? "selex_oracle.manifest.json" : std::move(manifest_path);
  mw.parameters = {{"k", k},
                   {"prefix", pre},
                   {"c_junk", c_junk},
                   {"log_tf", log_tf},
                   {"mc_samples", mc_samples},
                   {"seed", seed ? json(*seed) : json()}};
  mw.inputs = {matrix_path};
  mw.write();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential-enrichment binding model toolkit"};
  app.set_version_flag("--version", std::string("selex ") + std::string(selex::kVersion));
  app.set_config("--config", "", "Read options from a key=value file");
  app.require_subcommand(1);

  try {
    // simulate ---------------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "Run a multi-round selection experiment");
    std::string sim_truth, sim_out, sim_truth_out, sim_manifest;
    std::vector<double> sim_log_tf;
    double sim_cjunk = 0.0;
    std::uint64_t sim_n0 = 1000000, sim_sample = 2000, sim_seed = 0;
    int sim_k = 16;
    unsigned sim_workers = 1;
    sim->add_option("--truth", sim_truth, "Truth energy matrix (TSV)")->required();
    sim->add_option("--log-tf", sim_log_tf, "Per-round log concentration, e.g. 13,12,11,10")
        ->required()
        ->delimiter(',');
    sim->add_option("--c-junk", sim_cjunk, "Affinity-independent retention fraction");
    sim->add_option("--n0", sim_n0, "Pool size (molecules)");
    sim->add_option("--k", sim_k, "Oligo length");
    sim->add_option("--sample", sim_sample, "Reads sequenced per round");
    sim->add_option("--seed", sim_seed, "RNG seed")->required();
    sim->add_option("--workers", sim_workers, "Worker threads");
    sim->add_option("--out", sim_out, "Output reads file")->required();
    sim->add_option("--truth-out", sim_truth_out, "Write a copy of the truth matrix here");
    sim->add_option("--manifest", sim_manifest, "Manifest path (default <out>.manifest.json)");

    // fit --------------------------------------------------------------------
    auto* fit = app.add_subcommand("fit", "Maximum-likelihood fit of the binding model");
    std::string fit_reads, fit_prefix = "fit", fit_manifest;
    selex::FitConfig fit_cfg;
    fit->add_option("--reads", fit_reads, "Reads file (sequence, count, round)")->required();
    fit->add_option("--site-length", fit_cfg.site_length, "Binding site length");
    fit->add_option("--log-tf", fit_cfg.supplied_log_tf,
                    "Fix per-round log concentrations instead of fitting them")
        ->delimiter(',');
    fit->add_flag("--fit-junk", fit_cfg.fit_junk, "Fit the junk fraction");
    fit->add_option("--c-junk", fit_cfg.c_junk, "Fixed junk fraction when not fitted");
    fit->add_option("--restarts", fit_cfg.restarts, "Random restarts");
    fit->add_option("--mc-samples", fit_cfg.mc_sample_size, "Denominator sample size");
    fit->add_flag("--exact-denominator", fit_cfg.exact_denominator,
                  "Enumerate all strand classes (small k only)");
    fit->add_option("--seed", fit_cfg.seed, "RNG seed")->required();
    fit->add_option("--workers", fit_cfg.workers, "Worker threads");
    fit->add_option("--f-tol", fit_cfg.f_tol, "Simplex value-spread tolerance");
    fit->add_option("--x-tol", fit_cfg.x_tol, "Simplex vertex-spread tolerance");
    fit->add_option("--max-iterations", fit_cfg.max_iterations, "Simplex iteration cap");
    fit->add_option("--initial-step", fit_cfg.initial_step, "Simplex initial step");
    fit->add_option("--out-prefix", fit_prefix, "Prefix for .matrix.tsv/.report.txt");
    fit->add_option("--manifest", fit_manifest, "Manifest path");

    // score ------------------------------------------------------------------
    auto* score = app.add_subcommand("score", "Best-site scores for a list of sequences");
    std::string score_matrix, score_seqs, score_out = "-", score_manifest;
    double score_rt = 0.0;
    bool score_has_rt = false;
    score->add_option("--matrix", score_matrix, "Energy matrix (TSV)")->required();
    score->add_option("--sequences", score_seqs, "Sequence list, one per line")->required();
    score->add_option("--out", score_out, "Output file or - for stdout");
    score->add_option("--rt", score_rt, "Thermal scale for a physical delta-G column")
        ->check(CLI::PositiveNumber)
        ->each([&](const std::string&) { score_has_rt = true; });
    score->add_option("--manifest", score_manifest, "Manifest path");

    // scan -------------------------------------------------------------------
    auto* scan = app.add_subcommand("scan", "Scan a genome for sites above a threshold");
    std::string scan_matrix, scan_fasta, scan_out, scan_manifest;
    double scan_threshold = 0.0;
    scan->add_option("--matrix", scan_matrix, "Energy matrix (TSV)")->required();
    scan->add_option("--fasta", scan_fasta, "Genome FASTA")->required();
    scan->add_option("--threshold", scan_threshold, "Report sites scoring above this");
    scan->add_option("--out", scan_out, "Output TSV")->required();
    scan->add_option("--manifest", scan_manifest, "Manifest path");

    // chip-eval ----------------------------------------------------------------
    auto* chip = app.add_subcommand("chip-eval", "Motif enrichment around peak summits");
    std::string chip_matrix, chip_fasta, chip_peaks, chip_exclude, chip_out, chip_manifest;
    selex::ChipConfig chip_cfg;
    chip->add_option("--matrix", chip_matrix, "Energy matrix (TSV)")->required();
    chip->add_option("--fasta", chip_fasta, "Genome FASTA")->required();
    chip->add_option("--peaks", chip_peaks, "Peaks TSV (contig, position, score)")->required();
    chip->add_option("--exclude", chip_exclude, "Regions excluded from background");
    chip->add_option("--n-peaks", chip_cfg.n_peaks, "Strongest peaks to profile");
    chip->add_option("--half-window", chip_cfg.half_window, "Bases flanking each summit");
    chip->add_option("--n-background", chip_cfg.n_background, "Background tiles");
    chip->add_option("--alpha", chip_cfg.alpha, "Background quantile level");
    chip->add_option("--smoothing", chip_cfg.smoothing, "Moving-average width (odd)");
    chip->add_option("--seed", chip_cfg.seed, "RNG seed")->required();
    chip->add_option("--workers", chip_cfg.workers, "Worker threads");
    chip->add_option("--out", chip_out, "Output profile TSV")->required();
    chip->add_option("--manifest", chip_manifest, "Manifest path");

    // oracle -------------------------------------------------------------------
    auto* oracle = app.add_subcommand("oracle", "Exact small-scale reference computations");
    oracle->require_subcommand(1);
    auto* ocounts = oracle->add_subcommand("counts", "Type-count formulas for length k");
    int oc_k = 5;
    std::string oc_manifest;
    ocounts->add_option("--k", oc_k, "Oligo length")->required();
    ocounts->add_option("--manifest", oc_manifest, "Manifest path");

    auto* odenom = oracle->add_subcommand("denominator", "Exact and sampled denominators");
    std::string od_matrix, od_manifest;
    std::vector<double> od_log_tf;
    double od_cjunk = 0.0;
    int od_k = 5, od_prefix = 0;
    std::uint64_t od_mc = 0, od_seed = 0;
    bool od_has_seed = false;
    unsigned od_workers = 1;
    odenom->add_option("--matrix", od_matrix, "Energy matrix (TSV)")->required();
    odenom->add_option("--log-tf", od_log_tf, "Per-round log concentration")->required()->delimiter(',');
    odenom->add_option("--c-junk", od_cjunk, "Junk fraction");
    odenom->add_option("--k", od_k, "Oligo length")->required();
    odenom->add_option("--prefix", od_prefix, "Round prefix (default: all rounds)");
    odenom->add_option("--mc-samples", od_mc, "Also estimate by sampling this many oligos");
    odenom->add_option("--seed", od_seed, "RNG seed for sampling")
        ->each([&](const std::string&) { od_has_seed = true; });
    odenom->add_option("--workers", od_workers, "Worker threads");
    odenom->add_option("--manifest", od_manifest, "Manifest path");

    app.parse(argc, argv);

    if (sim->parsed())
      return run_simulate(sim_truth, sim_log_tf, sim_cjunk, sim_n0, sim_k, sim_sample, sim_seed,
                          sim_workers, sim_out, sim_truth_out, sim_manifest);
    if (fit->parsed()) return run_fit(fit_reads, fit_cfg, fit_prefix, fit_manifest);
    if (score->parsed())
      return run_score(score_matrix, score_seqs, score_out,
                       score_has_rt ? std::optional<double>(score_rt) : std::nullopt,
                       score_manifest);
    if (scan->parsed()) return run_scan(scan_matrix, scan_fasta, scan_threshold, scan_out, scan_manifest);
    if (chip->parsed())
      return run_chip_eval(chip_matrix, chip_fasta, chip_peaks, chip_exclude, chip_cfg, chip_out,
                           chip_manifest);
    if (oracle->parsed()) {
      if (ocounts->parsed()) return run_oracle_counts(oc_k, oc_manifest);
      if (odenom->parsed())
        return run_oracle_denominator(od_matrix, od_log_tf, od_cjunk, od_k, od_prefix, od_mc,
                                      od_has_seed ? std::optional<std::uint64_t>(od_seed)
                                                  : std::nullopt,
                                      od_workers, od_manifest);
    }
    std::cerr << "error: no subcommand selected\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
