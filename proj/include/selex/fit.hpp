#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "selex/counts.hpp"
#include "selex/energy.hpp"
#include "selex/nelder_mead.hpp"
#include "selex/parallel.hpp"
#include "selex/rng.hpp"
#include "selex/thermo.hpp"

namespace selex {

// Maximum-likelihood fit settings. The matrix is parameterized with column A
// pinned to 0 in every row; when per-round concentrations are supplied
// instead of fitted, a single global offset takes up the scale freedom, so
// the parameterization spans the same model family either way.
struct FitConfig {
  int site_length = 10;
  bool fit_log_tf = true;
  std::vector<double> supplied_log_tf;  // required when !fit_log_tf
  bool fit_junk = false;
  double c_junk = 0.0;  // fixed value when !fit_junk
  int restarts = 50;
  std::size_t mc_sample_size = 100000;
  bool exact_denominator = false;  // enumerate strand classes instead of sampling
  std::uint64_t seed = 0;
  unsigned workers = 1;
  double f_tol = 1e-8;
  double x_tol = 1e-6;
  std::size_t max_iterations = 50000;
  double initial_step = 1.0;
  double init_energy_lo = -5.0, init_energy_hi = 0.0;
  double init_log_tf_lo = -3.0, init_log_tf_hi = 0.0;
  double init_c_junk = 0.01;
};

struct FitParams {
  EnergyMatrix matrix;
  std::vector<double> log_tf;
  double c_junk = 0.0;
};

// Resolves the exact degeneracies of the model: shifts every matrix row so
// its maximum is 0 (moving the total shift into every log_tf, which leaves
// all probabilities unchanged) and, between the two physically equivalent
// namings {identity, reverse complement}, keeps the one whose consensus
// string is lexicographically greater. Idempotent.
inline FitParams apply_identifiability(const FitParams& p) {
  FitParams out = p;
  const NormalizedMatrix nm = normalize_ddg(p.matrix);
  out.matrix = nm.matrix;
  for (double& v : out.log_tf) v += nm.shift;
  const EnergyMatrix flipped = relabel(out.matrix, Naming::reverse_complement);
  if (consensus(out.matrix) < consensus(flipped)) out.matrix = flipped;
  return out;
}

// Log-likelihood of observed per-round counts given the model and one
// pre-computed log denominator per round prefix.
inline double log_likelihood(const SelexModel& model, const RoundCounts& data,
                             std::span<const double> log_denominators) {
  model.validate();
  if (data.rounds() > model.rounds())
    throw std::invalid_argument("data has more rounds than the model");
  if (log_denominators.size() != static_cast<std::size_t>(data.rounds()))
    throw std::invalid_argument("need one log denominator per data round");
  double ll = 0.0;
  for (int r = 1; r <= data.rounds(); ++r) {
    const double ld = log_denominators[static_cast<std::size_t>(r - 1)];
    for (const TypeCount& tc : data.round(r))
      ll += static_cast<double>(tc.count) * (log_selection_weight(model, tc.seq, r) - ld);
  }
  return ll;
}

// The fit objective: a deterministic log-likelihood as a function of the
// packed parameter vector. Owns the frozen denominator universe and the
// window tables of the observed types, so each evaluation is a pure
// gather-accumulate plus per-round logistic transforms.
class FitObjective {
 public:
  FitObjective(const RoundCounts& data, const FitConfig& cfg) : cfg_(cfg) {
    if (data.empty()) throw std::invalid_argument("fit needs at least one observed read");
    rounds_ = data.rounds();
    k_ = data.k();
    if (cfg.site_length < 1 || cfg.site_length > k_)
      throw std::invalid_argument("site length must lie in [1, read length]");
    if (!cfg.fit_log_tf && static_cast<int>(cfg.supplied_log_tf.size()) != rounds_)
      throw std::invalid_argument("supplied log_tf must cover every data round");
    if (cfg.fit_junk == false && !(cfg.c_junk >= 0.0 && cfg.c_junk <= 1.0))
      throw std::invalid_argument("fixed c_junk must lie in [0,1]");
    if (cfg.restarts < 1) throw std::invalid_argument("need at least one restart");

    std::vector<std::uint64_t> codes;
    for (int r = 1; r <= rounds_; ++r)
      for (const TypeCount& tc : data.round(r)) codes.push_back(tc.seq.packed());
    std::sort(codes.begin(), codes.end());
    codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
    obs_windows_ = WindowTable(codes, k_, cfg.site_length);
    refs_.resize(static_cast<std::size_t>(rounds_));
    for (int r = 1; r <= rounds_; ++r)
      for (const TypeCount& tc : data.round(r)) {
        const auto it = std::lower_bound(codes.begin(), codes.end(), tc.seq.packed());
        refs_[static_cast<std::size_t>(r - 1)].push_back(
            Ref{static_cast<std::uint32_t>(it - codes.begin()), tc.count});
      }

    universe_ = cfg.exact_denominator
                    ? Universe::exact(k_, cfg.site_length)
                    : Universe::monte_carlo(k_, cfg.site_length, cfg.mc_sample_size,
                                            derive_seed(cfg.seed, {seed_tag::universe}),
                                            cfg.workers);

    // A sampled universe almost never contains the observed types (for long
    // reads a uniform draw hits any given type with probability M / 4^k), so
    // the pure sample estimate leaves parameter directions in which every
    // observed weight outruns the whole sample and the objective grows
    // without bound. Guard those directions by flooring each round's
    // denominator at the summed weight of the observed support, which is a
    // deterministic lower bound on the true denominator: whenever the floor
    // binds, the sample has certifiably missed dominant mass. The floor
    // dominates every observed weight, so round probabilities stay below one
    // and the objective stays nonpositive. Row-shift/log_tf rescaling
    // cancels from the floor and the sample estimate alike.
    augment_ = !cfg.exact_denominator;
  }

  std::size_t dimension() const {
    return static_cast<std::size_t>(cfg_.site_length) * 3 +
           (cfg_.fit_log_tf ? static_cast<std::size_t>(rounds_) : 1) + (cfg_.fit_junk ? 1 : 0);
  }

  int rounds() const { return rounds_; }
  int read_length() const { return k_; }
  const Universe& universe() const { return universe_; }

  FitParams unpack(std::span<const double> theta) const {
    if (theta.size() != dimension()) throw std::invalid_argument("parameter vector size mismatch");
    FitParams p;
    p.matrix = EnergyMatrix(cfg_.site_length);
    std::size_t t = 0;
    for (int pos = 0; pos < cfg_.site_length; ++pos) {
      p.matrix.at(pos, 0) = 0.0;
      for (int b = 1; b < kAlphabet; ++b) p.matrix.at(pos, b) = theta[t++];
    }
    if (cfg_.fit_log_tf) {
      p.log_tf.assign(theta.begin() + static_cast<std::ptrdiff_t>(t),
                      theta.begin() + static_cast<std::ptrdiff_t>(t + static_cast<std::size_t>(rounds_)));
      t += static_cast<std::size_t>(rounds_);
    } else {
      const double offset = theta[t++];
      p.log_tf = cfg_.supplied_log_tf;
      for (double& v : p.log_tf) v += offset;
    }
    p.c_junk = cfg_.fit_junk ? sigmoid(theta[t++]) : cfg_.c_junk;
    return p;
  }

  std::vector<double> initial_point(Rng& rng) const {
    std::uniform_real_distribution<double> ue(cfg_.init_energy_lo, cfg_.init_energy_hi);
    std::uniform_real_distribution<double> ut(cfg_.init_log_tf_lo, cfg_.init_log_tf_hi);
    std::vector<double> theta;
    theta.reserve(dimension());
    for (int pos = 0; pos < cfg_.site_length; ++pos)
      for (int b = 1; b < kAlphabet; ++b) theta.push_back(ue(rng));
    if (cfg_.fit_log_tf)
      for (int r = 0; r < rounds_; ++r) theta.push_back(ut(rng));
    else
      theta.push_back(ut(rng));
    if (cfg_.fit_junk) {
      const double c = std::clamp(cfg_.init_c_junk, 1e-12, 1.0 - 1e-12);
      theta.push_back(std::log(c / (1.0 - c)));
    }
    return theta;
  }

  struct Scratch {
    Universe::Scratch uni;
    std::vector<double> log_denom;
    std::vector<double> eps_obs;
    std::vector<double> lw_obs;
  };

  double evaluate(std::span<const double> theta, Scratch& s) const {
    const FitParams p = unpack(theta);
    SelexModel model{p.matrix, p.log_tf, p.c_junk};
    s.log_denom.resize(static_cast<std::size_t>(rounds_));
    universe_.log_denominators(model, s.log_denom, s.uni, cfg_.workers);
    const std::size_t nobs = obs_windows_.size();
    s.eps_obs.resize(nobs);
    obs_windows_.best_energies(model.matrix, s.eps_obs, cfg_.workers);
    s.lw_obs.assign(nobs, 0.0);
    double ll = 0.0;
    for (int r = 1; r <= rounds_; ++r) {
      const double ltf = model.log_tf[static_cast<std::size_t>(r - 1)];
      for (std::size_t i = 0; i < nobs; ++i)
        s.lw_obs[i] += log_bind_prob_mixed(ltf + s.eps_obs[i], model.c_junk);
      double ld = s.log_denom[static_cast<std::size_t>(r - 1)];
      if (augment_) ld = std::max(ld, detail::log_sum_exp(s.lw_obs, cfg_.workers));
      for (const Ref& ref : refs_[static_cast<std::size_t>(r - 1)])
        ll += static_cast<double>(ref.count) * (s.lw_obs[ref.index] - ld);
    }
    return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
  }

 private:
  struct Ref {
    std::uint32_t index = 0;
    std::uint64_t count = 0;
  };
  FitConfig cfg_;
  int rounds_ = 0;
  int k_ = 0;
  WindowTable obs_windows_;
  std::vector<std::vector<Ref>> refs_;
  Universe universe_;
  bool augment_ = false;
};

struct RestartTrace {
  std::vector<double> start;
  double value = -std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

struct FitResult {
  bool ok = false;
  EnergyMatrix matrix;
  std::vector<double> log_tf;
  double c_junk = 0.0;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  int best_restart = -1;
  std::vector<RestartTrace> restarts;
};

// Runs `restarts` independent simplex searches from random starting points
// and keeps the best. Restart i derives its RNG stream from
// (seed, restart, i), so the set of searches is identical for any worker
// count; the winner is the highest final value with ties broken by index.
// If every restart diverges the result carries ok = false and the traces.
inline FitResult multi_start_fit(const RoundCounts& data, const FitConfig& cfg) {
  const FitObjective obj(data, cfg);
  SimplexOptions sopt;
  sopt.f_tol = cfg.f_tol;
  sopt.x_tol = cfg.x_tol;
  sopt.max_iterations = cfg.max_iterations;
  sopt.initial_step = cfg.initial_step;

  struct Outcome {
    SimplexResult res;
    std::vector<double> start;
  };
  std::vector<Outcome> outcomes(static_cast<std::size_t>(cfg.restarts));
  for_each_chunk(static_cast<std::size_t>(cfg.restarts), 1, cfg.workers,
                 [&](std::size_t i, std::size_t, std::size_t) {
                   Rng rng = make_rng(cfg.seed, {seed_tag::restart, i});
                   std::vector<double> start = obj.initial_point(rng);
                   FitObjective::Scratch scratch;
                   Outcome out;
                   out.res = nelder_mead_maximize(
                       [&](const std::vector<double>& x) { return obj.evaluate(x, scratch); },
                       start, sopt);
                   out.start = std::move(start);
                   outcomes[i] = std::move(out);
                 });

  FitResult result;
  result.restarts.reserve(outcomes.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const Outcome& o = outcomes[i];
    result.restarts.push_back(RestartTrace{o.start, o.res.value, o.res.iterations,
                                           o.res.evaluations, o.res.converged});
    if (std::isfinite(o.res.value) &&
        (result.best_restart < 0 || o.res.value > result.log_likelihood)) {
      result.best_restart = static_cast<int>(i);
      result.log_likelihood = o.res.value;
    }
  }
  if (result.best_restart < 0) return result;  // every restart diverged

  const FitParams raw = obj.unpack(outcomes[static_cast<std::size_t>(result.best_restart)].res.x);
  const FitParams id = apply_identifiability(raw);
  result.ok = true;
  result.matrix = id.matrix;
  result.log_tf = id.log_tf;
  result.c_junk = id.c_junk;
  return result;
}

}
