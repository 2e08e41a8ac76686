#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "selex/energy.hpp"
#include "selex/parallel.hpp"
#include "selex/sequence.hpp"

namespace selex {

// Full binding model for a multi-round selection experiment: one affinity
// matrix shared by all rounds, one log concentration per round, and an
// optional junk fraction c_junk of molecules retained independent of
// affinity.
struct SelexModel {
  EnergyMatrix matrix;
  std::vector<double> log_tf;  // natural log of free protein concentration, round r = log_tf[r-1]
  double c_junk = 0.0;

  int rounds() const { return static_cast<int>(log_tf.size()); }

  void validate() const {
    if (matrix.site_length() < 1) throw std::invalid_argument("model has no matrix");
    if (log_tf.empty()) throw std::invalid_argument("model needs at least one round");
    for (double v : log_tf)
      if (!std::isfinite(v)) throw std::invalid_argument("log_tf must be finite");
    if (!(c_junk >= 0.0 && c_junk <= 1.0))
      throw std::invalid_argument("c_junk must lie in [0,1]");
  }
};

// log(sigmoid(a)), stable over the whole double range.
inline double log_sigmoid(double a) {
  return a >= 0.0 ? -std::log1p(std::exp(-a)) : a - std::log1p(std::exp(a));
}

inline double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

// Mixture of a junk pathway with the affinity-driven retention probability t:
// t_hat = (1 - c_junk) * t + c_junk.
inline double junk_mix(double t, double c_junk) {
  return (1.0 - c_junk) * t + c_junk;
}

// log(junk_mix(sigmoid(a), c)) without leaving log space.
inline double log_bind_prob_mixed(double a, double c_junk) {
  const double lt = log_sigmoid(a);
  if (c_junk <= 0.0) return lt;
  const double la = std::log(c_junk);
  const double lb = std::log1p(-c_junk) + lt;  // c_junk == 1 gives -inf here
  const double hi = std::max(la, lb);
  const double lo = std::min(la, lb);
  return hi + std::log1p(std::exp(lo - hi));
}

// Exponent of the Boltzmann weight of s in round r: log_tf[r] plus the
// best-site score.
inline double bind_exponent(const SelexModel& model, const Sequence& s, int round) {
  if (round < 1 || round > model.rounds())
    throw std::out_of_range("round " + std::to_string(round) + " out of range");
  return model.log_tf[static_cast<std::size_t>(round - 1)] + best_site(model.matrix, s).energy;
}

// Probability that one molecule of type s is retained in round r, before the
// junk mixture: w / (1 + w) with w = exp(log_tf + best-site score).
inline double bind_prob(const SelexModel& model, const Sequence& s, int round) {
  return sigmoid(bind_exponent(model, s, round));
}

// Retention probability including the junk pathway.
inline double bind_prob_mixed(const SelexModel& model, const Sequence& s, int round) {
  return junk_mix(bind_prob(model, s, round), model.c_junk);
}

// log(t / (1 - t)) for the pure (c_junk = 0) retention probability; equals
// log_tf[r] + best-site score exactly, which makes it the natural scale for
// diagnostics.
inline double log_odds(const SelexModel& model, const Sequence& s, int round) {
  const double a = bind_exponent(model, s, round);
  // log t - log(1 - t) computed from the exponent without forming t.
  return log_sigmoid(a) - log_sigmoid(-a);
}

// Product over rounds 1..prefix of the mixed retention probability: the
// unnormalized selection weight of s after `prefix` rounds.
inline double log_selection_weight(const SelexModel& model, const Sequence& s, int prefix) {
  if (prefix < 1 || prefix > model.rounds())
    throw std::out_of_range("round prefix out of range");
  const double eps = best_site(model.matrix, s).energy;
  double lw = 0.0;
  for (int r = 1; r <= prefix; ++r)
    lw += log_bind_prob_mixed(model.log_tf[static_cast<std::size_t>(r - 1)] + eps, model.c_junk);
  return lw;
}

inline double selection_weight(const SelexModel& model, const Sequence& s, int prefix) {
  return std::exp(log_selection_weight(model, s, prefix));
}

struct DenominatorEstimate {
  double value = 0.0;           // estimate of the sum of selection weights over all types
  double standard_error = 0.0;  // 0 for exact enumeration
  std::size_t sample_size = 0;  // 0 for exact enumeration
  std::uint64_t seed = 0;
};

namespace detail {

// Deterministic log-sum-exp over chunked partials with a global max shift.
inline double log_sum_exp(std::span<const double> lw, unsigned workers) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : lw) mx = std::max(mx, v);
  if (!(mx > -std::numeric_limits<double>::infinity())) return mx;  // all -inf or empty
  const double s = chunked_sum(lw.size(), workers,
                               [&](std::size_t i) { return std::exp(lw[i] - mx); });
  return mx + std::log(s);
}

}  // namespace detail

// The population a selection round normalizes over: either a frozen uniform
// Monte Carlo sample of k-mer space or, for small k, the exhaustive list of
// strand-class representatives. Freezing one sample and reusing it across
// every likelihood evaluation makes the fitted objective a deterministic
// function of the parameters (common random numbers).
class Universe {
 public:
  static Universe monte_carlo(int k, int l, std::size_t sample_size, std::uint64_t seed,
                              unsigned workers = 1) {
    if (sample_size < 1) throw std::invalid_argument("sample size must be positive");
    Universe u;
    u.k_ = k;
    u.seed_ = seed;
    u.exact_ = false;
    std::vector<std::uint64_t> codes(sample_size);
    const std::uint64_t mask = packed_mask(k);
    for_each_chunk(sample_size, 65536, workers,
                   [&](std::size_t chunk, std::size_t b, std::size_t e) {
                     Rng rng = make_rng(seed, {seed_tag::universe, chunk});
                     for (std::size_t i = b; i < e; ++i) codes[i] = rng() & mask;
                   });
    // Estimator scale: the universe holds N = revcomp_class_count(k) types
    // and the uniform proposal hits each non-palindromic type with the same
    // probability, so E[(N/M) * sum w] is exact for odd k and carries only
    // the palindrome weight distortion (2^k / 4^k mass) for even k.
    u.log_scale_ = std::log(static_cast<double>(revcomp_class_count(k))) -
                   std::log(static_cast<double>(sample_size));
    u.windows_ = WindowTable(codes, k, l);
    return u;
  }

  static Universe exact(int k, int l) {
    if (k > 12) throw std::invalid_argument("exact universe limited to k <= 12");
    const std::uint64_t total = 1ULL << (2 * k);
    if (total > 100000000ULL) throw std::invalid_argument("exact universe too large");
    Universe u;
    u.k_ = k;
    u.exact_ = true;
    u.log_scale_ = 0.0;
    std::vector<std::uint64_t> codes;
    codes.reserve(revcomp_class_count(k));
    for (std::uint64_t code = 0; code < total; ++code)
      if (code <= revcomp_code(code, k)) codes.push_back(code);
    u.windows_ = WindowTable(codes, k, l);
    return u;
  }

  int k() const { return k_; }
  bool is_exact() const { return exact_; }
  std::size_t size() const { return windows_.size(); }
  std::uint64_t seed() const { return seed_; }

  struct Scratch {
    std::vector<double> eps;  // best-site score (or its negated exponential)
    std::vector<double> lw;   // accumulated log selection weight per member
    std::vector<double> num;  // junk-mixture numerator product per member
  };

  // Writes log of the (estimated or exact) denominator for every round
  // prefix 1..model.rounds() into out. Deterministic for fixed membership.
  //
  // Works in linear space: with x = exp(-log_tf_r - eps_i), the mixed
  // binding probability is (1 + c*x)/(1 + x), so the prefix weight is a
  // ratio of running products and the per-member cost is a few flops. The
  // products stay in [1, inf); if a weight sum degenerates to zero or a
  // non-finite value (possible for extreme parameters), the whole
  // computation falls back to the log-space form, which cannot.
  void log_denominators(const SelexModel& model, std::span<double> out, Scratch& scratch,
                        unsigned workers = 1) const {
    const std::size_t n = windows_.size();
    if (out.size() != static_cast<std::size_t>(model.rounds()))
      throw std::invalid_argument("denominator span must cover every round");
    scratch.eps.resize(n);
    windows_.neg_exp_energies(model.matrix, scratch.eps, workers);
    scratch.lw.assign(n, 1.0);  // denominator product: prod_r (1 + x_r)
    const double c = model.c_junk;
    const bool junk = c > 0.0;
    if (junk) scratch.num.assign(n, 1.0);
    for (int r = 1; r <= model.rounds(); ++r) {
      const double b = std::exp(-model.log_tf[static_cast<std::size_t>(r - 1)]);
      for_each_chunk(n, kDefaultChunk, workers, [&](std::size_t, std::size_t b0, std::size_t e) {
        for (std::size_t i = b0; i < e; ++i) {
          const double x = b * scratch.eps[i];
          scratch.lw[i] *= 1.0 + x;
          if (junk) scratch.num[i] *= 1.0 + c * x;
        }
      });
      const double sum =
          junk ? chunked_sum(n, workers, [&](std::size_t i) { return scratch.num[i] / scratch.lw[i]; })
               : chunked_sum(n, workers, [&](std::size_t i) { return 1.0 / scratch.lw[i]; });
      const double ld = log_scale_ + std::log(sum);
      if (!std::isfinite(ld)) return log_denominators_logspace(model, out, scratch, workers);
      out[static_cast<std::size_t>(r - 1)] = ld;
    }
  }

  // Linear-space estimate with a sampling standard error for the given
  // prefix. For the exact universe the error is identically zero.
  DenominatorEstimate estimate(const SelexModel& model, int prefix, unsigned workers = 1) const {
    if (prefix < 1 || prefix > model.rounds()) throw std::out_of_range("round prefix out of range");
    const std::size_t n = windows_.size();
    Scratch scratch;
    scratch.eps.resize(n);
    scratch.lw.assign(n, 0.0);
    windows_.best_energies(model.matrix, scratch.eps, workers);
    for (int r = 1; r <= prefix; ++r) {
      const double ltf = model.log_tf[static_cast<std::size_t>(r - 1)];
      for (std::size_t i = 0; i < n; ++i)
        scratch.lw[i] += log_bind_prob_mixed(ltf + scratch.eps[i], model.c_junk);
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : scratch.lw) mx = std::max(mx, v);
    const double s1 = chunked_sum(n, workers, [&](std::size_t i) { return std::exp(scratch.lw[i] - mx); });
    DenominatorEstimate est;
    est.seed = seed_;
    if (exact_) {
      est.value = std::exp(mx) * s1;
      return est;
    }
    const double s2 =
        chunked_sum(n, workers, [&](std::size_t i) { return std::exp(2.0 * (scratch.lw[i] - mx)); });
    const double m = static_cast<double>(n);
    const double scale = std::exp(log_scale_) * m;  // = N_types
    est.sample_size = n;
    est.value = scale * (s1 / m) * std::exp(mx);
    if (n > 1) {
      const double mean = s1 / m;
      double var = (s2 - m * mean * mean) / (m - 1.0);
      var = std::max(var, 0.0);
      est.standard_error = scale * std::sqrt(var / m) * std::exp(mx);
    }
    return est;
  }

 private:
  void log_denominators_logspace(const SelexModel& model, std::span<double> out, Scratch& scratch,
                                 unsigned workers) const {
    const std::size_t n = windows_.size();
    scratch.eps.resize(n);
    scratch.lw.assign(n, 0.0);
    windows_.best_energies(model.matrix, scratch.eps, workers);
    for (int r = 1; r <= model.rounds(); ++r) {
      const double ltf = model.log_tf[static_cast<std::size_t>(r - 1)];
      const double c = model.c_junk;
      for_each_chunk(n, kDefaultChunk, workers, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
          scratch.lw[i] += log_bind_prob_mixed(ltf + scratch.eps[i], c);
      });
      out[static_cast<std::size_t>(r - 1)] =
          log_scale_ + detail::log_sum_exp(scratch.lw, workers);
    }
  }

  int k_ = 0;
  bool exact_ = false;
  double log_scale_ = 0.0;
  std::uint64_t seed_ = 0;
  WindowTable windows_;
};

// One-shot Monte Carlo estimate of the round-prefix denominator.
inline DenominatorEstimate mc_denominator(const SelexModel& model, int k, int prefix,
                                          std::size_t sample_size, std::uint64_t seed,
                                          unsigned workers = 1) {
  model.validate();
  const Universe u = Universe::monte_carlo(k, model.matrix.site_length(), sample_size, seed, workers);
  return u.estimate(model, prefix, workers);
}

// Exhaustive denominator over all strand classes; guarded to small k.
inline double exact_denominator(const SelexModel& model, int prefix, int k,
                                unsigned workers = 1) {
  model.validate();
  const Universe u = Universe::exact(k, model.matrix.site_length());
  return u.estimate(model, prefix, workers).value;
}

// Probability that a molecule surviving `prefix` rounds has type s, given the
// normalizing denominator.
inline double round_prob(const SelexModel& model, const Sequence& s, int prefix,
                         const DenominatorEstimate& denom) {
  if (!(denom.value > 0.0)) throw std::invalid_argument("denominator must be positive");
  return selection_weight(model, s, prefix) / denom.value;
}

}
