#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace selex {

inline constexpr std::size_t kDefaultChunk = 4096;

// Runs fn(chunk_index, begin, end) over [0, n) split into fixed-size chunks.
// Chunk boundaries depend only on n and chunk_size, never on the worker
// count, so per-chunk outputs indexed by chunk combine to the same result on
// any number of threads.
template <class Fn>
void for_each_chunk(std::size_t n, std::size_t chunk_size, unsigned workers, Fn&& fn) {
  if (n == 0) return;
  const std::size_t nchunks = (n + chunk_size - 1) / chunk_size;
  unsigned nw = std::max(1u, workers);
  nw = static_cast<unsigned>(std::min<std::size_t>(nw, nchunks));
  if (nw == 1) {
    for (std::size_t c = 0; c < nchunks; ++c)
      fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    return;
  }
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1, std::memory_order_relaxed);
      if (c >= nchunks) return;
      fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(nw - 1);
  for (unsigned w = 1; w < nw; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
}

// Pairwise sum of ordered partials. The reduction tree depends only on the
// element count, so the result is independent of how the partials were
// produced.
inline double pairwise_sum(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::size_t n = v.size();
  while (n > 1) {
    std::size_t m = 0;
    for (std::size_t i = 0; i + 1 < n; i += 2) v[m++] = v[i] + v[i + 1];
    if (n % 2) v[m++] = v[n - 1];
    n = m;
  }
  return v[0];
}

// Deterministic sum of term(i) for i in [0, n): serial accumulation inside
// fixed-size chunks, pairwise combination across chunk partials. Identical
// for every worker count, including 1.
template <class Term>
double chunked_sum(std::size_t n, unsigned workers, Term&& term,
                   std::size_t chunk_size = kDefaultChunk) {
  if (n == 0) return 0.0;
  const std::size_t nchunks = (n + chunk_size - 1) / chunk_size;
  std::vector<double> partial(nchunks, 0.0);
  for_each_chunk(n, chunk_size, workers, [&](std::size_t c, std::size_t b, std::size_t e) {
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) s += term(i);
    partial[c] = s;
  });
  return pairwise_sum(std::move(partial));
}

}
