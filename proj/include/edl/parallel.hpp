#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace edl {
namespace runtime {

/// Process-wide execution settings, set once by the CLI (or tests) before the
/// numeric kernels run.
void set_threads(int n);          // n <= 0 restores hardware default
int threads();                    // >= 1
void set_deterministic(bool on);  // default true
bool deterministic();

}  // namespace runtime

/// Runs fn(i) for i in [0, n) across the configured worker threads.
/// Work is handed out in contiguous chunks; every fn(i) must write only to
/// state owned by index i, so the schedule cannot affect results.
template <class F>
void parallel_for(std::size_t n, F&& fn) {
  const int nt = runtime::threads();
  if (nt <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t chunk = n / (static_cast<std::size_t>(nt) * 8);
  if (chunk == 0) chunk = 1;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t lo = next.fetch_add(chunk);
      if (lo >= n) break;
      const std::size_t hi = lo + chunk < n ? lo + chunk : n;
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nt) - 1);
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

/// Deterministic map-reduce: [0, n) is split into fixed blocks, each block is
/// reduced sequentially by block_fn, and block results are combined in block
/// order. The partition depends only on n and block_size, never on the thread
/// count, so sums are bit-reproducible. In fast (non-deterministic) mode the
/// per-block results are instead folded into per-thread accumulators as
/// blocks complete, trading reproducibility for fewer combine steps.
template <class State, class BlockFn, class CombineFn>
State parallel_reduce_blocks(std::size_t n, std::size_t block_size, State init,
                             BlockFn&& block_fn, CombineFn&& combine) {
  if (block_size == 0) block_size = 1;
  const std::size_t nblocks = (n + block_size - 1) / block_size;
  if (nblocks <= 1) {
    State s = init;
    if (n > 0) combine(s, block_fn(std::size_t{0}, std::size_t{0}, n));
    return s;
  }
  const int nt = runtime::threads();
  if (nt <= 1) {
    State s = init;
    for (std::size_t b = 0; b < nblocks; ++b) {
      const std::size_t lo = b * block_size;
      const std::size_t hi = lo + block_size < n ? lo + block_size : n;
      combine(s, block_fn(b, lo, hi));
    }
    return s;
  }
  if (runtime::deterministic()) {
    std::vector<State> partial(nblocks, init);
    parallel_for(nblocks, [&](std::size_t b) {
      const std::size_t lo = b * block_size;
      const std::size_t hi = lo + block_size < n ? lo + block_size : n;
      State s = init;
      combine(s, block_fn(b, lo, hi));
      partial[b] = std::move(s);
    });
    State s = init;
    for (std::size_t b = 0; b < nblocks; ++b) combine(s, std::move(partial[b]));
    return s;
  }
  std::vector<State> per_thread(static_cast<std::size_t>(nt), init);
  std::atomic<std::size_t> next{0};
  auto worker = [&](int tid) {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= nblocks) break;
      const std::size_t lo = b * block_size;
      const std::size_t hi = lo + block_size < n ? lo + block_size : n;
      combine(per_thread[static_cast<std::size_t>(tid)], block_fn(b, lo, hi));
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker, t);
  worker(0);
  for (auto& th : pool) th.join();
  State s = init;
  for (int t = 0; t < nt; ++t) combine(s, std::move(per_thread[static_cast<std::size_t>(t)]));
  return s;
}

/// Deterministic scalar sum of term(i) over [0, n).
template <class TermFn>
double parallel_sum(std::size_t n, TermFn&& term, std::size_t block_size = 4096) {
  return parallel_reduce_blocks<double>(
      n, block_size, 0.0,
      [&](std::size_t, std::size_t lo, std::size_t hi) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += term(i);
        return s;
      },
      [](double& acc, double v) { acc += v; });
}

}  // namespace edl
