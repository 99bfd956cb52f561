#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lysim {

struct ParallelOptions {
  unsigned workers = 0;        // 0: std::thread::hardware_concurrency()
  bool deterministic = false;  // ordered reduction over fixed batches
  std::size_t batch_size = 256;

  unsigned resolved_workers() const {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    return workers == 0 ? hw : workers;
  }
};

/// Runs replicate(i, tally) for i in [0, n) on a worker pool and merges the
/// tallies. Replicates pull batches from a shared counter.
///
/// Deterministic mode keeps one tally per batch and merges them in batch
/// order, so the result does not depend on scheduling. Otherwise each worker
/// owns a tally and tallies merge in worker order, which only perturbs
/// floating-point sums.
///
/// Tally must be default-constructible and provide merge(const Tally&).
template <class Tally, class Replicate>
Tally run_replicates(std::size_t n, const ParallelOptions& options, Replicate&& replicate) {
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const std::size_t n_batches = (n + batch - 1) / batch;
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(options.resolved_workers(), std::max<std::size_t>(1, n_batches)));

  std::vector<Tally> per_batch(options.deterministic ? n_batches : 0);
  std::vector<Tally> per_worker(options.deterministic ? 0 : workers);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&](unsigned worker) {
    try {
      for (;;) {
        const std::size_t b = next.fetch_add(1);
        if (b >= n_batches) break;
        Tally& tally = options.deterministic ? per_batch[b] : per_worker[worker];
        const std::size_t end = std::min(n, (b + 1) * batch);
        for (std::size_t i = b * batch; i < end; ++i) replicate(i, tally);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next.store(n_batches);
    }
  };

  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  if (failure) std::rethrow_exception(failure);

  Tally total;
  for (const auto& t : options.deterministic ? per_batch : per_worker) total.merge(t);
  return total;
}

}  // namespace lysim
