#pragma once
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "qf/noise.hpp"

namespace qf {

/// Per-coordinate ensemble mean and standard error (sample sd / sqrt(n)).
struct EnsembleStats {
  std::vector<double> mean;
  std::vector<double> std_error;
  std::uint64_t n_traj = 0;
};

/// Effective worker count: explicit flag > 0 wins, else QF_WORKERS, else
/// hardware concurrency.  0 always means "auto".
inline int resolve_worker_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("QF_WORKERS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Runs `job` over trajectory indices 0..n_traj-1.  Each job sees only its own
/// counter-seeded NoisePath, so results are bit-identical for any worker
/// count; reduction always runs in index order.  A throwing job aborts the
/// ensemble and the error is rethrown tagged with the trajectory index.
template <typename Job>
EnsembleStats run_ensemble(const TimeGrid& grid, const std::vector<double>& weights,
                           const SeedPolicy& seeds, std::uint64_t n_traj, Job&& job,
                           int workers = 0) {
  if (n_traj == 0) throw std::invalid_argument("run_ensemble: n_traj must be positive");
  const int n_workers = resolve_worker_count(workers);

  std::vector<std::vector<double>> slots(n_traj);
  std::atomic<std::uint64_t> cursor{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::uint64_t error_index = 0;
  std::mutex error_mutex;

  auto worker = [&]() {
    while (!failed.load(std::memory_order_relaxed)) {
      std::uint64_t k = cursor.fetch_add(1);
      if (k >= n_traj) return;
      try {
        NoisePath path = sample_wiener_path(grid, weights, seeds, k);
        slots[k] = job(path, k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) {
          error = std::current_exception();
          error_index = k;
        }
        return;
      }
    }
  };

  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  if (failed.load()) {
    try {
      std::rethrow_exception(error);
    } catch (const std::exception& e) {
      throw std::runtime_error("trajectory " + std::to_string(error_index) +
                               " failed: " + e.what());
    }
  }

  const size_t m = slots[0].size();
  for (std::uint64_t k = 0; k < n_traj; ++k)
    if (slots[k].size() != m)
      throw std::runtime_error("run_ensemble: inconsistent job output length");

  // Ordered two-pass reduction: identical bytes regardless of thread layout.
  EnsembleStats stats;
  stats.n_traj = n_traj;
  stats.mean.assign(m, 0.0);
  stats.std_error.assign(m, 0.0);
  for (std::uint64_t k = 0; k < n_traj; ++k)
    for (size_t j = 0; j < m; ++j) stats.mean[j] += slots[k][j];
  for (size_t j = 0; j < m; ++j) stats.mean[j] /= static_cast<double>(n_traj);
  if (n_traj > 1) {
    for (std::uint64_t k = 0; k < n_traj; ++k)
      for (size_t j = 0; j < m; ++j) {
        double d = slots[k][j] - stats.mean[j];
        stats.std_error[j] += d * d;
      }
    for (size_t j = 0; j < m; ++j)
      stats.std_error[j] = std::sqrt(stats.std_error[j] /
                                     (static_cast<double>(n_traj) *
                                      static_cast<double>(n_traj - 1)));
  }
  return stats;
}

}  // namespace qf
