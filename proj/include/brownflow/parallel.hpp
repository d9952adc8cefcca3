#ifndef BROWNFLOW_PARALLEL_HPP
#define BROWNFLOW_PARALLEL_HPP

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace brownflow {

inline unsigned resolve_workers(unsigned requested) {
  if (requested != 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  return hw < 8u ? hw : 8u;
}

/// Runs fn(replica_index) for every index in [0, replicas).
///
/// Indices are partitioned statically (worker w owns indices with
/// index % workers == w), so which worker computes which replica is a pure
/// function of the worker count; combined with per-replica RNG streams and
/// per-index result slots this makes all aggregate results independent of
/// scheduling order. fn must only write to state owned by its index.
template <class Fn>
void for_each_replica(std::size_t replicas, unsigned workers, Fn&& fn) {
  workers = resolve_workers(workers);
  if (workers <= 1 || replicas <= 1) {
    for (std::size_t i = 0; i < replicas; ++i) fn(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < replicas; i += workers) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

/// Convenience: collect one result per replica, stored by index.
template <class T, class Fn>
std::vector<T> map_replicas(std::size_t replicas, unsigned workers, Fn&& fn) {
  std::vector<T> out(replicas);
  for_each_replica(replicas, workers, [&](std::size_t i) { out[i] = fn(i); });
  return out;
}

}  // namespace brownflow

#endif  // BROWNFLOW_PARALLEL_HPP
