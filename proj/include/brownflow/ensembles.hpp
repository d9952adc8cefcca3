#ifndef BROWNFLOW_ENSEMBLES_HPP
#define BROWNFLOW_ENSEMBLES_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "brownflow/coalescing.hpp"
#include "brownflow/flow.hpp"
#include "brownflow/samples.hpp"

namespace brownflow {

/// What to record per replica. Ensembles stream each replica through the
/// stepper and keep summaries only, so M x R never has to fit in memory.
struct EnsembleOptions {
  std::vector<double> snapshot_times;  // must lie on the time grid
  bool record_qv = false;              // realized per-coordinate sum of squared increments
  bool record_pair_bracket = false;    // pair (0,1): sum dx0*dx1 and sum g(x0-x1)*h
  std::optional<double> stop_eps;      // record x(tau∧T), tau = exit from all-gaps > 2*eps*r
  double stop_support_radius = 1.0;
};

struct ReplicaSummary {
  std::vector<double> snapshots;  // snapshot_times.size() x n, row-major
  std::vector<double> qv;         // per coordinate
  double cross_sum = 0.0;
  double bracket_sum = 0.0;
  double tau = std::numeric_limits<double>::infinity();
  std::vector<double> stopped;    // x(tau ∧ T)
  long crossings = 0;
  std::size_t final_blocks = 0;   // coalescing driver only
};

struct Ensemble {
  std::vector<double> starts;
  double step = 0.0;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  std::vector<double> snapshot_times;
  std::vector<ReplicaSummary> replicas;

  std::size_t particle_count() const { return starts.size(); }

  std::size_t snapshot_index(double t) const {
    for (std::size_t k = 0; k < snapshot_times.size(); ++k)
      if (std::abs(snapshot_times[k] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return k;
    throw std::invalid_argument("ensemble: time was not recorded as a snapshot");
  }

  /// n-dimensional cloud of particle positions at a recorded time.
  SampleMatrix snapshot_cloud(double t) const {
    const std::size_t k = snapshot_index(t);
    const std::size_t n = particle_count();
    SampleMatrix m(n);
    m.data.reserve(replicas.size() * n);
    for (const auto& r : replicas)
      m.push_row({r.snapshots.data() + k * n, n});
    return m;
  }

  std::vector<double> coordinate_at(double t, std::size_t tag) const {
    const std::size_t k = snapshot_index(t);
    const std::size_t n = particle_count();
    if (tag >= n) throw std::out_of_range("ensemble: tag out of range");
    std::vector<double> out(replicas.size());
    for (std::size_t r = 0; r < replicas.size(); ++r)
      out[r] = replicas[r].snapshots[k * n + tag];
    return out;
  }

  SampleMatrix stopped_cloud() const {
    const std::size_t n = particle_count();
    SampleMatrix m(n);
    m.data.reserve(replicas.size() * n);
    for (const auto& r : replicas) {
      if (r.stopped.size() != n)
        throw std::logic_error("ensemble: stopped vectors were not recorded");
      m.push_row(r.stopped);
    }
    return m;
  }
};

namespace detail {

inline std::vector<std::size_t> snapshot_indices(const EnsembleOptions& opts, double h,
                                                 std::size_t steps) {
  std::vector<std::size_t> idx;
  idx.reserve(opts.snapshot_times.size());
  for (double t : opts.snapshot_times) {
    const auto k = static_cast<std::size_t>(std::llround(t / h));
    if (k > steps || std::abs(static_cast<double>(k) * h - t) > 1e-9 * std::max(1.0, t))
      throw std::invalid_argument("ensemble: snapshot time is not on the grid");
    idx.push_back(k);
  }
  return idx;
}

/// Drives one replica through any stepper exposing step() and positions().
/// `pre_step_hook(x)` runs before each step (bracket accumulation);
/// `post_step_hook(x_prev, x)` after (QV, cross products).
template <class Stepper>
ReplicaSummary run_replica(Stepper& stepper, double h, std::size_t steps,
                           const std::vector<std::size_t>& snap_idx,
                           const EnsembleOptions& opts,
                           const CovarianceKernel* bracket_kernel) {
  const std::span<const double> x0 = stepper.positions();
  const std::size_t n = x0.size();
  ReplicaSummary out;
  out.snapshots.assign(snap_idx.size() * n, 0.0);
  if (opts.record_qv) out.qv.assign(n, 0.0);
  const double stop_threshold =
      opts.stop_eps ? 2.0 * (*opts.stop_eps) * opts.stop_support_radius : 0.0;

  std::vector<double> prev(x0.begin(), x0.end());
  const auto record_state = [&](std::size_t k, std::span<const double> x) {
    for (std::size_t s = 0; s < snap_idx.size(); ++s)
      if (snap_idx[s] == k)
        for (std::size_t i = 0; i < n; ++i) out.snapshots[s * n + i] = x[i];
    if (opts.stop_eps && out.stopped.empty() && n >= 2 &&
        min_pairwise_gap(x) <= stop_threshold) {
      out.tau = static_cast<double>(k) * h;
      out.stopped.assign(x.begin(), x.end());
    }
  };
  record_state(0, x0);

  for (std::size_t k = 1; k <= steps; ++k) {
    if (opts.record_pair_bracket && bracket_kernel && n >= 2)
      out.bracket_sum += (*bracket_kernel)(prev[0] - prev[1]) * h;
    stepper.step();
    const std::span<const double> x = stepper.positions();
    if (opts.record_qv)
      for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - prev[i];
        out.qv[i] += dx * dx;
      }
    if (opts.record_pair_bracket && n >= 2)
      out.cross_sum += (x[0] - prev[0]) * (x[1] - prev[1]);
    record_state(k, x);
    prev.assign(x.begin(), x.end());
  }
  if (opts.stop_eps && out.stopped.empty()) out.stopped = prev;
  return out;
}

}  // namespace detail

/// Flow ensemble; bracket integrals are evaluated with `bracket_kernel`
/// (defaults to the dynamics kernel).
inline Ensemble run_flow_ensemble(const CovarianceKernel& ck, const SimConfig& cfg,
                                  const EnsembleOptions& opts,
                                  const CovarianceKernel* bracket_kernel = nullptr) {
  cfg.validate();
  const auto snap_idx = detail::snapshot_indices(opts, cfg.step, cfg.steps);
  const CovarianceKernel* bk = bracket_kernel ? bracket_kernel : &ck;
  Ensemble ens;
  ens.starts = cfg.starts;
  ens.step = cfg.step;
  ens.steps = cfg.steps;
  ens.seed = cfg.seed;
  ens.snapshot_times = opts.snapshot_times;
  ens.replicas = map_replicas<ReplicaSummary>(cfg.replicas, cfg.workers, [&](std::size_t i) {
    FlowStepper stepper(ck, cfg.starts, cfg.mode, cfg.step, replica_stream(cfg.seed, i));
    auto summary = detail::run_replica(stepper, cfg.step, cfg.steps, snap_idx, opts, bk);
    summary.crossings = stepper.crossings();
    return summary;
  });
  return ens;
}

/// Independent standard Brownian bundle from the same starts (the reference
/// law for the stopped-process identity).
inline Ensemble run_wiener_ensemble(std::span<const double> starts, double h,
                                    std::size_t steps, std::size_t replicas,
                                    std::uint64_t seed, unsigned workers,
                                    const EnsembleOptions& opts) {
  const auto snap_idx = detail::snapshot_indices(opts, h, steps);
  Ensemble ens;
  ens.starts.assign(starts.begin(), starts.end());
  ens.step = h;
  ens.steps = steps;
  ens.seed = seed;
  ens.snapshot_times = opts.snapshot_times;
  ens.replicas = map_replicas<ReplicaSummary>(replicas, workers, [&](std::size_t i) {
    WienerBundleStepper stepper(ens.starts, h, replica_stream(seed, i));
    return detail::run_replica(stepper, h, steps, snap_idx, opts, nullptr);
  });
  return ens;
}

inline Ensemble run_coalescing_ensemble(const CoalesceConfig& cfg,
                                        const EnsembleOptions& opts) {
  cfg.validate();
  const auto snap_idx = detail::snapshot_indices(opts, cfg.step, cfg.steps);
  Ensemble ens;
  ens.starts = cfg.starts;
  ens.step = cfg.step;
  ens.steps = cfg.steps;
  ens.seed = cfg.seed;
  ens.snapshot_times = opts.snapshot_times;
  ens.replicas = map_replicas<ReplicaSummary>(cfg.replicas, cfg.workers, [&](std::size_t i) {
    // adapter: expose tag positions as a contiguous span for run_replica
    struct TagStepper {
      CoalescingStepper inner;
      std::vector<double> buffer;
      void step() {
        inner.step();
        inner.write_positions(buffer);
      }
      std::span<const double> positions() const { return buffer; }
    };
    TagStepper stepper{CoalescingStepper(cfg.starts, cfg.step,
                                         replica_stream(cfg.seed, i),
                                         cfg.bridge_correction),
                       {}};
    stepper.inner.write_positions(stepper.buffer);
    auto summary =
        detail::run_replica(stepper, cfg.step, cfg.steps, snap_idx, opts, nullptr);
    summary.final_blocks = stepper.inner.block_count();
    return summary;
  });
  return ens;
}

}  // namespace brownflow

#endif  // BROWNFLOW_ENSEMBLES_HPP
