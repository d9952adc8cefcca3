#ifndef BROWNFLOW_COALESCING_HPP
#define BROWNFLOW_COALESCING_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "brownflow/parallel.hpp"
#include "brownflow/rng.hpp"
#include "brownflow/samples.hpp"

namespace brownflow {

/// Zero-hitting probability of a Brownian bridge with variance parameter 2
/// (the difference of two independent standard Brownian motions) pinned at
/// gap0 and gap1 over a window of length h: exp(-gap0*gap1/h).
///
/// Drawing a Bernoulli with this probability after each Euler step makes the
/// discrete pair-meeting time exact in distribution: by the reflection
/// identity, the surviving gap then has precisely the law of the difference
/// process killed at zero.
inline double bridge_merge_probability(double gap0, double gap1, double h) {
  if (!(gap0 > 0.0) || !(gap1 > 0.0))
    throw std::invalid_argument(
        "bridge_merge_probability: gaps must be positive (merged pairs never get here)");
  if (!(h > 0.0)) throw std::invalid_argument("bridge_merge_probability: h must be > 0");
  return std::exp(-gap0 * gap1 / h);
}

/// Blocks are contiguous, inclusive tag ranges: with sorted starts and
/// order-preserving coalescence, only neighbours ever merge.
struct TagRange {
  int lo = 0;
  int hi = 0;
  friend bool operator==(const TagRange&, const TagRange&) = default;
};

struct Partition {
  std::vector<TagRange> blocks;  // in tag order
  friend bool operator==(const Partition&, const Partition&) = default;
};

/// True when `coarser` can be obtained from `finer` by merging blocks.
inline bool coarsens(const Partition& finer, const Partition& coarser) {
  for (const TagRange& big : coarser.blocks) {
    int cursor = big.lo;
    for (const TagRange& small : finer.blocks) {
      if (small.lo == cursor && small.hi <= big.hi) cursor = small.hi + 1;
    }
    if (cursor != big.hi + 1) return false;
  }
  return true;
}

struct PartitionEvent {
  double time = 0.0;
  Partition partition;
};

/// Time-indexed record of the coalescence structure: the partition at t=0
/// followed by one event per merge.
struct PartitionProcess {
  std::vector<PartitionEvent> events;

  const Partition& at_start() const { return events.front().partition; }
  const Partition& final() const { return events.back().partition; }
};

struct CoalescingPath {
  std::vector<double> times;
  std::vector<std::vector<double>> positions;  // per grid time, per tag
  PartitionProcess partition;
};

struct CoalesceConfig {
  std::vector<double> starts;  // nondecreasing; equal starts merge at t=0
  double step = 1e-3;
  std::size_t steps = 1000;
  std::size_t replicas = 1000;
  std::uint64_t seed = 0;
  bool bridge_correction = true;
  unsigned workers = 1;

  void validate() const {
    if (!(step > 0.0)) throw std::invalid_argument("CoalesceConfig: step must be > 0");
    if (steps < 1) throw std::invalid_argument("CoalesceConfig: steps must be >= 1");
    if (replicas < 1) throw std::invalid_argument("CoalesceConfig: replicas must be >= 1");
    if (starts.empty()) throw std::invalid_argument("CoalesceConfig: starts must be nonempty");
    for (std::size_t i = 1; i < starts.size(); ++i)
      if (starts[i] < starts[i - 1])
        throw std::invalid_argument("CoalesceConfig: starts must be nondecreasing");
  }
};

/// Grid simulator of the coalescing limit motion: one standard normal per
/// block per step scaled by sqrt(h); after the step, adjacent blocks merge on
/// order inversion or on a Bernoulli draw with the exact bridge-crossing
/// probability. A merged block continues from the midpoint of the two block
/// endpoints and is driven by one shared variate from then on.
class CoalescingStepper {
public:
  CoalescingStepper(std::span<const double> starts, double h, RngStream rng,
                    bool bridge_correction = true)
      : h_(h), sqrt_h_(std::sqrt(h)), rng_(rng), bridge_(bridge_correction) {
    if (!(h > 0.0)) throw std::invalid_argument("CoalescingStepper: step must be > 0");
    if (starts.empty()) throw std::invalid_argument("CoalescingStepper: empty starts");
    n_ = starts.size();
    for (std::size_t i = 0; i < n_; ++i) {
      if (i > 0 && starts[i] < starts[i - 1])
        throw std::invalid_argument("CoalescingStepper: starts must be nondecreasing");
      if (i > 0 && starts[i] == blocks_.back().pos) {
        blocks_.back().tags.hi = static_cast<int>(i);
      } else {
        blocks_.push_back({starts[i], starts[i],
                           {static_cast<int>(i), static_cast<int>(i)}});
      }
    }
    events_.push_back({0.0, snapshot()});
  }

  void step() {
    const double t_end = t_ + h_;
    for (Block& b : blocks_) b.pre = b.pos;
    for (Block& b : blocks_) b.pos += sqrt_h_ * rng_.normal();

    // Adjacent-pair scan, left to right, repeated until no merge fires.
    // Each unordered block pair gets at most one Bernoulli draw per step.
    tested_.clear();
    bool fired = true;
    while (fired) {
      fired = false;
      std::size_t i = 0;
      while (i + 1 < blocks_.size()) {
        Block& left = blocks_[i];
        Block& right = blocks_[i + 1];
        bool merge = right.pos <= left.pos;
        if (!merge && bridge_) {
          const std::pair<int, int> key{left.tags.lo, right.tags.lo};
          if (std::find(tested_.begin(), tested_.end(), key) == tested_.end()) {
            tested_.push_back(key);
            const double p =
                bridge_merge_probability(right.pre - left.pre, right.pos - left.pos, h_);
            merge = rng_.uniform() < p;
          }
        }
        if (merge) {
          left.pos = 0.5 * (left.pos + right.pos);
          left.pre = 0.5 * (left.pre + right.pre);
          left.tags.hi = right.tags.hi;
          blocks_.erase(blocks_.begin() + static_cast<std::ptrdiff_t>(i + 1));
          events_.push_back({t_end, snapshot()});
          fired = true;
        } else {
          ++i;
        }
      }
    }
    t_ = t_end;
  }

  double time() const { return t_; }
  std::size_t block_count() const { return blocks_.size(); }
  std::size_t particle_count() const { return n_; }
  const std::vector<PartitionEvent>& events() const { return events_; }

  void write_positions(std::vector<double>& out) const {
    out.resize(n_);
    for (const Block& b : blocks_)
      for (int tag = b.tags.lo; tag <= b.tags.hi; ++tag)
        out[static_cast<std::size_t>(tag)] = b.pos;
  }

  Partition snapshot() const {
    Partition p;
    p.blocks.reserve(blocks_.size());
    for (const Block& b : blocks_) p.blocks.push_back(b.tags);
    return p;
  }

private:
  struct Block {
    double pos;
    double pre;
    TagRange tags;
  };

  double h_;
  double sqrt_h_;
  double t_ = 0.0;
  std::size_t n_ = 0;
  RngStream rng_;
  bool bridge_ = true;
  std::vector<Block> blocks_;
  std::vector<PartitionEvent> events_;
  std::vector<std::pair<int, int>> tested_;
};

inline CoalescingPath simulate_coalescing_path(std::span<const double> starts, double h,
                                               std::size_t steps, RngStream rng,
                                               bool bridge_correction = true) {
  CoalescingStepper stepper(starts, h, rng, bridge_correction);
  CoalescingPath path;
  path.times.reserve(steps + 1);
  path.positions.reserve(steps + 1);
  std::vector<double> row;
  stepper.write_positions(row);
  path.times.push_back(0.0);
  path.positions.push_back(row);
  for (std::size_t k = 1; k <= steps; ++k) {
    stepper.step();
    stepper.write_positions(row);
    path.times.push_back(static_cast<double>(k) * h);
    path.positions.push_back(row);
  }
  path.partition.events = stepper.events();
  return path;
}

inline std::vector<CoalescingPath> simulate_coalescing(const CoalesceConfig& cfg) {
  cfg.validate();
  return map_replicas<CoalescingPath>(cfg.replicas, cfg.workers, [&](std::size_t i) {
    return simulate_coalescing_path(cfg.starts, cfg.step, cfg.steps,
                                    replica_stream(cfg.seed, i), cfg.bridge_correction);
  });
}

/// Joint sample of the selected coordinates at a grid time t; one row per path.
template <class PathRange>
SampleMatrix kpoint_marginal(const PathRange& paths, std::span<const std::size_t> tags,
                             double t) {
  if (tags.empty()) throw std::invalid_argument("kpoint_marginal: no tags selected");
  SampleMatrix out(tags.size());
  std::vector<double> row(tags.size());
  for (const auto& path : paths) {
    std::size_t k = 0;
    bool found = false;
    for (; k < path.times.size(); ++k)
      if (std::abs(path.times[k] - t) <= 1e-9 * std::max(1.0, std::abs(t))) {
        found = true;
        break;
      }
    if (!found) throw std::invalid_argument("kpoint_marginal: time not on the grid");
    const auto& x = path.positions[k];
    for (std::size_t j = 0; j < tags.size(); ++j) {
      if (tags[j] >= x.size()) throw std::out_of_range("kpoint_marginal: tag out of range");
      row[j] = x[tags[j]];
    }
    out.push_row(row);
  }
  return out;
}

}  // namespace brownflow

#endif  // BROWNFLOW_COALESCING_HPP
