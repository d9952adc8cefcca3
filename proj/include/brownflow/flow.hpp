#ifndef BROWNFLOW_FLOW_HPP
#define BROWNFLOW_FLOW_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "brownflow/diffusion.hpp"
#include "brownflow/mollifier.hpp"
#include "brownflow/parallel.hpp"
#include "brownflow/rng.hpp"

namespace brownflow {

/// covariance: drive the n-point motion with the matrix A(x) = (g_eps(x_i-x_j)).
/// field: discretize the driving noise field itself on a spatial lattice, so
/// all particles share the same cell variates (preserves the common-noise
/// coupling of the continuum flow).
enum class FlowMode { covariance, field };

inline const char* to_string(FlowMode m) {
  return m == FlowMode::covariance ? "covariance" : "field";
}

inline FlowMode flow_mode_from_string(const std::string& s) {
  if (s == "covariance") return FlowMode::covariance;
  if (s == "field") return FlowMode::field;
  throw std::invalid_argument("unknown flow mode: " + s);
}

struct SimConfig {
  double eps = 0.1;
  std::vector<double> starts;
  double step = 1e-3;          // h
  std::size_t steps = 1000;    // M, grid 0, h, ..., M*h
  std::size_t replicas = 1000;
  std::uint64_t seed = 0;
  FlowMode mode = FlowMode::covariance;
  unsigned workers = 1;

  void validate() const {
    if (!(eps > 0.0)) throw std::invalid_argument("SimConfig: eps must be > 0");
    if (!(step > 0.0)) throw std::invalid_argument("SimConfig: step must be > 0");
    if (steps < 1) throw std::invalid_argument("SimConfig: steps must be >= 1");
    if (replicas < 1) throw std::invalid_argument("SimConfig: replicas must be >= 1");
    if (starts.empty()) throw std::invalid_argument("SimConfig: starts must be nonempty");
    for (std::size_t i = 1; i < starts.size(); ++i)
      if (!(starts[i] > starts[i - 1]))
        throw std::invalid_argument("SimConfig: starts must be strictly increasing");
    for (double u : starts)
      if (!std::isfinite(u)) throw std::invalid_argument("SimConfig: starts must be finite");
  }
};

/// One realized trajectory of the n tagged particles on the time grid.
/// positions[k][i] is particle i (tag order) at time times[k]; row 0 is the
/// start vector. crossings counts adjacent tag pairs found in inverted order
/// after a step, summed over steps; the continuum flow preserves order, so
/// every count is discretization error and is reported, never corrected.
struct FlowPath {
  std::vector<double> times;
  std::vector<std::vector<double>> positions;
  FlowMode mode = FlowMode::covariance;
  long crossings = 0;
};

/// Per-step lattice discretization of the driving noise: one N(0,1) variate
/// per spatial cell, cells on the global lattice of pitch eps*r/8, window
/// covering every particle +- eps*r plus a 6*sqrt(h) margin.
struct NoiseField {
  double pitch = 0.0;
  long first_cell = 0;  // lattice index of xi[0]
  std::vector<double> xi;

  double cell_center(std::size_t k) const {
    return (static_cast<double>(first_cell + static_cast<long>(k)) + 0.5) * pitch;
  }
};

/// Euler-Maruyama integrator for one replica of the n-point motion.
class FlowStepper {
public:
  FlowStepper(const CovarianceKernel& ck, std::span<const double> starts, FlowMode mode,
              double h, RngStream rng)
      : ck_(&ck), mode_(mode), h_(h), sqrt_h_(std::sqrt(h)),
        x_(starts.begin(), starts.end()), rng_(rng) {
    if (!(h > 0.0)) throw std::invalid_argument("FlowStepper: step must be > 0");
    if (x_.empty()) throw std::invalid_argument("FlowStepper: need at least one particle");
    const double r = ck.kernel().support_radius();
    support_ = ck.eps() * r;
    pitch_ = support_ / 8.0;
    margin_ = 6.0 * sqrt_h_;
    if (mode_ == FlowMode::covariance && x_.size() > 1) {
      const auto n = static_cast<Eigen::Index>(x_.size());
      a_.resize(n, n);
      xi_.resize(n);
    }
  }

  void step() {
    if (mode_ == FlowMode::covariance)
      step_covariance();
    else
      step_field();
    t_ += h_;
    for (std::size_t i = 0; i + 1 < x_.size(); ++i)
      if (x_[i + 1] < x_[i]) ++crossings_;
  }

  double time() const { return t_; }
  std::span<const double> positions() const { return x_; }
  long crossings() const { return crossings_; }
  const NoiseField& noise_field() const { return field_; }

private:
  void step_covariance() {
    const std::size_t n = x_.size();
    if (n == 1) {
      x_[0] += sqrt_h_ * rng_.normal();
      return;
    }
    a_ = diffusion_matrix(*ck_, x_);
    const Eigen::MatrixXd l = psd_sqrt(a_);
    for (std::size_t i = 0; i < n; ++i) xi_[static_cast<Eigen::Index>(i)] = rng_.normal();
    const Eigen::VectorXd dx = l * xi_;
    for (std::size_t i = 0; i < n; ++i) x_[i] += sqrt_h_ * dx[static_cast<Eigen::Index>(i)];
  }

  void step_field() {
    const auto [mn, mx] = std::minmax_element(x_.begin(), x_.end());
    const long lo = static_cast<long>(std::floor((*mn - support_ - margin_) / pitch_));
    const long hi = static_cast<long>(std::ceil((*mx + support_ + margin_) / pitch_));
    if (hi <= lo) throw std::runtime_error("FlowStepper: noise window is empty");
    field_.pitch = pitch_;
    field_.first_cell = lo;
    field_.xi.resize(static_cast<std::size_t>(hi - lo));
    for (double& v : field_.xi) v = rng_.normal();
    // window invariant: every particle is covered +- support
    if ((static_cast<double>(lo)) * pitch_ > *mn - support_ ||
        (static_cast<double>(hi)) * pitch_ < *mx + support_)
      throw std::runtime_error("FlowStepper: noise window failed to cover the particles");

    const double scale = std::sqrt(pitch_ * h_);
    for (double& xi_pos : x_) {
      const double x = xi_pos;
      long k0 = static_cast<long>(std::ceil((x - support_) / pitch_ - 0.5));
      long k1 = static_cast<long>(std::floor((x + support_) / pitch_ - 0.5));
      k0 = std::max(k0, lo);
      k1 = std::min(k1, hi - 1);
      double acc = 0.0;
      for (long k = k0; k <= k1; ++k) {
        const double q = (static_cast<double>(k) + 0.5) * pitch_;
        acc += phi_eps(ck_->kernel(), ck_->eps(), x - q) *
               field_.xi[static_cast<std::size_t>(k - lo)];
      }
      xi_pos = x + acc * scale;
    }
  }

  const CovarianceKernel* ck_;
  FlowMode mode_;
  double h_;
  double sqrt_h_;
  double t_ = 0.0;
  std::vector<double> x_;
  RngStream rng_;
  long crossings_ = 0;
  double support_ = 0.0;
  double pitch_ = 0.0;
  double margin_ = 0.0;
  Eigen::MatrixXd a_;
  Eigen::VectorXd xi_;
  NoiseField field_;
};

/// Independent standard Brownian motions from the given starts; the reference
/// bundle for the stopped-process comparison.
class WienerBundleStepper {
public:
  WienerBundleStepper(std::span<const double> starts, double h, RngStream rng)
      : h_(h), sqrt_h_(std::sqrt(h)), x_(starts.begin(), starts.end()), rng_(rng) {}

  void step() {
    for (double& xi : x_) xi += sqrt_h_ * rng_.normal();
    t_ += h_;
  }

  double time() const { return t_; }
  std::span<const double> positions() const { return x_; }

private:
  double h_;
  double sqrt_h_;
  double t_ = 0.0;
  std::vector<double> x_;
  RngStream rng_;
};

inline double min_pairwise_gap(std::span<const double> x) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j)
      best = std::min(best, std::abs(x[i] - x[j]));
  return best;
}

/// First grid time at which some pairwise gap is <= 2*eps*r, i.e. the exit
/// time from the set where the diffusion matrix is the identity.
inline std::optional<double> first_exit_time(const FlowPath& path, double eps,
                                             double support_radius = 1.0) {
  if (path.positions.empty() || path.positions.front().size() < 2) return std::nullopt;
  const double threshold = 2.0 * eps * support_radius;
  for (std::size_t k = 0; k < path.positions.size(); ++k)
    if (min_pairwise_gap(path.positions[k]) <= threshold) return path.times[k];
  return std::nullopt;
}

inline FlowPath simulate_flow_path(const CovarianceKernel& ck, const SimConfig& cfg,
                                   std::size_t replica_index) {
  FlowStepper stepper(ck, cfg.starts, cfg.mode, cfg.step,
                      replica_stream(cfg.seed, replica_index));
  FlowPath path;
  path.mode = cfg.mode;
  path.times.reserve(cfg.steps + 1);
  path.positions.reserve(cfg.steps + 1);
  path.times.push_back(0.0);
  path.positions.emplace_back(cfg.starts);
  for (std::size_t k = 1; k <= cfg.steps; ++k) {
    stepper.step();
    path.times.push_back(static_cast<double>(k) * cfg.step);
    path.positions.emplace_back(stepper.positions().begin(), stepper.positions().end());
  }
  path.crossings = stepper.crossings();
  return path;
}

/// R independent replicas, reproducible from cfg.seed and invariant in the
/// worker count (replica i always uses stream(seed, i)).
inline std::vector<FlowPath> simulate_flow(const SimConfig& cfg, const CovarianceKernel& ck) {
  cfg.validate();
  return map_replicas<FlowPath>(cfg.replicas, cfg.workers, [&](std::size_t i) {
    return simulate_flow_path(ck, cfg, i);
  });
}

inline std::vector<FlowPath> simulate_flow(const SimConfig& cfg) {
  cfg.validate();
  const CovarianceKernel ck(make_mollifier(1), cfg.eps);
  return simulate_flow(cfg, ck);
}

}  // namespace brownflow

#endif  // BROWNFLOW_FLOW_HPP
