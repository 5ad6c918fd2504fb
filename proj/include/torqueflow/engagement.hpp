#pragma once

// Wrench tip kinematics, the distance-based engagement criterion and a
// simulated 6-DoF tracking source with drift, loss and re-detection.

#include <torqueflow/error.hpp>
#include <torqueflow/geometry.hpp>
#include <torqueflow/scene.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace torqueflow {

struct TrackingConfig {
  double drift_rate = 0.2;          // mm / sqrt(s), per axis
  double loss_rate = 0.01;          // events / s
  double redetect_delay = 1.5;      // s
  double engage_threshold = 15.0;   // mm
  double ambiguity_epsilon = 1.0;   // mm
  // Maximum angle between the bit and the site axis. Disabled when empty.
  std::optional<double> max_axis_angle_deg;

  void check() const {
    if (!(drift_rate >= 0 && loss_rate >= 0 && redetect_delay >= 0 && ambiguity_epsilon >= 0))
      throw ConfigError("tracking config values must be non-negative");
    if (!(engage_threshold > 0)) throw ConfigError("engage_threshold must be positive");
    if (max_axis_angle_deg && !(*max_axis_angle_deg >= 0)) throw ConfigError("max_axis_angle_deg must be non-negative");
  }
};

struct EngagementState {
  std::optional<SiteRef> engaged_site;
  double tip_distance = std::numeric_limits<double>::infinity();  // to the engaged (or nearest) site
  bool tracking_ok = true;
  bool ambiguous = false;
};

/// Pose of the bit-tip frame in world coordinates.
inline Pose tip_pose(const Pose& wrench_pose, const ToolModel& tool) {
  return compose(wrench_pose, tool.bit_tip_offset);
}

inline Vec3 tip_position(const Pose& wrench_pose, const ToolModel& tool) {
  return wrench_pose.apply(tool.bit_tip_offset.translation);
}

/// Nearest-site engagement test. Refuses to engage when tracking is down,
/// when the nearest site is beyond the threshold, or when the runner-up is
/// within ambiguity_epsilon of the nearest.
inline EngagementState classify_engagement(const Pose& wrench_pose, const ToolModel& tool,
                                           std::span<const WorldSite> sites, const TrackingConfig& cfg,
                                           bool tracking_ok) {
  EngagementState out;
  out.tracking_ok = tracking_ok;
  if (!tracking_ok) return out;

  const Pose tip = tip_pose(wrench_pose, tool);
  const Vec3& p = tip.translation;
  double best = std::numeric_limits<double>::infinity();
  double second = best;
  const WorldSite* best_site = nullptr;
  for (const auto& s : sites) {
    const double d = (s.head - p).norm();
    if (d < best) {
      second = best;
      best = d;
      best_site = &s;
    } else if (d < second) {
      second = d;
    }
  }
  if (!best_site) return out;
  out.tip_distance = best;
  if (best > cfg.engage_threshold) return out;
  if (second - best < cfg.ambiguity_epsilon) {
    out.ambiguous = true;
    return out;
  }
  if (cfg.max_axis_angle_deg) {
    const Vec3 bit_axis = tip.rotation * Vec3::UnitZ();
    const double c = std::clamp(bit_axis.dot(best_site->axis), -1.0, 1.0);
    if (std::acos(c) * 180.0 / std::numbers::pi > *cfg.max_axis_angle_deg) return out;
  }
  out.engaged_site = best_site->ref;
  return out;
}

inline EngagementState classify_engagement(const Pose& wrench_pose, const ToolModel& tool,
                                           const std::vector<Part>& parts, const TrackingConfig& cfg,
                                           bool tracking_ok) {
  const auto sites = world_sites(parts);
  return classify_engagement(wrench_pose, tool, std::span<const WorldSite>(sites), cfg, tracking_ok);
}

enum class TrackingEventKind { kNone, kDrift, kLoss, kRedetect };

struct TrackingEvent {
  TrackingEventKind kind = TrackingEventKind::kNone;
  Vec3 drift = Vec3::Zero();  // accumulated offset after this step
};

/// Single-owner stateful stepper. Loss arrivals are Poisson(loss_rate * dt)
/// per step; a loss blanks tracking for redetect_delay seconds. Drift is a
/// per-axis Gaussian random walk added to the reported position and re-anchored
/// to zero on every re-detection.
class TrackingSimulator {
 public:
  TrackingSimulator(TrackingConfig cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) { cfg_.check(); }

  TrackingEvent step(double dt) {
    if (!(dt > 0)) throw ConfigError("tracking step needs dt > 0");
    if (!ok_) {
      lost_remaining_ -= dt;
      if (lost_remaining_ <= 1e-12) {
        ok_ = true;
        drift_.setZero();
        return {TrackingEventKind::kRedetect, drift_};
      }
      return {TrackingEventKind::kNone, drift_};
    }
    if (cfg_.loss_rate > 0) {
      std::poisson_distribution<int> arrivals(cfg_.loss_rate * dt);
      if (arrivals(rng_) > 0) {
        ok_ = false;
        lost_remaining_ = cfg_.redetect_delay;
        ++losses_;
        return {TrackingEventKind::kLoss, drift_};
      }
    }
    if (cfg_.drift_rate > 0) {
      std::normal_distribution<double> n(0.0, cfg_.drift_rate * std::sqrt(dt));
      drift_ += Vec3(n(rng_), n(rng_), n(rng_));
      return {TrackingEventKind::kDrift, drift_};
    }
    return {};
  }

  bool tracking_ok() const { return ok_; }
  const Vec3& drift() const { return drift_; }
  std::uint64_t loss_count() const { return losses_; }
  const TrackingConfig& config() const { return cfg_; }

  /// Pose the tracker reports for a given true wrench pose.
  Pose report(const Pose& truth) const {
    if (cfg_.drift_rate == 0) return truth;
    Pose out = truth;
    out.translation += drift_;
    return out;
  }

 private:
  TrackingConfig cfg_;
  std::mt19937_64 rng_;
  bool ok_ = true;
  double lost_remaining_ = 0;
  Vec3 drift_ = Vec3::Zero();
  std::uint64_t losses_ = 0;
};

}  // namespace torqueflow
