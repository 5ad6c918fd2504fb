#pragma once

// Digital twin of the bench: parts with bolt sites, the wrench tool geometry
// and the tightening scenarios that run over them.

#include <torqueflow/error.hpp>
#include <torqueflow/geometry.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace torqueflow {

/// Torque in centinewton-meters. 1 N.m = 100 cNm.
using TorqueCnm = std::int32_t;

inline constexpr TorqueCnm kMinTorqueCnm = 100;
inline constexpr TorqueCnm kMaxTorqueCnm = 1000;

inline constexpr bool torque_in_range(std::int64_t cnm) {
  return cnm >= kMinTorqueCnm && cnm <= kMaxTorqueCnm;
}

struct BoltSite {
  std::string site_id;
  Vec3 head_point = Vec3::Zero();     // part frame, mm
  Vec3 axis = Vec3::UnitZ();          // part frame, unit, pointing out of the head
};

struct Part {
  std::string part_id;
  std::vector<BoltSite> sites;
  Pose mount_pose;  // part frame -> world frame

  const BoltSite* find_site(std::string_view site_id) const {
    for (const auto& s : sites)
      if (s.site_id == site_id) return &s;
    return nullptr;
  }
};

struct ToolModel {
  Pose bit_tip_offset;  // wrench body frame -> bit-tip frame
};

/// Identifies one bolt site in the scene.
struct SiteRef {
  std::string part_id;
  std::string site_id;

  friend bool operator==(const SiteRef&, const SiteRef&) = default;
  friend auto operator<=>(const SiteRef&, const SiteRef&) = default;
};

struct ScenarioStep {
  SiteRef site;
  TorqueCnm target_cnm = 0;

  friend bool operator==(const ScenarioStep&, const ScenarioStep&) = default;
};

struct Scenario {
  std::string scenario_id;
  std::vector<ScenarioStep> steps;

  std::optional<std::size_t> step_of(const SiteRef& site) const {
    for (std::size_t i = 0; i < steps.size(); ++i)
      if (steps[i].site == site) return i;
    return std::nullopt;
  }
};

struct Scene {
  std::vector<Part> parts;
  ToolModel tool;
  std::vector<Scenario> scenarios;

  const Part* find_part(std::string_view part_id) const {
    for (const auto& p : parts)
      if (p.part_id == part_id) return &p;
    return nullptr;
  }
  const BoltSite* find_site(const SiteRef& ref) const {
    const Part* p = find_part(ref.part_id);
    return p ? p->find_site(ref.site_id) : nullptr;
  }
  const Scenario* find_scenario(std::string_view id) const {
    for (const auto& s : scenarios)
      if (s.scenario_id == id) return &s;
    return nullptr;
  }
};

/// Rows x cols lattice in the part's XY plane, row-major, site (0,0) at the
/// origin. Row index runs along +Y, column index along +X.
inline Part make_grid(std::string part_id, int rows, int cols, double pitch_mm) {
  if (rows <= 0 || cols <= 0) throw SceneError(part_id, "grid dimensions must be positive");
  if (!(pitch_mm > 0.0)) throw SceneError(part_id, "grid pitch must be positive");
  Part part;
  part.part_id = std::move(part_id);
  part.sites.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      part.sites.push_back({"r" + std::to_string(i) + "c" + std::to_string(j),
                            Vec3(j * pitch_mm, i * pitch_mm, 0.0), Vec3::UnitZ()});
    }
  }
  return part;
}

/// n holes equally spaced on a circle in the part's XY plane; hole k sits at
/// angle 2*pi*k/n measured from +X.
inline Part make_flange(std::string part_id, int n, double radius_mm) {
  if (n <= 0) throw SceneError(part_id, "flange hole count must be positive");
  if (!(radius_mm > 0.0)) throw SceneError(part_id, "flange radius must be positive");
  Part part;
  part.part_id = std::move(part_id);
  part.sites.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * std::numbers::pi * k / n;
    part.sites.push_back({"f" + std::to_string(k),
                          Vec3(radius_mm * std::cos(a), radius_mm * std::sin(a), 0.0), Vec3::UnitZ()});
  }
  return part;
}

/// Checks every structural invariant; throws SceneError naming the element.
inline void validate(const Scene& scene) {
  std::set<std::string> part_ids;
  for (std::size_t p = 0; p < scene.parts.size(); ++p) {
    const Part& part = scene.parts[p];
    const std::string where = "parts[" + std::to_string(p) + "]";
    if (part.part_id.empty()) throw SceneError(where, "empty part id");
    if (!part_ids.insert(part.part_id).second) throw SceneError(where, "duplicate part id '" + part.part_id + "'");
    if (part.sites.empty()) throw SceneError(where, "part '" + part.part_id + "' has no sites");
    if (!is_unit(part.mount_pose.rotation)) throw SceneError(where + ".mount_pose", "rotation is not a unit quaternion");
    std::set<std::string> site_ids;
    for (std::size_t s = 0; s < part.sites.size(); ++s) {
      const BoltSite& site = part.sites[s];
      const std::string swhere = where + ".sites[" + std::to_string(s) + "]";
      if (site.site_id.empty()) throw SceneError(swhere, "empty site id");
      if (!site_ids.insert(site.site_id).second) throw SceneError(swhere, "duplicate site id '" + site.site_id + "'");
      if (std::abs(site.axis.norm() - 1.0) > 1e-9) throw SceneError(swhere, "axis is not a unit vector");
    }
  }
  if (!is_unit(scene.tool.bit_tip_offset.rotation))
    throw SceneError("tool.bit_tip_offset", "rotation is not a unit quaternion");

  std::set<std::string> scenario_ids;
  for (std::size_t c = 0; c < scene.scenarios.size(); ++c) {
    const Scenario& sc = scene.scenarios[c];
    const std::string where = "scenarios[" + std::to_string(c) + "]";
    if (!scenario_ids.insert(sc.scenario_id).second)
      throw SceneError(where, "duplicate scenario id '" + sc.scenario_id + "'");
    if (sc.steps.empty()) throw SceneError(where, "scenario has no steps");
    std::set<SiteRef> seen;
    for (std::size_t k = 0; k < sc.steps.size(); ++k) {
      const ScenarioStep& st = sc.steps[k];
      const std::string swhere = where + ".steps[" + std::to_string(k) + "]";
      if (!scene.find_part(st.site.part_id)) throw SceneError(swhere, "unknown part '" + st.site.part_id + "'");
      if (!scene.find_site(st.site))
        throw SceneError(swhere, "unknown site '" + st.site.site_id + "' on part '" + st.site.part_id + "'");
      if (!torque_in_range(st.target_cnm))
        throw SceneError(swhere, "torque out of range: " + std::to_string(st.target_cnm) + " cNm not in [100, 1000]");
      if (!seen.insert(st.site).second)
        throw SceneError(swhere, "site '" + st.site.part_id + "/" + st.site.site_id + "' appears twice");
    }
  }
}

/// World-frame view of one bolt site, precomputed for proximity queries.
struct WorldSite {
  SiteRef ref;
  Vec3 head;  // world frame
  Vec3 axis;  // world frame
};

inline std::vector<WorldSite> world_sites(const std::vector<Part>& parts) {
  std::vector<WorldSite> out;
  for (const auto& part : parts)
    for (const auto& site : part.sites)
      out.push_back({{part.part_id, site.site_id}, part.mount_pose.apply(site.head_point),
                     part.mount_pose.rotate(site.axis)});
  return out;
}

}  // namespace torqueflow
