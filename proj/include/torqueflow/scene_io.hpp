#pragma once

// Scene files: one strict-JSON document.
//
//   {
//     "parts": [
//       {"id": "grid", "generator": {"kind": "grid", "rows": 5, "cols": 10, "pitch_mm": 30},
//        "mount_pose": {"translation_mm": [0, 0, 0], "rotation_wxyz": [1, 0, 0, 0]}},
//       {"id": "plate", "sites": [{"id": "a", "head_mm": [0, 0, 0], "axis": [0, 0, 1]}]}
//     ],
//     "tool": {"bit_tip_offset": {"translation_mm": [0, 0, -150], "rotation_wxyz": [1, 0, 0, 0]}},
//     "scenarios": [{"id": "seq1", "steps": [["grid", "r0c0", 300], ...]}]
//   }
//
// A part carries either a generator or an explicit site list. Unknown keys are
// rejected. save_scene always writes explicit site lists.

#include <torqueflow/error.hpp>
#include <torqueflow/scene.hpp>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

namespace torqueflow {

namespace scene_detail {

using nlohmann::json;

inline void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw SceneError(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw SceneError(where, "unknown key '" + key + "'");
  }
}

inline const json& require(const json& obj, const std::string& where, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SceneError(where, std::string("missing key '") + key + "'");
  return *it;
}

inline std::string get_string(const json& obj, const std::string& where, const char* key) {
  const json& v = require(obj, where, key);
  if (!v.is_string()) throw SceneError(where + "." + key, "expected a string");
  return v.get<std::string>();
}

inline double get_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw SceneError(where, "expected a number");
  return v.get<double>();
}

inline std::int64_t get_integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw SceneError(where, "expected an integer");
  return v.get<std::int64_t>();
}

inline Vec3 get_vec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw SceneError(where, "expected an array of 3 numbers");
  return {get_number(v[0], where + "[0]"), get_number(v[1], where + "[1]"), get_number(v[2], where + "[2]")};
}

inline Pose get_pose(const json& v, const std::string& where) {
  only_keys(v, where, {"translation_mm", "rotation_wxyz"});
  Pose pose;
  if (v.contains("translation_mm")) pose.translation = get_vec3(v["translation_mm"], where + ".translation_mm");
  if (v.contains("rotation_wxyz")) {
    const json& r = v["rotation_wxyz"];
    const std::string rwhere = where + ".rotation_wxyz";
    if (!r.is_array() || r.size() != 4) throw SceneError(rwhere, "expected an array of 4 numbers");
    Quat q(get_number(r[0], rwhere), get_number(r[1], rwhere), get_number(r[2], rwhere), get_number(r[3], rwhere));
    if (std::abs(q.norm() - 1.0) > 1e-6) throw SceneError(rwhere, "quaternion is not unit length");
    pose.rotation = q.normalized();
  }
  return pose;
}

inline json put_pose(const Pose& p) {
  return json{{"translation_mm", {p.translation.x(), p.translation.y(), p.translation.z()}},
              {"rotation_wxyz", {p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z()}}};
}

inline Part get_part(const json& v, const std::string& where) {
  only_keys(v, where, {"id", "generator", "sites", "mount_pose"});
  const std::string id = get_string(v, where, "id");
  const bool has_gen = v.contains("generator");
  const bool has_sites = v.contains("sites");
  if (has_gen == has_sites) throw SceneError(where, "part needs exactly one of 'generator' or 'sites'");

  Part part;
  if (has_gen) {
    const json& g = v["generator"];
    const std::string gwhere = where + ".generator";
    const std::string kind = get_string(g, gwhere, "kind");
    if (kind == "grid") {
      only_keys(g, gwhere, {"kind", "rows", "cols", "pitch_mm"});
      part = make_grid(id, static_cast<int>(get_integer(require(g, gwhere, "rows"), gwhere + ".rows")),
                       static_cast<int>(get_integer(require(g, gwhere, "cols"), gwhere + ".cols")),
                       get_number(require(g, gwhere, "pitch_mm"), gwhere + ".pitch_mm"));
    } else if (kind == "flange") {
      only_keys(g, gwhere, {"kind", "count", "radius_mm"});
      part = make_flange(id, static_cast<int>(get_integer(require(g, gwhere, "count"), gwhere + ".count")),
                         get_number(require(g, gwhere, "radius_mm"), gwhere + ".radius_mm"));
    } else {
      throw SceneError(gwhere + ".kind", "unknown generator '" + kind + "'");
    }
  } else {
    part.part_id = id;
    const json& sites = v["sites"];
    if (!sites.is_array()) throw SceneError(where + ".sites", "expected an array");
    for (std::size_t i = 0; i < sites.size(); ++i) {
      const std::string swhere = where + ".sites[" + std::to_string(i) + "]";
      only_keys(sites[i], swhere, {"id", "head_mm", "axis"});
      BoltSite s;
      s.site_id = get_string(sites[i], swhere, "id");
      s.head_point = get_vec3(require(sites[i], swhere, "head_mm"), swhere + ".head_mm");
      if (sites[i].contains("axis")) {
        s.axis = get_vec3(sites[i]["axis"], swhere + ".axis");
        if (std::abs(s.axis.norm() - 1.0) > 1e-6) throw SceneError(swhere + ".axis", "axis is not a unit vector");
        s.axis.normalize();
      }
      part.sites.push_back(std::move(s));
    }
  }
  if (v.contains("mount_pose")) part.mount_pose = get_pose(v["mount_pose"], where + ".mount_pose");
  return part;
}

inline Scenario get_scenario(const json& v, const std::string& where) {
  only_keys(v, where, {"id", "steps"});
  Scenario sc;
  sc.scenario_id = get_string(v, where, "id");
  const json& steps = require(v, where, "steps");
  if (!steps.is_array()) throw SceneError(where + ".steps", "expected an array");
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const std::string swhere = where + ".steps[" + std::to_string(k) + "]";
    const json& st = steps[k];
    if (!st.is_array() || st.size() != 3 || !st[0].is_string() || !st[1].is_string())
      throw SceneError(swhere, "expected [part_id, site_id, target_cnm]");
    const std::int64_t cnm = get_integer(st[2], swhere + "[2]");
    if (!torque_in_range(cnm))
      throw SceneError(swhere, "torque out of range: " + std::to_string(cnm) + " cNm not in [100, 1000]");
    sc.steps.push_back({{st[0].get<std::string>(), st[1].get<std::string>()}, static_cast<TorqueCnm>(cnm)});
  }
  return sc;
}

}  // namespace scene_detail

/// Parses and validates a scene document. Throws SceneError with location.
inline Scene parse_scene(std::string_view text) {
  using scene_detail::json;
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw SceneError("byte " + std::to_string(e.byte), "parse error: " + std::string(e.what()));
  }
  scene_detail::only_keys(doc, "", {"parts", "tool", "scenarios"});

  Scene scene;
  const json& parts = scene_detail::require(doc, "", "parts");
  if (!parts.is_array()) throw SceneError("parts", "expected an array");
  for (std::size_t i = 0; i < parts.size(); ++i)
    scene.parts.push_back(scene_detail::get_part(parts[i], "parts[" + std::to_string(i) + "]"));

  if (doc.contains("tool")) {
    scene_detail::only_keys(doc["tool"], "tool", {"bit_tip_offset"});
    if (doc["tool"].contains("bit_tip_offset"))
      scene.tool.bit_tip_offset = scene_detail::get_pose(doc["tool"]["bit_tip_offset"], "tool.bit_tip_offset");
  }

  if (doc.contains("scenarios")) {
    const json& scs = doc["scenarios"];
    if (!scs.is_array()) throw SceneError("scenarios", "expected an array");
    for (std::size_t i = 0; i < scs.size(); ++i)
      scene.scenarios.push_back(scene_detail::get_scenario(scs[i], "scenarios[" + std::to_string(i) + "]"));
  }
  validate(scene);
  return scene;
}

inline Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SceneError(path.string(), "cannot open scene file");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scene(ss.str());
  } catch (const SceneError& e) {
    throw SceneError(path.string() + (e.where().empty() ? "" : ":" + e.where()),
                     std::string(e.what()).substr(e.where().empty() ? 0 : e.where().size() + 2));
  }
}

inline std::string dump_scene(const Scene& scene) {
  using scene_detail::json;
  json doc;
  doc["parts"] = json::array();
  for (const auto& part : scene.parts) {
    json sites = json::array();
    for (const auto& s : part.sites)
      sites.push_back({{"id", s.site_id},
                       {"head_mm", {s.head_point.x(), s.head_point.y(), s.head_point.z()}},
                       {"axis", {s.axis.x(), s.axis.y(), s.axis.z()}}});
    doc["parts"].push_back({{"id", part.part_id}, {"sites", sites}, {"mount_pose", scene_detail::put_pose(part.mount_pose)}});
  }
  doc["tool"] = {{"bit_tip_offset", scene_detail::put_pose(scene.tool.bit_tip_offset)}};
  doc["scenarios"] = json::array();
  for (const auto& sc : scene.scenarios) {
    json steps = json::array();
    for (const auto& st : sc.steps) steps.push_back({st.site.part_id, st.site.site_id, st.target_cnm});
    doc["scenarios"].push_back({{"id", sc.scenario_id}, {"steps", steps}});
  }
  return doc.dump(2) + "\n";
}

inline void save_scene(const Scene& scene, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SceneError(path.string(), "cannot write scene file");
  out << dump_scene(scene);
  if (!out) throw SceneError(path.string(), "write failed");
}

}  // namespace torqueflow
