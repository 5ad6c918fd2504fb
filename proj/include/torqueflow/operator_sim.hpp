#pragma once

// Scripted operators for headless sessions.
//
// ScriptedOperator follows a profile. In CONVENTIONAL mode it works from the
// paper instructions (the scenario) and injects each error type as an
// independent per-session Bernoulli draw:
//   wrong order  - swaps two consecutive steps,
//   wrong screw  - tightens the nearest non-scenario screw instead of the
//                  intended one and logs the intended one,
//   stale torque - skips the manual torque update at one required
//                  transition.
// In AR mode the same profile only makes the operator wander to the wrong
// screw first; the engine never pushes a target there, so the operator never
// pulls there.
//
// AdversarialOperator moves, teleports, pulls and issues commands at random.

#include <torqueflow/device.hpp>
#include <torqueflow/engagement.hpp>
#include <torqueflow/orchestrator.hpp>
#include <torqueflow/scene.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <vector>

namespace torqueflow {

struct PullStyle {
  double release_early_prob = 0.0;
  double reapply_prob = 1.0;
  friend bool operator==(const PullStyle&, const PullStyle&) = default;
};

struct OperatorProfile {
  double p_wrong_order = 0.0;
  double p_wrong_screw = 0.0;
  double p_stale_torque = 0.0;
  double motion_speed = 250.0;  // mm/s
  PullStyle pull_style;
  // Pacing, seconds.
  double read_s = 0.0;        // reading the instruction for a step
  double set_s = 0.0;         // programming the wrench by hand
  double log_s = 0.0;         // writing the manual log entry
  double settle_s = 0.3;      // pause after release
  double start_pause_s = 0.0;
  bool adversarial = false;

  void check() const {
    for (double p : {p_wrong_order, p_wrong_screw, p_stale_torque, pull_style.release_early_prob, pull_style.reapply_prob})
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("operator probabilities must lie in [0, 1]");
    if (!(motion_speed > 0)) throw ConfigError("motion_speed must be positive");
    for (double t : {read_s, set_s, log_s, settle_s, start_pause_s})
      if (!(t >= 0)) throw ConfigError("operator pacing values must be non-negative");
  }

  friend bool operator==(const OperatorProfile&, const OperatorProfile&) = default;
};

/// Named profiles accepted by the CLI.
inline OperatorProfile named_profile(std::string_view name) {
  OperatorProfile p;
  if (name == "perfect") return p;
  if (name == "paper-rates") {
    p.p_wrong_order = 0.47;
    p.p_wrong_screw = 0.29;
    p.p_stale_torque = 0.09;
    return p;
  }
  if (name == "paper-rates-paced") {
    p = named_profile("paper-rates");
    p.read_s = 6;
    p.set_s = 4;
    p.log_s = 8;
    p.settle_s = 1;
    return p;
  }
  if (name == "adversarial") {
    p.adversarial = true;
    return p;
  }
  throw ConfigError("unknown operator profile '" + std::string(name) + "'");
}

inline nlohmann::json to_json(const OperatorProfile& p) {
  return {{"p_wrong_order", p.p_wrong_order},
          {"p_wrong_screw", p.p_wrong_screw},
          {"p_stale_torque", p.p_stale_torque},
          {"motion_speed", p.motion_speed},
          {"pull_style", {{"release_early_prob", p.pull_style.release_early_prob},
                          {"reapply_prob", p.pull_style.reapply_prob}}},
          {"read_s", p.read_s},
          {"set_s", p.set_s},
          {"log_s", p.log_s},
          {"settle_s", p.settle_s},
          {"start_pause_s", p.start_pause_s},
          {"adversarial", p.adversarial}};
}

/// Reads a profile fragment; absent keys keep the defaults of `base`.
inline OperatorProfile profile_from_json(const nlohmann::json& j, OperatorProfile base = {}) {
  if (!j.is_object()) throw ConfigError("operator profile must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "p_wrong_order") base.p_wrong_order = v.get<double>();
      else if (key == "p_wrong_screw") base.p_wrong_screw = v.get<double>();
      else if (key == "p_stale_torque") base.p_stale_torque = v.get<double>();
      else if (key == "motion_speed") base.motion_speed = v.get<double>();
      else if (key == "pull_style") {
        for (const auto& [k2, v2] : v.items()) {
          if (k2 == "release_early_prob") base.pull_style.release_early_prob = v2.get<double>();
          else if (k2 == "reapply_prob") base.pull_style.reapply_prob = v2.get<double>();
          else throw ConfigError("unknown pull_style key '" + k2 + "'");
        }
      } else if (key == "read_s") base.read_s = v.get<double>();
      else if (key == "set_s") base.set_s = v.get<double>();
      else if (key == "log_s") base.log_s = v.get<double>();
      else if (key == "settle_s") base.settle_s = v.get<double>();
      else if (key == "start_pause_s") base.start_pause_s = v.get<double>();
      else if (key == "adversarial") base.adversarial = v.get<bool>();
      else throw ConfigError("unknown profile key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad operator profile: ") + e.what());
  }
  base.check();
  return base;
}

/// Error types an operator commits in one session.
struct FaultSet {
  bool wrong_order = false;
  bool wrong_screw = false;
  bool stale_torque = false;

  bool any() const { return wrong_order || wrong_screw || stale_torque; }
  friend bool operator==(const FaultSet&, const FaultSet&) = default;
};

/// What the operator can perceive.
struct OperatorView {
  std::uint64_t now_ms = 0;
  double dt_s = 0.01;
  const Scene* scene = nullptr;
  const Scenario* scenario = nullptr;
  Method method = Method::kArGuided;
  bool session_finished = false;
  std::size_t current_step = 0;      // AR display
  std::optional<SiteRef> arrow_site;  // AR display
  bool target_armed = false;          // AR display: target shown next to the engaged screw
  WrenchState wrench;                 // LED bar, alert
};

struct OperatorAction {
  Pose wrench_pose;  // true pose
  bool effort = false;
  std::vector<OperatorCommand> commands;
};

class Operator {
 public:
  virtual ~Operator() = default;
  virtual OperatorAction act(const OperatorView& view) = 0;
  /// Errors this operator actually committed (conventional mode).
  virtual FaultSet committed() const { return {}; }
};

namespace operator_detail {

inline constexpr double kHoverMm = 40.0;

/// Moves the tool tip along queued waypoints at a fixed speed.
class Hand {
 public:
  Hand(const ToolModel& tool, const Vec3& start_tip) : tool_(tool) { place_tip(start_tip); }

  void place_tip(const Vec3& tip) {
    pose_.translation = tip - pose_.rotation * tool_.bit_tip_offset.translation;
  }
  void set_rotation(const Quat& q, const Vec3& keep_tip) {
    pose_.rotation = q.normalized();
    place_tip(keep_tip);
  }
  Vec3 tip() const { return tip_position(pose_, tool_); }
  const Pose& pose() const { return pose_; }

  /// Advances toward `target`; returns true once it is reached.
  bool move_toward(const Vec3& target, double speed, double dt) {
    const Vec3 here = tip();
    const Vec3 delta = target - here;
    const double dist = delta.norm();
    const double step = speed * dt;
    if (dist <= step) {
      place_tip(target);
      return true;
    }
    place_tip(here + delta * (step / dist));
    return false;
  }

 private:
  ToolModel tool_;
  Pose pose_;
};

struct Task {
  enum class Kind : std::uint8_t { kWait, kMove, kPress, kCommand, kWaitArmed, kReplan };
  Kind kind = Kind::kWait;
  std::uint64_t duration_ms = 0;
  Vec3 point = Vec3::Zero();
  double release_frac = 1.0;  // < 1: let go once applied reaches this share of the target
  OperatorCommand command;
  std::uint64_t started_ms = 0;
  bool started = false;
};

inline Vec3 site_head(const Scene& scene, const SiteRef& ref) {
  const Part* part = scene.find_part(ref.part_id);
  const BoltSite* site = part ? part->find_site(ref.site_id) : nullptr;
  if (!site) throw ConfigError("unknown site " + ref.part_id + "/" + ref.site_id);
  return part->mount_pose.apply(site->head_point);
}

inline Vec3 hover(const Vec3& p) { return p + Vec3(0, 0, kHoverMm); }

}  // namespace operator_detail

class ScriptedOperator : public Operator {
 public:
  ScriptedOperator(const Scene& scene, const Scenario& scenario, Method method, OperatorProfile profile,
                   std::uint64_t seed, std::optional<FaultSet> forced = std::nullopt)
      : scene_(scene),
        scenario_(scenario),
        method_(method),
        profile_(profile),
        rng_(seed),
        hand_(scene.tool, rest_point(scene)) {
    profile_.check();
    if (forced) {
      intended_ = *forced;
    } else {
      std::bernoulli_distribution wo(profile_.p_wrong_order), ws(profile_.p_wrong_screw), st(profile_.p_stale_torque);
      intended_.wrong_order = wo(rng_);
      intended_.wrong_screw = ws(rng_);
      intended_.stale_torque = st(rng_);
    }
    if (profile_.start_pause_s > 0) wait(profile_.start_pause_s);
    if (method_ == Method::kConventional) plan_conventional();
    else plan_ar_faults();
  }

  OperatorAction act(const OperatorView& view) override {
    using operator_detail::Task;
    OperatorAction out;
    if (view.session_finished) {
      effort_ = false;
      out.wrench_pose = hand_.pose();
      return out;
    }
    for (int guard = 0; guard < 64; ++guard) {
      if (tasks_.empty()) {
        if (method_ == Method::kArGuided) plan_ar_step(view);
        if (tasks_.empty()) break;
      }
      Task& t = tasks_.front();
      if (!t.started) {
        t.started = true;
        t.started_ms = view.now_ms;
      }
      bool done = false;
      switch (t.kind) {
        case Task::Kind::kWait:
          done = view.now_ms >= t.started_ms + t.duration_ms;
          break;
        case Task::Kind::kMove:
          done = hand_.move_toward(t.point, profile_.motion_speed, view.dt_s);
          break;
        case Task::Kind::kCommand:
          out.commands.push_back(t.command);
          done = true;
          break;
        case Task::Kind::kWaitArmed:
          done = view.target_armed || view.now_ms >= t.started_ms + t.duration_ms;
          if (!view.target_armed && done && view.arrow_site) {
            // Not armed in time: lift off and come back down to re-engage.
            const Vec3 head = operator_detail::site_head(scene_, *view.arrow_site);
            tasks_.pop_front();
            push_front_move(head);
            push_front_move(operator_detail::hover(head));
            continue;
          }
          break;
        case Task::Kind::kPress: {
          effort_ = true;
          const bool reached = view.wrench.mode == WrenchMode::kReached;
          const bool early = t.release_frac < 1.0 && view.wrench.target_cnm > 0 &&
                             view.wrench.applied_cnm >= t.release_frac * view.wrench.target_cnm;
          const bool timeout = view.now_ms >= t.started_ms + t.duration_ms;
          if (reached || early || timeout) {
            effort_ = false;
            done = true;
          }
          break;
        }
        case Task::Kind::kReplan:
          done = true;
          break;
      }
      if (!done) break;
      tasks_.pop_front();
      if (t.kind == Task::Kind::kMove || t.kind == Task::Kind::kWait || t.kind == Task::Kind::kPress) break;
    }
    out.wrench_pose = hand_.pose();
    out.effort = effort_;
    return out;
  }

  FaultSet committed() const override { return committed_; }
  const FaultSet& intended() const { return intended_; }

  static Vec3 rest_point(const Scene& scene) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    for (const auto& s : world_sites(scene.parts)) lo = lo.cwiseMin(s.head);
    if (!std::isfinite(lo.x())) lo.setZero();
    return lo + Vec3(-100.0, -100.0, 100.0);
  }

 private:
  using Task = operator_detail::Task;

  void wait(double seconds) {
    Task t;
    t.kind = Task::Kind::kWait;
    t.duration_ms = static_cast<std::uint64_t>(std::llround(seconds * 1000.0));
    if (t.duration_ms > 0) tasks_.push_back(t);
  }
  void move(const Vec3& p) {
    Task t;
    t.kind = Task::Kind::kMove;
    t.point = p;
    tasks_.push_back(t);
  }
  void push_front_move(const Vec3& p) {
    Task t;
    t.kind = Task::Kind::kMove;
    t.point = p;
    tasks_.push_front(t);
  }
  void command(OperatorCommand c) {
    Task t;
    t.kind = Task::Kind::kCommand;
    t.command = std::move(c);
    tasks_.push_back(t);
  }
  void press(double release_frac = 1.0, double timeout_s = 15.0) {
    Task t;
    t.kind = Task::Kind::kPress;
    t.release_frac = release_frac;
    t.duration_ms = static_cast<std::uint64_t>(timeout_s * 1000);
    tasks_.push_back(t);
  }
  void wait_armed(double timeout_s) {
    Task t;
    t.kind = Task::Kind::kWaitArmed;
    t.duration_ms = static_cast<std::uint64_t>(timeout_s * 1000);
    tasks_.push_back(t);
  }
  void replan() {
    Task t;
    t.kind = Task::Kind::kReplan;
    tasks_.push_back(t);
  }

  /// Travel at hover height, then descend onto the screw head.
  void go_to(const Vec3& head) {
    move(operator_detail::hover(planned_tip_));
    move(operator_detail::hover(head));
    move(head);
    planned_tip_ = head;
  }

  /// A pull, possibly released early and then re-applied, per the pull style.
  /// Returns false when the operator gave up on the screw.
  bool pull() {
    std::bernoulli_distribution early(profile_.pull_style.release_early_prob);
    if (early(rng_)) {
      std::uniform_real_distribution<double> frac(0.3, 0.9);
      press(frac(rng_));
      wait(0.5);
      std::bernoulli_distribution again(profile_.pull_style.reapply_prob);
      if (!again(rng_)) return false;
    }
    press();
    return true;
  }

  std::optional<SiteRef> nearest_free_site(const SiteRef& ref) const {
    const Part* part = scene_.find_part(ref.part_id);
    const BoltSite* origin = part->find_site(ref.site_id);
    std::optional<SiteRef> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& s : part->sites) {
      SiteRef cand{part->part_id, s.site_id};
      if (scenario_.step_of(cand)) continue;
      const double d = (s.head_point - origin->head_point).norm();
      if (d < best_d) {
        best_d = d;
        best = cand;
      }
    }
    return best;
  }

  void plan_conventional() {
    const std::size_t n = scenario_.steps.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    std::optional<std::size_t> swap_at;
    if (intended_.wrong_order && n >= 2) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 2);
      swap_at = pick(rng_);
      std::swap(order[*swap_at], order[*swap_at + 1]);
      committed_.wrong_order = true;
    }
    // Stale torque: a position whose target differs from the one before it.
    std::optional<std::size_t> stale_at;
    std::optional<std::size_t> wrong_at;
    if (intended_.stale_torque) {
      std::vector<std::size_t> cands;
      for (std::size_t p = 1; p < n; ++p)
        if (scenario_.steps[order[p]].target_cnm != scenario_.steps[order[p - 1]].target_cnm) cands.push_back(p);
      if (intended_.wrong_screw && cands.size() > 1) {
        // Keep at least one position free for the wrong screw.
      }
      if (!cands.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, cands.size() - 1);
        stale_at = cands[pick(rng_)];
        committed_.stale_torque = true;
      }
    }
    if (intended_.wrong_screw) {
      std::vector<std::size_t> cands;
      for (std::size_t p = 0; p < n; ++p) {
        if (swap_at && (p == *swap_at || p == *swap_at + 1)) continue;
        if (stale_at && p == *stale_at) continue;
        if (!nearest_free_site(scenario_.steps[order[p]].site)) continue;
        cands.push_back(p);
      }
      if (!cands.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, cands.size() - 1);
        wrong_at = cands[pick(rng_)];
        committed_.wrong_screw = true;
      }
    }

    planned_tip_ = hand_.tip();
    TorqueCnm believed = 0;
    for (std::size_t p = 0; p < n; ++p) {
      const ScenarioStep& st = scenario_.steps[order[p]];
      wait(profile_.read_s);
      if (st.target_cnm != believed) {
        if (!(stale_at && p == *stale_at)) {
          command(OperatorCommand::manual_set(st.target_cnm));
          wait(profile_.set_s);
        }
        believed = st.target_cnm;
      }
      const SiteRef actual = (wrong_at && p == *wrong_at) ? *nearest_free_site(st.site) : st.site;
      go_to(operator_detail::site_head(scene_, actual));
      const bool tightened = pull();
      wait(profile_.settle_s);
      if (tightened) command(OperatorCommand::manual_log(st.site, st.target_cnm));
      wait(profile_.log_s);
    }
    command(OperatorCommand::finish());
  }

  void plan_ar_faults() {
    const std::size_t n = scenario_.steps.size();
    if (intended_.wrong_order && n >= 2) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 2);
      detour_order_at_ = pick(rng_);
    }
    if (intended_.wrong_screw) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      detour_screw_at_ = pick(rng_);
    }
  }

  void plan_ar_step(const OperatorView& view) {
    if (!view.arrow_site) return;
    const std::size_t k = view.current_step;
    planned_tip_ = hand_.tip();
    if (detour_order_at_ && *detour_order_at_ == k && k + 1 < scenario_.steps.size()) {
      detour_order_at_.reset();
      go_to(operator_detail::site_head(scene_, scenario_.steps[k + 1].site));
      wait(std::max(profile_.settle_s, 0.5));
    }
    if (detour_screw_at_ && *detour_screw_at_ == k) {
      detour_screw_at_.reset();
      if (auto wrong = nearest_free_site(*view.arrow_site)) {
        go_to(operator_detail::site_head(scene_, *wrong));
        wait(std::max(profile_.settle_s, 0.5));
      }
    }
    go_to(operator_detail::site_head(scene_, *view.arrow_site));
    wait_armed(3.0);
    pull();
    wait(profile_.settle_s);
    replan();
  }

  const Scene& scene_;
  const Scenario& scenario_;
  Method method_;
  OperatorProfile profile_;
  std::mt19937_64 rng_;
  operator_detail::Hand hand_;
  std::deque<Task> tasks_;
  Vec3 planned_tip_ = Vec3::Zero();
  bool effort_ = false;
  FaultSet intended_;
  FaultSet committed_;
  std::optional<std::size_t> detour_order_at_;
  std::optional<std::size_t> detour_screw_at_;
};

/// Random actions with no regard for the guidance: jumps between screws,
/// lattice midpoints and empty space, random wrench orientations, pulls at
/// any time, manual commands with arbitrary (also out-of-range) torques.
/// Half of its screw choices still go to the arrowed screw so sessions make
/// progress.
class AdversarialOperator : public Operator {
 public:
  AdversarialOperator(const Scene& scene, std::uint64_t seed)
      : scene_(scene), sites_(world_sites(scene.parts)), rng_(seed), hand_(scene.tool, ScriptedOperator::rest_point(scene)) {}

  OperatorAction act(const OperatorView& view) override {
    OperatorAction out;
    if (view.now_ms >= next_decision_ms_) decide(view, out);
    if (moving_) moving_ = !hand_.move_toward(goal_, speed_, view.dt_s);
    out.wrench_pose = hand_.pose();
    out.effort = effort_;
    return out;
  }

 private:
  void decide(const OperatorView& view, OperatorAction& out) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> any_site(0, sites_.size() - 1);
    std::uniform_int_distribution<std::uint64_t> gap(20, 1500);
    next_decision_ms_ = view.now_ms + gap(rng_);
    const double r = u01(rng_);
    auto pick_site = [&]() -> Vec3 {
      if (view.arrow_site && u01(rng_) < 0.5) return operator_detail::site_head(scene_, *view.arrow_site);
      return sites_[any_site(rng_)].head;
    };
    if (r < 0.30) {
      goal_ = pick_site();
      moving_ = true;
      speed_ = 50.0 + 950.0 * u01(rng_);
    } else if (r < 0.40) {
      hand_.place_tip(pick_site());
      moving_ = false;
    } else if (r < 0.50) {
      // Midpoint of two sites, or a point near one.
      const Vec3 a = sites_[any_site(rng_)].head;
      const Vec3 b = sites_[any_site(rng_)].head;
      std::normal_distribution<double> jitter(0.0, 8.0);
      goal_ = u01(rng_) < 0.5 ? Vec3(0.5 * (a + b)) : Vec3(a + Vec3(jitter(rng_), jitter(rng_), jitter(rng_)));
      moving_ = true;
      speed_ = 100.0 + 900.0 * u01(rng_);
    } else if (r < 0.55) {
      const Vec3 keep = hand_.tip();
      Quat q(u01(rng_) - 0.5, u01(rng_) - 0.5, u01(rng_) - 0.5, u01(rng_) - 0.5);
      hand_.set_rotation(q.norm() > 1e-6 ? q.normalized() : Quat::Identity(), keep);
    } else if (r < 0.85) {
      effort_ = !effort_;
    } else if (r < 0.92) {
      std::uniform_int_distribution<int> cnm(0, 1300);
      out.commands.push_back(OperatorCommand::manual_set(cnm(rng_)));
    } else if (r < 0.99) {
      const auto& s = sites_[any_site(rng_)];
      out.commands.push_back(OperatorCommand::manual_log(s.ref, 300));
    } else {
      goal_ = hand_.tip() + Vec3(0, 0, 200.0 * u01(rng_));
      moving_ = true;
      speed_ = 300.0;
    }
  }

  const Scene& scene_;
  std::vector<WorldSite> sites_;
  std::mt19937_64 rng_;
  operator_detail::Hand hand_;
  Vec3 goal_ = Vec3::Zero();
  double speed_ = 200.0;
  bool moving_ = false;
  bool effort_ = false;
  std::uint64_t next_decision_ms_ = 0;
};

}  // namespace torqueflow
