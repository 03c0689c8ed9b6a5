#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dlo/deform_opt.hpp"
#include "dlo/mpc.hpp"
#include "dlo/passage.hpp"
#include "dlo/pathset.hpp"
#include "dlo/planner.hpp"
#include "dlo/sim.hpp"

namespace dlo {

/// Everything a pipeline run needs: workspace, cable, start/goal shapes, and
/// per-stage hyperparameters. Omitted fields take the published defaults.
struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 0;
  Workspace workspace{0.7, 0.7};
  CableParams cable;
  DLOShape start;
  DLOShape goal;
  PlannerConfig planner;
  PivotCostWeights pivot_weights;
  PathSetParams pathset;
  int deform_T = 50;
  double deform_lb = 0.01;
  double deform_ub = 0.1;
  int deform_max_iterations = 300;
  double deform_tolerance = 1e-8;
  double ms_k1 = 2.0;
  double ms_k2 = 1.0;
  double sharpness = 50.0;
  MPCConfig mpc;

  DeformOptConfig deform_config() const {
    return DeformOptConfig::uniform(deform_T, deform_lb, deform_ub, start.n());
  }

  void validate() const {
    workspace.validate();
    cable.validate();
    const std::size_t n = static_cast<std::size_t>(cable.num_keypoints);
    if (start.n() != n || goal.n() != n)
      throw std::invalid_argument("start/goal keypoint counts must equal cable.num_keypoints");
    validate_shape(start, cable.link_length(), "start shape");
    validate_shape(goal, cable.link_length(), "goal shape");
    if (start.chord_length() > cable.length * (1.0 + 1e-6) ||
        goal.chord_length() > cable.length * (1.0 + 1e-6))
      throw std::invalid_argument("shape chord length exceeds cable length");
    for (const auto& p : start.keypoints)
      if (min_clearance(p, workspace) <= 0.0)
        throw std::invalid_argument("start shape is in collision");
    for (const auto& p : goal.keypoints)
      if (min_clearance(p, workspace) <= 0.0)
        throw std::invalid_argument("goal shape is in collision");
    deform_config().validate(n);
    mpc.validate(static_cast<int>(n));
  }
};

namespace detail {

inline DLOShape shape_from_json(const nlohmann::json& j) {
  DLOShape s;
  for (const auto& p : j) s.keypoints.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return s;
}

inline nlohmann::json shape_to_json(const DLOShape& s) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : s.keypoints) j.push_back({p.x, p.y});
  return j;
}

/// Grasp poses implied by a shape: EEFs at the end keypoints, yaw along the
/// end links.
inline RobotConfig grasp_from_shape(const DLOShape& s) {
  RobotConfig rc;
  const Point2 d0 = s.keypoints[1] - s.keypoints[0];
  const Point2 d1 = s.keypoints[s.n() - 1] - s.keypoints[s.n() - 2];
  rc.left = {s.keypoints[0].x, s.keypoints[0].y, std::atan2(d0.y, d0.x)};
  rc.right = {s.keypoints[s.n() - 1].x, s.keypoints[s.n() - 1].y, std::atan2(d1.y, d1.x)};
  return rc;
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (j.contains(key)) return j.at(key).get<T>();
  return fallback;
}

}  // namespace detail

/// Parses and validates a scenario file. Start and goal shapes may be given
/// as keypoint lists or as grasp poses ("start_grasp"/"goal_grasp"), in which
/// case the built-in simulator derives the equilibrium shapes.
inline Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const std::exception& e) {
    throw std::runtime_error("scenario parse error: " + std::string(e.what()));
  }

  Scenario sc;
  sc.name = detail::get_or<std::string>(j, "name", "scenario");
  sc.seed = detail::get_or<std::uint64_t>(j, "seed", 0);

  if (j.contains("workspace")) {
    const auto& jw = j["workspace"];
    std::vector<ConvexObstacle> obstacles;
    if (jw.contains("obstacles"))
      for (const auto& jo : jw["obstacles"]) {
        std::vector<Point2> verts;
        for (const auto& v : jo) verts.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
        obstacles.emplace_back(std::move(verts));
      }
    sc.workspace = Workspace(detail::get_or<double>(jw, "width", 0.7),
                             detail::get_or<double>(jw, "height", 0.7), std::move(obstacles));
  }

  if (j.contains("cable")) {
    const auto& jc = j["cable"];
    sc.cable.length = detail::get_or<double>(jc, "length", 0.3);
    sc.cable.num_keypoints = detail::get_or<int>(jc, "num_keypoints", 13);
    sc.cable.joint_stiffness = detail::get_or<double>(jc, "joint_stiffness", 0.02);
    sc.cable.joint_damping = detail::get_or<double>(jc, "joint_damping", 0.03);
    sc.cable.radius = detail::get_or<double>(jc, "radius", 0.02);
  }
  sc.cable.validate();

  const auto load_shape = [&](const char* kp_key, const char* grasp_key) {
    if (j.contains(kp_key)) return detail::shape_from_json(j[kp_key]);
    if (j.contains(grasp_key)) {
      const auto& jg = j[grasp_key];
      RobotConfig rc;
      rc.left = {jg["left"].at(0).get<double>(), jg["left"].at(1).get<double>(),
                 jg["left"].at(2).get<double>()};
      rc.right = {jg["right"].at(0).get<double>(), jg["right"].at(1).get<double>(),
                  jg["right"].at(2).get<double>()};
      DloSim sim(sc.cable);
      auto st = sim.init(rc);
      if (!st)
        throw std::runtime_error(std::string("cannot derive shape from ") + grasp_key + ": " +
                                 st.error());
      return st.value().shape;
    }
    throw std::runtime_error(std::string("scenario missing ") + kp_key + " or " + grasp_key);
  };
  sc.start = load_shape("start", "start_grasp");
  sc.goal = load_shape("goal", "goal_grasp");

  if (j.contains("planner")) {
    const auto& jp = j["planner"];
    sc.planner.max_iterations = detail::get_or<int>(jp, "max_iterations", 5000);
    sc.planner.step_size = detail::get_or<double>(jp, "step_size", 0.05);
    sc.planner.goal_bias = detail::get_or<double>(jp, "goal_bias", 0.1);
    sc.planner.rewire_radius = detail::get_or<double>(jp, "rewire_radius", 0.15);
    sc.planner.collision_margin = detail::get_or<double>(jp, "collision_margin", 0.01);
    sc.pivot_weights.k_len = detail::get_or<double>(jp, "k_len", 1.0);
    sc.pivot_weights.k_clear = detail::get_or<double>(jp, "k_clear", 1.0);
  }
  sc.planner.rng_seed = sc.seed;

  if (j.contains("pathset")) {
    const auto& jp = j["pathset"];
    sc.pathset.gamma = detail::get_or<double>(jp, "gamma", 0.2);
    sc.pathset.alpha = detail::get_or<double>(jp, "alpha", 0.7);
    sc.pathset.resample_count =
        static_cast<std::size_t>(detail::get_or<int>(jp, "resample_count", 60));
  }

  if (j.contains("deform")) {
    const auto& jd = j["deform"];
    sc.deform_T = detail::get_or<int>(jd, "T", 50);
    sc.deform_lb = detail::get_or<double>(jd, "lb", 0.01);
    sc.deform_ub = detail::get_or<double>(jd, "ub", 0.1);
    sc.deform_max_iterations = detail::get_or<int>(jd, "max_iterations", 300);
    sc.deform_tolerance = detail::get_or<double>(jd, "tolerance", 1e-8);
    sc.ms_k1 = detail::get_or<double>(jd, "k1", 2.0);
    sc.ms_k2 = detail::get_or<double>(jd, "k2", 1.0);
    sc.sharpness = detail::get_or<double>(jd, "sharpness", 50.0);
  }

  if (j.contains("mpc")) {
    const auto& jm = j["mpc"];
    sc.mpc.horizon = detail::get_or<int>(jm, "horizon", 5);
    sc.mpc.max_iterations = detail::get_or<int>(jm, "max_iterations", 15);
    sc.mpc.lambda1 = detail::get_or<double>(jm, "lambda1", 150.0);
    sc.mpc.lambda2 = detail::get_or<double>(jm, "lambda2", 0.01);
    sc.mpc.lambda3 = detail::get_or<double>(jm, "lambda3", 1.0);
    sc.mpc.d = detail::get_or<double>(jm, "d", 0.005);
    sc.mpc.bounds = ActionBounds::symmetric(detail::get_or<double>(jm, "a_trans", 0.01),
                                            detail::get_or<double>(jm, "a_rot", 0.05));
    sc.mpc.step_size = detail::get_or<double>(jm, "step_size", 1e-3);
    sc.mpc.advance_threshold = detail::get_or<double>(jm, "advance_threshold", 0.01);
    sc.mpc.stop_tolerance = detail::get_or<double>(jm, "stop_tolerance", 0.01);
    sc.mpc.step_cap = detail::get_or<int>(jm, "step_cap", 600);
  }

  try {
    sc.validate();
  } catch (const std::exception& e) {
    throw std::runtime_error("scenario invalid: " + std::string(e.what()));
  }
  return sc;
}

/// Serializes a scenario with materialized keypoint shapes; loading the
/// result reproduces an equal scenario.
inline void save_scenario(const Scenario& sc, const std::string& path) {
  nlohmann::json j;
  j["name"] = sc.name;
  j["seed"] = sc.seed;
  nlohmann::json jobs = nlohmann::json::array();
  for (const auto& o : sc.workspace.obstacles) {
    nlohmann::json jo = nlohmann::json::array();
    for (const auto& v : o.vertices) jo.push_back({v.x, v.y});
    jobs.push_back(jo);
  }
  j["workspace"] = {{"width", sc.workspace.width},
                    {"height", sc.workspace.height},
                    {"obstacles", jobs}};
  j["cable"] = {{"length", sc.cable.length},
                {"num_keypoints", sc.cable.num_keypoints},
                {"joint_stiffness", sc.cable.joint_stiffness},
                {"joint_damping", sc.cable.joint_damping},
                {"radius", sc.cable.radius}};
  j["start"] = detail::shape_to_json(sc.start);
  j["goal"] = detail::shape_to_json(sc.goal);
  j["planner"] = {{"max_iterations", sc.planner.max_iterations},
                  {"step_size", sc.planner.step_size},
                  {"goal_bias", sc.planner.goal_bias},
                  {"rewire_radius", sc.planner.rewire_radius},
                  {"collision_margin", sc.planner.collision_margin},
                  {"k_len", sc.pivot_weights.k_len},
                  {"k_clear", sc.pivot_weights.k_clear}};
  j["pathset"] = {{"gamma", sc.pathset.gamma},
                  {"alpha", sc.pathset.alpha},
                  {"resample_count", static_cast<int>(sc.pathset.resample_count)}};
  j["deform"] = {{"T", sc.deform_T},       {"lb", sc.deform_lb},
                 {"ub", sc.deform_ub},     {"max_iterations", sc.deform_max_iterations},
                 {"tolerance", sc.deform_tolerance}, {"k1", sc.ms_k1},
                 {"k2", sc.ms_k2},         {"sharpness", sc.sharpness}};
  j["mpc"] = {{"horizon", sc.mpc.horizon},
              {"max_iterations", sc.mpc.max_iterations},
              {"lambda1", sc.mpc.lambda1},
              {"lambda2", sc.mpc.lambda2},
              {"lambda3", sc.mpc.lambda3},
              {"d", sc.mpc.d},
              {"a_trans", sc.mpc.bounds.max[0]},
              {"a_rot", sc.mpc.bounds.max[2]},
              {"step_size", sc.mpc.step_size},
              {"advance_threshold", sc.mpc.advance_threshold},
              {"stop_tolerance", sc.mpc.stop_tolerance},
              {"step_cap", sc.mpc.step_cap}};
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write scenario: " + path);
  f << j.dump(2) << "\n";
}

/// Grasp poses implied by a shape (end keypoints and end-link yaws).
inline RobotConfig grasp_from_shape(const DLOShape& s) { return detail::grasp_from_shape(s); }

}  // namespace dlo
