#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "dlo/mpc.hpp"
#include "dlo/scenario.hpp"
#include "dlo/svg.hpp"

namespace dlo {

struct RunReport {
  bool success = false;
  std::string failed_stage;  // empty on success
  std::string diagnostics;
  int passages_detected = 0;
  int passages_traversed = 0;
  double pivot_cost = 0.0;
  double optimized_J = 0.0;
  double uniform_J = 0.0;
  bool deform_converged = false;
  double final_error = 0.0;
  double min_clearance = 0.0;
  int steps = 0;
  double target_tolerance = 0.02;
  double solve_time_s = 0.0;
  std::string csv_path;
  std::string svg_path;
};

/// Deterministic metrics CSV: one row per executed control step.
inline void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write metrics CSV: " + path);
  f << "step,time_s,shape_error_m,min_clearance_m,ref_index,solve_iterations,solve_time_ms\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.6g,%.12g,%.12g,%d,%d,%.6g\n", r.step, r.time_s,
                  r.shape_error_m, r.min_clearance_m, r.ref_index, r.solve_iterations,
                  r.solve_time_ms);
    f << buf;
  }
}

struct PipelineArtifacts {
  PassageSet passages;
  Path pivot;
  PathSet path_set;
  DeformOptResult deform;
  TrackResult tracking;
};

/// Full pipeline: pivot planning, path set generation and validation,
/// deformation optimization, closed-loop tracking in the built-in simulator,
/// artifact emission. Stage failures short-circuit with the stage name in the
/// report.
inline RunReport run_pipeline(const Scenario& sc, const DeformationModel& model,
                              const std::string& out_dir, PipelineArtifacts* artifacts = nullptr) {
  RunReport report;
  std::filesystem::create_directories(out_dir);

  // stage: passages
  const PassageSet passages = detect_passages(sc.workspace);
  report.passages_detected = static_cast<int>(passages.passages.size());

  // stage: pivot planning
  const std::size_t pivot_idx = default_pivot_index(sc.start.n());
  const PlanResult plan = plan_pivot(sc.start.keypoints[pivot_idx],
                                     sc.goal.keypoints[pivot_idx], sc.workspace,
                                     sc.pivot_weights, sc.planner);
  if (!plan.success) {
    report.failed_stage = "pivot_planning";
    report.diagnostics = plan.error;
    return report;
  }
  report.pivot_cost = plan.cost;

  // stage: path set generation + validation
  auto ps = generate_path_set(plan.path, sc.start, sc.goal, passages, sc.workspace,
                              sc.pathset, 0.0);
  if (!ps) {
    report.failed_stage = "path_set";
    report.diagnostics = ps.error();
    return report;
  }
  report.passages_traversed =
      static_cast<int>(traversed_passages(plan.path, passages).size());
  const PathSetReport validation = validate_path_set(ps.value(), sc.workspace, 0.0);
  if (!validation.all_pass()) {
    report.failed_stage = "path_set_validation";
    report.diagnostics = "collision_ok=" + std::to_string(validation.collision_ok) +
                         " homotopy_ok=" + std::to_string(validation.homotopy_ok);
    return report;
  }

  // stage: deformation optimization
  std::vector<ParametrizedPath> pps;
  pps.reserve(ps.value().paths.size());
  for (const auto& p : ps.value().paths) pps.emplace_back(p, sc.sharpness);
  const MSModelParams ms = MSModelParams::from_shape(sc.start, sc.ms_k1, sc.ms_k2);
  const DeformOptConfig dcfg = [&] {
    DeformOptConfig c = sc.deform_config();
    c.max_iterations = sc.deform_max_iterations;
    c.tolerance = sc.deform_tolerance;
    return c;
  }();
  const DeformOptResult deform = optimize_deformation(pps, ms, dcfg);
  report.optimized_J = deform.objective;
  report.uniform_J = objective(uniform_baseline(dcfg.T, sc.start.n()), pps, ms);
  report.deform_converged = deform.converged;

  // stage: tracking
  DloSim sim(sc.cable);
  auto st = sim.init(grasp_from_shape(sc.start), sc.seed);
  if (!st) {
    report.failed_stage = "sim_init";
    report.diagnostics = st.error();
    return report;
  }
  TrackResult tr = track(sim, st.value(), deform.sequence, model, sc.workspace, sc.mpc);
  report.final_error = tr.final_error;
  report.min_clearance = tr.min_clearance;
  report.steps = tr.steps;
  report.solve_time_s = tr.total_solve_time_s;

  // artifacts
  report.csv_path = out_dir + "/metrics.csv";
  write_metrics_csv(tr.rows, report.csv_path);
  report.svg_path = out_dir + "/run.svg";
  std::vector<SvgFrame> frames;
  const auto& shapes = tr.executed_shapes;
  if (!shapes.empty()) {
    const std::size_t last = shapes.size() - 1;
    for (double q : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const std::size_t idx = static_cast<std::size_t>(q * static_cast<double>(last));
      SvgFrame fr;
      fr.label = "step " + std::to_string(idx);
      fr.actual = shapes[idx];
      fr.reference = tr.reference_shapes[idx];
      fr.has_reference = true;
      frames.push_back(std::move(fr));
    }
  } else {
    frames.push_back({"start", sc.start, sc.goal, true});
  }
  emit_svg(frames, sc.workspace, report.svg_path, &passages, &ps.value());

  const bool tracking_ok = tr.success;
  const std::string tracking_failure = tr.failure;
  if (artifacts) {
    artifacts->passages = passages;
    artifacts->pivot = plan.path;
    artifacts->path_set = ps.value();
    artifacts->deform = deform;
    artifacts->tracking = std::move(tr);
  }

  if (!tracking_ok) {
    report.failed_stage = "tracking";
    report.diagnostics = tracking_failure;
    return report;
  }
  report.success =
      report.final_error < report.target_tolerance && report.min_clearance > 0.0;
  if (!report.success) {
    report.failed_stage = "tracking";
    report.diagnostics = "final error or clearance outside tolerance";
  }
  return report;
}

inline void write_report_json(const RunReport& r, const std::string& path) {
  nlohmann::json j;
  j["success"] = r.success;
  j["failed_stage"] = r.failed_stage;
  j["diagnostics"] = r.diagnostics;
  j["passages_detected"] = r.passages_detected;
  j["passages_traversed"] = r.passages_traversed;
  j["pivot_cost"] = r.pivot_cost;
  j["optimized_J"] = r.optimized_J;
  j["uniform_J"] = r.uniform_J;
  j["deform_converged"] = r.deform_converged;
  j["final_error_m"] = r.final_error;
  j["min_clearance_m"] = r.min_clearance;
  j["steps"] = r.steps;
  j["solve_time_s"] = r.solve_time_s;
  j["metrics_csv"] = r.csv_path;
  j["svg"] = r.svg_path;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write report: " + path);
  f << j.dump(2) << "\n";
}

}  // namespace dlo
