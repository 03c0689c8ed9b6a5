#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dlo/model.hpp"
#include "dlo/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitPlanning = 3;
constexpr int kExitTracking = 4;

int exit_code_for_stage(const std::string& stage) {
  if (stage.empty()) return kExitOk;
  if (stage == "tracking") return kExitTracking;
  return kExitPlanning;
}

dlo::Scenario load_or_die(const std::string& path, std::uint64_t* seed_override) {
  dlo::Scenario sc = dlo::load_scenario(path);
  if (seed_override) {
    sc.seed = *seed_override;
    sc.planner.rng_seed = *seed_override;
  }
  return sc;
}

std::string default_out_dir(const dlo::Scenario& sc) { return "runs/" + sc.name; }

dlo::DeformationModel train_from_scratch(const dlo::Scenario& sc, int num_transitions,
                                         int epochs, bool verbose) {
  dlo::DloSim sim(sc.cable);
  if (verbose) std::cout << "collecting " << num_transitions << " transitions...\n";
  const dlo::Dataset data = dlo::collect_dataset(sim, num_transitions, sc.seed,
                                                 sc.workspace.width, sc.workspace.height,
                                                 sc.mpc.bounds);
  dlo::DeformationModel model(dlo::ModelArch{}, sc.cable.num_keypoints);
  model.init_params(sc.seed);
  dlo::TrainConfig tc;
  tc.seed = sc.seed;
  tc.max_epochs = epochs;
  if (verbose) std::cout << "training on " << data.items.size() << " transitions...\n";
  const dlo::TrainReport rep = model.train(data, tc);
  if (verbose && !rep.val_loss.empty())
    std::cout << "best val loss " << rep.best_val << " at epoch " << rep.best_epoch << "\n";
  return model;
}

void print_report(const dlo::RunReport& r) {
  std::cout << "passages: " << r.passages_detected << " (traversed "
            << r.passages_traversed << ")\n";
  std::cout << "pivot cost: " << r.pivot_cost << "\n";
  std::cout << "objective J: " << r.optimized_J << " (uniform " << r.uniform_J << ")\n";
  std::cout << "final error: " << r.final_error << " m, min clearance: " << r.min_clearance
            << " m, steps: " << r.steps << "\n";
  std::cout << "solve time: " << r.solve_time_s << " s\n";
  if (r.success)
    std::cout << "SUCCESS\n";
  else
    std::cout << "FAILED at " << r.failed_stage << ": " << r.diagnostics << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"2D deformable-linear-object planning and tracking stack"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir, model_path, dataset_path, out_path;
  std::uint64_t seed = 0;
  bool have_seed = false, verbose = false;
  int num = 10000, epochs = 40;

  const auto add_common = [&](CLI::App* cmd, bool needs_scenario = true) {
    if (needs_scenario)
      cmd->add_option("scenario", scenario_path, "scenario JSON file")->required();
    cmd->add_option("--out-dir", out_dir, "output directory");
    cmd->add_option("--seed", seed, "override the scenario seed")
        ->each([&](const std::string&) { have_seed = true; });
    cmd->add_flag("--verbose", verbose, "verbose progress output");
  };

  auto* cmd_passages = app.add_subcommand("passages", "detect valid passages");
  add_common(cmd_passages);

  auto* cmd_plan = app.add_subcommand("plan", "plan the clearance-aware pivot path");
  add_common(cmd_plan);

  auto* cmd_pathset = app.add_subcommand("pathset", "generate and validate the path set");
  add_common(cmd_pathset);

  auto* cmd_optimize = app.add_subcommand("optimize", "optimize the deformation sequence");
  add_common(cmd_optimize);

  auto* cmd_collect = app.add_subcommand("collect", "collect simulator transitions");
  add_common(cmd_collect);
  cmd_collect->add_option("--num", num, "number of transitions");
  cmd_collect->add_option("--out", out_path, "dataset output file")->required();

  auto* cmd_train = app.add_subcommand("train", "train the deformation model");
  cmd_train->add_option("dataset", dataset_path, "dataset file")->required();
  cmd_train->add_option("--out", out_path, "checkpoint output file")->required();
  cmd_train->add_option("--epochs", epochs, "training epochs");
  cmd_train->add_option("--seed", seed, "training seed")
      ->each([&](const std::string&) { have_seed = true; });
  cmd_train->add_flag("--verbose", verbose, "verbose progress output");

  auto* cmd_track = app.add_subcommand("track", "plan and track with a trained model");
  add_common(cmd_track);
  cmd_track->add_option("--model", model_path, "model checkpoint")->required();

  auto* cmd_run = app.add_subcommand("run", "full pipeline; trains if no model given");
  add_common(cmd_run);
  cmd_run->add_option("--model", model_path, "model checkpoint");
  cmd_run->add_option("--train-num", num, "transitions to collect when training");
  cmd_run->add_option("--epochs", epochs, "training epochs when training");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_train->parsed()) {
      const dlo::Dataset data = dlo::Dataset::load(dataset_path);
      dlo::DeformationModel model(dlo::ModelArch{}, data.n);
      model.init_params(seed);
      dlo::TrainConfig tc;
      tc.seed = seed;
      tc.max_epochs = epochs;
      const dlo::TrainReport rep = model.train(data, tc);
      model.save(out_path);
      std::cout << "trained " << rep.train_loss.size() << " epochs, best val "
                << rep.best_val << " at epoch " << rep.best_epoch << "\n";
      std::cout << "checkpoint: " << out_path << "\n";
      return kExitOk;
    }

    const dlo::Scenario sc = load_or_die(scenario_path, have_seed ? &seed : nullptr);
    if (out_dir.empty()) out_dir = default_out_dir(sc);
    std::filesystem::create_directories(out_dir);

    if (cmd_passages->parsed()) {
      const dlo::PassageSet ps = dlo::detect_passages(sc.workspace);
      std::cout << ps.passages.size() << " valid passages\n";
      for (const auto& p : ps.passages)
        std::printf("  (%d,%d) width %.4f m from (%.3f,%.3f) to (%.3f,%.3f)\n",
                    p.obstacle_ids.first, p.obstacle_ids.second, p.width, p.endpoint_a.x,
                    p.endpoint_a.y, p.endpoint_b.x, p.endpoint_b.y);
      dlo::emit_svg({{"passages", sc.start, sc.goal, true}}, sc.workspace,
                    out_dir + "/passages.svg", &ps, nullptr);
      return kExitOk;
    }

    if (cmd_plan->parsed() || cmd_pathset->parsed() || cmd_optimize->parsed()) {
      const dlo::PassageSet passages = dlo::detect_passages(sc.workspace);
      const std::size_t pivot_idx = dlo::default_pivot_index(sc.start.n());
      const dlo::PlanResult plan =
          dlo::plan_pivot(sc.start.keypoints[pivot_idx], sc.goal.keypoints[pivot_idx],
                          sc.workspace, sc.pivot_weights, sc.planner);
      if (!plan.success) {
        std::cerr << "planning failed: " << plan.error << "\n";
        return kExitPlanning;
      }
      std::cout << "pivot path: " << plan.path.size() << " waypoints, cost " << plan.cost
                << "\n";
      if (cmd_plan->parsed()) {
        dlo::Path pivot = plan.path;
        dlo::PathSet pivot_only;
        pivot_only.paths.push_back(pivot);
        dlo::emit_svg({{"pivot", sc.start, sc.goal, true}}, sc.workspace,
                      out_dir + "/pivot.svg", &passages, &pivot_only);
        return kExitOk;
      }
      auto ps = dlo::generate_path_set(plan.path, sc.start, sc.goal, passages, sc.workspace,
                                       sc.pathset, 0.0);
      if (!ps) {
        std::cerr << "path set generation failed: " << ps.error() << "\n";
        return kExitPlanning;
      }
      const dlo::PathSetReport rep = dlo::validate_path_set(ps.value(), sc.workspace, 0.0);
      std::cout << "path set: " << ps.value().paths.size() << " paths, collision_ok="
                << rep.collision_ok << " homotopy_ok=" << rep.homotopy_ok << "\n";
      dlo::emit_svg({{"pathset", sc.start, sc.goal, true}}, sc.workspace,
                    out_dir + "/pathset.svg", &passages, &ps.value());
      if (cmd_pathset->parsed()) return rep.all_pass() ? kExitOk : kExitPlanning;

      std::vector<dlo::ParametrizedPath> pps;
      for (const auto& p : ps.value().paths) pps.emplace_back(p, sc.sharpness);
      const dlo::MSModelParams ms = dlo::MSModelParams::from_shape(sc.start, sc.ms_k1, sc.ms_k2);
      dlo::DeformOptConfig dcfg = sc.deform_config();
      dcfg.max_iterations = sc.deform_max_iterations;
      dcfg.tolerance = sc.deform_tolerance;
      const dlo::DeformOptResult res = dlo::optimize_deformation(pps, ms, dcfg);
      const double ju = dlo::objective(dlo::uniform_baseline(dcfg.T, sc.start.n()), pps, ms);
      std::cout << "optimized J " << res.objective << " vs uniform " << ju
                << (res.converged ? "" : " (not converged)") << "\n";
      std::vector<dlo::SvgFrame> frames;
      for (double q : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const std::size_t t =
            static_cast<std::size_t>(q * static_cast<double>(res.sequence.shapes.size() - 1));
        frames.push_back({"t=" + std::to_string(t), res.sequence.shapes[t], {}, false});
      }
      dlo::emit_svg(frames, sc.workspace, out_dir + "/sequence.svg", &passages, &ps.value());
      return kExitOk;
    }

    if (cmd_collect->parsed()) {
      dlo::DloSim sim(sc.cable);
      const dlo::Dataset data = dlo::collect_dataset(sim, num, sc.seed, sc.workspace.width,
                                                     sc.workspace.height, sc.mpc.bounds);
      data.save(out_path);
      std::cout << "collected " << data.items.size() << " transitions -> " << out_path << "\n";
      return kExitOk;
    }

    // track / run
    dlo::DeformationModel model;
    if (!model_path.empty()) {
      model = dlo::DeformationModel::load(model_path);
      if (model.n() != sc.cable.num_keypoints) {
        std::cerr << "model keypoint count does not match the scenario\n";
        return kExitValidation;
      }
    } else if (cmd_run->parsed()) {
      model = train_from_scratch(sc, num, epochs, verbose);
      model.save(out_dir + "/model.ckpt");
    } else {
      std::cerr << "track requires --model\n";
      return kExitValidation;
    }

    const dlo::RunReport report = dlo::run_pipeline(sc, model, out_dir);
    dlo::write_report_json(report, out_dir + "/report.json");
    print_report(report);
    return exit_code_for_stage(report.failed_stage);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
