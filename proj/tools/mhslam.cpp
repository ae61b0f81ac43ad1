// Command-line front end: simulate, solve, eval, compare, metrics.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "mhslam/ambiguity_sim.hpp"
#include "mhslam/dataset_io.hpp"
#include "mhslam/errors.hpp"
#include "mhslam/evaluation.hpp"
#include "mhslam/experiment.hpp"
#include "mhslam/shape_metrics.hpp"

using namespace mhslam;

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InvalidInput("cannot open " + path);
  }
  return in;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) {
    throw Error("cannot write " + path);
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in = open_input(path);
  try {
    return parse_dataset(in);
  } catch (const ParseError& e) {
    throw Error(path + ": " + e.what());
  }
}

void add_sim_flags(CLI::App* cmd, SimConfig& config) {
  cmd->add_option("--frames", config.frame_count, "Total frame count")->capture_default_str();
  cmd->add_option("--inner-frames", config.inner_frame_count, "Frames on the inner circle")->capture_default_str();
  cmd->add_option("--n-hyp", config.hypothesis_count, "Hypotheses per observation")->capture_default_str();
  cmd->add_option("--p-cov", config.p_cov, "Probability a set contains the true pose")->capture_default_str();
  cmd->add_option("--p-spur", config.p_spur, "Per-slot spurious probability")->capture_default_str();
  cmd->add_option("--odom-sigma-rot", config.odometry_sigma_rot)->capture_default_str();
  cmd->add_option("--odom-sigma-trans", config.odometry_sigma_trans)->capture_default_str();
  cmd->add_option("--meas-sigma-rot", config.measurement_sigma_rot)->capture_default_str();
  cmd->add_option("--meas-sigma-trans", config.measurement_sigma_trans)->capture_default_str();
  cmd->add_option("--max-range", config.visibility_max_range)->capture_default_str();
  cmd->add_option("--half-angle", config.visibility_half_angle)->capture_default_str();
}

void add_solver_flags(CLI::App* cmd, SolverConfig& config) {
  cmd->add_option("--max-iterations", config.max_iterations)->capture_default_str();
  cmd->add_option("--abs-tol", config.convergence_tol_abs)->capture_default_str();
  cmd->add_option("--rel-tol", config.convergence_tol_rel)->capture_default_str();
}

// A frame split left at its default follows --frames.
void resolve_split(SimConfig& config, const CLI::App* cmd) {
  if (cmd->count("--inner-frames") == 0) {
    config.inner_frame_count = config.frame_count / 2;
  }
}

void print_report(const ErrorReport& r) {
  std::printf("final_mean_landmark_chordal %s\n", format_double(r.final_mean_landmark_chordal).c_str());
  std::printf("trajectory_rmse %s\n", format_double(r.trajectory_rmse).c_str());
  if (!r.rot_err_deg_running.empty()) {
    std::printf("final_rot_err_deg_running %s\n", format_double(r.rot_err_deg_running.back()).c_str());
    std::printf("final_trans_err_m_running %s\n", format_double(r.trans_err_m_running.back()).c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-hypothesis object SLAM backend with max-mixture factors"};
  app.require_subcommand(1);

  SimConfig sim_config;
  std::string sim_out;
  std::string sim_gt_out;
  auto* simulate = app.add_subcommand("simulate", "Generate a dataset and its groundtruth");
  simulate->add_option("--seed", sim_config.seed)->capture_default_str();
  simulate->add_option("--out", sim_out, "Dataset file")->required();
  simulate->add_option("--gt-out", sim_gt_out, "Groundtruth file")->required();
  add_sim_flags(simulate, sim_config);

  std::string solve_in;
  std::string solve_out;
  std::string strategy_name = "maxmix";
  std::uint64_t solve_seed = 1;
  SolverConfig solver_config = experiment_solver_config();
  auto* solve = app.add_subcommand("solve", "Replay a dataset through the incremental solver");
  solve->add_option("--in", solve_in, "Dataset file")->required();
  solve->add_option("--out", solve_out, "Per-step estimate file")->required();
  solve->add_option("--strategy", strategy_name, "maxmix, average or random")->capture_default_str();
  solve->add_option("--seed", solve_seed, "Seed of the random strategy")->capture_default_str();
  add_solver_flags(solve, solver_config);

  std::string eval_est;
  std::string eval_gt;
  std::string eval_prefix;
  auto* eval = app.add_subcommand("eval", "Score an estimate file against groundtruth");
  eval->add_option("--est", eval_est)->required();
  eval->add_option("--gt", eval_gt)->required();
  eval->add_option("--out-prefix", eval_prefix)->required();

  SimConfig compare_config;
  std::string seeds_text;
  std::string compare_prefix;
  SolverConfig compare_solver = experiment_solver_config();
  auto* compare = app.add_subcommand("compare", "Run all strategies over several seeds");
  compare->add_option("--seeds", seeds_text, "Comma-separated seeds, or a count K for seeds 1..K")->required();
  compare->add_option("--out-prefix", compare_prefix)->required();
  add_sim_flags(compare, compare_config);
  add_solver_flags(compare, compare_solver);

  std::string model_path;
  std::string pairs_path;
  std::string metric_name = "adds";
  double auc_threshold = 0.10;
  auto* metrics = app.add_subcommand("metrics", "ADD / ADD-S errors and AUC of pose pairs");
  metrics->add_option("--model", model_path, "Model points, one `x y z` per line")->required();
  metrics->add_option("--pairs", pairs_path, "14 numbers per line: estimate then groundtruth pose")->required();
  metrics->add_option("--metric", metric_name)->check(CLI::IsMember({"add", "adds"}))->capture_default_str();
  metrics->add_option("--auc-threshold", auc_threshold)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (simulate->parsed()) {
      resolve_split(sim_config, simulate);
      const SimOutput sim = run_simulation(sim_config);
      const Dataset dataset = dataset_from_simulation(sim);
      write_file(sim_out, serialize_dataset(dataset.graph, dataset.values));
      write_file(sim_gt_out, serialize_dataset(FactorGraph{}, groundtruth_values(sim)));
    } else if (solve->parsed()) {
      const Dataset dataset = load_dataset(solve_in);
      const StrategyKind strategy = parse_strategy(strategy_name);
      const IncrementalResult result =
          incremental_solve(make_incremental_problem(collapse_hypotheses(dataset, strategy, solve_seed)), solver_config);
      std::ostringstream text;
      write_estimates(text, result.per_step);
      write_file(solve_out, text.str());
    } else if (eval->parsed()) {
      std::ifstream est_in = open_input(eval_est);
      const std::vector<GraphValues> per_step = read_estimates(est_in);
      const Dataset gt = load_dataset(eval_gt);
      const ErrorReport report = evaluate_run(per_step, gt.values);
      write_report_csv(report, eval_prefix);
      print_report(report);
    } else if (compare->parsed()) {
      resolve_split(compare_config, compare);
      const auto seeds = parse_seed_list(seeds_text);
      const ComparisonTable table = compare_strategies(compare_config, seeds, compare_solver);
      write_comparison(table, compare_prefix);
      std::printf("%-8s %-30s %12s %12s %12s\n", "strategy", "metric", "q1", "median", "q3");
      for (const StrategySummary& s : table.summary) {
        const auto row = [&](const char* metric, const Quartiles& q) {
          std::printf("%-8s %-30s %12.6f %12.6f %12.6f\n", to_string(s.strategy).c_str(), metric, q.q1, q.median,
                      q.q3);
        };
        row("final_mean_landmark_chordal", s.final_mean_landmark_chordal);
        row("trajectory_rmse", s.trajectory_rmse);
      }
    } else if (metrics->parsed()) {
      std::ifstream model_in = open_input(model_path);
      const ObjectModel model = read_xyz_model(model_in, 0, model_path);
      std::ifstream pairs_in = open_input(pairs_path);
      const std::vector<PosePair> pairs = read_pose_pairs(pairs_in);
      const PoseMetric metric = metric_name == "add" ? PoseMetric::Add : PoseMetric::AddS;
      std::vector<double> errors;
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        errors.push_back(pose_error(metric, pairs[i].estimate, pairs[i].groundtruth, model));
        std::printf("%zu %s\n", i, format_double(errors.back()).c_str());
      }
      std::printf("AUC %s\n", format_double(auc(errors, auc_threshold)).c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
