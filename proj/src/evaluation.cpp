#include "mhslam/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "mhslam/errors.hpp"

namespace mhslam {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write " + path);
  }
  return out;
}

void write_quartiles(std::ofstream& out, StrategyKind s, const char* metric, const Quartiles& q) {
  out << to_string(s) << ',' << metric << ',' << format_double(q.q1) << ',' << format_double(q.median) << ','
      << format_double(q.q3) << '\n';
}

}  // namespace

std::string to_string(StrategyKind s) {
  switch (s) {
    case StrategyKind::MaxMixture:
      return "maxmix";
    case StrategyKind::Average:
      return "average";
    case StrategyKind::RandomSelect:
      return "random";
  }
  return "unknown";
}

StrategyKind parse_strategy(const std::string& name) {
  for (StrategyKind s : kAllStrategies) {
    if (to_string(s) == name) {
      return s;
    }
  }
  throw InvalidInput("unknown strategy '" + name + "' (expected maxmix, average or random)");
}

Pose3 baseline_average(const HypothesisSet& h) {
  Vector3 t = Vector3::Zero();
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  Eigen::Vector4d sum = Eigen::Vector4d::Zero();
  for (std::size_t j = 0; j < h.size(); ++j) {
    const double w = h.weights()[j];
    const Eigen::Vector4d q = quat_normalize_hemisphere(h[j].rotation()).coeffs_wxyz();
    t += w * h[j].translation();
    m += w * q * q.transpose();
    sum += w * q;
  }

  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(m);
  const Eigen::Vector4d values = eig.eigenvalues();
  Eigen::Vector4d q = eig.eigenvectors().col(3);
  const double tol = 1e-12 * std::max(1.0, values(3));
  int multiplicity = 1;
  while (multiplicity < 4 && values(3) - values(3 - multiplicity) <= tol) {
    ++multiplicity;
  }
  if (multiplicity > 1) {
    const auto basis = eig.eigenvectors().rightCols(multiplicity);
    const Eigen::Vector4d projected = basis * (basis.transpose() * sum);
    if (projected.norm() > 1e-12) {
      q = projected;
    }
  }
  return Pose3(UnitQuaternion(q(0), q(1), q(2), q(3)), t);
}

Pose3 baseline_random(const HypothesisSet& h, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, h.size() - 1);
  return h[pick(rng)];
}

Dataset collapse_hypotheses(const Dataset& dataset, StrategyKind strategy, std::uint64_t seed) {
  if (strategy == StrategyKind::MaxMixture) {
    return dataset;
  }
  std::mt19937_64 rng(seed);
  Dataset out;
  out.values = dataset.values;
  for (const Factor& factor : dataset.graph) {
    const auto* mm = std::get_if<MaxMixtureFactor>(&factor);
    if (mm == nullptr) {
      out.graph.add(factor);
      continue;
    }
    const HypothesisSet set(static_cast<int>(mm->landmark().index), mm->measurements(), mm->weights());
    const Pose3 chosen = strategy == StrategyKind::Average ? baseline_average(set) : baseline_random(set, rng);
    out.graph.add(MaxMixtureFactor(mm->robot(), mm->landmark(), {chosen}, mm->information()));
  }
  return out;
}

std::vector<double> running_mean(std::span<const double> values) {
  std::vector<double> out;
  out.reserve(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    out.push_back(sum / static_cast<double>(i + 1));
  }
  return out;
}

ErrorReport evaluate_run(const std::vector<GraphValues>& per_step, const GraphValues& groundtruth) {
  std::size_t gt_robots = 0;
  for (const auto& [key, pose] : groundtruth) {
    gt_robots += key.kind == VariableKind::Robot ? 1 : 0;
  }
  if (per_step.size() != gt_robots) {
    throw InvalidInput("estimate has " + std::to_string(per_step.size()) + " steps but groundtruth has " +
                       std::to_string(gt_robots) + " robot poses");
  }

  ErrorReport report;
  std::vector<double> rot;
  std::vector<double> trans;
  for (std::size_t k = 0; k < per_step.size(); ++k) {
    const VariableKey robot = VariableKey::robot(static_cast<std::uint32_t>(k));
    if (!per_step[k].contains(robot) || !groundtruth.contains(robot)) {
      throw InvalidInput("step " + std::to_string(k) + " lacks " + to_string(robot));
    }
    const Pose3& est = per_step[k].at(robot);
    const Pose3& gt = groundtruth.at(robot);
    rot.push_back(rotation_angular_distance(est, gt) * kRadToDeg);
    trans.push_back((est.translation() - gt.translation()).norm());

    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& [key, pose] : per_step[k]) {
      if (key.kind != VariableKind::Landmark) {
        continue;
      }
      if (!groundtruth.contains(key)) {
        throw InvalidInput("no groundtruth for " + to_string(key));
      }
      sum += chordal_distance(pose, groundtruth.at(key));
      ++count;
    }
    report.mean_landmark_chordal.push_back(count > 0 ? sum / static_cast<double>(count) : 0.0);
  }
  report.rot_err_deg_running = running_mean(rot);
  report.trans_err_m_running = running_mean(trans);

  if (!per_step.empty()) {
    const GraphValues& last = per_step.back();
    double squared = 0.0;
    std::size_t robots = 0;
    double landmark_sum = 0.0;
    for (const auto& [key, pose] : last) {
      if (!groundtruth.contains(key)) {
        throw InvalidInput("no groundtruth for " + to_string(key));
      }
      const Pose3& gt = groundtruth.at(key);
      if (key.kind == VariableKind::Robot) {
        squared += (pose.translation() - gt.translation()).squaredNorm();
        ++robots;
      } else {
        const double e = chordal_distance(pose, gt);
        report.final_landmark_chordal.emplace_back(key.index, e);
        landmark_sum += e;
      }
    }
    if (robots != gt_robots) {
      throw InvalidInput("final estimate has " + std::to_string(robots) + " robot poses, groundtruth has " +
                         std::to_string(gt_robots));
    }
    report.trajectory_rmse = std::sqrt(squared / static_cast<double>(robots));
    std::sort(report.final_landmark_chordal.begin(), report.final_landmark_chordal.end());
    if (!report.final_landmark_chordal.empty()) {
      report.final_mean_landmark_chordal =
          landmark_sum / static_cast<double>(report.final_landmark_chordal.size());
    }
  }
  return report;
}

StrategyRun run_strategy(const Dataset& dataset, const GraphValues& groundtruth, StrategyKind strategy,
                         std::uint64_t seed, const SolverConfig& solver) {
  StrategyRun run;
  run.strategy = strategy;
  run.seed = seed;
  run.input_checksum = fnv1a(serialize_dataset(dataset.graph, dataset.values));
  const Dataset collapsed = collapse_hypotheses(dataset, strategy, seed);
  const IncrementalResult result = incremental_solve(make_incremental_problem(collapsed), solver);
  run.report = evaluate_run(result.per_step, groundtruth);
  return run;
}

Quartiles quartiles(std::vector<double> sample) {
  if (sample.empty()) {
    throw InvalidInput("quartiles of an empty sample");
  }
  std::sort(sample.begin(), sample.end());
  const auto at = [&](double p) {
    const double h = (static_cast<double>(sample.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sample.size() - 1);
    return sample[lo] + (h - static_cast<double>(lo)) * (sample[hi] - sample[lo]);
  };
  return {at(0.25), at(0.5), at(0.75)};
}

ComparisonTable compare_strategies(const SimConfig& config, std::span<const std::uint64_t> seeds,
                                   const SolverConfig& solver) {
  if (seeds.empty()) {
    throw InvalidInput("compare needs at least one seed");
  }
  ComparisonTable table;
  for (std::uint64_t seed : seeds) {
    SimConfig seeded = config;
    seeded.seed = seed;
    const SimOutput sim = run_simulation(seeded);
    const Dataset dataset = dataset_from_simulation(sim);
    const GraphValues gt = groundtruth_values(sim);
    const std::size_t first = table.runs.size();
    for (StrategyKind s : kAllStrategies) {
      table.runs.push_back(run_strategy(dataset, gt, s, seed, solver));
      if (table.runs.back().input_checksum != table.runs[first].input_checksum) {
        throw Error("strategies received different measurements for seed " + std::to_string(seed));
      }
    }
  }
  for (StrategyKind s : kAllStrategies) {
    std::vector<double> landmark;
    std::vector<double> rmse;
    std::vector<double> rot;
    std::vector<double> trans;
    for (const StrategyRun& run : table.runs) {
      if (run.strategy != s) {
        continue;
      }
      landmark.push_back(run.report.final_mean_landmark_chordal);
      rmse.push_back(run.report.trajectory_rmse);
      rot.push_back(run.report.rot_err_deg_running.empty() ? 0.0 : run.report.rot_err_deg_running.back());
      trans.push_back(run.report.trans_err_m_running.empty() ? 0.0 : run.report.trans_err_m_running.back());
    }
    table.summary.push_back(StrategySummary{s, quartiles(landmark), quartiles(rmse), quartiles(rot),
                                            quartiles(trans)});
  }
  return table;
}

void write_report_csv(const ErrorReport& report, const std::string& prefix) {
  std::ofstream running = open_output(prefix + "_running.csv");
  running << "frame,rot_err_deg_running,trans_err_m_running\n";
  for (std::size_t k = 0; k < report.rot_err_deg_running.size(); ++k) {
    running << k << ',' << format_double(report.rot_err_deg_running[k]) << ','
            << format_double(report.trans_err_m_running[k]) << '\n';
  }
  std::ofstream landmarks = open_output(prefix + "_landmarks.csv");
  landmarks << "timestep,mean_landmark_chordal\n";
  for (std::size_t k = 0; k < report.mean_landmark_chordal.size(); ++k) {
    landmarks << k << ',' << format_double(report.mean_landmark_chordal[k]) << '\n';
  }
}

void write_comparison(const ComparisonTable& table, const std::string& prefix) {
  std::ofstream runs = open_output(prefix + "_runs.csv");
  runs << "strategy,seed,input_checksum,final_mean_landmark_chordal,trajectory_rmse,final_rot_err_deg,"
          "final_trans_err_m\n";
  for (const StrategyRun& run : table.runs) {
    write_report_csv(run.report, prefix + "_" + to_string(run.strategy) + "_seed" + std::to_string(run.seed));
    char checksum[17];
    std::snprintf(checksum, sizeof(checksum), "%016llx", static_cast<unsigned long long>(run.input_checksum));
    const auto& r = run.report;
    runs << to_string(run.strategy) << ',' << run.seed << ',' << checksum << ','
         << format_double(r.final_mean_landmark_chordal) << ',' << format_double(r.trajectory_rmse) << ','
         << format_double(r.rot_err_deg_running.empty() ? 0.0 : r.rot_err_deg_running.back()) << ','
         << format_double(r.trans_err_m_running.empty() ? 0.0 : r.trans_err_m_running.back()) << '\n';
  }
  std::ofstream summary = open_output(prefix + "_summary.csv");
  summary << "strategy,metric,q1,median,q3\n";
  for (const StrategySummary& s : table.summary) {
    write_quartiles(summary, s.strategy, "final_mean_landmark_chordal", s.final_mean_landmark_chordal);
    write_quartiles(summary, s.strategy, "trajectory_rmse", s.trajectory_rmse);
    write_quartiles(summary, s.strategy, "final_rot_err_deg", s.final_rot_err_deg);
    write_quartiles(summary, s.strategy, "final_trans_err_m", s.final_trans_err_m);
  }
}

}  // namespace mhslam
