#include "mhslam/solver.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <variant>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "mhslam/errors.hpp"

namespace mhslam {

namespace {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

// Block-sparse normal equations H d = -g over 6x6 variable blocks. Only the
// lower block triangle is stored (diagonal blocks in full); the pattern is
// fixed for the lifetime of one optimize() call so the symbolic
// factorization is computed once.
class NormalEquations {
 public:
  NormalEquations(const FactorGraph& graph, const GraphValues& values) {
    const std::size_t n = values.size();
    std::vector<std::vector<int>> row_blocks(n);
    std::vector<bool> touched(n, false);
    factor_vars_.reserve(graph.size());
    for (const auto& factor : graph) {
      std::array<int, 2> vars{-1, -1};
      const auto keys = factor_keys(factor);
      for (std::size_t k = 0; k < keys.size(); ++k) {
        vars[k] = static_cast<int>(values.position(keys[k]));
        touched[vars[k]] = true;
        row_blocks[vars[k]].push_back(vars[k]);
      }
      if (keys.size() == 2) {
        const int hi = std::max(vars[0], vars[1]);
        const int lo = std::min(vars[0], vars[1]);
        row_blocks[lo].push_back(hi);
      }
      factor_vars_.push_back(vars);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!touched[i]) {
        throw GaugeError(to_string(values.entries()[i].first) + " is not constrained by any factor");
      }
      auto& rows = row_blocks[i];
      std::sort(rows.begin(), rows.end());
      rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    }

    const int dim = static_cast<int>(6 * n);
    hessian_.resize(dim, dim);
    Eigen::VectorXi column_sizes(dim);
    for (std::size_t b = 0; b < n; ++b) {
      column_sizes.segment<6>(6 * b).setConstant(static_cast<int>(6 * row_blocks[b].size()));
    }
    hessian_.reserve(column_sizes);
    for (std::size_t b = 0; b < n; ++b) {
      for (int kc = 0; kc < 6; ++kc) {
        const int col = static_cast<int>(6 * b) + kc;
        for (int rb : row_blocks[b]) {
          for (int kr = 0; kr < 6; ++kr) {
            hessian_.insert(6 * rb + kr, col) = 0.0;
          }
        }
      }
    }
    hessian_.makeCompressed();

    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t rank = 0; rank < row_blocks[b].size(); ++rank) {
        block_offset_[{row_blocks[b][rank], static_cast<int>(b)}] = static_cast<int>(6 * rank);
      }
    }
    factor_offsets_.reserve(factor_vars_.size());
    for (const auto& vars : factor_vars_) {
      std::array<int, 3> offs{-1, -1, -1};
      for (int k = 0; k < 2 && vars[k] >= 0; ++k) {
        offs[k] = block_offset_.at({vars[k], vars[k]});
      }
      if (vars[1] >= 0) {
        offs[2] = block_offset_.at({std::max(vars[0], vars[1]), std::min(vars[0], vars[1])});
      }
      factor_offsets_.push_back(offs);
    }
    diagonal_index_.resize(dim);
    for (int i = 0; i < dim; ++i) {
      diagonal_index_[i] = hessian_.outerIndexPtr()[i] + block_offset_.at({i / 6, i / 6}) + i % 6;
    }
    gradient_ = Eigen::VectorXd::Zero(dim);
    cholesky_.analyzePattern(hessian_);
  }

  void assemble(const std::vector<Linearization>& lins) {
    std::fill_n(hessian_.valuePtr(), hessian_.nonZeros(), 0.0);
    gradient_.setZero();
    for (std::size_t f = 0; f < lins.size(); ++f) {
      const Linearization& lin = lins[f];
      const auto& vars = factor_vars_[f];
      const auto& offs = factor_offsets_[f];
      for (std::size_t p = 0; p < lin.arity; ++p) {
        gradient_.segment<6>(6 * vars[p]) += lin.jacobians[p].transpose() * lin.residual;
        add_block(vars[p], offs[p], lin.jacobians[p].transpose() * lin.jacobians[p]);
      }
      if (lin.arity == 2) {
        if (vars[0] > vars[1]) {
          add_block(vars[1], offs[2], lin.jacobians[0].transpose() * lin.jacobians[1]);
        } else {
          add_block(vars[0], offs[2], lin.jacobians[1].transpose() * lin.jacobians[0]);
        }
      }
    }
    undamped_.assign(hessian_.valuePtr(), hessian_.valuePtr() + hessian_.nonZeros());
  }

  /// Solves (H + lambda diag(H)) d = -g. Returns false when the damped
  /// system is not positive definite.
  bool solve(double lambda, Eigen::VectorXd& step) {
    std::copy(undamped_.begin(), undamped_.end(), hessian_.valuePtr());
    for (int idx : diagonal_index_) {
      hessian_.valuePtr()[idx] += lambda * undamped_[idx];
    }
    cholesky_.factorize(hessian_);
    if (cholesky_.info() != Eigen::Success) {
      return false;
    }
    step = cholesky_.solve(-gradient_);
    return cholesky_.info() == Eigen::Success && step.allFinite();
  }

 private:
  // Adds m to the block whose column block is col_block and whose row block
  // starts `offset` entries into each of its columns.
  void add_block(int col_block, int offset, const Matrix6& m) {
    double* values = hessian_.valuePtr();
    const int* outer = hessian_.outerIndexPtr();
    for (int kc = 0; kc < 6; ++kc) {
      double* column = values + outer[6 * col_block + kc] + offset;
      for (int kr = 0; kr < 6; ++kr) {
        column[kr] += m(kr, kc);
      }
    }
  }

  std::vector<std::array<int, 2>> factor_vars_;
  // Per factor: offsets of the two diagonal blocks and the off-diagonal one.
  std::vector<std::array<int, 3>> factor_offsets_;
  std::map<std::pair<int, int>, int> block_offset_;
  std::vector<int> diagonal_index_;
  SparseMatrix hessian_;
  std::vector<double> undamped_;
  Eigen::VectorXd gradient_;
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> cholesky_;
};

// Total error with every mixture factor at its most likely component; the
// chosen components are written to `active` in insertion order.
double evaluate(const FactorGraph& graph, const GraphValues& values, std::vector<std::size_t>& active) {
  active.clear();
  double sum = 0.0;
  for (const auto& factor : graph) {
    if (const auto* mm = std::get_if<MaxMixtureFactor>(&factor)) {
      const ActiveResidual a = residual_active(*mm, values);
      active.push_back(a.index);
      sum += 0.5 * a.residual.squaredNorm() + a.offset;
    } else {
      sum += factor_error(factor, values);
    }
  }
  return sum;
}

GraphValues retract(const GraphValues& values, const Eigen::VectorXd& step) {
  GraphValues out = values;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Twist d = step.segment<6>(6 * i);
    out.set_at_position(i, compose(exp(d), values.entries()[i].second));
  }
  return out;
}

}  // namespace

void SolverConfig::validate() const {
  if (max_iterations <= 0 || !(initial_damping > 0.0) || !(damping_up > 1.0) || !(damping_down > 0.0) ||
      !(damping_down < 1.0) || !(convergence_tol_abs > 0.0) || !(convergence_tol_abs < 1.0) ||
      !(convergence_tol_rel > 0.0) || !(convergence_tol_rel < 1.0) || max_inner_retries <= 0) {
    throw InvalidInput("invalid solver configuration");
  }
}

SolveResult optimize(const FactorGraph& graph, const GraphValues& initial, const SolverConfig& config) {
  config.validate();
  const bool has_prior = std::any_of(graph.begin(), graph.end(),
                                     [](const Factor& f) { return std::holds_alternative<PriorFactor>(f); });
  if (!has_prior) {
    throw GaugeError("graph has no prior factor to fix the gauge");
  }
  NormalEquations system(graph, initial);

  SolveResult result{initial, {}};
  SolveStats& stats = result.stats;
  std::vector<std::size_t> active;
  double error = evaluate(graph, result.values, active);
  stats.initial_error = error;
  stats.error_history.push_back(error);
  stats.active_components.push_back(active);

  double lambda = config.initial_damping;
  std::vector<Linearization> lins;
  lins.reserve(graph.size());
  Eigen::VectorXd step;

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    ++stats.iterations;
    lins.clear();
    for (const auto& factor : graph) {
      lins.push_back(linearize(factor, result.values));
    }
    system.assemble(lins);

    bool accepted = false;
    bool any_solved = false;
    for (int attempt = 0; attempt <= config.max_inner_retries; ++attempt) {
      if (!system.solve(lambda, step)) {
        lambda *= config.damping_up;
        continue;
      }
      any_solved = true;
      GraphValues candidate = retract(result.values, step);
      std::vector<std::size_t> candidate_active;
      const double candidate_error = evaluate(graph, candidate, candidate_active);
      if (std::isfinite(candidate_error) && candidate_error < error) {
        const double decrease = error - candidate_error;
        result.values = std::move(candidate);
        error = candidate_error;
        stats.error_history.push_back(error);
        stats.active_components.push_back(std::move(candidate_active));
        lambda = std::max(lambda * config.damping_down, 1e-12);
        accepted = true;
        if (decrease < config.convergence_tol_abs || decrease < config.convergence_tol_rel * (error + decrease)) {
          stats.converged = true;
        }
        break;
      }
      lambda *= config.damping_up;
    }
    if (!any_solved) {
      throw GaugeError("normal equations are singular; the graph is under-constrained");
    }
    if (!accepted) {
      // No damping level lowers the error: a (local) minimum.
      stats.converged = true;
    }
    if (stats.converged) {
      break;
    }
  }
  stats.final_error = error;
  return result;
}

namespace {

double mixture_cost(const MaxMixtureFactor& f, const Pose3& robot, const Pose3& landmark) {
  const ActiveResidual a = residual_active(f, robot, landmark);
  return 0.5 * a.residual.squaredNorm() + a.offset;
}

void initialize_new_landmarks(const Timestep& step, GraphValues& values) {
  for (std::size_t i = 0; i < step.observations.size(); ++i) {
    const MaxMixtureFactor& first = step.observations[i];
    if (values.contains(first.landmark())) {
      continue;
    }
    if (!values.contains(first.robot())) {
      values.insert(first.landmark(), first.measurements().front());
      continue;
    }
    const Pose3& camera = values.at(first.robot());
    std::size_t best = 0;
    double best_cost = HUGE_VAL;
    for (std::size_t j = 0; j < first.size(); ++j) {
      const Pose3 candidate = compose(camera, first.measurements()[j]);
      double cost = first.offset(j);
      for (std::size_t k = i + 1; k < step.observations.size(); ++k) {
        const auto& other = step.observations[k];
        if (other.landmark() == first.landmark() && values.contains(other.robot())) {
          cost += mixture_cost(other, values.at(other.robot()), candidate);
        }
      }
      if (cost < best_cost) {
        best_cost = cost;
        best = j;
      }
    }
    values.insert(first.landmark(), compose(camera, first.measurements()[best]));
  }
}

// A jump must lower the cost by more than this, so that rounding never
// swaps between equally good modes.
constexpr double kReseedMargin = 1e-6;

using LandmarkFactors = std::map<VariableKey, std::vector<MaxMixtureFactor>>;

double landmark_cost(const std::vector<MaxMixtureFactor>& factors, const GraphValues& values, const Pose3& landmark) {
  double sum = 0.0;
  for (const auto& f : factors) {
    sum += mixture_cost(f, values.at(f.robot()), landmark);
  }
  return sum;
}

// Moves each landmark observed this step to the pose implied by one of this
// step's hypotheses when that lowers the cost of all its factors with the
// robots held fixed. Returns whether any landmark moved.
bool reseed_landmarks(const Timestep& step, const LandmarkFactors& by_landmark, GraphValues& values) {
  bool moved = false;
  std::set<VariableKey> done;
  for (const MaxMixtureFactor& obs : step.observations) {
    if (!done.insert(obs.landmark()).second) {
      continue;
    }
    const auto& factors = by_landmark.at(obs.landmark());
    double best_cost = landmark_cost(factors, values, values.at(obs.landmark()));
    std::optional<Pose3> best;
    for (const MaxMixtureFactor& source : step.observations) {
      if (source.landmark() != obs.landmark()) {
        continue;
      }
      const Pose3& camera = values.at(source.robot());
      for (const Pose3& z : source.measurements()) {
        const Pose3 candidate = compose(camera, z);
        const double cost = landmark_cost(factors, values, candidate);
        if (cost < best_cost - kReseedMargin) {
          best_cost = cost;
          best = candidate;
        }
      }
    }
    if (best) {
      values.at(obs.landmark()) = *best;
      moved = true;
    }
  }
  return moved;
}

}  // namespace

IncrementalResult incremental_solve(const IncrementalProblem& problem, const SolverConfig& config) {
  IncrementalResult result;
  GraphValues values;
  LandmarkFactors by_landmark;
  result.graph.add(PriorFactor{problem.anchor_key, problem.anchor, problem.anchor_information});
  values.insert(problem.anchor_key, problem.anchor);

  for (const Timestep& step : problem.steps) {
    for (const OdometryFactor& odo : step.odometry) {
      if (!values.contains(odo.to) && values.contains(odo.from)) {
        values.insert(odo.to, compose(values.at(odo.from), odo.measurement));
      } else if (!values.contains(odo.from) && values.contains(odo.to)) {
        values.insert(odo.from, compose(values.at(odo.to), inverse(odo.measurement)));
      } else if (!values.contains(odo.from)) {
        throw InvalidInput("odometry between undeclared " + to_string(odo.from) + " and " + to_string(odo.to));
      }
      result.graph.add(odo);
    }
    initialize_new_landmarks(step, values);
    for (const MaxMixtureFactor& obs : step.observations) {
      result.graph.add(obs);
      by_landmark[obs.landmark()].push_back(obs);
    }
    SolveResult solved = optimize(result.graph, values, config);
    values = std::move(solved.values);
    if (reseed_landmarks(step, by_landmark, values)) {
      solved = optimize(result.graph, values, config);
      values = std::move(solved.values);
    }
    result.per_step.push_back(values);
    result.stats.push_back(std::move(solved.stats));
  }
  return result;
}

}  // namespace mhslam
