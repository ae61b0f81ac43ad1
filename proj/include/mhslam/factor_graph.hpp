#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mhslam/pose3.hpp"

namespace mhslam {

enum class VariableKind : std::uint8_t { Robot, Landmark };

struct VariableKey {
  VariableKind kind = VariableKind::Robot;
  std::uint32_t index = 0;

  static VariableKey robot(std::uint32_t i) { return {VariableKind::Robot, i}; }
  static VariableKey landmark(std::uint32_t j) { return {VariableKind::Landmark, j}; }

  friend auto operator<=>(const VariableKey&, const VariableKey&) = default;
};

std::string to_string(const VariableKey& key);

/// Variable assignment. Iteration follows insertion order, which is also the
/// column order of the solver's normal equations.
class GraphValues {
 public:
  using Entry = std::pair<VariableKey, Pose3>;

  /// Throws InvalidInput if the key is already present.
  void insert(const VariableKey& key, const Pose3& pose);
  void insert_or_assign(const VariableKey& key, const Pose3& pose);

  bool contains(const VariableKey& key) const { return index_.contains(key); }
  /// Throws MissingVariable.
  const Pose3& at(const VariableKey& key) const;
  Pose3& at(const VariableKey& key);
  /// Position in insertion order. Throws MissingVariable.
  std::size_t position(const VariableKey& key) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Replaces the pose at a given insertion position.
  void set_at_position(std::size_t pos, const Pose3& pose) { entries_[pos].second = pose; }

  friend bool operator==(const GraphValues& a, const GraphValues& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<Entry> entries_;
  std::map<VariableKey, std::size_t> index_;
};

/// Symmetric positive-definite 6x6 information matrix in [rot | trans]
/// ordering together with its whitening factor W (W^T W = information).
class Information {
 public:
  /// Identity information.
  Information();
  /// Throws ValidationError if not symmetric within 1e-9 or not positive
  /// definite.
  explicit Information(const Matrix6& information);

  /// diag(1 / sigma^2) in [rot | trans] ordering.
  static Information from_sigmas(double sigma_rot, double sigma_trans);

  const Matrix6& matrix() const { return information_; }
  const Matrix6& whitener() const { return whitener_; }

  friend bool operator==(const Information& a, const Information& b) {
    return a.information_ == b.information_;
  }

 private:
  Matrix6 information_;
  Matrix6 whitener_;
};

struct PriorFactor {
  VariableKey key;
  Pose3 prior;
  Information information;

  friend bool operator==(const PriorFactor&, const PriorFactor&) = default;
};

/// Gaussian relative-pose constraint between two robot poses.
struct OdometryFactor {
  VariableKey from;
  VariableKey to;
  Pose3 measurement;
  Information information;

  friend bool operator==(const OdometryFactor&, const OdometryFactor&) = default;
};

/// Single-hypothesis Gaussian object observation (object in camera frame).
struct LandmarkFactor {
  VariableKey robot;
  VariableKey landmark;
  Pose3 measurement;
  Information information;

  friend bool operator==(const LandmarkFactor&, const LandmarkFactor&) = default;
};

/**
 * Object observation with N candidate measurements, each a Gaussian component
 * with shared information. At any estimate only the most likely weighted
 * component contributes: cost_j = 1/2 ||r_j||^2 - log(w_j / w_max).
 */
class MaxMixtureFactor {
 public:
  /// Uniform weights.
  MaxMixtureFactor(VariableKey robot, VariableKey landmark, std::vector<Pose3> measurements,
                   Information information);
  /// Weights must be nonnegative with positive sum; they are normalized to
  /// sum to one.
  MaxMixtureFactor(VariableKey robot, VariableKey landmark, std::vector<Pose3> measurements,
                   std::vector<double> weights, Information information);

  const VariableKey& robot() const { return robot_; }
  const VariableKey& landmark() const { return landmark_; }
  std::size_t size() const { return measurements_.size(); }
  const std::vector<Pose3>& measurements() const { return measurements_; }
  const std::vector<double>& weights() const { return weights_; }
  const Information& information() const { return information_; }
  bool uniform_weights() const;

  /// -log(w_j / w_max); zero for every component when weights are uniform.
  double offset(std::size_t j) const { return offsets_[j]; }

  friend bool operator==(const MaxMixtureFactor& a, const MaxMixtureFactor& b) {
    return a.robot_ == b.robot_ && a.landmark_ == b.landmark_ && a.measurements_ == b.measurements_ &&
           a.weights_ == b.weights_ && a.information_ == b.information_;
  }

 private:
  VariableKey robot_;
  VariableKey landmark_;
  std::vector<Pose3> measurements_;
  std::vector<double> weights_;
  std::vector<double> offsets_;
  Information information_;
};

using Factor = std::variant<PriorFactor, OdometryFactor, LandmarkFactor, MaxMixtureFactor>;

/// Factors in insertion order; that order fixes every floating-point
/// summation the solver performs.
class FactorGraph {
 public:
  void add(Factor factor) { factors_.push_back(std::move(factor)); }

  std::size_t size() const { return factors_.size(); }
  bool empty() const { return factors_.empty(); }
  const std::vector<Factor>& factors() const { return factors_; }
  const Factor& operator[](std::size_t i) const { return factors_[i]; }
  auto begin() const { return factors_.begin(); }
  auto end() const { return factors_.end(); }

  friend bool operator==(const FactorGraph&, const FactorGraph&) = default;

 private:
  std::vector<Factor> factors_;
};

/// Keys touched by a factor (one or two).
std::vector<VariableKey> factor_keys(const Factor& factor);

Twist residual_prior(const PriorFactor& f, const GraphValues& v);
Twist residual_odometry(const OdometryFactor& f, const GraphValues& v);
Twist residual_landmark(const LandmarkFactor& f, const GraphValues& v);

/// Whitened W log(z_j * h^-1) with h = relative_object_pose(robot, landmark).
Twist residual_component(const MaxMixtureFactor& f, std::size_t j, const GraphValues& v);

/// argmin_j 1/2 ||r_j||^2 - log w_j, lowest index on ties.
std::size_t select_component(const MaxMixtureFactor& f, const GraphValues& v);

struct ActiveResidual {
  std::size_t index = 0;
  Twist residual = Twist::Zero();
  double offset = 0.0;
};

ActiveResidual residual_active(const MaxMixtureFactor& f, const GraphValues& v);
ActiveResidual residual_active(const MaxMixtureFactor& f, const Pose3& robot, const Pose3& landmark);

/// Residual, Jacobian blocks (left perturbation exp(d) * x of each connected
/// variable, in factor_keys() order) and constant cost offset.
struct Linearization {
  std::array<VariableKey, 2> keys{};
  std::array<Matrix6, 2> jacobians{};
  std::size_t arity = 0;
  Twist residual = Twist::Zero();
  double offset = 0.0;
  /// Active component of a max-mixture factor.
  std::optional<std::size_t> component;
};

/// Analytic linearization. Max-mixture factors linearize their active
/// component at v.
Linearization linearize(const Factor& factor, const GraphValues& v);

/// Linearizes a fixed mixture component.
Linearization linearize_component(const MaxMixtureFactor& f, std::size_t j, const GraphValues& v);

/// Central finite differences of the whitened residual under left
/// perturbations. Mixture factors keep the component selected at v fixed.
Linearization linearize_numeric(const Factor& factor, const GraphValues& v, double step = 1e-6);

/// 1/2 ||r||^2 + offset of the active residual.
double factor_error(const Factor& factor, const GraphValues& v);

/// Sum of factor_error() in insertion order.
double total_error(const FactorGraph& graph, const GraphValues& v);

}  // namespace mhslam
