#include "mhslam/factor_graph.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "mhslam/errors.hpp"

namespace mhslam {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Shared by odometry, landmark and mixture components: the prediction is
// a^-1 b, the residual W log(z (a^-1 b)^-1) = W log(z (b^-1 a)).
struct BetweenTerms {
  Twist residual;
  Matrix6 jacobian_a;
  Matrix6 jacobian_b;
};

Pose3 inverse_prediction(const Pose3& a, const Pose3& b) { return compose(inverse(b), a); }

Twist between_residual(const Matrix6& whitener, const Pose3& z, const Pose3& inv_prediction) {
  return whitener * log(compose(z, inv_prediction));
}

Twist between_residual(const Matrix6& whitener, const Pose3& z, const Pose3& a, const Pose3& b) {
  return between_residual(whitener, z, inverse_prediction(a, b));
}

BetweenTerms between_linearize(const Matrix6& whitener, const Pose3& z, const Pose3& a, const Pose3& b) {
  const Twist e = log(compose(z, inverse_prediction(a, b)));
  // z b^-1 exp(d) a = E exp(Ad(a^-1) d);  z b^-1 exp(-d) a = E exp(-Ad(a^-1) d)
  const Matrix6 j = whitener * se3::right_jacobian_inverse(e) * se3::adjoint(inverse(a));
  return {whitener * e, j, -j};
}

Linearization make_between_linearization(const VariableKey& ka, const VariableKey& kb,
                                         const BetweenTerms& terms) {
  Linearization lin;
  lin.keys = {ka, kb};
  lin.jacobians = {terms.jacobian_a, terms.jacobian_b};
  lin.arity = 2;
  lin.residual = terms.residual;
  return lin;
}

void require_distinct(const VariableKey& a, const VariableKey& b) {
  if (a == b) {
    throw InvalidInput("factor connects " + to_string(a) + " to itself");
  }
}

}  // namespace

std::string to_string(const VariableKey& key) {
  return (key.kind == VariableKind::Robot ? "robot " : "landmark ") + std::to_string(key.index);
}

void GraphValues::insert(const VariableKey& key, const Pose3& pose) {
  if (contains(key)) {
    throw InvalidInput("duplicate variable " + to_string(key));
  }
  index_.emplace(key, entries_.size());
  entries_.emplace_back(key, pose);
}

void GraphValues::insert_or_assign(const VariableKey& key, const Pose3& pose) {
  if (auto it = index_.find(key); it != index_.end()) {
    entries_[it->second].second = pose;
  } else {
    insert(key, pose);
  }
}

std::size_t GraphValues::position(const VariableKey& key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) {
    throw MissingVariable("missing variable " + to_string(key));
  }
  return it->second;
}

const Pose3& GraphValues::at(const VariableKey& key) const { return entries_[position(key)].second; }

Pose3& GraphValues::at(const VariableKey& key) { return entries_[position(key)].second; }

Information::Information()
    : information_(Matrix6::Identity()), whitener_(Matrix6::Identity()) {}

Information::Information(const Matrix6& information) : information_(information) {
  if (!information.allFinite()) {
    throw ValidationError("information matrix has non-finite entries");
  }
  const double scale = std::max(1.0, information.cwiseAbs().maxCoeff());
  if ((information - information.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw ValidationError("information matrix is not symmetric");
  }
  const Eigen::LLT<Matrix6> llt(information);
  if (llt.info() != Eigen::Success) {
    throw ValidationError("information matrix is not positive definite");
  }
  const Matrix6 lower = llt.matrixL();
  if ((lower.diagonal().array() <= 0.0).any()) {
    throw ValidationError("information matrix is not positive definite");
  }
  whitener_ = lower.transpose();
}

Information Information::from_sigmas(double sigma_rot, double sigma_trans) {
  if (!(sigma_rot > 0.0) || !(sigma_trans > 0.0)) {
    throw ValidationError("noise sigmas must be positive");
  }
  Twist diag;
  diag << Vector3::Constant(1.0 / (sigma_rot * sigma_rot)),
      Vector3::Constant(1.0 / (sigma_trans * sigma_trans));
  return Information(Matrix6(diag.asDiagonal()));
}

MaxMixtureFactor::MaxMixtureFactor(VariableKey robot, VariableKey landmark, std::vector<Pose3> measurements,
                                   Information information)
    : MaxMixtureFactor(robot, landmark, std::move(measurements), {}, std::move(information)) {}

MaxMixtureFactor::MaxMixtureFactor(VariableKey robot, VariableKey landmark, std::vector<Pose3> measurements,
                                   std::vector<double> weights, Information information)
    : robot_(robot),
      landmark_(landmark),
      measurements_(std::move(measurements)),
      weights_(std::move(weights)),
      information_(std::move(information)) {
  if (measurements_.empty()) {
    throw InvalidInput("max-mixture factor needs at least one component");
  }
  require_distinct(robot_, landmark_);
  if (weights_.empty()) {
    weights_.assign(measurements_.size(), 1.0 / static_cast<double>(measurements_.size()));
  }
  if (weights_.size() != measurements_.size()) {
    throw InvalidInput("max-mixture weight count does not match component count");
  }
  double sum = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InvalidInput("max-mixture weights must be finite and nonnegative");
    }
    sum += w;
  }
  if (!(sum > 0.0)) {
    throw InvalidInput("max-mixture weights sum to zero");
  }
  for (double& w : weights_) {
    w /= sum;
  }
  const double w_max = *std::max_element(weights_.begin(), weights_.end());
  offsets_.reserve(weights_.size());
  for (double w : weights_) {
    // A zero weight can never win the max.
    offsets_.push_back(w == w_max ? 0.0 : (w > 0.0 ? std::log(w_max) - std::log(w) : HUGE_VAL));
  }
}

bool MaxMixtureFactor::uniform_weights() const {
  return std::all_of(offsets_.begin(), offsets_.end(), [](double o) { return o == 0.0; });
}

std::vector<VariableKey> factor_keys(const Factor& factor) {
  return std::visit(Overloaded{
                        [](const PriorFactor& f) { return std::vector<VariableKey>{f.key}; },
                        [](const OdometryFactor& f) { return std::vector<VariableKey>{f.from, f.to}; },
                        [](const LandmarkFactor& f) { return std::vector<VariableKey>{f.robot, f.landmark}; },
                        [](const MaxMixtureFactor& f) { return std::vector<VariableKey>{f.robot(), f.landmark()}; },
                    },
                    factor);
}

Twist residual_prior(const PriorFactor& f, const GraphValues& v) {
  return f.information.whitener() * log(compose(f.prior, inverse(v.at(f.key))));
}

Twist residual_odometry(const OdometryFactor& f, const GraphValues& v) {
  return between_residual(f.information.whitener(), f.measurement, v.at(f.from), v.at(f.to));
}

Twist residual_landmark(const LandmarkFactor& f, const GraphValues& v) {
  return between_residual(f.information.whitener(), f.measurement, v.at(f.robot), v.at(f.landmark));
}

Twist residual_component(const MaxMixtureFactor& f, std::size_t j, const GraphValues& v) {
  if (j >= f.size()) {
    throw InvalidInput("mixture component index out of range");
  }
  return between_residual(f.information().whitener(), f.measurements()[j], v.at(f.robot()),
                          v.at(f.landmark()));
}

ActiveResidual residual_active(const MaxMixtureFactor& f, const GraphValues& v) {
  return residual_active(f, v.at(f.robot()), v.at(f.landmark()));
}

ActiveResidual residual_active(const MaxMixtureFactor& f, const Pose3& robot, const Pose3& landmark) {
  const Pose3 inv_prediction = inverse_prediction(robot, landmark);
  ActiveResidual best;
  double best_cost = HUGE_VAL;
  for (std::size_t j = 0; j < f.size(); ++j) {
    const Twist r = between_residual(f.information().whitener(), f.measurements()[j], inv_prediction);
    const double cost = 0.5 * r.squaredNorm() + f.offset(j);
    if (j == 0 || cost < best_cost) {
      best = {j, r, f.offset(j)};
      best_cost = cost;
    }
  }
  return best;
}

std::size_t select_component(const MaxMixtureFactor& f, const GraphValues& v) {
  return residual_active(f, v).index;
}

Linearization linearize_component(const MaxMixtureFactor& f, std::size_t j, const GraphValues& v) {
  if (j >= f.size()) {
    throw InvalidInput("mixture component index out of range");
  }
  Linearization lin = make_between_linearization(
      f.robot(), f.landmark(),
      between_linearize(f.information().whitener(), f.measurements()[j], v.at(f.robot()), v.at(f.landmark())));
  lin.offset = f.offset(j);
  lin.component = j;
  return lin;
}

Linearization linearize(const Factor& factor, const GraphValues& v) {
  return std::visit(
      Overloaded{
          [&](const PriorFactor& f) {
            const Twist e = log(compose(f.prior, inverse(v.at(f.key))));
            Linearization lin;
            lin.keys[0] = f.key;
            lin.arity = 1;
            lin.residual = f.information.whitener() * e;
            // prior x0^-1 exp(-d) = E exp(-d)
            lin.jacobians[0] = -f.information.whitener() * se3::right_jacobian_inverse(e);
            return lin;
          },
          [&](const OdometryFactor& f) {
            return make_between_linearization(
                f.from, f.to,
                between_linearize(f.information.whitener(), f.measurement, v.at(f.from), v.at(f.to)));
          },
          [&](const LandmarkFactor& f) {
            return make_between_linearization(
                f.robot, f.landmark,
                between_linearize(f.information.whitener(), f.measurement, v.at(f.robot), v.at(f.landmark)));
          },
          [&](const MaxMixtureFactor& f) { return linearize_component(f, select_component(f, v), v); },
      },
      factor);
}

Linearization linearize_numeric(const Factor& factor, const GraphValues& v, double step) {
  std::optional<std::size_t> component;
  if (const auto* mm = std::get_if<MaxMixtureFactor>(&factor)) {
    component = select_component(*mm, v);
  }
  const auto residual_at = [&](const GraphValues& values) -> Twist {
    return std::visit(Overloaded{
                          [&](const PriorFactor& f) { return residual_prior(f, values); },
                          [&](const OdometryFactor& f) { return residual_odometry(f, values); },
                          [&](const LandmarkFactor& f) { return residual_landmark(f, values); },
                          [&](const MaxMixtureFactor& f) { return residual_component(f, *component, values); },
                      },
                      factor);
  };

  Linearization lin;
  const auto keys = factor_keys(factor);
  lin.arity = keys.size();
  lin.residual = residual_at(v);
  lin.component = component;
  if (component) {
    lin.offset = std::get<MaxMixtureFactor>(factor).offset(*component);
  }
  for (std::size_t k = 0; k < keys.size(); ++k) {
    lin.keys[k] = keys[k];
    GraphValues perturbed = v;
    const Pose3 base = v.at(keys[k]);
    for (int d = 0; d < 6; ++d) {
      Twist delta = Twist::Zero();
      delta(d) = step;
      perturbed.at(keys[k]) = compose(exp(delta), base);
      const Twist plus = residual_at(perturbed);
      perturbed.at(keys[k]) = compose(exp(-delta), base);
      const Twist minus = residual_at(perturbed);
      lin.jacobians[k].col(d) = (plus - minus) / (2.0 * step);
    }
  }
  return lin;
}

double factor_error(const Factor& factor, const GraphValues& v) {
  return std::visit(Overloaded{
                        [&](const PriorFactor& f) { return 0.5 * residual_prior(f, v).squaredNorm(); },
                        [&](const OdometryFactor& f) { return 0.5 * residual_odometry(f, v).squaredNorm(); },
                        [&](const LandmarkFactor& f) { return 0.5 * residual_landmark(f, v).squaredNorm(); },
                        [&](const MaxMixtureFactor& f) {
                          const ActiveResidual a = residual_active(f, v);
                          return 0.5 * a.residual.squaredNorm() + a.offset;
                        },
                    },
                    factor);
}

double total_error(const FactorGraph& graph, const GraphValues& v) {
  double sum = 0.0;
  for (const auto& f : graph) {
    sum += factor_error(f, v);
  }
  return sum;
}

}  // namespace mhslam
