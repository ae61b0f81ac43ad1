#include "mhslam/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>

#include "mhslam/errors.hpp"

namespace mhslam {

namespace {

constexpr std::string_view kVertexTag = "VERTEX_SE3:QUAT";
constexpr std::string_view kEdgeTag = "EDGE_SE3:QUAT";
constexpr std::string_view kMixtureTag = "MM_EDGE_SE3:QUAT";
constexpr std::string_view kStepTag = "STEP";
constexpr double kAnchorInformation = 1e6;

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
      ++i;
    }
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') {
      ++i;
    }
    if (i > start) {
      tokens.push_back(line.substr(start, i - start));
    }
  }
  return tokens;
}

std::string_view strip_comment(std::string_view line) {
  const auto hash = line.find('#');
  return hash == std::string_view::npos ? line : line.substr(0, hash);
}

// Cursor over one record's tokens; every failure is reported against the
// record's line.
class Record {
 public:
  Record(std::size_t line, std::vector<std::string_view> tokens) : line_(line), tokens_(std::move(tokens)) {}

  std::size_t line() const { return line_; }

  double number() {
    const std::string_view t = next("number");
    double v = 0.0;
    const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || end != t.data() + t.size()) {
      fail("invalid number '" + std::string(t) + "'");
    }
    return v;
  }

  std::uint64_t id() {
    const std::string_view t = next("id");
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || end != t.data() + t.size()) {
      fail("invalid id '" + std::string(t) + "'");
    }
    return v;
  }

  Pose3 pose() {
    const double tx = number();
    const double ty = number();
    const double tz = number();
    const double qx = number();
    const double qy = number();
    const double qz = number();
    const double qw = number();
    try {
      return Pose3(UnitQuaternion(qw, qx, qy, qz), Vector3(tx, ty, tz));
    } catch (const InvalidInput& e) {
      fail(e.what());
    }
  }

  Information information() {
    Matrix6 m;
    for (int r = 0; r < 6; ++r) {
      for (int c = r; c < 6; ++c) {
        m(r, c) = number();
        m(c, r) = m(r, c);
      }
    }
    try {
      return Information(m);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_) + ": " + e.what());
    }
  }

  void finish() const {
    if (pos_ != tokens_.size()) {
      fail("unexpected trailing token '" + std::string(tokens_[pos_]) + "'");
    }
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(line_, what); }

 private:
  std::string_view next(const char* what) {
    if (pos_ >= tokens_.size()) {
      fail(std::string("missing ") + what);
    }
    return tokens_[pos_++];
  }

  std::size_t line_;
  std::vector<std::string_view> tokens_;
  std::size_t pos_ = 1;
};

VariableKey robot_key(Record& rec) {
  const std::uint64_t id = rec.id();
  if (id >= kLandmarkIdOffset) {
    rec.fail("expected a robot id, got " + std::to_string(id));
  }
  return VariableKey::robot(static_cast<std::uint32_t>(id));
}

VariableKey landmark_key(Record& rec) {
  const std::uint64_t id = rec.id();
  if (id < kLandmarkIdOffset) {
    rec.fail("expected a landmark id, got " + std::to_string(id));
  }
  return key_from_file_id(id);
}

void append_pose(std::string& out, const Pose3& p) {
  const Vector3& t = p.translation();
  const UnitQuaternion& q = p.rotation();
  for (double v : {t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w()}) {
    out += ' ';
    out += format_double(v);
  }
}

void append_information(std::string& out, const Information& info) {
  for (int r = 0; r < 6; ++r) {
    for (int c = r; c < 6; ++c) {
      out += ' ';
      out += format_double(info.matrix()(r, c));
    }
  }
}

void append_vertex(std::string& out, const VariableKey& key, const Pose3& pose) {
  out += kVertexTag;
  out += ' ';
  out += std::to_string(file_id(key));
  append_pose(out, pose);
  out += '\n';
}

}  // namespace

bool operator==(const Dataset& a, const Dataset& b) { return a.values == b.values && a.graph == b.graph; }

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint32_t file_id(const VariableKey& key) {
  if (key.kind == VariableKind::Robot) {
    if (key.index >= kLandmarkIdOffset) {
      throw InvalidInput("robot index " + std::to_string(key.index) + " collides with landmark ids");
    }
    return key.index;
  }
  return kLandmarkIdOffset + key.index;
}

VariableKey key_from_file_id(std::uint64_t id) {
  if (id > std::uint64_t{UINT32_MAX}) {
    throw InvalidInput("id " + std::to_string(id) + " out of range");
  }
  if (id < kLandmarkIdOffset) {
    return VariableKey::robot(static_cast<std::uint32_t>(id));
  }
  return VariableKey::landmark(static_cast<std::uint32_t>(id - kLandmarkIdOffset));
}

Dataset parse_dataset(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    auto tokens = split(strip_comment(line));
    if (tokens.empty()) {
      continue;
    }
    const std::string_view tag = tokens.front();
    Record rec(number, std::move(tokens));
    if (tag == kVertexTag) {
      const std::uint64_t id = rec.id();
      VariableKey key;
      try {
        key = key_from_file_id(id);
      } catch (const InvalidInput& e) {
        rec.fail(e.what());
      }
      const Pose3 pose = rec.pose();
      rec.finish();
      if (ds.values.contains(key)) {
        rec.fail("duplicate vertex " + std::to_string(id));
      }
      ds.values.insert(key, pose);
    } else if (tag == kEdgeTag) {
      const VariableKey from = robot_key(rec);
      const VariableKey to = robot_key(rec);
      if (from == to) {
        rec.fail("edge connects a pose to itself");
      }
      const Pose3 z = rec.pose();
      Information info = rec.information();
      rec.finish();
      ds.graph.add(OdometryFactor{from, to, z, std::move(info)});
    } else if (tag == kMixtureTag) {
      const VariableKey robot = robot_key(rec);
      const VariableKey landmark = landmark_key(rec);
      const std::uint64_t n = rec.id();
      if (n == 0) {
        rec.fail("mixture edge needs at least one hypothesis");
      }
      std::vector<Pose3> measurements;
      for (std::uint64_t j = 0; j < n; ++j) {
        measurements.push_back(rec.pose());
      }
      Information info = rec.information();
      rec.finish();
      ds.graph.add(MaxMixtureFactor(robot, landmark, std::move(measurements), std::move(info)));
    } else {
      rec.fail("unknown record '" + std::string(tag) + "'");
    }
  }
  return ds;
}

Dataset parse_dataset(const std::string& text) {
  std::istringstream in(text);
  return parse_dataset(in);
}

std::string serialize_dataset(const FactorGraph& graph, const GraphValues& values) {
  std::string out;
  for (const auto& [key, pose] : values) {
    append_vertex(out, key, pose);
  }
  for (const Factor& factor : graph) {
    if (const auto* odo = std::get_if<OdometryFactor>(&factor)) {
      if (odo->from.kind != VariableKind::Robot || odo->to.kind != VariableKind::Robot) {
        throw InvalidInput("odometry edges must connect robot poses");
      }
      out += kEdgeTag;
      out += ' ' + std::to_string(file_id(odo->from)) + ' ' + std::to_string(file_id(odo->to));
      append_pose(out, odo->measurement);
      append_information(out, odo->information);
    } else if (const auto* mm = std::get_if<MaxMixtureFactor>(&factor)) {
      if (!mm->uniform_weights()) {
        throw InvalidInput("the dataset format only carries uniform mixture weights");
      }
      if (mm->robot().kind != VariableKind::Robot || mm->landmark().kind != VariableKind::Landmark) {
        throw InvalidInput("mixture edges must connect a robot pose to a landmark");
      }
      out += kMixtureTag;
      out += ' ' + std::to_string(file_id(mm->robot())) + ' ' + std::to_string(file_id(mm->landmark())) + ' ' +
             std::to_string(mm->size());
      for (const Pose3& z : mm->measurements()) {
        append_pose(out, z);
      }
      append_information(out, mm->information());
    } else {
      throw InvalidInput("the dataset format has no record for prior or single landmark factors");
    }
    out += '\n';
  }
  return out;
}

Dataset dataset_from_simulation(const SimOutput& sim) {
  Dataset ds;
  Pose3 dead_reckoned = sim.trajectory.front();
  ds.values.insert(VariableKey::robot(0), dead_reckoned);
  for (const OdometryFactor& odo : sim.odometry) {
    dead_reckoned = compose(dead_reckoned, odo.measurement);
    ds.values.insert(odo.to, dead_reckoned);
  }
  for (std::size_t k = 0; k < sim.trajectory.size(); ++k) {
    if (k > 0) {
      ds.graph.add(sim.odometry[k - 1]);
    }
    for (const SimObservation& obs : sim.observations[k]) {
      ds.graph.add(MaxMixtureFactor(VariableKey::robot(static_cast<std::uint32_t>(k)),
                                    VariableKey::landmark(obs.landmark_id), obs.hypotheses.hypotheses(),
                                    obs.hypotheses.weights(), sim.measurement_information));
    }
  }
  return ds;
}

GraphValues groundtruth_values(const SimOutput& sim) {
  GraphValues gt;
  for (std::size_t k = 0; k < sim.trajectory.size(); ++k) {
    gt.insert(VariableKey::robot(static_cast<std::uint32_t>(k)), sim.trajectory[k]);
  }
  for (const SimObject& object : sim.objects) {
    gt.insert(VariableKey::landmark(object.id), object.pose_in_world);
  }
  return gt;
}

Information anchor_information() { return Information(Matrix6::Identity() * kAnchorInformation); }

IncrementalProblem make_incremental_problem(const Dataset& dataset) {
  const VariableKey first = VariableKey::robot(0);
  if (!dataset.values.contains(first)) {
    throw InvalidInput("dataset has no vertex for robot 0");
  }
  std::uint32_t robots = 1;
  for (const auto& [key, pose] : dataset.values) {
    if (key.kind == VariableKind::Robot) {
      robots = std::max(robots, key.index + 1);
    }
  }
  for (const Factor& factor : dataset.graph) {
    for (const VariableKey& key : factor_keys(factor)) {
      if (key.kind == VariableKind::Robot) {
        robots = std::max(robots, key.index + 1);
      }
    }
  }

  IncrementalProblem problem;
  problem.anchor_key = first;
  problem.anchor = dataset.values.at(first);
  problem.anchor_information = anchor_information();
  problem.steps.resize(robots);
  std::vector<bool> reached(robots, false);
  reached[0] = true;
  for (const Factor& factor : dataset.graph) {
    if (const auto* odo = std::get_if<OdometryFactor>(&factor)) {
      const std::uint32_t step = std::max(odo->from.index, odo->to.index);
      problem.steps[step].odometry.push_back(*odo);
      reached[step] = true;
    } else if (const auto* mm = std::get_if<MaxMixtureFactor>(&factor)) {
      problem.steps[mm->robot().index].observations.push_back(*mm);
    } else {
      throw InvalidInput("only odometry and mixture edges can be replayed incrementally");
    }
  }
  for (std::uint32_t k = 0; k < robots; ++k) {
    if (!reached[k]) {
      throw InvalidInput("robot " + std::to_string(k) + " has no odometry edge from an earlier pose");
    }
  }
  return problem;
}

void write_estimates(std::ostream& out, const std::vector<GraphValues>& per_step) {
  std::string buf;
  for (std::size_t k = 0; k < per_step.size(); ++k) {
    buf.clear();
    buf += kStepTag;
    buf += ' ' + std::to_string(k) + '\n';
    const bool last = k + 1 == per_step.size();
    const VariableKey robot = VariableKey::robot(static_cast<std::uint32_t>(k));
    for (const auto& [key, pose] : per_step[k]) {
      if (last || key.kind == VariableKind::Landmark || key == robot) {
        append_vertex(buf, key, pose);
      }
    }
    out << buf;
  }
}

std::vector<GraphValues> read_estimates(std::istream& in) {
  std::vector<GraphValues> per_step;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    auto tokens = split(strip_comment(line));
    if (tokens.empty()) {
      continue;
    }
    const std::string_view tag = tokens.front();
    Record rec(number, std::move(tokens));
    if (tag == kStepTag) {
      const std::uint64_t k = rec.id();
      rec.finish();
      if (k != per_step.size()) {
        rec.fail("expected STEP " + std::to_string(per_step.size()));
      }
      per_step.emplace_back();
    } else if (tag == kVertexTag) {
      if (per_step.empty()) {
        rec.fail("vertex before the first STEP");
      }
      const VariableKey key = key_from_file_id(rec.id());
      const Pose3 pose = rec.pose();
      rec.finish();
      if (per_step.back().contains(key)) {
        rec.fail("duplicate vertex in step");
      }
      per_step.back().insert(key, pose);
    } else {
      rec.fail("unknown record '" + std::string(tag) + "'");
    }
  }
  return per_step;
}

}  // namespace mhslam
