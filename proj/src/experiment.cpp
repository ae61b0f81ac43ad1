#include "mhslam/experiment.hpp"

#include <array>
#include <charconv>
#include <istream>
#include <sstream>

#include "mhslam/errors.hpp"

namespace mhslam {

namespace {

bool parse_u64(const std::string& token, std::uint64_t& out) {
  const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && end == token.data() + token.size();
}

Pose3 pose_from(const double* v) {
  return Pose3(UnitQuaternion(v[6], v[3], v[4], v[5]), Vector3(v[0], v[1], v[2]));
}

}  // namespace

SolverConfig experiment_solver_config() {
  SolverConfig config;
  config.convergence_tol_rel = 1e-6;
  return config;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  if (text.find(',') == std::string::npos) {
    std::uint64_t count = 0;
    if (!parse_u64(text, count) || count == 0) {
      throw InvalidInput("invalid seed count '" + text + "'");
    }
    for (std::uint64_t s = 1; s <= count; ++s) {
      seeds.push_back(s);
    }
    return seeds;
  }
  std::stringstream in(text);
  std::string token;
  while (std::getline(in, token, ',')) {
    std::uint64_t seed = 0;
    if (!parse_u64(token, seed)) {
      throw InvalidInput("invalid seed '" + token + "' in '" + text + "'");
    }
    seeds.push_back(seed);
  }
  return seeds;
}

std::vector<PosePair> read_pose_pairs(std::istream& in) {
  std::vector<PosePair> pairs;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    std::istringstream fields(line);
    std::array<double, 14> v{};
    std::size_t count = 0;
    std::string token;
    while (fields >> token) {
      if (count == v.size()) {
        throw ParseError(number, "expected 14 numbers");
      }
      const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v[count]);
      if (ec != std::errc() || end != token.data() + token.size()) {
        throw ParseError(number, "invalid number '" + token + "'");
      }
      ++count;
    }
    if (count == 0) {
      continue;
    }
    if (count != v.size()) {
      throw ParseError(number, "expected 14 numbers, got " + std::to_string(count));
    }
    try {
      pairs.push_back({pose_from(v.data()), pose_from(v.data() + 7)});
    } catch (const InvalidInput& e) {
      throw ParseError(number, e.what());
    }
  }
  return pairs;
}

}  // namespace mhslam
