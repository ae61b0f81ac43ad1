#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "mhslam/dataset_io.hpp"
#include "mhslam/errors.hpp"
#include "test_support.hpp"

using namespace mhslam;
using namespace mhslam::testing;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::string kInfo = " 1 0 0 0 0 0 1 0 0 0 0 1 0 0 0 1 0 0 1 0 1";
const std::string kPose = " 0 0 0 0 0 0 1";

// Random dataset: a chain of robots with odometry, landmarks with mixture
// edges of random size, random SPD information everywhere.
Dataset random_dataset(Gen& gen) {
  Dataset d;
  const int robots = gen.integer(1, 12);
  const int landmarks = gen.integer(0, 4);
  for (int i = 0; i < robots; ++i) {
    d.values.insert(VariableKey::robot(static_cast<std::uint32_t>(i)), gen.pose(10.0));
  }
  for (int j = 0; j < landmarks; ++j) {
    if (gen.integer(0, 1) == 1) {
      d.values.insert(VariableKey::landmark(static_cast<std::uint32_t>(j)), gen.pose(10.0));
    }
  }
  for (int i = 1; i < robots; ++i) {
    d.graph.add(OdometryFactor{VariableKey::robot(static_cast<std::uint32_t>(i - 1)),
                               VariableKey::robot(static_cast<std::uint32_t>(i)), gen.pose(1.0),
                               Information(gen.spd())});
    if (landmarks > 0) {
      std::vector<Pose3> zs;
      const int n = gen.integer(1, 6);
      for (int k = 0; k < n; ++k) {
        zs.push_back(gen.pose(3.0));
      }
      d.graph.add(MaxMixtureFactor(VariableKey::robot(static_cast<std::uint32_t>(i)),
                                   VariableKey::landmark(static_cast<std::uint32_t>(gen.integer(0, landmarks - 1))),
                                   zs, Information(gen.spd())));
    }
  }
  return d;
}

std::size_t parse_error_line(const std::string& text) {
  try {
    parse_dataset(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(Parse, EmptyAndSingleVertex) {
  const Dataset empty = parse_dataset(std::string("# nothing\n\n"));
  EXPECT_TRUE(empty.graph.empty());
  EXPECT_TRUE(empty.values.empty());

  const Dataset one = parse_dataset(std::string("VERTEX_SE3:QUAT 4 1 2 3 0 0 0 1\n"));
  EXPECT_TRUE(one.graph.empty());
  ASSERT_EQ(one.values.size(), 1u);
  EXPECT_EQ(one.values.at(VariableKey::robot(4)), Pose3(Vector3(1, 2, 3)));
}

TEST(Parse, GoldenMixtureEdge) {
  const Dataset d = parse_dataset(read_file(MHSLAM_TEST_DATA "/mm_edge_n3.txt"));
  ASSERT_EQ(d.values.size(), 1u);
  EXPECT_EQ(d.values.at(VariableKey::robot(0)), Pose3(Vector3(1, 2, 3)));
  ASSERT_EQ(d.graph.size(), 1u);
  const auto& f = std::get<MaxMixtureFactor>(d.graph[0]);
  EXPECT_EQ(f.robot(), VariableKey::robot(0));
  EXPECT_EQ(f.landmark(), VariableKey::landmark(7));
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f.measurements()[0], Pose3(UnitQuaternion(1, 0, 0, 0), Vector3(0.5, 0, 2)));
  EXPECT_EQ(f.measurements()[1], Pose3(UnitQuaternion(0, 0, 0, 1), Vector3(0.5, 0, 2)));
  const Pose3 third = f.measurements()[2];
  EXPECT_EQ(third.translation(), Vector3(-1, 0.25, 3));
  EXPECT_NEAR(third.rotation().w(), 0.8, 1e-15);
  EXPECT_NEAR(third.rotation().x(), 0.6, 1e-15);
  EXPECT_EQ(third.rotation().y(), 0.0);
  EXPECT_EQ(third.rotation().z(), 0.0);
  for (double w : f.weights()) {
    EXPECT_DOUBLE_EQ(w, 1.0 / 3.0);
  }
  Matrix6 expected = Matrix6::Zero();
  expected.diagonal() << 400, 400, 400, 2500, 2500, 2500;
  EXPECT_EQ(f.information().matrix(), expected);
}

TEST(Parse, InformationUpperTriangleIsRowMajor) {
  // Entry (0,1) = 0.1 and (2,5) = 0.2 land symmetrically.
  const std::string info = " 1 0.1 0 0 0 0 1 0 0 0 0 1 0 0 0.2 1 0 0 1 0 1";
  const Dataset d = parse_dataset("EDGE_SE3:QUAT 0 1" + kPose + info + "\n");
  const auto& f = std::get<OdometryFactor>(d.graph[0]);
  EXPECT_EQ(f.information.matrix()(0, 1), 0.1);
  EXPECT_EQ(f.information.matrix()(1, 0), 0.1);
  EXPECT_EQ(f.information.matrix()(2, 5), 0.2);
  EXPECT_EQ(f.information.matrix()(5, 2), 0.2);
}

TEST(Parse, ErrorsCarryLineNumbers) {
  EXPECT_EQ(parse_error_line("\nBOGUS 1 2\n"), 2u);
  EXPECT_EQ(parse_error_line("VERTEX_SE3:QUAT 0 1 2 3\n"), 1u);
  EXPECT_EQ(parse_error_line("VERTEX_SE3:QUAT 0 1 2 3 0 0 0 1 9\n"), 1u);
  EXPECT_EQ(parse_error_line("VERTEX_SE3:QUAT 0 1 2 x 0 0 0 1\n"), 1u);
  EXPECT_EQ(parse_error_line("VERTEX_SE3:QUAT 0" + kPose + "\nVERTEX_SE3:QUAT 0" + kPose + "\n"), 2u);
  EXPECT_EQ(parse_error_line("# c\n# c\nEDGE_SE3:QUAT 0 100000" + kPose + kInfo + "\n"), 3u);
  EXPECT_EQ(parse_error_line("MM_EDGE_SE3:QUAT 0 5 1" + kPose + kInfo + "\n"), 1u);
  EXPECT_EQ(parse_error_line("MM_EDGE_SE3:QUAT 0 100000 0" + kInfo + "\n"), 1u);
  EXPECT_EQ(parse_error_line("MM_EDGE_SE3:QUAT 0 100000 2" + kPose + kInfo + "\n"), 1u);
  EXPECT_EQ(parse_error_line("VERTEX_SE3:QUAT 0 1 2 3 0 0 0 0\n"), 1u);

  try {
    parse_dataset(std::string("\n\nFOO\n"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("line 3:", 0), 0u);
  }
}

TEST(Parse, NonSpdInformationIsValidationError) {
  const std::string negative = " -1 0 0 0 0 0 1 0 0 0 0 1 0 0 0 1 0 0 1 0 1";
  EXPECT_THROW(parse_dataset("EDGE_SE3:QUAT 0 1" + kPose + negative + "\n"), ValidationError);
  EXPECT_THROW(parse_dataset("MM_EDGE_SE3:QUAT 0 100000 1" + kPose + negative + "\n"), ValidationError);
}

TEST(Serialize, RejectsInexpressibleFactors) {
  FactorGraph g;
  g.add(PriorFactor{VariableKey::robot(0), Pose3(), Information()});
  EXPECT_THROW(serialize_dataset(g, GraphValues{}), InvalidInput);
  FactorGraph w;
  w.add(MaxMixtureFactor(VariableKey::robot(0), VariableKey::landmark(0), {Pose3(), Pose3()}, {0.7, 0.3},
                         Information()));
  EXPECT_THROW(serialize_dataset(w, GraphValues{}), InvalidInput);
}

TEST(RoundTrip, HundredRandomDatasetsAreFixedPoints) {
  Gen gen(1);
  for (int i = 0; i < 100; ++i) {
    const Dataset d = random_dataset(gen);
    const std::string text = serialize_dataset(d.graph, d.values);
    const Dataset back = parse_dataset(text);
    ASSERT_EQ(serialize_dataset(back.graph, back.values), text);
    ASSERT_EQ(back.graph.size(), d.graph.size());
    ASSERT_EQ(back.values.size(), d.values.size());
    for (std::size_t k = 0; k < d.values.size(); ++k) {
      ASSERT_EQ(back.values.entries()[k].first, d.values.entries()[k].first);
      ASSERT_LT(pose_distance(back.values.entries()[k].second, d.values.entries()[k].second), 1e-12);
    }
  }
}

TEST(RoundTrip, GoldenFileIsFixedPoint) {
  const Dataset d = parse_dataset(read_file(MHSLAM_TEST_DATA "/mm_edge_n3.txt"));
  const std::string text = serialize_dataset(d.graph, d.values);
  EXPECT_EQ(parse_dataset(text), d);
}

TEST(Ids, LandmarkOffset) {
  EXPECT_EQ(file_id(VariableKey::robot(12)), 12u);
  EXPECT_EQ(file_id(VariableKey::landmark(3)), 100003u);
  EXPECT_EQ(key_from_file_id(100003), VariableKey::landmark(3));
  EXPECT_EQ(key_from_file_id(5), VariableKey::robot(5));
}

TEST(Simulation, DatasetAndGroundTruth) {
  SimConfig c;
  c.frame_count = 30;
  c.inner_frame_count = 30;
  const SimOutput sim = run_simulation(c);
  const Dataset d = dataset_from_simulation(sim);
  EXPECT_EQ(d.values.size(), 30u);
  std::size_t edges = 0;
  for (const Factor& f : d.graph) {
    edges += std::holds_alternative<MaxMixtureFactor>(f) ? 1 : 0;
  }
  std::size_t observations = 0;
  for (const auto& frame : sim.observations) {
    observations += frame.size();
  }
  EXPECT_EQ(edges, observations);
  EXPECT_EQ(parse_dataset(serialize_dataset(d.graph, d.values)), d);
  // Dead reckoning: robot 1 is robot 0 composed with the first odometry.
  EXPECT_LT(pose_distance(d.values.at(VariableKey::robot(1)),
                          compose(d.values.at(VariableKey::robot(0)), sim.odometry[0].measurement)),
            1e-12);

  const GraphValues gt = groundtruth_values(sim);
  EXPECT_EQ(gt.size(), 35u);
  EXPECT_EQ(gt.at(VariableKey::landmark(2)), sim.objects[2].pose_in_world);
}

TEST(IncrementalProblem, StepsFollowRobots) {
  SimConfig c;
  c.frame_count = 12;
  c.inner_frame_count = 12;
  c.max_step = 2.0;
  const Dataset d = dataset_from_simulation(run_simulation(c));
  const IncrementalProblem p = make_incremental_problem(d);
  ASSERT_EQ(p.steps.size(), 12u);
  EXPECT_TRUE(p.steps[0].odometry.empty());
  EXPECT_EQ(p.anchor, d.values.at(VariableKey::robot(0)));
  for (std::size_t k = 1; k < p.steps.size(); ++k) {
    ASSERT_EQ(p.steps[k].odometry.size(), 1u);
    EXPECT_EQ(p.steps[k].odometry[0].to, VariableKey::robot(static_cast<std::uint32_t>(k)));
    for (const MaxMixtureFactor& m : p.steps[k].observations) {
      EXPECT_EQ(m.robot(), VariableKey::robot(static_cast<std::uint32_t>(k)));
    }
  }
  Dataset gap;
  gap.values.insert(VariableKey::robot(0), Pose3());
  gap.graph.add(OdometryFactor{VariableKey::robot(0), VariableKey::robot(2), Pose3(), Information()});
  EXPECT_THROW(make_incremental_problem(gap), InvalidInput);
  EXPECT_THROW(make_incremental_problem(Dataset{}), InvalidInput);
}

TEST(Estimates, WriteReadRoundTrip) {
  Gen gen(2);
  std::vector<GraphValues> steps;
  GraphValues v;
  for (std::uint32_t k = 0; k < 5; ++k) {
    v.insert(VariableKey::robot(k), gen.pose());
    if (k == 2) {
      v.insert(VariableKey::landmark(1), gen.pose());
    }
    steps.push_back(v);
  }
  std::stringstream out;
  write_estimates(out, steps);
  const std::vector<GraphValues> back = read_estimates(out);
  ASSERT_EQ(back.size(), steps.size());
  EXPECT_EQ(back.back(), steps.back());
  // Intermediate steps carry the step's robot and landmarks so far.
  EXPECT_TRUE(back[3].contains(VariableKey::robot(3)));
  EXPECT_TRUE(back[3].contains(VariableKey::landmark(1)));
  EXPECT_FALSE(back[1].contains(VariableKey::landmark(1)));

  std::istringstream bad("VERTEX_SE3:QUAT 0 0 0 0 0 0 0 1\n");
  EXPECT_THROW(read_estimates(bad), ParseError);
}

TEST(Checksum, Fnv1aReferenceValues) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}
