#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Geometry>
#include <random>

#include "lift3d/skeleton.hpp"

using namespace lift3d;

namespace {

Pose3D random_pose(std::mt19937& gen, int n) {
  std::uniform_real_distribution<double> d(-500.0, 500.0);
  Pose3D p;
  p.coords.resize(static_cast<std::size_t>(n));
  for (auto& c : p.coords) c = Eigen::Vector3d(d(gen), d(gen), d(gen));
  return p;
}

}  // namespace

TEST_CASE("h36m17 joint set is a valid 17-joint tree") {
  const JointSet js = JointSet::h36m17();
  CHECK(js.size() == 17);
  CHECK(js.root == 0);
  CHECK(js.names[0] == "Hip");
  CHECK(js.parents[js.root] == -1);
  CHECK(js.symmetry_pairs.size() == 6);
  // Symmetric joints mirror each other's names: LFoot <-> RFoot etc.
  for (const auto& [l, r] : js.symmetry_pairs) {
    CHECK(js.names[l].substr(0, 1) == "L");
    CHECK(js.names[r].substr(0, 1) == "R");
    CHECK(js.names[l].substr(1) == js.names[r].substr(1));
  }
}

TEST_CASE("joint set validation rejects malformed trees") {
  JointSet js = JointSet::h36m17();

  SECTION("cycle in parent chain") {
    js.parents[2] = 3;  // RKnee <-> RFoot cycle
    CHECK_THROWS_MATCHES(js.validate(), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.class_id() == errc::invalid_joint_set;
                         }));
  }
  SECTION("second root") {
    js.parents[5] = -1;
    CHECK_THROWS_AS(js.validate(), Error);
  }
  SECTION("self parent") {
    js.parents[4] = 4;
    CHECK_THROWS_AS(js.validate(), Error);
  }
  SECTION("root inside a symmetry pair") {
    js.symmetry_pairs[0] = {0, 1};
    CHECK_THROWS_AS(js.validate(), Error);
  }
  SECTION("joint in two symmetry pairs") {
    js.symmetry_pairs.push_back({4, 2});
    CHECK_THROWS_AS(js.validate(), Error);
  }
  SECTION("parent array too short") {
    js.parents.pop_back();
    CHECK_THROWS_AS(js.validate(), Error);
  }
}

TEST_CASE("frame tags round-trip through their string form") {
  CHECK(FrameTag::world().str() == "world");
  CHECK(FrameTag::camera("cam2").str() == "camera:cam2");
  CHECK(FrameTag::parse("world") == FrameTag::world());
  CHECK(FrameTag::parse("camera:cam2") == FrameTag::camera("cam2"));
  CHECK(FrameTag::parse("camera:") == FrameTag::camera(""));
  CHECK_THROWS_AS(FrameTag::parse("Camera:cam2"), Error);
  CHECK(FrameTag::camera("a") != FrameTag::camera("b"));
  CHECK(FrameTag::world() != FrameTag::camera("a"));
}

TEST_CASE("joint set JSON round-trip preserves every field") {
  const JointSet js = JointSet::h36m17();
  const JointSet back = JointSet::from_json(js.to_json());
  CHECK(back.names == js.names);
  CHECK(back.parents == js.parents);
  CHECK(back.root == js.root);
  CHECK(back.symmetry_pairs == js.symmetry_pairs);

  nlohmann::json bad = js.to_json();
  bad.erase("parents");
  CHECK_THROWS_MATCHES(JointSet::from_json(bad), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.class_id() == errc::format_error;
                       }));
}

TEST_CASE("flip_pose2d is an involution and relabels left/right") {
  const JointSet js = JointSet::h36m17();
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> d(0.0, 1000.0);

  Pose2D p;
  p.coords.resize(17);
  for (auto& c : p.coords) c = Eigen::Vector2d(d(gen), d(gen));
  p.confidence = std::vector<double>(17);
  for (auto& v : *p.confidence) v = d(gen) / 1000.0;

  const double w = 1000.0;
  const Pose2D f = flip_pose2d(p, js, w);
  // LFoot (6) lands where RFoot (3) was, mirrored.
  CHECK(f.coords[6].x() == Catch::Approx(w - p.coords[3].x()));
  CHECK(f.coords[6].y() == p.coords[3].y());
  CHECK((*f.confidence)[6] == (*p.confidence)[3]);

  const Pose2D ff = flip_pose2d(f, js, w);
  for (int j = 0; j < 17; ++j) {
    CHECK(ff.coords[j].x() == Catch::Approx(p.coords[j].x()).margin(1e-12));
    CHECK(ff.coords[j].y() == p.coords[j].y());
    CHECK((*ff.confidence)[j] == (*p.confidence)[j]);
  }
}

TEST_CASE("flip_pose3d mirrors about the root and preserves bone lengths") {
  const JointSet js = JointSet::h36m17();
  std::mt19937 gen(11);
  const Pose3D p = random_pose(gen, 17);

  const Pose3D f = flip_pose3d(p, js);
  CHECK(f.coords[js.root] == p.coords[js.root]);
  // Mirror then relabel: LKnee (5) carries RKnee's (2) reflected position.
  const double rx = p.coords[js.root].x();
  CHECK(f.coords[5].x() == Catch::Approx(2 * rx - p.coords[2].x()));
  CHECK(f.coords[5].y() == p.coords[2].y());
  CHECK(f.coords[5].z() == p.coords[2].z());

  const auto lens = bone_lengths(p, js);
  const auto flens = bone_lengths(f, js);
  REQUIRE(lens.size() == flens.size());
  // The multiset of bone lengths survives; symmetric bones swap slots.
  const auto children = bone_children(js);
  for (std::size_t k = 0; k < lens.size(); ++k) {
    int match = children[k];
    for (const auto& [l, r] : js.symmetry_pairs) {
      if (children[k] == l) match = r;
      if (children[k] == r) match = l;
    }
    std::size_t mk = 0;
    while (children[mk] != match) ++mk;
    CHECK(flens[mk] == Catch::Approx(lens[k]).margin(1e-9));
  }

  const Pose3D ff = flip_pose3d(f, js);
  for (int j = 0; j < 17; ++j)
    CHECK((ff.coords[j] - p.coords[j]).norm() < 1e-12);
}

TEST_CASE("bone_lengths is rigid-motion invariant") {
  const JointSet js = JointSet::h36m17();
  std::mt19937 gen(23);
  const Pose3D p = random_pose(gen, 17);
  const auto base = bone_lengths(p, js);
  REQUIRE(base.size() == 16);

  const Eigen::AngleAxisd rot(0.83, Eigen::Vector3d(1, 2, -1).normalized());
  const Eigen::Vector3d t(120.0, -40.0, 833.0);
  Pose3D moved = p;
  for (auto& c : moved.coords) c = rot * c + t;

  const auto after = bone_lengths(moved, js);
  for (std::size_t k = 0; k < base.size(); ++k)
    CHECK(after[k] == Catch::Approx(base[k]).margin(1e-9));
}

TEST_CASE("pose/joint-set size mismatches are rejected") {
  const JointSet js = JointSet::h36m17();
  Pose2D p2;
  p2.coords.resize(16);
  CHECK_THROWS_AS(flip_pose2d(p2, js, 1000.0), Error);
  Pose3D p3;
  p3.coords.resize(18);
  CHECK_THROWS_AS(flip_pose3d(p3, js), Error);
  CHECK_THROWS_AS(bone_lengths(p3, js), Error);
}
