#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "lift3d/dataset_io.hpp"

using namespace lift3d;
namespace fs = std::filesystem;

namespace {

const auto error_class = [](const char* cls) {
  return Catch::Matchers::Predicate<Error>(
      [cls](const Error& e) { return e.class_id() == cls; });
};

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("lift3d_io_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Sequence3D random_seq3d(std::mt19937& gen, int frames, int joints,
                        FrameTag tag = FrameTag::world()) {
  std::uniform_real_distribution<double> d(-1e4, 1e4);
  Sequence3D seq(static_cast<std::size_t>(frames));
  for (auto& p : seq) {
    p.frame = tag;
    p.coords.resize(static_cast<std::size_t>(joints));
    for (auto& c : p.coords) c = Eigen::Vector3d(d(gen), d(gen), d(gen));
  }
  return seq;
}

DatasetBundle tiny_bundle() {
  DatasetBundle b;
  b.joints = JointSet::h36m17();
  MotionSpec mspec;
  mspec.frames = 8;
  mspec.seed = 6;
  b.gt_world = generate_motion(mspec, b.joints);
  RigSpec rspec;
  rspec.cameras = 3;
  b.rig = build_rig(rspec);
  DetectionNoiseSpec noise;
  noise.sigma_px = 2.0;
  noise.seed = 19;
  b.detections = render_detections(b.gt_world, b.rig, noise);
  b.meta["generator"] = "test";
  return b;
}

}  // namespace

TEST_CASE("format_double survives a parse round trip for awkward values") {
  for (const double v :
       {1.0 / 3.0, -0.0, 3.141592653589793, 1e300, 5e-324, -1.7e-17,
        123456789.123456789, 42.0}) {
    const std::string s = format_double(v);
    char* end = nullptr;
    const double back = std::strtod(s.c_str(), &end);
    CHECK(*end == '\0');
    // Compare bit patterns so -0.0 and 0.0 stay distinct.
    CHECK(std::memcmp(&back, &v, sizeof v) == 0);
  }
}

TEST_CASE("3D sequences round-trip through CSV exactly") {
  TempDir tmp;
  std::mt19937 gen(1);
  const Sequence3D seq = random_seq3d(gen, 3, 5);
  const fs::path file = tmp.path / "seq.csv";
  write_sequence3d_csv(file, seq);
  const Sequence3D back = read_sequence3d_csv(file);

  REQUIRE(back.size() == seq.size());
  for (std::size_t f = 0; f < seq.size(); ++f) {
    CHECK(back[f].frame.is_world());
    REQUIRE(back[f].joints() == seq[f].joints());
    for (int j = 0; j < seq[f].joints(); ++j)
      CHECK((back[f].coords[static_cast<std::size_t>(j)] -
             seq[f].coords[static_cast<std::size_t>(j)])
                .norm() == 0.0);
  }

  // Camera-frame tags survive via the header comment.
  const Sequence3D cam_seq = random_seq3d(gen, 2, 4, FrameTag::camera("cam7"));
  write_sequence3d_csv(file, cam_seq);
  const Sequence3D cam_back = read_sequence3d_csv(file);
  CHECK(cam_back[0].frame == FrameTag::camera("cam7"));
}

TEST_CASE("3D CSV writer rejects unusable sequences") {
  TempDir tmp;
  const fs::path file = tmp.path / "seq.csv";
  CHECK_THROWS_MATCHES(write_sequence3d_csv(file, {}), Error,
                       error_class(errc::shape_error));

  std::mt19937 gen(2);
  Sequence3D mixed = random_seq3d(gen, 2, 3);
  mixed[1].frame = FrameTag::camera("cam0");
  CHECK_THROWS_MATCHES(write_sequence3d_csv(file, mixed), Error,
                       error_class(errc::coordinate_frame));

  CHECK_THROWS_MATCHES(write_sequence3d_csv(tmp.path / "no" / "dir.csv",
                                            random_seq3d(gen, 1, 1)),
                       Error, error_class(errc::io_error));
}

TEST_CASE("3D CSV reader reports malformed input precisely") {
  TempDir tmp;
  const fs::path file = tmp.path / "bad.csv";

  CHECK_THROWS_MATCHES(read_sequence3d_csv(tmp.path / "absent.csv"), Error,
                       error_class(errc::io_error));

  const auto write_text = [&](const std::string& text) {
    std::ofstream os(file);
    os << text;
  };

  write_text("frame,joint,u,v,confidence\n0,0,1,2,3\n");
  CHECK_THROWS_MATCHES(read_sequence3d_csv(file), Error,
                       error_class(errc::format_error));

  write_text("frame,joint,x,y,z\n0,0,1,2\n");
  CHECK_THROWS_MATCHES(read_sequence3d_csv(file), Error,
                       error_class(errc::format_error));

  write_text("frame,joint,x,y,z\n0,0,1,oops,3\n");
  CHECK_THROWS_MATCHES(read_sequence3d_csv(file), Error,
                       error_class(errc::format_error));

  write_text("frame,joint,x,y,z\n");
  CHECK_THROWS_MATCHES(read_sequence3d_csv(file), Error,
                       error_class(errc::format_error));

  // Blank lines and extra comments are tolerated.
  write_text("# coordinate-frame: world\n\nframe,joint,x,y,z\n# note\n0,0,1,2,3\n");
  const Sequence3D ok = read_sequence3d_csv(file);
  REQUIRE(ok.size() == 1);
  CHECK((ok[0].coords[0] - Eigen::Vector3d(1, 2, 3)).norm() == 0.0);
}

TEST_CASE("2D sequences round-trip with exact confidences") {
  TempDir tmp;
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> px(0, 1000), cf(0, 1);
  Sequence2D seq(4);
  for (auto& p : seq) {
    p.coords.resize(6);
    p.confidence.emplace(6, 1.0);
    for (std::size_t j = 0; j < 6; ++j) {
      p.coords[j] = Eigen::Vector2d(px(gen), px(gen));
      (*p.confidence)[j] = cf(gen);
    }
  }
  const fs::path file = tmp.path / "det.csv";
  write_sequence2d_csv(file, seq);
  const Sequence2D back = read_sequence2d_csv(file);

  REQUIRE(back.size() == seq.size());
  for (std::size_t f = 0; f < seq.size(); ++f) {
    REQUIRE(back[f].joints() == 6);
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK((back[f].coords[j] - seq[f].coords[j]).norm() == 0.0);
      CHECK((*back[f].confidence)[j] == (*seq[f].confidence)[j]);
    }
  }

  // A pose with no confidence vector writes the implicit 1.0 per joint.
  Sequence2D bare(1);
  bare[0].coords = {Eigen::Vector2d(5, 6)};
  write_sequence2d_csv(file, bare);
  const Sequence2D bare_back = read_sequence2d_csv(file);
  CHECK(bare_back[0].confidence_at(0) == 1.0);

  CHECK_THROWS_MATCHES(write_sequence2d_csv(file, {}), Error,
                       error_class(errc::shape_error));
  std::ofstream(file) << "frame,joint,x,y,z\n0,0,1,2,3\n";
  CHECK_THROWS_MATCHES(read_sequence2d_csv(file), Error,
                       error_class(errc::format_error));
}

TEST_CASE("pseudo-label CSV keeps diagnostics and recounts validity") {
  TempDir tmp;
  std::mt19937 gen(4);
  std::uniform_real_distribution<double> d(-500, 500), r(0, 3);
  std::vector<TriangulatedPose> poses(3);
  for (auto& tp : poses) {
    tp.pose.frame = FrameTag::world();
    tp.pose.coords.resize(5);
    tp.residual_px.resize(5);
    tp.valid.resize(5);
    for (std::size_t j = 0; j < 5; ++j) {
      tp.pose.coords[j] = Eigen::Vector3d(d(gen), d(gen), d(gen));
      tp.residual_px[j] = r(gen);
      tp.valid[j] = j % 2 == 0 ? 1 : 0;
    }
    tp.valid_count = 3;
  }
  const fs::path file = tmp.path / "pseudo.csv";
  write_pseudo_csv(file, poses);
  const auto back = read_pseudo_csv(file);

  REQUIRE(back.size() == poses.size());
  for (std::size_t f = 0; f < poses.size(); ++f) {
    CHECK(back[f].pose.frame.is_world());
    CHECK(back[f].valid_count == 3);
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK((back[f].pose.coords[j] - poses[f].pose.coords[j]).norm() == 0.0);
      CHECK(back[f].residual_px[j] == poses[f].residual_px[j]);
      CHECK(back[f].valid[j] == poses[f].valid[j]);
    }
  }

  CHECK_THROWS_MATCHES(write_pseudo_csv(file, {}), Error,
                       error_class(errc::shape_error));
  std::ofstream(file) << "frame,joint,x,y,z\n";
  CHECK_THROWS_MATCHES(read_pseudo_csv(file), Error,
                       error_class(errc::format_error));
}

TEST_CASE("dataset bundles round-trip through a directory") {
  TempDir tmp;
  const DatasetBundle b = tiny_bundle();
  const fs::path dir = tmp.path / "bundle";
  write_dataset(dir, b);

  for (const char* name : {"rig.json", "joints.json", "meta.json", "gt3d.csv",
                           "det2d_cam0.csv", "det2d_cam1.csv", "det2d_cam2.csv"})
    CHECK(fs::exists(dir / name));

  const DatasetBundle back = read_dataset(dir);
  CHECK(back.joints.names == b.joints.names);
  CHECK(back.joints.parents == b.joints.parents);
  CHECK(back.joints.symmetry_pairs == b.joints.symmetry_pairs);
  REQUIRE(back.rig.size() == b.rig.size());
  for (std::size_t c = 0; c < b.rig.size(); ++c) {
    CHECK(back.rig[c].id == b.rig[c].id);
    CHECK(back.rig[c].intrinsics.fx == b.rig[c].intrinsics.fx);
    CHECK((back.rig[c].extrinsics.T - b.rig[c].extrinsics.T).norm() == 0.0);
    CHECK((back.rig[c].extrinsics.R - b.rig[c].extrinsics.R).norm() == 0.0);
  }
  CHECK(back.fps == b.fps);
  CHECK(back.meta.at("generator") == "test");
  CHECK(back.meta.at("frames").get<std::int64_t>() == 8);
  REQUIRE(back.has_gt());
  REQUIRE(back.frames() == 8);
  for (std::size_t f = 0; f < b.gt_world.size(); ++f)
    for (int j = 0; j < b.joints.size(); ++j)
      CHECK((back.gt_world[f].coords[static_cast<std::size_t>(j)] -
             b.gt_world[f].coords[static_cast<std::size_t>(j)])
                .norm() == 0.0);
  for (std::size_t c = 0; c < b.detections.size(); ++c)
    for (std::size_t f = 0; f < b.detections[c].size(); ++f)
      for (int j = 0; j < b.joints.size(); ++j) {
        CHECK((back.detections[c][f].coords[static_cast<std::size_t>(j)] -
               b.detections[c][f].coords[static_cast<std::size_t>(j)])
                  .norm() == 0.0);
        CHECK(back.detections[c][f].confidence_at(j) ==
              b.detections[c][f].confidence_at(j));
      }

  // Detection-only bundles are valid and read back without ground truth.
  DatasetBundle no_gt = b;
  no_gt.gt_world.clear();
  const fs::path dir2 = tmp.path / "no_gt";
  write_dataset(dir2, no_gt);
  CHECK(!fs::exists(dir2 / "gt3d.csv"));
  CHECK(!read_dataset(dir2).has_gt());
}

TEST_CASE("read_dataset refuses incomplete or corrupt directories") {
  TempDir tmp;
  CHECK_THROWS_MATCHES(read_dataset(tmp.path / "nowhere"), Error,
                       error_class(errc::io_error));

  const DatasetBundle b = tiny_bundle();
  const fs::path dir = tmp.path / "bundle";
  write_dataset(dir, b);

  fs::remove(dir / "det2d_cam1.csv");
  CHECK_THROWS_MATCHES(read_dataset(dir), Error,
                       error_class(errc::camera_mismatch));

  write_dataset(dir, b);
  std::ofstream(dir / "rig.json") << "{ not json";
  CHECK_THROWS_MATCHES(read_dataset(dir), Error,
                       error_class(errc::format_error));

  write_dataset(dir, b);
  fs::remove(dir / "joints.json");
  CHECK_THROWS_MATCHES(read_dataset(dir), Error, error_class(errc::io_error));
}

TEST_CASE("bundle validation pins the cross-file shape contracts") {
  DatasetBundle b = tiny_bundle();
  b.validate();

  DatasetBundle fewer = b;
  fewer.detections.pop_back();
  CHECK_THROWS_MATCHES(fewer.validate(), Error,
                       error_class(errc::camera_mismatch));

  DatasetBundle ragged = b;
  ragged.detections[1].pop_back();
  CHECK_THROWS_MATCHES(ragged.validate(), Error, error_class(errc::shape_error));

  DatasetBundle wrong_joints = b;
  wrong_joints.detections[0][2].coords.pop_back();
  CHECK_THROWS_MATCHES(wrong_joints.validate(), Error,
                       error_class(errc::shape_error));

  DatasetBundle short_gt = b;
  short_gt.gt_world.pop_back();
  CHECK_THROWS_MATCHES(short_gt.validate(), Error,
                       error_class(errc::shape_error));

  DatasetBundle cam_gt = b;
  cam_gt.gt_world[0].frame = FrameTag::camera("cam0");
  CHECK_THROWS_MATCHES(cam_gt.validate(), Error,
                       error_class(errc::coordinate_frame));

  DatasetBundle no_rig = b;
  no_rig.rig.clear();
  no_rig.detections.clear();
  CHECK_THROWS_MATCHES(no_rig.validate(), Error,
                       error_class(errc::config_error));
}
