#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "lift3d/camera.hpp"
#include "lift3d/synth.hpp"

using namespace lift3d;

namespace {

Eigen::Matrix3d random_rotation(std::mt19937& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d axis(n(gen), n(gen), n(gen));
  axis.normalize();
  std::uniform_real_distribution<double> a(-3.0, 3.0);
  return Eigen::AngleAxisd(a(gen), axis).toRotationMatrix();
}

Camera random_camera(std::mt19937& gen, const std::string& id) {
  std::uniform_real_distribution<double> d(-2000.0, 2000.0);
  Camera cam;
  cam.id = id;
  cam.intrinsics = {1100.0, 1150.0, 480.0, 510.0};
  cam.extrinsics.R = random_rotation(gen);
  cam.extrinsics.T = Eigen::Vector3d(d(gen), d(gen), d(gen));
  return cam;
}

}  // namespace

TEST_CASE("world/camera point maps invert each other") {
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> d(-3000.0, 3000.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Camera cam = random_camera(gen, "c");
    const Eigen::Vector3d x(d(gen), d(gen), d(gen));
    const Eigen::Vector3d back =
        camera_to_world_point(world_to_camera_point(x, cam.extrinsics), cam.extrinsics);
    CHECK((back - x).norm() < 1e-9);
  }
}

TEST_CASE("camera centre maps to the camera-frame origin") {
  std::mt19937 gen(5);
  const Camera cam = random_camera(gen, "c");
  CHECK(world_to_camera_point(cam.extrinsics.T, cam.extrinsics).norm() < 1e-12);
}

TEST_CASE("pose frame tags are enforced and propagated") {
  std::mt19937 gen(9);
  const Camera cam = random_camera(gen, "cam3");
  Pose3D p;
  p.coords = {Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(-4, 0, 8)};

  const Pose3D pc = world_to_camera(p, cam);
  CHECK(pc.frame == FrameTag::camera("cam3"));
  const Pose3D back = camera_to_world(pc, cam);
  CHECK(back.frame.is_world());
  for (int j = 0; j < 2; ++j) CHECK((back.coords[j] - p.coords[j]).norm() < 1e-9);

  CHECK_THROWS_MATCHES(world_to_camera(pc, cam), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.class_id() == errc::coordinate_frame;
                       }));
  CHECK_THROWS_AS(camera_to_world(p, cam), Error);
  Pose3D wrong = pc;
  wrong.frame = FrameTag::camera("cam9");
  CHECK_THROWS_AS(camera_to_world(wrong, cam), Error);
}

TEST_CASE("relative transforms compose and agree with the frame maps") {
  std::mt19937 gen(13);
  const Camera a = random_camera(gen, "a");
  const Camera b = random_camera(gen, "b");
  const Camera c = random_camera(gen, "c");
  std::uniform_real_distribution<double> d(-3000.0, 3000.0);

  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Vector3d xw(d(gen), d(gen), d(gen));
    const Eigen::Vector3d xa = world_to_camera_point(xw, a.extrinsics);
    const Eigen::Vector3d xb = world_to_camera_point(xw, b.extrinsics);
    const Eigen::Vector3d xc = world_to_camera_point(xw, c.extrinsics);

    const RelativeTransform ab = relative_transform(a, b);
    CHECK((ab.R * xa + ab.T - xb).norm() < 1e-9);

    // Composition a->b->c equals the direct map a->c.
    const RelativeTransform bc = relative_transform(b, c);
    const RelativeTransform ac = relative_transform(a, c);
    const Eigen::Vector3d via = bc.R * (ab.R * xa + ab.T) + bc.T;
    CHECK((via - (ac.R * xa + ac.T)).norm() < 1e-9);

    // Round trip a->b->a is the identity.
    const RelativeTransform ba = relative_transform(b, a);
    CHECK((ba.R * (ab.R * xa + ab.T) + ba.T - xa).norm() < 1e-9);
  }
}

TEST_CASE("apply_relative tags its output and rejects mismatched input") {
  std::mt19937 gen(17);
  const Camera a = random_camera(gen, "a");
  const Camera b = random_camera(gen, "b");
  const RelativeTransform ab = relative_transform(a, b);

  Pose3D pa;
  pa.frame = FrameTag::camera("a");
  pa.coords = {Eigen::Vector3d(10, 20, 3000)};
  const Pose3D pb = apply_relative(pa, ab, "a", "b");
  CHECK(pb.frame == FrameTag::camera("b"));

  pa.frame = FrameTag::camera("b");
  CHECK_THROWS_AS(apply_relative(pa, ab, "a", "b"), Error);
}

TEST_CASE("projection_matrix agrees with explicit pinhole projection") {
  std::mt19937 gen(19);
  std::uniform_real_distribution<double> d(-1500.0, 1500.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Camera cam = random_camera(gen, "p");
    const Eigen::Vector3d xw(d(gen), d(gen), d(gen));
    const Eigen::Vector3d xc = world_to_camera_point(xw, cam.extrinsics);
    if (xc.z() <= 1e-6) continue;

    const Eigen::Matrix<double, 3, 4> P = projection_matrix(cam);
    const Eigen::Vector3d h = P * xw.homogeneous();
    const Eigen::Vector2d via_p = h.hnormalized();

    const auto uv = project_point_checked(xw, cam);
    REQUIRE(uv.has_value());
    CHECK((via_p - *uv).norm() < 1e-9);
  }
}

TEST_CASE("projection rejects points behind the camera") {
  Camera cam;
  cam.id = "z";
  cam.intrinsics = {1000.0, 1000.0, 500.0, 500.0};
  // Looking down +z from the origin.
  CHECK_FALSE(project_point_checked(Eigen::Vector3d(0, 0, -10), cam).has_value());
  CHECK_FALSE(project_point_checked(Eigen::Vector3d(3, 1, 0), cam).has_value());

  Pose3D p;
  p.coords = {Eigen::Vector3d(0, 0, 100), Eigen::Vector3d(0, 0, -5)};
  CHECK_THROWS_MATCHES(project(p, cam), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.class_id() == errc::behind_camera;
                       }));
}

TEST_CASE("synthetic rig cameras all see the rig target") {
  RigSpec spec;
  spec.cameras = 4;
  const auto rig = build_rig(spec);
  REQUIRE(rig.size() == 4);
  for (const auto& cam : rig) {
    cam.validate();
    // The look-at point projects to the principal point.
    const auto uv = project_point_checked(Eigen::Vector3d::Zero(), cam);
    REQUIRE(uv.has_value());
    CHECK(uv->x() == Catch::Approx(cam.intrinsics.cx).margin(1e-9));
    CHECK(uv->y() == Catch::Approx(cam.intrinsics.cy).margin(1e-9));
  }
}

TEST_CASE("image_diagonal matches the centred-principal-point convention") {
  CameraIntrinsics in{1000.0, 1000.0, 500.0, 500.0};
  CHECK(image_diagonal(in) == Catch::Approx(std::sqrt(2.0) * 1000.0));
  in.cx = 0.0;
  in.cy = 0.0;
  CHECK_THROWS_AS(image_diagonal(in), Error);
}

TEST_CASE("camera JSON round-trip is exact and validates") {
  std::mt19937 gen(29);
  const Camera cam = random_camera(gen, "rt");
  const Camera back = camera_from_json(camera_to_json(cam));
  CHECK(back.id == cam.id);
  CHECK((back.extrinsics.R - cam.extrinsics.R).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.extrinsics.T - cam.extrinsics.T).norm() == 0.0);
  CHECK(back.intrinsics.fx == cam.intrinsics.fx);

  nlohmann::json j = camera_to_json(cam);
  j["R"][0] = 9.0;  // not a rotation any more
  CHECK_THROWS_MATCHES(camera_from_json(j), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.class_id() == errc::config_error;
                       }));

  nlohmann::json rig = nlohmann::json::array({camera_to_json(cam), camera_to_json(cam)});
  CHECK_THROWS_MATCHES(rig_from_json(rig), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.class_id() == errc::format_error;
                       }));
}

TEST_CASE("extrinsics validation rejects reflections") {
  CameraExtrinsics e;
  e.R.col(0) *= -1.0;  // det -1
  CHECK_THROWS_AS(e.validate(), Error);
}
