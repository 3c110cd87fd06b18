#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Geometry>
#include <random>

#include "lift3d/metrics.hpp"

using namespace lift3d;

namespace {

Pose3D random_pose(std::mt19937& gen, int joints, double scale = 500.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  Pose3D p;
  p.frame = FrameTag::world();
  p.coords.resize(static_cast<std::size_t>(joints));
  for (auto& c : p.coords) c = Eigen::Vector3d(d(gen), d(gen), d(gen));
  return p;
}

Eigen::Matrix3d random_rotation(std::mt19937& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d axis(n(gen), n(gen), n(gen));
  axis.normalize();
  std::uniform_real_distribution<double> a(-3.0, 3.0);
  return Eigen::AngleAxisd(a(gen), axis).toRotationMatrix();
}

const auto error_class = [](const char* cls) {
  return Catch::Matchers::Predicate<Error>(
      [cls](const Error& e) { return e.class_id() == cls; });
};

}  // namespace

TEST_CASE("mpjpe matches a by-hand root-aligned computation") {
  const JointSet js = JointSet::h36m17();
  std::mt19937 gen(1);
  Sequence3D gt{random_pose(gen, js.size()), random_pose(gen, js.size())};
  Sequence3D pred = gt;

  // Shift one joint by a known offset in one frame; mpjpe averages over
  // every (frame, joint) including exact zeros.
  pred[1].coords[5] += Eigen::Vector3d(30.0, -40.0, 0.0);  // 50 mm
  const double want = 50.0 / static_cast<double>(2 * js.size());
  CHECK_THAT(mpjpe(pred, gt, js), Catch::Matchers::WithinRel(want, 1e-12));

  // A common translation of a whole frame is invisible after root alignment.
  for (auto& c : pred[0].coords) c += Eigen::Vector3d(700.0, -200.0, 90.0);
  CHECK_THAT(mpjpe(pred, gt, js), Catch::Matchers::WithinRel(want, 1e-12));

  // Moving only the root shifts every distance in that frame.
  Sequence3D root_only = gt;
  root_only[0].coords[static_cast<std::size_t>(js.root)] +=
      Eigen::Vector3d(10.0, 0.0, 0.0);
  CHECK(mpjpe(root_only, gt, js) > 0.0);
}

TEST_CASE("pmpjpe is invariant under similarity transforms of the prediction") {
  const JointSet js = JointSet::h36m17();
  std::mt19937 gen(2);
  std::uniform_real_distribution<double> s(0.2, 5.0), t(-2000.0, 2000.0);

  for (int trial = 0; trial < 50; ++trial) {
    Sequence3D gt{random_pose(gen, js.size())};
    Sequence3D pred = gt;
    const double scale = s(gen);
    const Eigen::Matrix3d R = random_rotation(gen);
    const Eigen::Vector3d shift(t(gen), t(gen), t(gen));
    for (auto& c : pred[0].coords) c = scale * (R * c) + shift;
    CHECK(pmpjpe(pred, gt, js) < 1e-9);
  }
}

TEST_CASE("pmpjpe stays strictly positive for reflected poses") {
  // The determinant correction keeps the alignment a proper rotation, so a
  // mirror image cannot be rotated onto a generic original.
  const JointSet js = JointSet::h36m17();
  std::mt19937 gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    Sequence3D gt{random_pose(gen, js.size())};
    Sequence3D pred = gt;
    for (auto& c : pred[0].coords) c.x() = -c.x();
    CHECK(pmpjpe(pred, gt, js) > 1.0);
  }
}

TEST_CASE("procrustes recovers a planted similarity transform") {
  const JointSet js = JointSet::h36m17();
  std::mt19937 gen(4);
  const Pose3D src = random_pose(gen, js.size());
  const double scale = 2.37;
  const Eigen::Matrix3d R = random_rotation(gen);
  const Eigen::Vector3d t(100.0, -50.0, 900.0);
  Pose3D dst = src;
  for (auto& c : dst.coords) c = scale * (R * c) + t;

  const SimilarityTransform st = procrustes_align(src, dst);
  CHECK_THAT(st.scale, Catch::Matchers::WithinRel(scale, 1e-9));
  CHECK((st.R - R).norm() < 1e-9);
  CHECK((st.t - t).norm() < 1e-6);
  CHECK_THAT(st.R.determinant(), Catch::Matchers::WithinRel(1.0, 1e-12));

  Pose3D two;
  two.coords = {Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones()};
  CHECK_THROWS_MATCHES(procrustes_align(two, two), Error,
                       error_class(errc::alignment_undefined));
  Pose3D flat = src;
  for (auto& c : flat.coords) c = Eigen::Vector3d(1.0, 2.0, 3.0);
  CHECK_THROWS_MATCHES(procrustes_align(flat, dst), Error,
                       error_class(errc::alignment_undefined));
}

TEST_CASE("nmpjpe finds the optimal per-frame scale") {
  const JointSet js = JointSet::h36m17();
  std::mt19937 gen(5);
  Sequence3D gt{random_pose(gen, js.size())};

  // A root-centred prediction that is a pure rescaling of the truth scores
  // zero: the optimal scale undoes it exactly.
  for (const double s : {0.25, 1.0, 7.5}) {
    Sequence3D pred = gt;
    const Eigen::Vector3d root = gt[0].coords[static_cast<std::size_t>(js.root)];
    for (auto& c : pred[0].coords) c = root + s * (c - root);
    CHECK(nmpjpe(pred, gt, js) < 1e-9);
  }

  // Coincident prediction joints leave the scale undefined.
  Sequence3D collapsed = gt;
  for (auto& c : collapsed[0].coords) c = Eigen::Vector3d(5.0, 5.0, 5.0);
  CHECK_THROWS_MATCHES(nmpjpe(collapsed, gt, js), Error,
                       error_class(errc::alignment_undefined));
}

TEST_CASE("metric ordering: pmpjpe <= nmpjpe <= mpjpe on random pairs") {
  // Each stage optimises over a superset of the previous one's transforms,
  // so the minima are ordered.
  const JointSet js = JointSet::h36m17();
  std::mt19937 gen(6);
  for (int trial = 0; trial < 30; ++trial) {
    Sequence3D gt, pred;
    for (int f = 0; f < 4; ++f) {
      gt.push_back(random_pose(gen, js.size()));
      Pose3D p = gt.back();
      std::normal_distribution<double> noise(0.0, 40.0);
      for (auto& c : p.coords)
        c += Eigen::Vector3d(noise(gen), noise(gen), noise(gen));
      pred.push_back(p);
    }
    const double m = mpjpe(pred, gt, js);
    const double nm = nmpjpe(pred, gt, js);
    const double pm = pmpjpe(pred, gt, js);
    CHECK(pm <= nm + 1e-9);
    CHECK(nm <= m + 1e-9);
  }
}

TEST_CASE("pck counts non-root joints within the threshold, inclusively") {
  const JointSet js = JointSet::h36m17();
  std::mt19937 gen(7);
  Sequence3D gt{random_pose(gen, js.size())};
  Sequence3D pred = gt;

  // Exact predictions: distance 0 <= any threshold, including 0.
  CHECK(pck(pred, gt, js, 0.0) == 100.0);
  CHECK(auc(pred, gt, js) == 100.0);

  // Push one non-root joint exactly to the threshold: inclusive comparison
  // keeps it a hit.
  const int j = (js.root + 1) % js.size();
  pred[0].coords[static_cast<std::size_t>(j)] += Eigen::Vector3d(150.0, 0.0, 0.0);
  CHECK(pck(pred, gt, js, 150.0) == 100.0);
  // Just beyond the threshold it becomes the only miss among 16 joints.
  pred[0].coords[static_cast<std::size_t>(j)] += Eigen::Vector3d(0.001, 0.0, 0.0);
  CHECK_THAT(pck(pred, gt, js, 150.0),
             Catch::Matchers::WithinRel(100.0 * 15.0 / 16.0, 1e-12));

  CHECK_THROWS_MATCHES(pck(pred, gt, js, -1.0), Error,
                       error_class(errc::config_error));
}

TEST_CASE("auc is the mean of pck over 0..150 in steps of 5") {
  const JointSet js = JointSet::h36m17();
  std::mt19937 gen(8);
  Sequence3D gt, pred;
  for (int f = 0; f < 3; ++f) {
    gt.push_back(random_pose(gen, js.size()));
    Pose3D p = gt.back();
    std::normal_distribution<double> noise(0.0, 60.0);
    for (auto& c : p.coords)
      c += Eigen::Vector3d(noise(gen), noise(gen), noise(gen));
    pred.push_back(p);
  }
  double want = 0;
  for (int t = 0; t <= 150; t += 5) want += pck(pred, gt, js, t);
  want /= 31.0;
  CHECK_THAT(auc(pred, gt, js), Catch::Matchers::WithinRel(want, 1e-12));
  CHECK(auc(pred, gt, js) <= pck(pred, gt, js, 150.0));
}

TEST_CASE("metric inputs must agree on frames, counts, and tags") {
  const JointSet js = JointSet::h36m17();
  std::mt19937 gen(9);
  Sequence3D gt{random_pose(gen, js.size())};

  Sequence3D wrong_count{random_pose(gen, js.size() - 1)};
  CHECK_THROWS_MATCHES(mpjpe(wrong_count, gt, js), Error,
                       error_class(errc::shape_error));

  Sequence3D wrong_frames{random_pose(gen, js.size()), random_pose(gen, js.size())};
  CHECK_THROWS_MATCHES(mpjpe(wrong_frames, gt, js), Error,
                       error_class(errc::shape_error));

  Sequence3D empty;
  CHECK_THROWS_MATCHES(mpjpe(empty, empty, js), Error,
                       error_class(errc::shape_error));

  Sequence3D cam_tagged = gt;
  cam_tagged[0].frame = FrameTag::camera("c1");
  CHECK_THROWS_MATCHES(mpjpe(cam_tagged, gt, js), Error,
                       error_class(errc::coordinate_frame));
}

TEST_CASE("evaluate_metrics bundles the five scores coherently") {
  const JointSet js = JointSet::h36m17();
  std::mt19937 gen(10);
  Sequence3D gt, pred;
  for (int f = 0; f < 5; ++f) {
    gt.push_back(random_pose(gen, js.size()));
    Pose3D p = gt.back();
    std::normal_distribution<double> noise(0.0, 25.0);
    for (auto& c : p.coords)
      c += Eigen::Vector3d(noise(gen), noise(gen), noise(gen));
    pred.push_back(p);
  }
  const MetricReport r = evaluate_metrics(pred, gt, js);
  CHECK(r.frames == 5);
  CHECK(r.mpjpe == mpjpe(pred, gt, js));
  CHECK(r.pmpjpe == pmpjpe(pred, gt, js));
  CHECK(r.nmpjpe == nmpjpe(pred, gt, js));
  CHECK(r.pck150 == pck(pred, gt, js, 150.0));
  CHECK(r.auc == auc(pred, gt, js));
  CHECK(r.pmpjpe <= r.nmpjpe + 1e-9);
  CHECK(r.nmpjpe <= r.mpjpe + 1e-9);
  CHECK(r.auc <= r.pck150 + 1e-9);

  const auto j = r.to_json();
  CHECK(j.at("mpjpe").get<double>() == r.mpjpe);
  CHECK(j.at("frames").get<std::int64_t>() == 5);
}

TEST_CASE("per-action evaluation buckets frames and adds the aggregate") {
  const JointSet js = JointSet::h36m17();
  std::mt19937 gen(11);
  Sequence3D gt, pred;
  std::vector<std::string> actions;
  for (int f = 0; f < 6; ++f) {
    gt.push_back(random_pose(gen, js.size()));
    Pose3D p = gt.back();
    std::normal_distribution<double> noise(0.0, 30.0);
    for (auto& c : p.coords)
      c += Eigen::Vector3d(noise(gen), noise(gen), noise(gen));
    pred.push_back(p);
    actions.push_back(f < 2 ? "walk" : "sit");
  }

  const auto by_action = evaluate_per_action(pred, gt, js, actions);
  REQUIRE(by_action.count("walk") == 1);
  REQUIRE(by_action.count("sit") == 1);
  REQUIRE(by_action.count("all") == 1);
  CHECK(by_action.at("walk").frames == 2);
  CHECK(by_action.at("sit").frames == 4);
  CHECK(by_action.at("all").frames == 6);

  // The aggregate mpjpe is the frame-weighted mean of the buckets.
  const double blended = (2.0 * by_action.at("walk").mpjpe +
                          4.0 * by_action.at("sit").mpjpe) /
                         6.0;
  CHECK_THAT(by_action.at("all").mpjpe,
             Catch::Matchers::WithinRel(blended, 1e-12));

  std::vector<std::string> short_labels(5, "walk");
  CHECK_THROWS_MATCHES(evaluate_per_action(pred, gt, js, short_labels), Error,
                       error_class(errc::shape_error));
}
