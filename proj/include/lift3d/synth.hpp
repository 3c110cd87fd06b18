#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "lift3d/camera.hpp"
#include "lift3d/error.hpp"
#include "lift3d/rng.hpp"
#include "lift3d/skeleton.hpp"

namespace lift3d {

struct RigSpec {
  int cameras = 4;
  double radius_mm = 3500;
  double height_mm = 800;
  double focal_px = 1150;
  double image_w = 1000;
  double image_h = 1000;

  void validate() const {
    require(cameras >= 1, errc::config_error, "rig needs at least one camera");
    require(radius_mm > 0, errc::config_error, "rig radius must be positive");
    require(focal_px > 0, errc::config_error, "focal length must be positive");
    require(image_w > 0 && image_h > 0, errc::config_error,
            "image size must be positive");
  }

  nlohmann::json to_json() const {
    return {{"cameras", cameras},   {"radius_mm", radius_mm},
            {"height_mm", height_mm}, {"focal_px", focal_px},
            {"image_w", image_w},   {"image_h", image_h}};
  }
  static RigSpec from_json(const nlohmann::json& j) {
    RigSpec s;
    s.cameras = j.value("cameras", s.cameras);
    s.radius_mm = j.value("radius_mm", s.radius_mm);
    s.height_mm = j.value("height_mm", s.height_mm);
    s.focal_px = j.value("focal_px", s.focal_px);
    s.image_w = j.value("image_w", s.image_w);
    s.image_h = j.value("image_h", s.image_h);
    s.validate();
    return s;
  }
};

struct MotionSpec {
  int frames = 2000;
  double fps = 50;
  std::vector<double> bone_lengths_mm;  // per non-root joint, index order;
                                        // empty selects the built-in table
  double gait_hz = 1.2;
  double amplitude_rad = 0.45;
  double drift_mm_per_frame = 20;
  std::uint64_t seed = 0;

  void validate() const {
    require(frames >= 1, errc::config_error, "frames must be >= 1");
    require(fps > 0, errc::config_error, "fps must be positive");
    require(gait_hz > 0, errc::config_error, "gait frequency must be positive");
    require(amplitude_rad >= 0, errc::config_error, "amplitude must be >= 0");
    require(drift_mm_per_frame >= 0, errc::config_error,
            "drift bound must be >= 0");
    for (double b : bone_lengths_mm)
      require(b > 0, errc::config_error, "zero or negative bone length");
  }

  nlohmann::json to_json() const {
    return {{"frames", frames},
            {"fps", fps},
            {"bone_lengths_mm", bone_lengths_mm},
            {"gait_hz", gait_hz},
            {"amplitude_rad", amplitude_rad},
            {"drift_mm_per_frame", drift_mm_per_frame},
            {"seed", seed}};
  }
  static MotionSpec from_json(const nlohmann::json& j) {
    MotionSpec s;
    s.frames = j.value("frames", s.frames);
    s.fps = j.value("fps", s.fps);
    s.bone_lengths_mm = j.value("bone_lengths_mm", s.bone_lengths_mm);
    s.gait_hz = j.value("gait_hz", s.gait_hz);
    s.amplitude_rad = j.value("amplitude_rad", s.amplitude_rad);
    s.drift_mm_per_frame = j.value("drift_mm_per_frame", s.drift_mm_per_frame);
    s.seed = j.value("seed", s.seed);
    s.validate();
    return s;
  }
};

struct DetectionNoiseSpec {
  double sigma_px = 0;
  double dropout = 0;
  std::uint64_t seed = 0;

  void validate() const {
    require(sigma_px >= 0, errc::config_error, "sigma must be >= 0");
    require(dropout >= 0 && dropout < 1, errc::config_error,
            "dropout must be in [0, 1)");
  }

  nlohmann::json to_json() const {
    return {{"sigma_px", sigma_px}, {"dropout", dropout}, {"seed", seed}};
  }
  static DetectionNoiseSpec from_json(const nlohmann::json& j) {
    DetectionNoiseSpec s;
    s.sigma_px = j.value("sigma_px", s.sigma_px);
    s.dropout = j.value("dropout", s.dropout);
    s.seed = j.value("seed", s.seed);
    s.validate();
    return s;
  }
};

namespace detail {
// Rest-pose bone directions (unit, world z-up, subject facing +x) and the
// default bone lengths (mm), both indexed like bone_lengths(): non-root
// joints in increasing index order. The canonical table covers the bundled
// 17-joint set; other joint sets get deterministic pseudo-random directions.
inline std::vector<Eigen::Vector3d> rest_directions(const JointSet& js) {
  static const std::vector<Eigen::Vector3d> h36m = {
      {0, -1, 0}, {0, 0, -1}, {0, 0, -1},            // right leg
      {0, 1, 0},  {0, 0, -1}, {0, 0, -1},            // left leg
      {0, 0, 1},  {0, 0, 1},  {0, 0, 1}, {0, 0, 1},  // spine..head
      {0, 1, 0},  {0, 0, -1}, {0, 0, -1},            // left arm
      {0, -1, 0}, {0, 0, -1}, {0, 0, -1}};           // right arm
  const JointSet canon = JointSet::h36m17();
  if (js.names == canon.names && js.parents == canon.parents)
    return h36m;
  std::vector<Eigen::Vector3d> dirs;
  Rng rng = Rng::substream(0x726573ULL, static_cast<std::uint64_t>(js.size()));
  for (int j = 0; j < js.size() - 1; ++j) {
    Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
    while (v.norm() < 1e-6) v = {rng.normal(), rng.normal(), rng.normal()};
    dirs.push_back(v.normalized());
  }
  return dirs;
}
}  // namespace detail

inline std::vector<double> default_bone_lengths_mm() {
  return {130, 450, 440, 130, 450, 440, 230, 255,
          120, 115, 160, 280, 250, 160, 280, 250};
}

// Articulated motion by forward kinematics: the root follows a momentum
// random walk (per-frame displacement clamped to the drift bound, softly
// tethered to the origin so every camera keeps the subject in view), each
// joint's local rotation is a two-harmonic band-limited oscillation about a
// fixed random axis, and bone offsets are rotated rest directions, so bone
// lengths are exact by construction.
inline Sequence3D generate_motion(const MotionSpec& spec, const JointSet& js) {
  spec.validate();
  js.validate();
  const int n = js.size();
  std::vector<double> lengths = spec.bone_lengths_mm.empty() && n == 17
                                    ? default_bone_lengths_mm()
                                    : spec.bone_lengths_mm;
  require(static_cast<int>(lengths.size()) == n - 1, errc::config_error,
          "need one bone length per non-root joint (" + std::to_string(n - 1) +
              "), got " + std::to_string(lengths.size()));
  for (double b : lengths)
    require(b > 0, errc::config_error, "zero or negative bone length");

  const std::vector<Eigen::Vector3d> dirs = detail::rest_directions(js);
  // Map joint -> (direction, length) via the shared non-root ordering.
  std::vector<int> slot(static_cast<std::size_t>(n), -1);
  {
    int k = 0;
    for (int j = 0; j < n; ++j)
      if (j != js.root) slot[static_cast<std::size_t>(j)] = k++;
  }

  Rng rng = Rng::substream(spec.seed, 0x6d6f74696f6eULL);
  struct JointOsc {
    Eigen::Vector3d axis;
    double phase1, phase2, amp;
  };
  std::vector<JointOsc> osc(static_cast<std::size_t>(n));
  // Trunk joints (those with two or more children) stay calmer than limbs.
  std::vector<int> child_count(static_cast<std::size_t>(n), 0);
  for (int j = 0; j < n; ++j)
    if (j != js.root) ++child_count[static_cast<std::size_t>(js.parents[j])];
  for (int j = 0; j < n; ++j) {
    Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
    while (axis.norm() < 1e-6) axis = {rng.normal(), rng.normal(), rng.normal()};
    const double scale = child_count[static_cast<std::size_t>(j)] >= 2 ? 0.25 : 1.0;
    osc[static_cast<std::size_t>(j)] = {axis.normalized(), rng.uniform(0, 6.28318530717958648),
                                        rng.uniform(0, 6.28318530717958648),
                                        spec.amplitude_rad * scale};
  }

  // Children in topological order (parents precede children).
  std::vector<int> order;
  {
    std::vector<char> placed(static_cast<std::size_t>(n), 0);
    placed[static_cast<std::size_t>(js.root)] = 1;
    while (static_cast<int>(order.size()) < n - 1)
      for (int j = 0; j < n; ++j)
        if (!placed[static_cast<std::size_t>(j)] &&
            placed[static_cast<std::size_t>(js.parents[j])]) {
          placed[static_cast<std::size_t>(j)] = 1;
          order.push_back(j);
        }
  }

  Sequence3D seq(static_cast<std::size_t>(spec.frames));
  Eigen::Vector3d root_pos = Eigen::Vector3d::Zero();
  Eigen::Vector3d vel = Eigen::Vector3d::Zero();
  std::vector<Eigen::Matrix3d> R(static_cast<std::size_t>(n));
  std::vector<Eigen::Vector3d> X(static_cast<std::size_t>(n));

  for (int f = 0; f < spec.frames; ++f) {
    if (f > 0) {
      // Momentum walk; the tether and clamp act on the velocity, so the
      // realized per-frame displacement never exceeds the drift bound.
      const Eigen::Vector3d kick(rng.normal(), rng.normal(), 0.3 * rng.normal());
      vel = 0.9 * vel + 0.35 * spec.drift_mm_per_frame * kick;
      vel -= 0.004 * spec.drift_mm_per_frame * root_pos;
      const double v = vel.norm();
      if (v > spec.drift_mm_per_frame && v > 0)
        vel *= spec.drift_mm_per_frame / v;
      root_pos += vel;
    }

    const double tsec = static_cast<double>(f) / spec.fps;
    auto angle = [&](int j) {
      const JointOsc& o = osc[static_cast<std::size_t>(j)];
      constexpr double two_pi = 6.28318530717958648;
      return o.amp * (0.7 * std::sin(two_pi * spec.gait_hz * tsec + o.phase1) +
                      0.3 * std::sin(2 * two_pi * spec.gait_hz * tsec + o.phase2));
    };
    auto local = [&](int j) {
      return Eigen::AngleAxisd(angle(j), osc[static_cast<std::size_t>(j)].axis)
          .toRotationMatrix();
    };

    // Slow whole-body yaw on top of the root's own oscillation.
    const double yaw =
        0.5 * std::sin(6.28318530717958648 * 0.07 * spec.gait_hz * tsec +
                       osc[static_cast<std::size_t>(js.root)].phase1);
    R[static_cast<std::size_t>(js.root)] =
        Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix() *
        local(js.root);
    X[static_cast<std::size_t>(js.root)] = root_pos;

    for (int j : order) {
      const int p = js.parents[j];
      const int s = slot[static_cast<std::size_t>(j)];
      R[static_cast<std::size_t>(j)] = R[static_cast<std::size_t>(p)] * local(j);
      X[static_cast<std::size_t>(j)] =
          X[static_cast<std::size_t>(p)] +
          R[static_cast<std::size_t>(p)] *
              (lengths[static_cast<std::size_t>(s)] *
               dirs[static_cast<std::size_t>(s)]);
    }

    Pose3D& pose = seq[static_cast<std::size_t>(f)];
    pose.frame = FrameTag::world();
    pose.coords.assign(X.begin(), X.end());
  }
  return seq;
}

// C cameras equally spaced on a circle, all looking at the origin (the rig
// centre), shared intrinsics with the principal point at the image centre.
inline std::vector<Camera> build_rig(const RigSpec& spec) {
  spec.validate();
  std::vector<Camera> rig;
  const Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  for (int i = 0; i < spec.cameras; ++i) {
    const double phi = 2.0 * 3.14159265358979324 * i / spec.cameras;
    Camera cam;
    cam.id = "cam" + std::to_string(i);
    cam.intrinsics = {spec.focal_px, spec.focal_px, spec.image_w / 2,
                      spec.image_h / 2};
    cam.extrinsics.T = Eigen::Vector3d(spec.radius_mm * std::cos(phi),
                                       spec.radius_mm * std::sin(phi),
                                       spec.height_mm);
    const Eigen::Vector3d fwd = (-cam.extrinsics.T).normalized();
    require(fwd.cross(up).norm() > 1e-9, errc::config_error,
            "camera directly above the rig centre has no defined roll");
    const Eigen::Vector3d x = fwd.cross(up).normalized();
    const Eigen::Vector3d y = fwd.cross(x);
    cam.extrinsics.R.row(0) = x;
    cam.extrinsics.R.row(1) = y;
    cam.extrinsics.R.row(2) = fwd;
    cam.validate();
    rig.push_back(cam);
  }
  return rig;
}

// Projects every frame into every camera and perturbs with i.i.d. Gaussian
// pixel noise. Dropped joints (random dropout, or behind the camera) keep
// their coordinates but get confidence 0. The confidence proxy
// exp(-err^2 / (2 (3 sigma + eps)^2)) is synthetic: downstream code must
// only use it through the drop threshold. One independent noise substream
// per camera, derived from the master seed.
inline std::vector<Sequence2D> render_detections(const Sequence3D& seq,
                                                 const std::vector<Camera>& rig,
                                                 const DetectionNoiseSpec& noise) {
  noise.validate();
  require(!rig.empty(), errc::config_error, "rig has no cameras");
  require(!seq.empty(), errc::shape_error, "empty motion sequence");

  std::vector<Sequence2D> out(rig.size());
  const double denom = 3.0 * noise.sigma_px + 1e-6;
  for (std::size_t c = 0; c < rig.size(); ++c) {
    Rng rng = Rng::substream(noise.seed, static_cast<std::uint64_t>(c));
    Sequence2D& dets = out[c];
    dets.resize(seq.size());
    for (std::size_t f = 0; f < seq.size(); ++f) {
      require(seq[f].frame.is_world(), errc::coordinate_frame,
              "render_detections needs world-frame poses");
      Pose2D& p = dets[f];
      const int n = seq[f].joints();
      p.coords.resize(static_cast<std::size_t>(n));
      p.confidence.emplace(static_cast<std::size_t>(n), 0.0);
      for (int j = 0; j < n; ++j) {
        const auto uv = project_point_checked(
            seq[f].coords[static_cast<std::size_t>(j)], rig[c]);
        double conf;
        Eigen::Vector2d px;
        if (!uv) {
          px = Eigen::Vector2d::Zero();  // behind the camera: dropped
          conf = 0.0;
        } else {
          Eigen::Vector2d delta = Eigen::Vector2d::Zero();
          if (noise.sigma_px > 0)
            delta = noise.sigma_px * Eigen::Vector2d(rng.normal(), rng.normal());
          px = *uv + delta;
          conf = std::exp(-delta.squaredNorm() / (2.0 * denom * denom));
          if (noise.dropout > 0 && rng.bernoulli(noise.dropout)) conf = 0.0;
        }
        p.coords[static_cast<std::size_t>(j)] = px;
        (*p.confidence)[static_cast<std::size_t>(j)] = conf;
      }
    }
  }
  return out;
}

}  // namespace lift3d
