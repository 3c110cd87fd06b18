#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>
#include <cmath>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "lift3d/error.hpp"
#include "lift3d/skeleton.hpp"

namespace lift3d {

struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return k;
  }

  void validate() const {
    require(fx > 0 && fy > 0, errc::config_error,
            "focal lengths must be positive");
    require(std::isfinite(cx) && std::isfinite(cy), errc::config_error,
            "principal point must be finite");
  }
};

// R maps world directions into the camera frame; T is the camera centre in
// world coordinates (mm). X_cam = R * (X_world - T).
struct CameraExtrinsics {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d T = Eigen::Vector3d::Zero();

  void validate(double tol = 1e-9) const {
    const Eigen::Matrix3d err = R * R.transpose() - Eigen::Matrix3d::Identity();
    require(err.cwiseAbs().maxCoeff() <= tol, errc::config_error,
            "rotation is not orthonormal");
    require(std::abs(R.determinant() - 1.0) <= tol, errc::config_error,
            "rotation determinant is not +1");
  }
};

struct Camera {
  std::string id;
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;

  void validate() const {
    require(!id.empty(), errc::config_error, "camera id is empty");
    intrinsics.validate();
    extrinsics.validate();
  }
};

// Rigid map between two camera frames: X_to = R * X_from + T.
struct RelativeTransform {
  Eigen::Matrix3d R;
  Eigen::Vector3d T;
};

inline Eigen::Vector3d world_to_camera_point(const Eigen::Vector3d& x,
                                             const CameraExtrinsics& e) {
  return e.R * (x - e.T);
}

inline Eigen::Vector3d camera_to_world_point(const Eigen::Vector3d& x,
                                             const CameraExtrinsics& e) {
  return e.R.transpose() * x + e.T;
}

inline Pose3D world_to_camera(const Pose3D& p, const Camera& cam) {
  require(p.frame.is_world(), errc::coordinate_frame,
          "world_to_camera needs a world-frame pose, got " + p.frame.str());
  Pose3D out;
  out.frame = FrameTag::camera(cam.id);
  out.coords.reserve(p.coords.size());
  for (const auto& c : p.coords)
    out.coords.push_back(world_to_camera_point(c, cam.extrinsics));
  return out;
}

inline Pose3D camera_to_world(const Pose3D& p, const Camera& cam) {
  require(p.frame == FrameTag::camera(cam.id), errc::coordinate_frame,
          "camera_to_world for camera '" + cam.id + "' got pose tagged " +
              p.frame.str());
  Pose3D out;
  out.frame = FrameTag::world();
  out.coords.reserve(p.coords.size());
  for (const auto& c : p.coords)
    out.coords.push_back(camera_to_world_point(c, cam.extrinsics));
  return out;
}

// Rigid map taking `from`-frame points to `to`-frame points:
// X_to = R_to (X_world - T_to) with X_world recovered from X_from gives
// R = R_to R_from^T and T = R_to (T_from - T_to).
inline RelativeTransform relative_transform(const Camera& from,
                                            const Camera& to) {
  RelativeTransform rt;
  rt.R = to.extrinsics.R * from.extrinsics.R.transpose();
  rt.T = to.extrinsics.R * (from.extrinsics.T - to.extrinsics.T);
  return rt;
}

inline Pose3D apply_relative(const Pose3D& p, const RelativeTransform& rt,
                             const std::string& from_camera_id,
                             const std::string& to_camera_id) {
  require(p.frame == FrameTag::camera(from_camera_id), errc::coordinate_frame,
          "apply_relative expected pose in camera '" + from_camera_id +
              "', got " + p.frame.str());
  Pose3D out;
  out.frame = FrameTag::camera(to_camera_id);
  out.coords.reserve(p.coords.size());
  for (const auto& c : p.coords) out.coords.push_back(rt.R * c + rt.T);
  return out;
}

// 3x4 projection P = K [R | -R T]; P * [X_world; 1] is the homogeneous pixel.
inline Eigen::Matrix<double, 3, 4> projection_matrix(const Camera& cam) {
  Eigen::Matrix<double, 3, 4> rt;
  rt.leftCols<3>() = cam.extrinsics.R;
  rt.col(3) = -cam.extrinsics.R * cam.extrinsics.T;
  return cam.intrinsics.matrix() * rt;
}

// Pinhole projection of a world point; nullopt when depth <= 0.
inline std::optional<Eigen::Vector2d> project_point_checked(
    const Eigen::Vector3d& x_world, const Camera& cam) {
  const Eigen::Vector3d xc = world_to_camera_point(x_world, cam.extrinsics);
  if (!(xc.z() > 0.0)) return std::nullopt;
  return Eigen::Vector2d(cam.intrinsics.fx * xc.x() / xc.z() + cam.intrinsics.cx,
                         cam.intrinsics.fy * xc.y() / xc.z() + cam.intrinsics.cy);
}

// Project a world pose; any joint at or behind the image plane is an error
// naming the joint (callers that tolerate it use project_point_checked).
inline Pose2D project(const Pose3D& p, const Camera& cam,
                      const JointSet* js = nullptr) {
  require(p.frame.is_world(), errc::coordinate_frame,
          "project needs a world-frame pose, got " + p.frame.str());
  Pose2D out;
  out.coords.reserve(p.coords.size());
  for (int j = 0; j < p.joints(); ++j) {
    auto uv = project_point_checked(p.coords[j], cam);
    if (!uv) {
      const std::string name =
          (js && j < js->size()) ? js->names[j] : "#" + std::to_string(j);
      fail(errc::behind_camera, "joint " + name + " has non-positive depth in camera '" +
                                    cam.id + "'");
    }
    out.coords.push_back(*uv);
  }
  return out;
}

// Diagonal length (px) of the image implied by a centred principal point.
// rig files carry no explicit image size; see docs/formats.md.
inline double image_diagonal(const CameraIntrinsics& in) {
  const double d = 2.0 * std::hypot(in.cx, in.cy);
  require(d > 0, errc::config_error, "principal point at origin gives a zero image diagonal");
  return d;
}

inline nlohmann::json camera_to_json(const Camera& cam) {
  nlohmann::json r = nlohmann::json::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.push_back(cam.extrinsics.R(i, j));
  nlohmann::json t = {cam.extrinsics.T.x(), cam.extrinsics.T.y(),
                      cam.extrinsics.T.z()};
  return {{"id", cam.id},          {"fx", cam.intrinsics.fx},
          {"fy", cam.intrinsics.fy}, {"cx", cam.intrinsics.cx},
          {"cy", cam.intrinsics.cy}, {"R", r},
          {"T", t}};
}

inline Camera camera_from_json(const nlohmann::json& j) {
  Camera cam;
  try {
    cam.id = j.at("id").get<std::string>();
    cam.intrinsics.fx = j.at("fx").get<double>();
    cam.intrinsics.fy = j.at("fy").get<double>();
    cam.intrinsics.cx = j.at("cx").get<double>();
    cam.intrinsics.cy = j.at("cy").get<double>();
    const auto& r = j.at("R");
    require(r.is_array() && r.size() == 9, errc::format_error,
            "camera R must be a row-major array of 9 numbers");
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k)
        cam.extrinsics.R(i, k) = r[static_cast<std::size_t>(3 * i + k)].get<double>();
    const auto& t = j.at("T");
    require(t.is_array() && t.size() == 3, errc::format_error,
            "camera T must be an array of 3 numbers");
    for (int i = 0; i < 3; ++i)
      cam.extrinsics.T(i) = t[static_cast<std::size_t>(i)].get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(errc::format_error, std::string("bad camera JSON: ") + e.what());
  }
  cam.validate();
  return cam;
}

inline nlohmann::json rig_to_json(const std::vector<Camera>& rig) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : rig) arr.push_back(camera_to_json(c));
  return arr;
}

inline std::vector<Camera> rig_from_json(const nlohmann::json& j) {
  require(j.is_array(), errc::format_error, "rig JSON must be an array of cameras");
  std::vector<Camera> rig;
  for (const auto& c : j) rig.push_back(camera_from_json(c));
  for (std::size_t a = 0; a < rig.size(); ++a)
    for (std::size_t b = a + 1; b < rig.size(); ++b)
      require(rig[a].id != rig[b].id, errc::format_error,
              "duplicate camera id '" + rig[a].id + "' in rig");
  return rig;
}

}  // namespace lift3d
