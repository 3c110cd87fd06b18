#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lift3d/error.hpp"

namespace lift3d {

// Coordinate-frame tag carried by every 3D pose. World- and camera-frame
// quantities must never mix silently; operations that care check the tag.
struct FrameTag {
  enum class Kind { World, Camera };
  Kind kind = Kind::World;
  std::string camera_id;  // empty unless kind == Camera

  static FrameTag world() { return FrameTag{}; }
  static FrameTag camera(std::string id) {
    return FrameTag{Kind::Camera, std::move(id)};
  }

  bool is_world() const { return kind == Kind::World; }
  bool is_camera() const { return kind == Kind::Camera; }

  bool operator==(const FrameTag& o) const {
    return kind == o.kind && camera_id == o.camera_id;
  }
  bool operator!=(const FrameTag& o) const { return !(*this == o); }

  std::string str() const {
    return is_world() ? std::string("world") : "camera:" + camera_id;
  }

  static FrameTag parse(const std::string& s) {
    if (s == "world") return world();
    if (s.rfind("camera:", 0) == 0) return camera(s.substr(7));
    fail(errc::format_error, "unknown coordinate-frame tag '" + s + "'");
  }
};

// Kinematic tree over named joints. parents[root] == -1; symmetry pairs are
// (left, right) index pairs used by horizontal flips.
struct JointSet {
  std::vector<std::string> names;
  std::vector<int> parents;
  int root = 0;
  std::vector<std::pair<int, int>> symmetry_pairs;

  int size() const { return static_cast<int>(names.size()); }

  void validate() const {
    const int n = size();
    require(n > 0, errc::invalid_joint_set, "joint set is empty");
    require(static_cast<int>(parents.size()) == n, errc::invalid_joint_set,
            "parents size does not match joint count");
    require(root >= 0 && root < n, errc::invalid_joint_set,
            "root index out of range");
    require(parents[root] == -1, errc::invalid_joint_set,
            "root joint must have parent -1");
    for (int j = 0; j < n; ++j) {
      if (j == root) continue;
      require(parents[j] >= 0 && parents[j] < n, errc::invalid_joint_set,
              "parent index out of range for joint '" + names[j] + "'");
      require(parents[j] != j, errc::invalid_joint_set,
              "joint '" + names[j] + "' is its own parent");
    }
    // Exactly one root, and every chain terminates there (no cycles, no
    // second tree). Walking n steps without reaching the root means a cycle.
    for (int j = 0; j < n; ++j) {
      if (j == root) continue;
      require(parents[j] != -1, errc::invalid_joint_set,
              "joint '" + names[j] + "' is a second root");
      int cur = j;
      for (int step = 0; cur != root; ++step) {
        require(step < n, errc::invalid_joint_set,
                "cycle in parent chain at joint '" + names[j] + "'");
        cur = parents[cur];
      }
    }
    std::vector<char> used(static_cast<std::size_t>(n), 0);
    for (const auto& [l, r] : symmetry_pairs) {
      require(l >= 0 && l < n && r >= 0 && r < n, errc::invalid_joint_set,
              "symmetry pair index out of range");
      require(l != r, errc::invalid_joint_set,
              "symmetry pair maps a joint to itself");
      require(l != root && r != root, errc::invalid_joint_set,
              "root joint cannot be part of a symmetry pair");
      require(!used[l] && !used[r], errc::invalid_joint_set,
              "joint appears in more than one symmetry pair");
      used[l] = used[r] = 1;
    }
  }

  // 17-joint set: pelvis root, two legs, spine/neck/head, two arms.
  static JointSet h36m17() {
    JointSet js;
    js.names = {"Hip",   "RHip",      "RKnee",  "RFoot",  "LHip",  "LKnee",
                "LFoot", "Spine",     "Thorax", "Neck",   "Head",  "LShoulder",
                "LElbow", "LWrist",   "RShoulder", "RElbow", "RWrist"};
    js.parents = {-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15};
    js.root = 0;
    js.symmetry_pairs = {{4, 1}, {5, 2}, {6, 3}, {11, 14}, {12, 15}, {13, 16}};
    js.validate();
    return js;
  }

  nlohmann::json to_json() const {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& [l, r] : symmetry_pairs) pairs.push_back({l, r});
    return {{"names", names},
            {"parents", parents},
            {"root", root},
            {"symmetry_pairs", pairs}};
  }

  static JointSet from_json(const nlohmann::json& j) {
    JointSet js;
    try {
      js.names = j.at("names").get<std::vector<std::string>>();
      js.parents = j.at("parents").get<std::vector<int>>();
      js.root = j.at("root").get<int>();
      for (const auto& p : j.at("symmetry_pairs")) {
        require(p.is_array() && p.size() == 2, errc::format_error,
                "symmetry pair must be a [left, right] array");
        js.symmetry_pairs.emplace_back(p[0].get<int>(), p[1].get<int>());
      }
    } catch (const nlohmann::json::exception& e) {
      fail(errc::format_error, std::string("bad joint-set JSON: ") + e.what());
    }
    js.validate();
    return js;
  }
};

// One frame of 2D detections for one camera, pixel units. Confidence is
// optional; absent means fully trusted.
struct Pose2D {
  std::vector<Eigen::Vector2d> coords;
  std::optional<std::vector<double>> confidence;

  int joints() const { return static_cast<int>(coords.size()); }

  double confidence_at(int j) const {
    return confidence ? (*confidence)[j] : 1.0;
  }
};

// One frame of 3D joint positions in millimetres, tagged with its frame.
struct Pose3D {
  std::vector<Eigen::Vector3d> coords;
  FrameTag frame = FrameTag::world();

  int joints() const { return static_cast<int>(coords.size()); }
};

using Sequence2D = std::vector<Pose2D>;
using Sequence3D = std::vector<Pose3D>;

namespace detail {
template <typename Pose>
void swap_symmetric(Pose& p, const JointSet& js) {
  for (const auto& [l, r] : js.symmetry_pairs) std::swap(p.coords[l], p.coords[r]);
}
}  // namespace detail

// Mirror a 2D pose about the vertical image centreline and relabel
// left/right joints. Inverse of itself for the same width.
inline Pose2D flip_pose2d(const Pose2D& p, const JointSet& js,
                          double image_width) {
  require(p.joints() == js.size(), errc::shape_error,
          "pose joint count does not match joint set");
  js.validate();
  Pose2D out = p;
  for (auto& c : out.coords) c.x() = image_width - c.x();
  detail::swap_symmetric(out, js);
  if (out.confidence) {
    for (const auto& [l, r] : js.symmetry_pairs)
      std::swap((*out.confidence)[l], (*out.confidence)[r]);
  }
  return out;
}

// Mirror a 3D pose about the sagittal plane through its root (x constant at
// the root) and relabel left/right joints. Root position is unchanged.
inline Pose3D flip_pose3d(const Pose3D& p, const JointSet& js) {
  require(p.joints() == js.size(), errc::shape_error,
          "pose joint count does not match joint set");
  js.validate();
  Pose3D out = p;
  const double root_x = p.coords[js.root].x();
  for (auto& c : out.coords) c.x() = 2.0 * root_x - c.x();
  detail::swap_symmetric(out, js);
  return out;
}

// Parent->child bone lengths, one per non-root joint in increasing joint
// index order. Rigid motions of the pose leave the result unchanged.
inline std::vector<double> bone_lengths(const Pose3D& p, const JointSet& js) {
  require(p.joints() == js.size(), errc::shape_error,
          "pose joint count does not match joint set");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(js.size()) - 1);
  for (int j = 0; j < js.size(); ++j) {
    if (j == js.root) continue;
    out.push_back((p.coords[j] - p.coords[js.parents[j]]).norm());
  }
  return out;
}

// Non-root joint indices in the order bone_lengths() reports them.
inline std::vector<int> bone_children(const JointSet& js) {
  std::vector<int> out;
  for (int j = 0; j < js.size(); ++j)
    if (j != js.root) out.push_back(j);
  return out;
}

}  // namespace lift3d
