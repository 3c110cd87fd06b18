#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lift3d/camera.hpp"
#include "lift3d/error.hpp"
#include "lift3d/skeleton.hpp"
#include "lift3d/tensor.hpp"

namespace lift3d {

// Root-centred, diagonal-scaled 2D input encoding: channel 2j is x and
// channel 2j+1 is y of joint j, as (pixel - root pixel) / image diagonal.
// Returns the [2N, frames] tensor; root pixel positions per frame go to
// `roots` (needed to invert the encoding).
inline Tensor normalize_input(const Sequence2D& seq, const JointSet& js,
                              const CameraIntrinsics& intr,
                              std::vector<Eigen::Vector2d>* roots = nullptr) {
  require(!seq.empty(), errc::shape_error, "cannot normalise an empty sequence");
  const int n = js.size();
  const double diag = image_diagonal(intr);
  Tensor out = Tensor::zeros({2 * n, static_cast<std::int64_t>(seq.size())});
  const std::int64_t F = static_cast<std::int64_t>(seq.size());
  if (roots) roots->resize(seq.size());
  for (std::int64_t f = 0; f < F; ++f) {
    const Pose2D& p = seq[static_cast<std::size_t>(f)];
    require(p.joints() == n, errc::shape_error,
            "frame " + std::to_string(f) + " joint count mismatch");
    const Eigen::Vector2d root = p.coords[static_cast<std::size_t>(js.root)];
    if (roots) (*roots)[static_cast<std::size_t>(f)] = root;
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector2d c =
          (p.coords[static_cast<std::size_t>(j)] - root) / diag;
      out.values[static_cast<std::size_t>((2 * j) * F + f)] = c.x();
      out.values[static_cast<std::size_t>((2 * j + 1) * F + f)] = c.y();
    }
  }
  return out;
}

inline Sequence2D denormalize_input(const Tensor& t, const JointSet& js,
                                    const CameraIntrinsics& intr,
                                    const std::vector<Eigen::Vector2d>& roots) {
  require(t.rank() == 2 && t.dim(0) == 2 * js.size(), errc::shape_error,
          "input tensor must be [2N, frames]");
  const std::int64_t F = t.dim(1);
  require(static_cast<std::int64_t>(roots.size()) == F, errc::shape_error,
          "root positions do not match frame count");
  const double diag = image_diagonal(intr);
  Sequence2D seq(static_cast<std::size_t>(F));
  for (std::int64_t f = 0; f < F; ++f) {
    Pose2D& p = seq[static_cast<std::size_t>(f)];
    p.coords.resize(static_cast<std::size_t>(js.size()));
    for (int j = 0; j < js.size(); ++j) {
      const double x = t.values[static_cast<std::size_t>((2 * j) * F + f)];
      const double y = t.values[static_cast<std::size_t>((2 * j + 1) * F + f)];
      p.coords[static_cast<std::size_t>(j)] =
          roots[static_cast<std::size_t>(f)] + diag * Eigen::Vector2d(x, y);
    }
  }
  return seq;
}

// Triangulation loss for one camera, reference form: mean (or raw sum) over
// frames of the Frobenius norm of (prediction - camera-frame pseudo-label)
// over valid joints. Predictions and pseudo-labels are index-aligned frames;
// pseudo-labels arrive in the world frame and are mapped into the camera.
// Frames with no valid joint do not count toward the mean.
inline double triangulation_loss(const Sequence3D& pred,
                                 const Sequence3D& pseudo_world,
                                 const std::vector<std::vector<std::uint8_t>>& valid,
                                 const Camera& cam, bool count_normalize = true) {
  require(pred.size() == pseudo_world.size() && pred.size() == valid.size(),
          errc::shape_error, "prediction/pseudo-label frame counts differ");
  require(!pred.empty(), errc::empty_loss, "no frames to score");
  double total = 0;
  std::int64_t terms = 0;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    require(pred[f].frame == FrameTag::camera(cam.id), errc::coordinate_frame,
            "prediction must be in camera '" + cam.id + "', got " +
                pred[f].frame.str());
    const Pose3D lbl = world_to_camera(pseudo_world[f], cam);
    require(pred[f].joints() == lbl.joints(), errc::shape_error,
            "joint count mismatch at frame " + std::to_string(f));
    double s = 0;
    bool any = false;
    for (int j = 0; j < pred[f].joints(); ++j) {
      if (!valid[f][static_cast<std::size_t>(j)]) continue;
      any = true;
      s += (pred[f].coords[static_cast<std::size_t>(j)] -
            lbl.coords[static_cast<std::size_t>(j)])
               .squaredNorm();
    }
    if (!any) continue;
    total += std::sqrt(s);
    ++terms;
  }
  if (terms == 0) fail(errc::empty_loss, "every frame had zero valid joints");
  return count_normalize ? total / static_cast<double>(terms) : total;
}

// Multi-view consistency loss, reference form: for every ordered camera pair
// (c, c') and frame, the Frobenius norm between camera c's prediction and
// camera c''s prediction carried into c's frame by the rigid inter-camera
// map. Mean over (pair, frame) terms unless count_normalize is off.
inline double consistency_loss(const std::vector<Sequence3D>& preds,
                               const std::vector<Camera>& cams,
                               bool count_normalize = true) {
  require(preds.size() == cams.size(), errc::shape_error,
          "one prediction sequence per camera required");
  if (cams.size() < 2) return 0.0;
  const std::size_t F = preds.front().size();
  for (const auto& s : preds)
    require(s.size() == F, errc::shape_error, "cameras disagree on frame count");
  require(F > 0, errc::empty_loss, "no frames to score");

  double total = 0;
  std::int64_t terms = 0;
  for (std::size_t a = 0; a < cams.size(); ++a) {
    for (std::size_t b = 0; b < cams.size(); ++b) {
      if (a == b) continue;
      const RelativeTransform rt = relative_transform(cams[b], cams[a]);
      for (std::size_t f = 0; f < F; ++f) {
        const Pose3D carried =
            apply_relative(preds[b][f], rt, cams[b].id, cams[a].id);
        require(preds[a][f].frame == FrameTag::camera(cams[a].id),
                errc::coordinate_frame, "prediction frame tag mismatch");
        double s = 0;
        for (int j = 0; j < carried.joints(); ++j)
          s += (preds[a][f].coords[static_cast<std::size_t>(j)] -
                carried.coords[static_cast<std::size_t>(j)])
                   .squaredNorm();
        total += std::sqrt(s);
        ++terms;
      }
    }
  }
  return count_normalize ? total / static_cast<double>(terms) : total;
}

struct LossReport {
  double l_tri = 0;
  double l_con = 0;
  double total = 0;
};

inline LossReport combine_losses(double l_tri, double l_con, double lambda_tri,
                                 double lambda_con) {
  return {l_tri, l_con, lambda_tri * l_tri + lambda_con * l_con};
}

}  // namespace lift3d
