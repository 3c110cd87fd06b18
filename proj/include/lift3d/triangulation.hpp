#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lift3d/camera.hpp"
#include "lift3d/error.hpp"
#include "lift3d/skeleton.hpp"

namespace lift3d {

struct Observation {
  Eigen::Vector2d uv;
  Eigen::Matrix<double, 3, 4> P;
};

struct TriangulationResult {
  Eigen::Vector3d point;      // world, mm
  double rms_residual_px = 0; // RMS over per-view reprojection errors
};

// Direct linear transform with reprojection polish. Each view contributes
// the two rows u*p3^T - p1^T and v*p3^T - p2^T; the world point is the right
// singular vector for the smallest singular value of the stacked system.
// Conditioning: projection rows are first scaled so ||p3|| = 1 per view
// (making the output invariant to per-view scaling of P), then each view is
// normalised by its own calibration: principal point to the origin, focal
// lengths to one, both read off the scaled rows (cx = p1.p3, fx = |p1 -
// cx p3|, zero skew). Every row of the stacked system is then O(1) no matter
// where the observations sit in the image.
// The algebraic minimiser is only a proxy for reprojection error, and its
// implicit weighting collapses near the mutual focus of a convergent rig --
// exactly where a tracked subject stands. There the fourth column of the
// stacked system carries the camera distance while the first three stay
// O(1), so under detection noise the smallest singular vector can be a
// quasi-infinite point with no relation to the observations. A second
// candidate therefore fixes w = 1 and solves the three-column least squares,
// which is well conditioned precisely when the point is finite; whichever
// candidate reprojects better seeds a short damped Gauss-Newton descent on
// the pixel residuals. With exact data both candidates coincide with the
// optimum and the polish is a no-op.
inline TriangulationResult triangulate_point(
    const std::vector<Observation>& views, int min_views = 2) {
  require(min_views >= 2, errc::config_error, "min_views must be at least 2");
  const int n = static_cast<int>(views.size());
  require(n >= min_views, errc::insufficient_views,
          "triangulation needs at least " + std::to_string(min_views) +
              " views, got " + std::to_string(n));

  // Per-view projection scaling.
  std::vector<Eigen::Matrix<double, 3, 4>> P(views.size());
  for (int i = 0; i < n; ++i) {
    const double s = views[i].P.row(2).head<3>().norm();
    require(s > 1e-300, errc::degenerate_geometry,
            "projection matrix has a vanishing third row");
    P[i] = views[i].P / s;
  }

  Eigen::MatrixXd A(2 * n, 4);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d r1 = P[i].row(0).head<3>();
    const Eigen::Vector3d r2 = P[i].row(1).head<3>();
    const Eigen::Vector3d r3 = P[i].row(2).head<3>();
    const double cx = r1.dot(r3);
    const double cy = r2.dot(r3);
    const double fx = (r1 - cx * r3).norm();
    const double fy = (r2 - cy * r3).norm();
    require(fx > 1e-12 && fy > 1e-12, errc::degenerate_geometry,
            "projection matrix has a vanishing focal length");
    Eigen::Matrix3d Ti = Eigen::Matrix3d::Identity();
    Ti(0, 0) = 1.0 / fx;
    Ti(1, 1) = 1.0 / fy;
    Ti(0, 2) = -cx / fx;
    Ti(1, 2) = -cy / fy;
    const Eigen::Matrix<double, 3, 4> Pn = Ti * P[i];
    const Eigen::Vector2d uv((views[i].uv.x() - cx) / fx,
                             (views[i].uv.y() - cy) / fy);
    A.row(2 * i) = uv.x() * Pn.row(2) - Pn.row(0);
    A.row(2 * i + 1) = uv.y() * Pn.row(2) - Pn.row(1);
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // A well-posed system has rank 3 (one-dimensional null space). Rank <= 2
  // means the views do not pin down a point (e.g. coincident cameras).
  require(sv(2) > 1e-10 * sv(0), errc::degenerate_geometry,
          "ambiguous triangulation: observation rays do not intersect in a point");

  const auto reproj_sq = [&](const Eigen::Vector3d& X) {
    double sq = 0;
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector3d proj = P[i] * X.homogeneous();
      require(std::abs(proj.z()) > 1e-9, errc::degenerate_geometry,
              "triangulated point lies on a camera's principal plane");
      const Eigen::Vector2d uv(proj.x() / proj.z(), proj.y() / proj.z());
      sq += (uv - views[i].uv).squaredNorm();
    }
    return sq;
  };
  // Residual of a candidate, or nothing when it cannot even be reprojected.
  const auto safe_sq = [&](const Eigen::Vector3d& X) -> std::optional<double> {
    try {
      return reproj_sq(X);
    } catch (const Error&) {
      return std::nullopt;
    }
  };

  // Homogeneous candidate: usable unless the null vector sits at infinity.
  std::optional<Eigen::Vector3d> cand_h;
  {
    const Eigen::Vector4d xh = svd.matrixV().col(3);
    const double w = xh(3);
    if (std::abs(w) > 1e-12 * std::max(xh.head<3>().norm(), 1e-300))
      cand_h = Eigen::Vector3d(xh.head<3>() / w);
  }
  // Inhomogeneous candidate: usable unless the rays are parallel, in which
  // case no finite point exists and the three columns lose rank.
  std::optional<Eigen::Vector3d> cand_i;
  {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd3(
        A.leftCols(3), Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd3.singularValues()(2) > 1e-10 * svd3.singularValues()(0))
      cand_i = Eigen::Vector3d(svd3.solve(-A.col(3)));
  }

  const std::optional<double> sq_h = cand_h ? safe_sq(*cand_h) : std::nullopt;
  const std::optional<double> sq_i = cand_i ? safe_sq(*cand_i) : std::nullopt;
  require(sq_h || sq_i, errc::degenerate_geometry,
          "triangulated point at infinity");

  TriangulationResult out;
  out.point = sq_h && (!sq_i || *sq_h <= *sq_i) ? *cand_h : *cand_i;

  // Gauss-Newton on the stacked pixel residuals. Steps that fail to improve
  // are retried with Levenberg damping; if nothing improves, the current
  // estimate stands (the DLT point already passed the degeneracy checks).
  double best_sq = reproj_sq(out.point);
  for (int iter = 0; iter < 25 && best_sq > 0; ++iter) {
    Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector3d proj = P[i] * out.point.homogeneous();
      const double z = proj.z();
      const Eigen::Vector2d r(proj.x() / z - views[i].uv.x(),
                              proj.y() / z - views[i].uv.y());
      Eigen::Matrix<double, 2, 3> J;
      for (int k = 0; k < 3; ++k) {
        J(0, k) = (P[i](0, k) * z - proj.x() * P[i](2, k)) / (z * z);
        J(1, k) = (P[i](1, k) * z - proj.y() * P[i](2, k)) / (z * z);
      }
      H += J.transpose() * J;
      g += J.transpose() * r;
    }
    bool improved = false;
    double lambda = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::Matrix3d Hd = H;
      Hd.diagonal().array() += lambda;
      const Eigen::Vector3d step = Hd.ldlt().solve(g);
      if (!step.allFinite()) break;
      // A step leaping orders of magnitude past the current scale is the
      // quadratic model extrapolating outside its validity; damp it instead
      // of trusting whatever residual the far point happens to have.
      if (step.norm() > 1e4 * (1.0 + out.point.norm())) {
        lambda = lambda == 0.0 ? 1e-6 * H.trace() : 10.0 * lambda;
        continue;
      }
      const Eigen::Vector3d cand = out.point - step;
      double cand_sq;
      try {
        cand_sq = reproj_sq(cand);
      } catch (const Error&) {
        lambda = lambda == 0.0 ? 1e-6 * H.trace() : 10.0 * lambda;
        continue;
      }
      if (cand_sq < best_sq) {
        const bool converged = step.norm() < 1e-10 * (1.0 + cand.norm());
        out.point = cand;
        best_sq = cand_sq;
        improved = true;
        if (converged) iter = 25;
        break;
      }
      lambda = lambda == 0.0 ? 1e-6 * H.trace() : 10.0 * lambda;
    }
    if (!improved) break;
  }

  out.rms_residual_px = std::sqrt(reproj_sq(out.point) / n);
  require(std::isfinite(out.rms_residual_px) && out.point.allFinite(),
          errc::degenerate_geometry, "non-finite triangulation result");
  return out;
}

struct TriangulatedPose {
  Pose3D pose;                       // world frame; invalid joints zeroed
  std::vector<std::uint8_t> valid;   // per joint
  std::vector<double> residual_px;   // per joint RMS; 0 where invalid
  int valid_count = 0;
};

struct ViewedPose {
  Pose2D detections;
  Camera camera;
};

// Per-joint DLT across all views whose confidence clears `conf_threshold`.
// Joints that end up with fewer than min_views usable observations, or whose
// triangulation degenerates, are marked invalid instead of aborting; only a
// pose with zero valid joints is an error.
inline TriangulatedPose triangulate_pose(const std::vector<ViewedPose>& views,
                                         int min_views = 2,
                                         double conf_threshold = 0.05) {
  require(static_cast<int>(views.size()) >= min_views, errc::insufficient_views,
          "pose triangulation needs at least " + std::to_string(min_views) +
              " camera views, got " + std::to_string(views.size()));
  const int joints = views.front().detections.joints();
  for (const auto& v : views)
    require(v.detections.joints() == joints, errc::shape_error,
            "camera views disagree on joint count");

  std::vector<Eigen::Matrix<double, 3, 4>> P;
  P.reserve(views.size());
  for (const auto& v : views) P.push_back(projection_matrix(v.camera));

  TriangulatedPose out;
  out.pose.frame = FrameTag::world();
  out.pose.coords.assign(static_cast<std::size_t>(joints),
                         Eigen::Vector3d::Zero());
  out.valid.assign(static_cast<std::size_t>(joints), 0);
  out.residual_px.assign(static_cast<std::size_t>(joints), 0.0);

  std::vector<Observation> obs;
  for (int j = 0; j < joints; ++j) {
    obs.clear();
    for (std::size_t v = 0; v < views.size(); ++v) {
      if (views[v].detections.confidence_at(j) < conf_threshold) continue;
      obs.push_back({views[v].detections.coords[static_cast<std::size_t>(j)], P[v]});
    }
    if (static_cast<int>(obs.size()) < min_views) continue;
    try {
      const TriangulationResult r = triangulate_point(obs, min_views);
      out.pose.coords[static_cast<std::size_t>(j)] = r.point;
      out.residual_px[static_cast<std::size_t>(j)] = r.rms_residual_px;
      out.valid[static_cast<std::size_t>(j)] = 1;
      ++out.valid_count;
    } catch (const Error& e) {
      if (e.class_id() != errc::degenerate_geometry) throw;
    }
  }
  require(out.valid_count > 0, errc::degenerate_geometry,
          "all joints degenerate: no joint could be triangulated");
  return out;
}

}  // namespace lift3d
