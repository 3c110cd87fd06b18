#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <map>
#include <json.hpp>
#include <string>
#include <vector>

#include "lift3d/error.hpp"
#include "lift3d/skeleton.hpp"

namespace lift3d {

namespace detail {
inline void check_pair(const Pose3D& pred, const Pose3D& gt) {
  require(pred.joints() == gt.joints(), errc::shape_error,
          "prediction/ground-truth joint counts differ");
  require(pred.frame == gt.frame, errc::coordinate_frame,
          "metric inputs must share a frame: " + pred.frame.str() + " vs " +
              gt.frame.str());
}

inline void check_seqs(const Sequence3D& pred, const Sequence3D& gt) {
  require(pred.size() == gt.size(), errc::shape_error,
          "prediction/ground-truth frame counts differ");
  require(!pred.empty(), errc::shape_error, "no frames to evaluate");
  for (std::size_t f = 0; f < pred.size(); ++f) check_pair(pred[f], gt[f]);
}

// Per-joint distances after root alignment (both poses shifted so their
// roots coincide at the origin). distances[root] is exactly zero.
inline std::vector<double> root_aligned_distances(const Pose3D& pred,
                                                  const Pose3D& gt,
                                                  const JointSet& js) {
  require(pred.joints() == js.size(), errc::shape_error,
          "pose joint count does not match joint set");
  const Eigen::Vector3d pr = pred.coords[static_cast<std::size_t>(js.root)];
  const Eigen::Vector3d gr = gt.coords[static_cast<std::size_t>(js.root)];
  std::vector<double> d(static_cast<std::size_t>(pred.joints()));
  for (int j = 0; j < pred.joints(); ++j)
    d[static_cast<std::size_t>(j)] =
        ((pred.coords[static_cast<std::size_t>(j)] - pr) -
         (gt.coords[static_cast<std::size_t>(j)] - gr))
            .norm();
  return d;
}
}  // namespace detail

// Mean per-joint position error (mm) after per-frame root alignment.
inline double mpjpe(const Sequence3D& pred, const Sequence3D& gt,
                    const JointSet& js) {
  detail::check_seqs(pred, gt);
  double sum = 0;
  std::int64_t count = 0;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    for (double d : detail::root_aligned_distances(pred[f], gt[f], js)) {
      sum += d;
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

struct SimilarityTransform {
  double scale = 1;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const {
    return scale * (R * x) + t;
  }
};

// Least-squares similarity (scale, proper rotation, translation) aligning
// src onto dst, with the determinant-sign correction that keeps R a true
// rotation even when a reflection would fit better.
inline SimilarityTransform procrustes_align(const Pose3D& src, const Pose3D& dst) {
  require(src.joints() == dst.joints(), errc::shape_error,
          "procrustes operands disagree on joint count");
  const int n = src.joints();
  require(n >= 3, errc::alignment_undefined,
          "similarity alignment needs at least 3 joints");

  Eigen::Vector3d mu_s = Eigen::Vector3d::Zero(), mu_d = Eigen::Vector3d::Zero();
  for (int j = 0; j < n; ++j) {
    mu_s += src.coords[static_cast<std::size_t>(j)];
    mu_d += dst.coords[static_cast<std::size_t>(j)];
  }
  mu_s /= n;
  mu_d /= n;

  Eigen::Matrix3d sigma = Eigen::Matrix3d::Zero();
  double var_s = 0;
  for (int j = 0; j < n; ++j) {
    const Eigen::Vector3d s = src.coords[static_cast<std::size_t>(j)] - mu_s;
    const Eigen::Vector3d d = dst.coords[static_cast<std::size_t>(j)] - mu_d;
    sigma += d * s.transpose();
    var_s += s.squaredNorm();
  }
  sigma /= n;
  var_s /= n;
  require(var_s > 1e-18, errc::alignment_undefined,
          "source joints are coincident: similarity alignment undefined");

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d S = Eigen::Vector3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0) S(2) = -1;

  SimilarityTransform out;
  out.R = svd.matrixU() * S.asDiagonal() * svd.matrixV().transpose();
  out.scale = svd.singularValues().dot(S) / var_s;
  out.t = mu_d - out.scale * (out.R * mu_s);
  return out;
}

// MPJPE after aligning each predicted frame to the ground truth with a
// per-frame similarity transform (rotation, translation, scale).
inline double pmpjpe(const Sequence3D& pred, const Sequence3D& gt,
                     const JointSet& js) {
  detail::check_seqs(pred, gt);
  require(js.size() == pred.front().joints(), errc::shape_error,
          "joint set does not match poses");
  double sum = 0;
  std::int64_t count = 0;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    const SimilarityTransform st = procrustes_align(pred[f], gt[f]);
    for (int j = 0; j < js.size(); ++j) {
      sum += (st.apply(pred[f].coords[static_cast<std::size_t>(j)]) -
              gt[f].coords[static_cast<std::size_t>(j)])
                 .norm();
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

// MPJPE after root alignment and one per-frame optimal scale
// s* = <pred, gt> / <pred, pred> applied to the root-centred prediction.
inline double nmpjpe(const Sequence3D& pred, const Sequence3D& gt,
                     const JointSet& js) {
  detail::check_seqs(pred, gt);
  double sum = 0;
  std::int64_t count = 0;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    const Eigen::Vector3d pr = pred[f].coords[static_cast<std::size_t>(js.root)];
    const Eigen::Vector3d gr = gt[f].coords[static_cast<std::size_t>(js.root)];
    double dot = 0, pp = 0;
    for (int j = 0; j < pred[f].joints(); ++j) {
      const Eigen::Vector3d p = pred[f].coords[static_cast<std::size_t>(j)] - pr;
      const Eigen::Vector3d g = gt[f].coords[static_cast<std::size_t>(j)] - gr;
      dot += p.dot(g);
      pp += p.squaredNorm();
    }
    require(pp > 1e-18, errc::alignment_undefined,
            "prediction joints are coincident: optimal scale undefined");
    const double s = dot / pp;
    for (int j = 0; j < pred[f].joints(); ++j) {
      const Eigen::Vector3d p = pred[f].coords[static_cast<std::size_t>(j)] - pr;
      const Eigen::Vector3d g = gt[f].coords[static_cast<std::size_t>(j)] - gr;
      sum += (s * p - g).norm();
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

// Percentage of non-root joints within `threshold_mm` after root alignment.
// The root is excluded: root alignment pins its error to zero, so counting
// it would put a floor under every score. Comparison is inclusive (<=).
inline double pck(const Sequence3D& pred, const Sequence3D& gt,
                  const JointSet& js, double threshold_mm = 150.0) {
  detail::check_seqs(pred, gt);
  require(threshold_mm >= 0, errc::config_error, "threshold must be >= 0");
  std::int64_t hit = 0, count = 0;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    const auto d = detail::root_aligned_distances(pred[f], gt[f], js);
    for (int j = 0; j < pred[f].joints(); ++j) {
      if (j == js.root) continue;
      if (d[static_cast<std::size_t>(j)] <= threshold_mm) ++hit;
      ++count;
    }
  }
  return 100.0 * static_cast<double>(hit) / static_cast<double>(count);
}

// Mean PCK over thresholds 0, 5, ..., 150 mm (31 samples).
inline double auc(const Sequence3D& pred, const Sequence3D& gt,
                  const JointSet& js) {
  double sum = 0;
  int n = 0;
  for (int t = 0; t <= 150; t += 5) {
    sum += pck(pred, gt, js, static_cast<double>(t));
    ++n;
  }
  return sum / n;
}

struct MetricReport {
  double mpjpe = 0;
  double pmpjpe = 0;
  double nmpjpe = 0;
  double pck150 = 0;
  double auc = 0;
  std::int64_t frames = 0;

  nlohmann::json to_json() const {
    return {{"mpjpe", mpjpe},   {"pmpjpe", pmpjpe}, {"nmpjpe", nmpjpe},
            {"pck150", pck150}, {"auc", auc},       {"frames", frames}};
  }
};

inline MetricReport evaluate_metrics(const Sequence3D& pred,
                                     const Sequence3D& gt, const JointSet& js) {
  MetricReport r;
  r.mpjpe = mpjpe(pred, gt, js);
  r.pmpjpe = pmpjpe(pred, gt, js);
  r.nmpjpe = nmpjpe(pred, gt, js);
  r.pck150 = pck(pred, gt, js, 150.0);
  r.auc = auc(pred, gt, js);
  r.frames = static_cast<std::int64_t>(pred.size());
  return r;
}

// Metrics per action label plus the all-frame aggregate under "all".
inline std::map<std::string, MetricReport> evaluate_per_action(
    const Sequence3D& pred, const Sequence3D& gt, const JointSet& js,
    const std::vector<std::string>& actions) {
  require(actions.size() == pred.size(), errc::shape_error,
          "one action label per frame required");
  std::map<std::string, std::pair<Sequence3D, Sequence3D>> buckets;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    auto& b = buckets[actions[f]];
    b.first.push_back(pred[f]);
    b.second.push_back(gt[f]);
  }
  std::map<std::string, MetricReport> out;
  for (auto& [name, b] : buckets)
    out[name] = evaluate_metrics(b.first, b.second, js);
  out["all"] = evaluate_metrics(pred, gt, js);
  return out;
}

}  // namespace lift3d
