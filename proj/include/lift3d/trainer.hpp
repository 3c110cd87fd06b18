#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "lift3d/camera.hpp"
#include "lift3d/dataset_io.hpp"
#include "lift3d/error.hpp"
#include "lift3d/log.hpp"
#include "lift3d/losses.hpp"
#include "lift3d/optimizer.hpp"
#include "lift3d/rng.hpp"
#include "lift3d/tcn.hpp"
#include "lift3d/triangulation.hpp"

namespace lift3d {

// Per-frame DLT across a fixed camera set. A frame where every joint
// degenerates becomes an all-invalid entry (the trainer skips it) instead of
// aborting the batch job. Frames are independent, so `workers` threads can
// split them without changing any result.
inline std::vector<TriangulatedPose> triangulate_frames(
    const std::vector<Camera>& cams, const std::vector<Sequence2D>& dets,
    int min_views = 2, double conf_threshold = 0.05, int workers = 1) {
  require(cams.size() == dets.size(), errc::shape_error,
          "one detection sequence per camera required");
  require(!dets.empty() && !dets[0].empty(), errc::shape_error,
          "nothing to triangulate");
  const std::size_t F = dets[0].size();
  for (const auto& d : dets)
    require(d.size() == F, errc::shape_error, "cameras disagree on frame count");
  const int joints = dets[0][0].joints();

  std::vector<TriangulatedPose> out(F);
  auto run = [&](std::size_t lo, std::size_t hi) {
    std::vector<ViewedPose> views(cams.size());
    for (std::size_t c = 0; c < cams.size(); ++c) views[c].camera = cams[c];
    for (std::size_t f = lo; f < hi; ++f) {
      for (std::size_t c = 0; c < cams.size(); ++c)
        views[c].detections = dets[c][f];
      try {
        out[f] = triangulate_pose(views, min_views, conf_threshold);
      } catch (const Error& e) {
        if (e.class_id() != errc::degenerate_geometry) throw;
        TriangulatedPose blank;
        blank.pose.frame = FrameTag::world();
        blank.pose.coords.assign(static_cast<std::size_t>(joints),
                                 Eigen::Vector3d::Zero());
        blank.valid.assign(static_cast<std::size_t>(joints), 0);
        blank.residual_px.assign(static_cast<std::size_t>(joints), 0.0);
        out[f] = std::move(blank);
      }
    }
  };

  const int nw = std::max(1, std::min<int>(workers, static_cast<int>(F)));
  if (nw == 1) {
    run(0, F);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (F + static_cast<std::size_t>(nw) - 1) /
                              static_cast<std::size_t>(nw);
    for (int w = 0; w < nw; ++w) {
      const std::size_t lo = static_cast<std::size_t>(w) * chunk;
      const std::size_t hi = std::min(F, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(run, lo, hi);
    }
    for (auto& t : pool) t.join();
  }
  return out;
}

// Everything one training or evaluation job needs, with cameras already
// narrowed to the requested subset (pseudo-labels come from exactly these
// cameras, so smaller rigs honestly pay their triangulation penalty).
struct TrainData {
  JointSet joints;
  std::vector<Camera> cams;
  std::vector<Sequence2D> dets;
  std::vector<TriangulatedPose> pseudo;

  std::size_t frames() const { return dets.empty() ? 0 : dets[0].size(); }

  static TrainData from_bundle(const DatasetBundle& bundle,
                               const std::vector<std::string>& camera_subset,
                               int min_views = 2, double conf_threshold = 0.05,
                               int workers = 1) {
    bundle.validate();
    TrainData d;
    d.joints = bundle.joints;
    if (camera_subset.empty()) {
      d.cams = bundle.rig;
      d.dets = bundle.detections;
    } else {
      for (const auto& id : camera_subset) {
        bool found = false;
        for (std::size_t c = 0; c < bundle.rig.size(); ++c) {
          if (bundle.rig[c].id != id) continue;
          d.cams.push_back(bundle.rig[c]);
          d.dets.push_back(bundle.detections[c]);
          found = true;
          break;
        }
        require(found, errc::config_error,
                "camera '" + id + "' is not in the rig");
      }
    }
    require(static_cast<int>(d.cams.size()) >= 2, errc::insufficient_views,
            "training needs at least 2 cameras, got " +
                std::to_string(d.cams.size()));
    d.pseudo =
        triangulate_frames(d.cams, d.dets, min_views, conf_threshold, workers);
    return d;
  }
};

struct EpochLog {
  int epoch = 0;
  double lr = 0;
  double l_tri = 0;
  double l_con = 0;
  double total = 0;
  double wall_seconds = 0;
};

struct TrainResult {
  std::vector<EpochLog> log;
};

namespace detail {

// The network regresses root-relative camera-frame pose in metres: offsets
// from the root joint fit the optimizer's step scale, where raw camera-frame
// millimetre coordinates (thousands) would be unreachable within the
// published schedule. Predictions are rescaled to millimetres at the API
// boundary (predict_sequence) and in the epoch logs.
constexpr double kMetersPerMm = 1e-3;
constexpr double kMmPerMeter = 1e3;

// Per-camera precomputed training arrays, original and mirrored. The mirror
// is taken about the camera's principal axis (u -> 2 cx - u in pixels,
// x -> -x in the camera frame) with left/right joints relabeled; that pairing
// is exact under the pinhole model, so a mirrored window is just another
// valid sample.
struct CameraArrays {
  Tensor input;        // [2N, F] normalised detections
  Tensor input_flip;
  Tensor target;       // [3N, F] root-relative camera-frame pseudo-labels, m
  Tensor target_flip;
  std::vector<std::uint8_t> mask;       // [N, F]
  std::vector<std::uint8_t> mask_flip;
};

inline CameraArrays build_camera_arrays(const TrainData& data, std::size_t c) {
  const JointSet& js = data.joints;
  const Camera& cam = data.cams[c];
  const std::int64_t F = static_cast<std::int64_t>(data.frames());
  const int n = js.size();
  const std::size_t root = static_cast<std::size_t>(js.root);

  CameraArrays a;
  a.input = normalize_input(data.dets[c], js, cam.intrinsics);
  {
    Sequence2D flipped(data.dets[c].size());
    const double width = 2.0 * cam.intrinsics.cx;
    for (std::size_t f = 0; f < flipped.size(); ++f)
      flipped[f] = flip_pose2d(data.dets[c][f], js, width);
    a.input_flip = normalize_input(flipped, js, cam.intrinsics);
  }

  a.target = Tensor::zeros({3 * n, F});
  a.target_flip = Tensor::zeros({3 * n, F});
  a.mask.assign(static_cast<std::size_t>(n * F), 0);
  a.mask_flip.assign(static_cast<std::size_t>(n * F), 0);
  for (std::int64_t f = 0; f < F; ++f) {
    const TriangulatedPose& tp = data.pseudo[static_cast<std::size_t>(f)];
    // Root-relative targets need the root itself; without it the frame
    // cannot supervise anything.
    if (!tp.valid[root]) continue;
    Pose3D lbl = world_to_camera(tp.pose, cam);
    const Eigen::Vector3d root_pos = lbl.coords[root];
    for (auto& x : lbl.coords) x = (x - root_pos) * kMetersPerMm;
    Pose3D lbl_flip = lbl;
    for (auto& x : lbl_flip.coords) x.x() = -x.x();
    std::vector<std::uint8_t> valid_flip = tp.valid;
    for (const auto& [l, r] : js.symmetry_pairs) {
      std::swap(lbl_flip.coords[static_cast<std::size_t>(l)],
                lbl_flip.coords[static_cast<std::size_t>(r)]);
      std::swap(valid_flip[static_cast<std::size_t>(l)],
                valid_flip[static_cast<std::size_t>(r)]);
    }
    for (int j = 0; j < n; ++j) {
      for (int r = 0; r < 3; ++r) {
        a.target.values[static_cast<std::size_t>((3 * j + r) * F + f)] =
            lbl.coords[static_cast<std::size_t>(j)](r);
        a.target_flip.values[static_cast<std::size_t>((3 * j + r) * F + f)] =
            lbl_flip.coords[static_cast<std::size_t>(j)](r);
      }
      a.mask[static_cast<std::size_t>(j * F + f)] =
          tp.valid[static_cast<std::size_t>(j)];
      a.mask_flip[static_cast<std::size_t>(j * F + f)] =
          valid_flip[static_cast<std::size_t>(j)];
    }
  }
  return a;
}

inline Eigen::Matrix3d mirror_conjugate(const Eigen::Matrix3d& R) {
  Eigen::Matrix3d out = R;
  // M R M with M = diag(-1, 1, 1): negate the off-diagonal x row/column.
  out(0, 1) = -R(0, 1);
  out(0, 2) = -R(0, 2);
  out(1, 0) = -R(1, 0);
  out(2, 0) = -R(2, 0);
  return out;
}

}  // namespace detail

// Joint self-supervised training over all cameras: per batch of windows,
// every camera's window is lifted, the triangulation term pulls each
// prediction toward the camera-frame pseudo-labels at the supervised centre
// frame, and the consistency term ties every ordered camera pair together
// through the rigid inter-camera map. One AdamW step per batch with the
// exponentially decayed schedule. Epoch indices are global: a resumed model
// continues its counter, and cfg.epochs is the total target.
inline TrainResult train(TcnModel& model, const TrainData& data,
                         const TrainConfig& cfg,
                         const std::function<void(const EpochLog&)>& on_epoch =
                             nullptr) {
  cfg.validate();
  require(model.config().num_joints == data.joints.size(), errc::config_error,
          "model joint count does not match dataset");
  const int L = model.receptive_field();
  const std::int64_t F = static_cast<std::int64_t>(data.frames());
  require(F >= L, errc::sequence_too_short,
          "dataset has " + std::to_string(F) +
              " frames, the receptive field needs " + std::to_string(L));
  const std::size_t C = data.cams.size();
  require(C >= 1, errc::insufficient_views, "no cameras");
  if (C < 2)
    log_warn("single camera: consistency loss is identically 0");

  const int n = data.joints.size();
  std::vector<detail::CameraArrays> arrays;
  arrays.reserve(C);
  for (std::size_t c = 0; c < C; ++c)
    arrays.push_back(detail::build_camera_arrays(data, c));

  // Ordered camera pairs (target a <- source b). Root-relative coordinates
  // quotient out translation, so the inter-camera map reduces to the relative
  // rotation (plus its mirror conjugate for flipped windows).
  struct Pair {
    std::size_t a, b;
    Eigen::Matrix3d R, Rf;
  };
  std::vector<Pair> pairs;
  for (std::size_t a = 0; a < C; ++a)
    for (std::size_t b = 0; b < C; ++b) {
      if (a == b) continue;
      const RelativeTransform rt = relative_transform(data.cams[b], data.cams[a]);
      Pair p;
      p.a = a;
      p.b = b;
      p.R = rt.R;
      p.Rf = detail::mirror_conjugate(rt.R);
      pairs.push_back(p);
    }

  std::vector<std::int64_t> starts;
  for (std::int64_t s = 0; s + L <= F; ++s) starts.push_back(s);
  const std::int64_t center_off = (L - 1) / 2;

  Rng shuffle_rng = Rng::substream(cfg.seed, 0x73687566ULL);
  Rng flip_rng = Rng::substream(cfg.seed, 0x666c6970ULL);
  Rng drop_rng = Rng::substream(cfg.seed, 0x64726f70ULL);

  AdamState adam(model);
  const bool frozen = cfg.lambda_tri == 0.0 && cfg.lambda_con == 0.0;
  if (frozen)
    log_warn("both loss weights are 0: losses are logged but no step is taken");

  TrainResult result;
  model.set_training(true);

  for (int epoch = model.trained_epochs(); epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_at_epoch(cfg, epoch);
    shuffle_rng.shuffle(starts);

    double tri_sum = 0, con_sum = 0;
    std::int64_t tri_terms = 0, con_terms = 0;

    for (std::size_t batch_lo = 0; batch_lo < starts.size();
         batch_lo += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t nb = std::min<std::size_t>(
          static_cast<std::size_t>(cfg.batch_size), starts.size() - batch_lo);

      std::vector<std::int64_t> ws(starts.begin() + static_cast<std::ptrdiff_t>(batch_lo),
                                   starts.begin() + static_cast<std::ptrdiff_t>(batch_lo + nb));
      std::vector<char> flip(nb, 0);
      if (cfg.flip_prob > 0)
        for (std::size_t i = 0; i < nb; ++i)
          flip[i] = flip_rng.bernoulli(cfg.flip_prob) ? 1 : 0;

      // Count loss terms first so every per-camera node shares the same
      // normaliser.
      std::int64_t k_tri = 0;
      for (std::size_t c = 0; c < C; ++c) {
        const auto& mask = arrays[c].mask;
        const auto& mask_f = arrays[c].mask_flip;
        for (std::size_t i = 0; i < nb; ++i) {
          const std::int64_t t = ws[i] + center_off;
          const auto& m = flip[i] ? mask_f : mask;
          for (int j = 0; j < n; ++j)
            if (m[static_cast<std::size_t>(j) * static_cast<std::size_t>(F) +
                  static_cast<std::size_t>(t)]) {
              ++k_tri;
              break;
            }
        }
      }
      const std::int64_t k_con =
          C >= 2 ? static_cast<std::int64_t>(nb) *
                       static_cast<std::int64_t>(pairs.size())
                 : 0;
      const double inv_tri =
          cfg.count_normalize ? (k_tri > 0 ? 1.0 / static_cast<double>(k_tri) : 0.0)
                              : 1.0;
      const double inv_con =
          cfg.count_normalize ? (k_con > 0 ? 1.0 / static_cast<double>(k_con) : 0.0)
                              : 1.0;

      Tape tape;
      std::vector<Tape::NodeId> preds(C);
      std::vector<std::pair<double, Tape::NodeId>> tri_nodes;
      for (std::size_t c = 0; c < C; ++c) {
        const auto& a = arrays[c];
        Tensor in = Tensor::zeros({static_cast<std::int64_t>(nb), 2 * n, L});
        auto target = std::make_shared<Tensor>(
            Tensor::zeros({static_cast<std::int64_t>(nb), 3 * n, 1}));
        auto mask = std::make_shared<std::vector<std::uint8_t>>(
            nb * static_cast<std::size_t>(n), 0);
        for (std::size_t i = 0; i < nb; ++i) {
          const std::int64_t s = ws[i];
          const std::int64_t t = s + center_off;
          const Tensor& src_in = flip[i] ? a.input_flip : a.input;
          const Tensor& src_tg = flip[i] ? a.target_flip : a.target;
          const auto& src_mask = flip[i] ? a.mask_flip : a.mask;
          for (int ch = 0; ch < 2 * n; ++ch) {
            const double* src =
                &src_in.values[static_cast<std::size_t>(ch) *
                                   static_cast<std::size_t>(F) +
                               static_cast<std::size_t>(s)];
            double* dst =
                &in.values[(i * static_cast<std::size_t>(2 * n) +
                            static_cast<std::size_t>(ch)) *
                           static_cast<std::size_t>(L)];
            std::copy(src, src + L, dst);
          }
          for (int ch = 0; ch < 3 * n; ++ch)
            target->values[i * static_cast<std::size_t>(3 * n) +
                           static_cast<std::size_t>(ch)] =
                src_tg.values[static_cast<std::size_t>(ch) *
                                  static_cast<std::size_t>(F) +
                              static_cast<std::size_t>(t)];
          for (int j = 0; j < n; ++j)
            (*mask)[i * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)] =
                src_mask[static_cast<std::size_t>(j) * static_cast<std::size_t>(F) +
                         static_cast<std::size_t>(t)];
        }
        const Tape::NodeId input =
            tape.constant(std::move(in), "input." + data.cams[c].id);
        preds[c] = model.forward(tape, input, &drop_rng);
        tape.check_finite(preds[c], "predictions for camera " + data.cams[c].id);
        tri_nodes.emplace_back(
            1.0, tape.masked_frob_loss(preds[c], target, mask, inv_tri,
                                       "l_tri." + data.cams[c].id));
      }
      const Tape::NodeId l_tri = tape.weighted_sum(tri_nodes, "l_tri");

      Tape::NodeId l_con;
      if (C >= 2) {
        std::vector<std::pair<double, Tape::NodeId>> con_nodes;
        for (const auto& pr : pairs) {
          auto R = std::make_shared<std::vector<Eigen::Matrix3d>>();
          auto T = std::make_shared<std::vector<Eigen::Vector3d>>(
              nb, Eigen::Vector3d::Zero());
          for (std::size_t i = 0; i < nb; ++i)
            R->push_back(flip[i] ? pr.Rf : pr.R);
          const Tape::NodeId carried =
              tape.rigid_map(preds[pr.b], R, T,
                             "carry." + data.cams[pr.b].id + ".to." +
                                 data.cams[pr.a].id);
          con_nodes.emplace_back(
              1.0, tape.pair_frob_loss(preds[pr.a], carried, inv_con,
                                       "l_con." + data.cams[pr.a].id + "." +
                                           data.cams[pr.b].id));
        }
        l_con = tape.weighted_sum(con_nodes, "l_con");
      } else {
        l_con = tape.constant(Tensor::scalar(0.0), "l_con");
      }

      const Tape::NodeId total = tape.weighted_sum(
          {{cfg.lambda_tri, l_tri}, {cfg.lambda_con, l_con}}, "total");
      require(std::isfinite(tape.value(total).values[0]), errc::numeric_failure,
              "non-finite loss in batch starting at window " +
                  std::to_string(batch_lo) + " of epoch " +
                  std::to_string(epoch));

      const double tri_val = tape.value(l_tri).values[0];
      const double con_val = tape.value(l_con).values[0];
      if (cfg.count_normalize) {
        tri_sum += tri_val * static_cast<double>(k_tri);
        con_sum += con_val * static_cast<double>(k_con);
      } else {
        tri_sum += tri_val;
        con_sum += con_val;
      }
      tri_terms += k_tri;
      con_terms += k_con;

      if (!frozen) {
        tape.backward(total);
        adam_step(model, adam, lr, cfg.weight_decay);
      }
    }

    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    // Logged in millimetres (Frobenius norms are 1-homogeneous, so this is
    // exactly the loss of the mm-interpreted predictions).
    if (cfg.count_normalize) {
      log.l_tri = tri_terms > 0
                      ? detail::kMmPerMeter * tri_sum / static_cast<double>(tri_terms)
                      : 0.0;
      log.l_con = con_terms > 0
                      ? detail::kMmPerMeter * con_sum / static_cast<double>(con_terms)
                      : 0.0;
    } else {
      log.l_tri = detail::kMmPerMeter * tri_sum;
      log.l_con = detail::kMmPerMeter * con_sum;
    }
    log.total = cfg.lambda_tri * log.l_tri + cfg.lambda_con * log.l_con;
    log.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    result.log.push_back(log);
    model.set_trained_epochs(epoch + 1);
    if (on_epoch) on_epoch(log);
    log_debug("epoch " + std::to_string(epoch) + " total " +
              std::to_string(log.total));
  }
  model.set_training(false);
  return result;
}

// Deterministic whole-dataset loss in eval mode (no dropout, no flips,
// running batchnorm stats): the entire sequence goes through the model once
// per camera and every supervised frame contributes.
inline LossReport evaluate_total_loss(TcnModel& model, const TrainData& data,
                                      const TrainConfig& cfg) {
  const int L = model.receptive_field();
  const std::int64_t F = static_cast<std::int64_t>(data.frames());
  require(F >= L, errc::sequence_too_short, "sequence shorter than receptive field");
  const std::size_t C = data.cams.size();
  const int n = data.joints.size();
  const std::int64_t To = F - L + 1;
  const std::int64_t off = (L - 1) / 2;

  const bool was_training = model.training();
  model.set_training(false);

  Tape tape;
  std::vector<Tape::NodeId> preds(C);
  std::vector<std::pair<double, Tape::NodeId>> tri_nodes;
  std::int64_t k_tri = 0;
  std::vector<detail::CameraArrays> arrays;
  for (std::size_t c = 0; c < C; ++c)
    arrays.push_back(detail::build_camera_arrays(data, c));
  for (std::size_t c = 0; c < C; ++c) {
    for (std::int64_t t = 0; t < To; ++t)
      for (int j = 0; j < n; ++j)
        if (arrays[c].mask[static_cast<std::size_t>(j) * static_cast<std::size_t>(F) +
                           static_cast<std::size_t>(t + off)]) {
          ++k_tri;
          break;
        }
  }
  const double inv_tri =
      cfg.count_normalize ? (k_tri > 0 ? 1.0 / static_cast<double>(k_tri) : 0.0)
                          : 1.0;
  const std::int64_t k_con = C >= 2 ? To * static_cast<std::int64_t>(C) *
                                          static_cast<std::int64_t>(C - 1)
                                    : 0;
  const double inv_con =
      cfg.count_normalize ? (k_con > 0 ? 1.0 / static_cast<double>(k_con) : 0.0)
                          : 1.0;

  for (std::size_t c = 0; c < C; ++c) {
    const auto& a = arrays[c];
    Tensor in = Tensor::zeros({1, 2 * n, F});
    in.values = a.input.values;
    auto target = std::make_shared<Tensor>(Tensor::zeros({1, 3 * n, To}));
    auto mask = std::make_shared<std::vector<std::uint8_t>>(
        static_cast<std::size_t>(n * To), 0);
    for (int ch = 0; ch < 3 * n; ++ch)
      for (std::int64_t t = 0; t < To; ++t)
        target->values[static_cast<std::size_t>(ch * To + t)] =
            a.target.values[static_cast<std::size_t>(ch) *
                                static_cast<std::size_t>(F) +
                            static_cast<std::size_t>(t + off)];
    for (int j = 0; j < n; ++j)
      for (std::int64_t t = 0; t < To; ++t)
        (*mask)[static_cast<std::size_t>(j * To + t)] =
            a.mask[static_cast<std::size_t>(j) * static_cast<std::size_t>(F) +
                   static_cast<std::size_t>(t + off)];
    const Tape::NodeId input =
        tape.constant(std::move(in), "input." + data.cams[c].id);
    preds[c] = model.forward(tape, input);
    tri_nodes.emplace_back(
        1.0, tape.masked_frob_loss(preds[c], target, mask, inv_tri));
  }
  const Tape::NodeId l_tri = tape.weighted_sum(tri_nodes);

  double l_con_val = 0;
  if (C >= 2) {
    std::vector<std::pair<double, Tape::NodeId>> con_nodes;
    for (std::size_t a = 0; a < C; ++a)
      for (std::size_t b = 0; b < C; ++b) {
        if (a == b) continue;
        const RelativeTransform rt =
            relative_transform(data.cams[b], data.cams[a]);
        auto R = std::make_shared<std::vector<Eigen::Matrix3d>>(1, rt.R);
        auto T = std::make_shared<std::vector<Eigen::Vector3d>>(
            1, Eigen::Vector3d::Zero());
        const Tape::NodeId carried = tape.rigid_map(preds[b], R, T);
        con_nodes.emplace_back(
            1.0, tape.pair_frob_loss(preds[a], carried, inv_con));
      }
    l_con_val = tape.value(tape.weighted_sum(con_nodes)).values[0];
  }

  model.set_training(was_training);
  return combine_losses(detail::kMmPerMeter * tape.value(l_tri).values[0],
                        detail::kMmPerMeter * l_con_val, cfg.lambda_tri,
                        cfg.lambda_con);
}

// Lift a full 2D sequence into root-relative camera-frame 3D in millimetres,
// one pose per input frame. The normalised input is edge-replicated by
// (RF-1)/2 frames on each side so the valid convolution stack covers every
// frame.
inline Sequence3D predict_sequence(TcnModel& model, const Sequence2D& dets,
                                   const JointSet& js, const Camera& cam) {
  require(!dets.empty(), errc::shape_error, "empty detection sequence");
  const int L = model.receptive_field();
  const std::int64_t F = static_cast<std::int64_t>(dets.size());
  const std::int64_t pad = (L - 1) / 2;
  const int n = js.size();
  require(model.config().num_joints == n, errc::config_error,
          "model joint count does not match joint set");

  const Tensor base = normalize_input(dets, js, cam.intrinsics);
  Tensor in = Tensor::zeros({1, 2 * n, F + 2 * pad});
  const std::int64_t Fp = F + 2 * pad;
  for (int ch = 0; ch < 2 * n; ++ch) {
    const double* src =
        &base.values[static_cast<std::size_t>(ch) * static_cast<std::size_t>(F)];
    double* dst = &in.values[static_cast<std::size_t>(ch) *
                             static_cast<std::size_t>(Fp)];
    for (std::int64_t t = 0; t < Fp; ++t) {
      const std::int64_t s = std::clamp<std::int64_t>(t - pad, 0, F - 1);
      dst[t] = src[s];
    }
  }

  const Tensor out = model.predict(in);
  require(out.dim(2) == F, errc::shape_error, "prediction frame count mismatch");
  Sequence3D seq(static_cast<std::size_t>(F));
  for (std::int64_t f = 0; f < F; ++f) {
    Pose3D& p = seq[static_cast<std::size_t>(f)];
    p.frame = FrameTag::camera(cam.id);
    p.coords.resize(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j)
      p.coords[static_cast<std::size_t>(j)] =
          detail::kMmPerMeter *
          Eigen::Vector3d(
              out.values[static_cast<std::size_t>((3 * j) * F + f)],
              out.values[static_cast<std::size_t>((3 * j + 1) * F + f)],
              out.values[static_cast<std::size_t>((3 * j + 2) * F + f)]);
  }
  return seq;
}

}  // namespace lift3d
