#pragma once

// Batch command-line frontend: gen | triangulate | train | eval | gradcheck.
// Every command resolves its configuration (JSON file + flag overrides),
// writes the resolved copy into the output directory, and exits 0 on success
// or nonzero with a single stderr line "error[<class>]: <message>".

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lift3d/dataset_io.hpp"
#include "lift3d/error.hpp"
#include "lift3d/gradcheck.hpp"
#include "lift3d/log.hpp"
#include "lift3d/metrics.hpp"
#include "lift3d/model_io.hpp"
#include "lift3d/optimizer.hpp"
#include "lift3d/synth.hpp"
#include "lift3d/tcn.hpp"
#include "lift3d/trainer.hpp"
#include "lift3d/triangulation.hpp"

namespace lift3d {

struct ExperimentConfig {
  std::string dataset;  // bundle directory
  std::string model;    // model file (.l3d)
  std::string out;      // output directory
  TrainConfig train;
  TcnConfig tcn;
  RigSpec rig;
  MotionSpec motion;
  DetectionNoiseSpec noise;
  std::vector<std::string> metrics = {"mpjpe", "pmpjpe", "nmpjpe", "pck150",
                                      "auc"};

  nlohmann::json to_json() const {
    return {{"dataset", dataset},        {"model", model},
            {"out", out},                {"train", train.to_json()},
            {"tcn", tcn.to_json()},      {"rig", rig.to_json()},
            {"motion", motion.to_json()}, {"noise", noise.to_json()},
            {"metrics", metrics}};
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.dataset = j.value("dataset", c.dataset);
    c.model = j.value("model", c.model);
    c.out = j.value("out", c.out);
    if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
    if (j.contains("tcn")) c.tcn = TcnConfig::from_json(j.at("tcn"));
    if (j.contains("rig")) c.rig = RigSpec::from_json(j.at("rig"));
    if (j.contains("motion")) c.motion = MotionSpec::from_json(j.at("motion"));
    if (j.contains("noise"))
      c.noise = DetectionNoiseSpec::from_json(j.at("noise"));
    c.metrics = j.value("metrics", c.metrics);
    return c;
  }

  static ExperimentConfig load(const std::string& path) {
    std::ifstream is(path);
    require(is.good(), errc::io_error,
            "cannot open config '" + path + "'");
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      fail(errc::format_error, std::string("bad config JSON: ") + e.what());
    }
    return from_json(j);
  }
};

namespace detail {

// Flag values, kept separate from the config so only flags the user actually
// passed override the JSON file.
struct CliFlags {
  std::optional<std::string> config;
  std::optional<std::string> data;
  std::optional<std::string> model;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> cameras;  // comma-separated ids
  std::optional<double> sigma;
  std::optional<int> frames;  // receptive field: 1|27|81|243
  std::optional<double> lambda_tri;
  std::optional<double> lambda_con;
  std::optional<int> workers;
  std::optional<int> epochs;
};

inline std::vector<std::string> parse_camera_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  require(!out.empty(), errc::config_error, "empty --cameras list");
  return out;
}

inline ExperimentConfig resolve_config(const CliFlags& f) {
  ExperimentConfig cfg;
  if (f.config) cfg = ExperimentConfig::load(*f.config);
  if (f.data) cfg.dataset = *f.data;
  if (f.model) cfg.model = *f.model;
  if (f.out) cfg.out = *f.out;
  if (f.seed) {
    cfg.train.seed = *f.seed;
    cfg.motion.seed = *f.seed;
    cfg.noise.seed = *f.seed;
  }
  if (f.cameras) cfg.train.cameras = parse_camera_list(*f.cameras);
  if (f.sigma) cfg.noise.sigma_px = *f.sigma;
  if (f.frames) cfg.tcn.blocks = TcnConfig::blocks_for_receptive_field(*f.frames);
  if (f.lambda_tri) cfg.train.lambda_tri = *f.lambda_tri;
  if (f.lambda_con) cfg.train.lambda_con = *f.lambda_con;
  if (f.workers) cfg.train.workers = *f.workers;
  if (f.epochs) cfg.train.epochs = *f.epochs;
  return cfg;
}

inline std::filesystem::path require_out_dir(const ExperimentConfig& cfg) {
  require(!cfg.out.empty(), errc::config_error,
          "no output directory (--out or config \"out\")");
  std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  return dir;
}

// Provenance contract: the output directory always holds the exact resolved
// configuration the command ran with.
inline void write_resolved_config(const std::filesystem::path& dir,
                                  const ExperimentConfig& cfg,
                                  const std::string& command) {
  nlohmann::json j = cfg.to_json();
  j["command"] = command;
  std::ofstream os(dir / "resolved_config.json");
  require(os.good(), errc::io_error, "cannot write resolved_config.json");
  os << j.dump(2) << "\n";
}

inline DatasetBundle load_bundle(const ExperimentConfig& cfg) {
  require(!cfg.dataset.empty(), errc::config_error,
          "no dataset directory (--data or config \"dataset\")");
  return read_dataset(cfg.dataset);
}

// Keeps rig order; errors on unknown ids.
inline void subset_bundle(DatasetBundle& b,
                          const std::vector<std::string>& ids) {
  if (ids.empty()) return;
  std::vector<Camera> rig;
  std::vector<Sequence2D> dets;
  for (const auto& id : ids) {
    bool found = false;
    for (std::size_t c = 0; c < b.rig.size(); ++c) {
      if (b.rig[c].id != id) continue;
      rig.push_back(b.rig[c]);
      dets.push_back(b.detections[c]);
      found = true;
      break;
    }
    require(found, errc::config_error, "camera '" + id + "' is not in the rig");
  }
  b.rig = std::move(rig);
  b.detections = std::move(dets);
}

inline int cmd_gen(const ExperimentConfig& cfg) {
  const std::filesystem::path dir = require_out_dir(cfg);
  const JointSet js = JointSet::h36m17();

  DatasetBundle bundle;
  bundle.joints = js;
  bundle.gt_world = generate_motion(cfg.motion, js);
  bundle.rig = build_rig(cfg.rig);
  bundle.detections = render_detections(bundle.gt_world, bundle.rig, cfg.noise);
  bundle.fps = cfg.motion.fps;
  bundle.meta = {{"generator", "lift3d gen"},
                 {"action", "synthetic-walk"},
                 {"seed", cfg.motion.seed},
                 {"sigma_px", cfg.noise.sigma_px},
                 {"dropout", cfg.noise.dropout}};

  write_dataset(dir, bundle);
  write_resolved_config(dir, cfg, "gen");
  log_info("wrote " + std::to_string(bundle.rig.size()) + "-camera, " +
           std::to_string(bundle.frames()) + "-frame bundle to " +
           dir.string());
  return 0;
}

inline int cmd_triangulate(const ExperimentConfig& cfg) {
  const std::filesystem::path dir = require_out_dir(cfg);
  DatasetBundle bundle = load_bundle(cfg);
  subset_bundle(bundle, cfg.train.cameras);
  require(bundle.rig.size() >= 2, errc::insufficient_views,
          "triangulation needs at least 2 cameras, got " +
              std::to_string(bundle.rig.size()));

  const std::vector<TriangulatedPose> pseudo =
      triangulate_frames(bundle.rig, bundle.detections, cfg.train.min_views,
                         cfg.train.conf_threshold, cfg.train.workers);
  write_pseudo_csv(dir / "pseudo3d.csv", pseudo);

  double sum_res = 0, max_res = 0;
  std::int64_t n_valid = 0, n_total = 0;
  for (const auto& tp : pseudo) {
    for (std::size_t j = 0; j < tp.valid.size(); ++j) {
      ++n_total;
      if (!tp.valid[j]) continue;
      ++n_valid;
      sum_res += tp.residual_px[j];
      max_res = std::max(max_res, tp.residual_px[j]);
    }
  }
  nlohmann::json report = {
      {"frames", static_cast<std::int64_t>(pseudo.size())},
      {"cameras", static_cast<std::int64_t>(bundle.rig.size())},
      {"valid_joint_fraction",
       n_total ? static_cast<double>(n_valid) / n_total : 0.0},
      {"mean_residual_px", n_valid ? sum_res / n_valid : 0.0},
      {"max_residual_px", max_res}};

  if (bundle.has_gt()) {
    Sequence3D pred;
    pred.reserve(pseudo.size());
    for (const auto& tp : pseudo) pred.push_back(tp.pose);
    const MetricReport mr = evaluate_metrics(pred, bundle.gt_world,
                                             bundle.joints);
    report["pseudo_vs_gt"] = mr.to_json();
    log_info("pseudo-label MPJPE vs gt3d: " + std::to_string(mr.mpjpe) +
             " mm");
  }

  std::ofstream os(dir / "residual_report.json");
  require(os.good(), errc::io_error, "cannot write residual_report.json");
  os << report.dump(2) << "\n";
  write_resolved_config(dir, cfg, "triangulate");
  log_info("wrote pseudo3d.csv and residual_report.json to " + dir.string());
  return 0;
}

inline int cmd_train(const ExperimentConfig& cfg, bool resume) {
  const std::filesystem::path dir = require_out_dir(cfg);
  require(!cfg.model.empty(), errc::config_error,
          "no model path (--model or config \"model\")");
  DatasetBundle bundle = load_bundle(cfg);
  const TrainData data =
      TrainData::from_bundle(bundle, cfg.train.cameras, cfg.train.min_views,
                             cfg.train.conf_threshold, cfg.train.workers);

  TcnConfig tcn = cfg.tcn;
  tcn.num_joints = bundle.joints.size();
  TcnModel model = resume ? load_model(cfg.model)
                          : TcnModel(tcn, cfg.train.seed);
  if (resume)
    require(model.config().num_joints == bundle.joints.size(),
            errc::config_error, "resumed model joint count mismatch");

  std::ofstream log_os(dir / "train_log.csv",
                       resume ? std::ios::app : std::ios::trunc);
  require(log_os.good(), errc::io_error, "cannot write train_log.csv");
  if (!resume) {
    log_os << "# workers: " << cfg.train.workers
           << " (loss math is order-fixed; logs for a given seed are "
              "reproducible at any worker count)\n";
    log_os << "epoch,lr,l_tri,l_con,total,wall_seconds\n";
  }

  train(model, data, cfg.train, [&](const EpochLog& e) {
    log_os << e.epoch << ',' << format_double(e.lr) << ','
           << format_double(e.l_tri) << ',' << format_double(e.l_con) << ','
           << format_double(e.total) << ',' << format_double(e.wall_seconds)
           << "\n";
    log_os.flush();
    log_info("epoch " + std::to_string(e.epoch) +
             " total=" + std::to_string(e.total));
  });

  save_model(model, cfg.model);
  write_resolved_config(dir, cfg, "train");
  log_info("saved model to " + cfg.model);
  return 0;
}

inline void write_metric_row(std::ostream& os, const std::string& name,
                             const MetricReport& r) {
  os << name << ',' << format_double(r.mpjpe) << ',' << format_double(r.pmpjpe)
     << ',' << format_double(r.nmpjpe) << ',' << format_double(r.pck150) << ','
     << format_double(r.auc) << ',' << r.frames << "\n";
}

// Mean of per-camera reports; frame counts add.
inline MetricReport average_reports(const std::vector<MetricReport>& rs) {
  require(!rs.empty(), errc::empty_loss, "no reports to average");
  MetricReport out;
  for (const auto& r : rs) {
    out.mpjpe += r.mpjpe;
    out.pmpjpe += r.pmpjpe;
    out.nmpjpe += r.nmpjpe;
    out.pck150 += r.pck150;
    out.auc += r.auc;
    out.frames += r.frames;
  }
  const double inv = 1.0 / static_cast<double>(rs.size());
  out.mpjpe *= inv;
  out.pmpjpe *= inv;
  out.nmpjpe *= inv;
  out.pck150 *= inv;
  out.auc *= inv;
  return out;
}

// Model predictions live in each camera's frame; ground truth is mapped into
// that frame per camera and the reports averaged.
inline MetricReport eval_model_on_bundle(const std::filesystem::path& model_path,
                                         const DatasetBundle& bundle,
                                         nlohmann::json* per_camera) {
  TcnModel model = load_model(model_path);
  require(model.config().num_joints == bundle.joints.size(),
          errc::config_error, "model joint count does not match dataset");
  std::vector<MetricReport> reports;
  for (std::size_t c = 0; c < bundle.rig.size(); ++c) {
    const Camera& cam = bundle.rig[c];
    const Sequence3D pred =
        predict_sequence(model, bundle.detections[c], bundle.joints, cam);
    Sequence3D gt_cam;
    gt_cam.reserve(bundle.gt_world.size());
    for (const auto& p : bundle.gt_world)
      gt_cam.push_back(world_to_camera(p, cam));
    const MetricReport r = evaluate_metrics(pred, gt_cam, bundle.joints);
    if (per_camera) (*per_camera)[cam.id] = r.to_json();
    reports.push_back(r);
  }
  return average_reports(reports);
}

inline int cmd_eval(const ExperimentConfig& cfg, const std::string& source,
                    const std::string& rf_sweep_dir) {
  const std::filesystem::path dir = require_out_dir(cfg);
  DatasetBundle bundle = load_bundle(cfg);
  subset_bundle(bundle, cfg.train.cameras);
  require(bundle.has_gt(), errc::config_error,
          "evaluation needs gt3d.csv in the dataset bundle");

  nlohmann::json out;
  MetricReport report;
  std::string source_label = source;

  // Without an explicit --model, the sweep's largest receptive field is the
  // headline configuration.
  const bool headline_from_sweep =
      !rf_sweep_dir.empty() && cfg.model.empty() && source == "model";

  if (!rf_sweep_dir.empty()) {
    std::ofstream sweep(dir / "rf_sweep.csv");
    require(sweep.good(), errc::io_error, "cannot write rf_sweep.csv");
    sweep << "receptive_field,mpjpe,pmpjpe,nmpjpe,pck150,auc,frames\n";
    nlohmann::json sweep_json = nlohmann::json::object();
    MetricReport last;
    for (int rf : {1, 27, 81, 243}) {
      const std::filesystem::path mp =
          std::filesystem::path(rf_sweep_dir) /
          ("rf" + std::to_string(rf) + ".l3d");
      require(std::filesystem::exists(mp), errc::config_error,
              "rf sweep needs model file '" + mp.string() + "'");
      last = eval_model_on_bundle(mp, bundle, nullptr);
      write_metric_row(sweep, std::to_string(rf), last);
      sweep_json[std::to_string(rf)] = last.to_json();
      log_info("rf " + std::to_string(rf) + ": mpjpe " +
               std::to_string(last.mpjpe) + " mm");
    }
    out["rf_sweep"] = sweep_json;
    if (headline_from_sweep) {
      report = last;
      source_label = "rf_sweep:243";
    }
  }

  if (source == "gt") {
    report = evaluate_metrics(bundle.gt_world, bundle.gt_world, bundle.joints);
  } else if (source == "pseudo") {
    require(bundle.rig.size() >= 2, errc::insufficient_views,
            "pseudo-label evaluation needs at least 2 cameras");
    const auto pseudo =
        triangulate_frames(bundle.rig, bundle.detections, cfg.train.min_views,
                           cfg.train.conf_threshold, cfg.train.workers);
    Sequence3D pred;
    pred.reserve(pseudo.size());
    for (const auto& tp : pseudo) pred.push_back(tp.pose);
    report = evaluate_metrics(pred, bundle.gt_world, bundle.joints);
  } else if (source == "model") {
    if (!headline_from_sweep) {
      require(!cfg.model.empty(), errc::config_error,
              "no model path (--model or config \"model\")");
      nlohmann::json per_camera = nlohmann::json::object();
      report = eval_model_on_bundle(cfg.model, bundle, &per_camera);
      out["per_camera"] = per_camera;
    }
  } else {
    fail(errc::config_error, "unknown --source '" + source +
                                 "' (expected model, gt, or pseudo)");
  }

  out["source"] = source_label;
  out["metrics"] = report.to_json();
  {
    std::ofstream os(dir / "metrics.json");
    require(os.good(), errc::io_error, "cannot write metrics.json");
    os << out.dump(2) << "\n";
  }
  // The bundle carries a single action label, so the per-action table holds
  // that action plus the "all" aggregate (identical here by construction).
  {
    std::ofstream os(dir / "per_action.csv");
    require(os.good(), errc::io_error, "cannot write per_action.csv");
    os << "action,mpjpe,pmpjpe,nmpjpe,pck150,auc,frames\n";
    const std::string action = bundle.meta.value("action", std::string("all"));
    if (action != "all") write_metric_row(os, action, report);
    write_metric_row(os, "all", report);
  }
  write_resolved_config(dir, cfg, "eval");
  log_info("mpjpe " + std::to_string(report.mpjpe) + " mm over " +
           std::to_string(report.frames) + " frames");
  return 0;
}

inline int cmd_gradcheck(const ExperimentConfig& cfg,
                         const std::string& corrupt) {
  const std::filesystem::path dir = require_out_dir(cfg);
  TcnConfig tcn = cfg.tcn;
  const GradcheckReport report = gradcheck_model(
      tcn, cfg.train.seed, 1e-4, 1e-4, corrupt, cfg.train.workers);
  {
    std::ofstream os(dir / "gradcheck.json");
    require(os.good(), errc::io_error, "cannot write gradcheck.json");
    os << report.to_json().dump(2) << "\n";
  }
  write_resolved_config(dir, cfg, "gradcheck");
  std::string failing;
  for (const auto& l : report.layers) {
    std::cout << (l.pass ? "pass " : "FAIL ") << l.name
              << " max_rel_err=" << format_double(l.max_rel_err) << "\n";
    if (!l.pass) failing += (failing.empty() ? "" : ", ") + l.name;
  }
  if (!report.all_pass)
    fail(errc::numeric_failure, "gradient check failed: " + failing);
  log_info("all layers pass at tolerance " + format_double(report.tolerance));
  return 0;
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"lift3d: temporal 2D-to-3D human pose lifting trained on "
               "triangulation pseudo-labels"};
  app.require_subcommand(1);

  detail::CliFlags f;
  std::string source = "model";
  std::string rf_sweep_dir;
  std::string corrupt;
  bool resume = false;

  auto add_common = [&](CLI::App* c) {
    c->add_option("--config", f.config, "experiment config JSON");
    c->add_option("--out", f.out, "output directory");
    c->add_option("--seed", f.seed, "master RNG seed");
    c->add_option("--workers", f.workers, "worker threads");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic bundle");
  add_common(gen);
  gen->add_option("--sigma", f.sigma, "detection noise sigma in pixels");

  CLI::App* tri =
      app.add_subcommand("triangulate", "triangulate pseudo-labels");
  add_common(tri);
  tri->add_option("--data", f.data, "dataset bundle directory");
  tri->add_option("--cameras", f.cameras, "comma-separated camera ids");

  CLI::App* train = app.add_subcommand("train", "train the lifting network");
  add_common(train);
  train->add_option("--data", f.data, "dataset bundle directory");
  train->add_option("--model", f.model, "model output path");
  train->add_option("--cameras", f.cameras, "comma-separated camera ids");
  train->add_option("--frames", f.frames, "receptive field")
      ->check(CLI::IsMember({1, 27, 81, 243}));
  train->add_option("--lambda-tri", f.lambda_tri, "triangulation loss weight");
  train->add_option("--lambda-con", f.lambda_con, "consistency loss weight");
  train->add_option("--epochs", f.epochs, "total epochs to train to");
  train->add_flag("--resume", resume, "continue from the existing model file");

  CLI::App* ev = app.add_subcommand("eval", "evaluate a model or baseline");
  add_common(ev);
  ev->add_option("--data", f.data, "dataset bundle directory");
  ev->add_option("--model", f.model, "model file to evaluate");
  ev->add_option("--cameras", f.cameras, "comma-separated camera ids");
  ev->add_option("--source", source, "what to evaluate: model, gt, or pseudo");
  ev->add_option("--rf-sweep", rf_sweep_dir,
                 "directory of rf{1,27,81,243}.l3d models; emits rf_sweep.csv");

  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference check");
  add_common(gc);
  gc->add_option("--frames", f.frames, "receptive field of the checked model")
      ->check(CLI::IsMember({1, 27, 81, 243}));
  gc->add_option("--corrupt", corrupt, "test hook: perturb a layer's gradient")
      ->group("");  // hidden

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[config-error]: " << e.what() << "\n";
    return 1;
  }

  try {
    const ExperimentConfig cfg = detail::resolve_config(f);
    if (gen->parsed()) return detail::cmd_gen(cfg);
    if (tri->parsed()) return detail::cmd_triangulate(cfg);
    if (train->parsed()) return detail::cmd_train(cfg, resume);
    if (ev->parsed()) return detail::cmd_eval(cfg, source, rf_sweep_dir);
    if (gc->parsed()) return detail::cmd_gradcheck(cfg, corrupt);
    fail(errc::config_error, "no subcommand");
  } catch (const Error& e) {
    std::cerr << "error[" << e.class_id() << "]: " << e.message() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
}

inline int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace lift3d
