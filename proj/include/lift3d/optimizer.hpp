#pragma once

#include <cmath>
#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "lift3d/error.hpp"
#include "lift3d/tcn.hpp"

namespace lift3d {

struct TrainConfig {
  int epochs = 60;
  int batch_size = 64;
  double base_lr = 2e-4;
  double lr_decay = 0.98;        // multiplicative, per epoch
  double weight_decay = 0.1;     // decoupled; skipped for batchnorm params
  double lambda_tri = 1.0;
  double lambda_con = 1.0;
  double flip_prob = 0.5;        // horizontal flip augmentation probability
  bool count_normalize = true;   // mean over loss terms (raw sums when off)
  int min_views = 2;
  double conf_threshold = 0.05;
  std::uint64_t seed = 0;
  int workers = 1;
  std::vector<std::string> cameras;  // subset of rig ids; empty = all

  void validate() const {
    require(epochs >= 0, errc::config_error, "epochs must be >= 0");
    require(batch_size >= 1, errc::config_error, "batch_size must be >= 1");
    require(base_lr > 0, errc::config_error, "base_lr must be positive");
    require(lr_decay > 0 && lr_decay <= 1, errc::config_error,
            "lr_decay must be in (0, 1]");
    require(weight_decay >= 0, errc::config_error, "weight_decay must be >= 0");
    require(lambda_tri >= 0 && lambda_con >= 0, errc::config_error,
            "loss weights must be >= 0");
    require(flip_prob >= 0 && flip_prob <= 1, errc::config_error,
            "flip_prob must be in [0, 1]");
    require(min_views >= 2, errc::config_error, "min_views must be >= 2");
    require(workers >= 1, errc::config_error, "workers must be >= 1");
  }

  nlohmann::json to_json() const {
    return {{"epochs", epochs},
            {"batch_size", batch_size},
            {"base_lr", base_lr},
            {"lr_decay", lr_decay},
            {"weight_decay", weight_decay},
            {"lambda_tri", lambda_tri},
            {"lambda_con", lambda_con},
            {"flip_prob", flip_prob},
            {"count_normalize", count_normalize},
            {"min_views", min_views},
            {"conf_threshold", conf_threshold},
            {"seed", seed},
            {"workers", workers},
            {"cameras", cameras}};
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
      c.epochs = j.value("epochs", c.epochs);
      c.batch_size = j.value("batch_size", c.batch_size);
      c.base_lr = j.value("base_lr", c.base_lr);
      c.lr_decay = j.value("lr_decay", c.lr_decay);
      c.weight_decay = j.value("weight_decay", c.weight_decay);
      c.lambda_tri = j.value("lambda_tri", c.lambda_tri);
      c.lambda_con = j.value("lambda_con", c.lambda_con);
      c.flip_prob = j.value("flip_prob", c.flip_prob);
      c.count_normalize = j.value("count_normalize", c.count_normalize);
      c.min_views = j.value("min_views", c.min_views);
      c.conf_threshold = j.value("conf_threshold", c.conf_threshold);
      c.seed = j.value("seed", c.seed);
      c.workers = j.value("workers", c.workers);
      c.cameras = j.value("cameras", c.cameras);
    } catch (const nlohmann::json::exception& e) {
      fail(errc::format_error, std::string("bad train config JSON: ") + e.what());
    }
    c.validate();
    return c;
  }
};

// Exponential schedule: lr(e) = base_lr * decay^e for zero-based epoch e.
inline double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  require(epoch >= 0, errc::config_error, "epoch must be >= 0");
  return cfg.base_lr * std::pow(cfg.lr_decay, epoch);
}

// Adam moments, one pair per parameter slot; step counts bias correction.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(const TcnModel& model) {
    for (const auto& s : model.slots()) {
      if (!s.is_param) continue;
      m.push_back(Tensor::zeros(s.tensor.shape));
      v.push_back(Tensor::zeros(s.tensor.shape));
    }
  }
};

// One AdamW step over every parameter: bias-corrected Adam update plus
// decoupled multiplicative weight decay, which is skipped for batchnorm
// parameters. Gradients must be present (a backward pass ran) and finite.
inline void adam_step(TcnModel& model, AdamState& state, double lr,
                      double weight_decay) {
  require(lr >= 0, errc::config_error, "learning rate must be >= 0");
  // Validate every gradient before touching any parameter so an abort
  // leaves the model exactly as it was.
  for (const auto& s : model.slots()) {
    if (!s.is_param) continue;
    require(s.tensor.grad.size() == s.tensor.values.size(), errc::state_error,
            "parameter '" + s.name + "' has no gradient (did backward run?)");
    for (double g : s.tensor.grad)
      require(std::isfinite(g), errc::numeric_failure,
              "non-finite gradient in '" + s.name + "'; step aborted");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  std::size_t k = 0;
  for (auto& s : model.slots()) {
    if (!s.is_param) continue;
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    ++k;
    const double decay = (!s.is_batchnorm && weight_decay > 0.0)
                             ? 1.0 - lr * weight_decay
                             : 1.0;
    for (std::size_t i = 0; i < s.tensor.values.size(); ++i) {
      const double g = s.tensor.grad[i];
      m.values[i] = state.beta1 * m.values[i] + (1.0 - state.beta1) * g;
      v.values[i] = state.beta2 * v.values[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m.values[i] / bc1;
      const double vhat = v.values[i] / bc2;
      double p = s.tensor.values[i] * decay;
      p -= lr * mhat / (std::sqrt(vhat) + state.eps);
      s.tensor.values[i] = p;
    }
  }
}

}  // namespace lift3d
