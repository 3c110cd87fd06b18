#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <json.hpp>
#include <string>
#include <vector>

#include "lift3d/error.hpp"
#include "lift3d/rng.hpp"
#include "lift3d/tape.hpp"
#include "lift3d/tensor.hpp"

namespace lift3d {

// Temporal dilated convolutional lifting network. Input is a window of
// normalised 2D joints [batch, 2N, time]; output is absolute camera-frame 3D
// joints in mm [batch, 3N, time_out].
//
// Topology: input conv (kernel 3, dilation 1) -> B residual blocks, block b
// using a kernel-3 conv with dilation 3^b followed by a 1x1 conv, each conv
// wrapped in batchnorm/relu/dropout -> 1x1 linear head. All convolutions are
// valid (no padding), so the receptive field is 3^(B+1) and each forward
// shrinks time by RF-1. blocks = 0 degenerates to a single per-frame linear
// map (RF 1).
struct TcnConfig {
  int num_joints = 17;
  int channels = 256;
  int blocks = 2;
  double dropout = 0.25;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  int in_features() const { return 2 * num_joints; }
  int out_features() const { return 3 * num_joints; }

  int receptive_field() const {
    if (blocks == 0) return 1;
    int rf = 1;
    for (int b = 0; b < blocks + 1; ++b) rf *= 3;
    return rf;
  }

  void validate() const {
    require(num_joints >= 1, errc::config_error, "num_joints must be positive");
    require(channels >= 1, errc::config_error, "channels must be positive");
    require(blocks == 0 || blocks == 2 || blocks == 3 || blocks == 4,
            errc::config_error,
            "blocks must be one of {0, 2, 3, 4} (receptive field 1/27/81/243)");
    require(dropout >= 0.0 && dropout < 1.0, errc::config_error,
            "dropout must be in [0, 1)");
    require(bn_momentum > 0.0 && bn_momentum <= 1.0, errc::config_error,
            "bn_momentum must be in (0, 1]");
  }

  static int blocks_for_receptive_field(int rf) {
    switch (rf) {
      case 1: return 0;
      case 27: return 2;
      case 81: return 3;
      case 243: return 4;
      default:
        fail(errc::config_error, "receptive field must be one of {1, 27, 81, 243}, got " +
                                     std::to_string(rf));
    }
  }

  nlohmann::json to_json() const {
    return {{"num_joints", num_joints}, {"channels", channels},
            {"blocks", blocks},         {"dropout", dropout},
            {"bn_momentum", bn_momentum}, {"bn_eps", bn_eps}};
  }

  static TcnConfig from_json(const nlohmann::json& j) {
    TcnConfig c;
    try {
      c.num_joints = j.value("num_joints", c.num_joints);
      c.channels = j.value("channels", c.channels);
      c.blocks = j.value("blocks", c.blocks);
      c.dropout = j.value("dropout", c.dropout);
      c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
      c.bn_eps = j.value("bn_eps", c.bn_eps);
    } catch (const nlohmann::json::exception& e) {
      fail(errc::format_error, std::string("bad model config JSON: ") + e.what());
    }
    c.validate();
    return c;
  }
};

// Named parameter or buffer slot. Parameters receive gradients; buffers
// (batchnorm running stats) are updated in forward passes only.
struct NamedTensor {
  std::string name;
  Tensor tensor;
  bool is_param = true;
  bool is_batchnorm = false;  // excluded from weight decay
};

class TcnModel {
 public:
  TcnModel() = default;

  TcnModel(const TcnConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng = Rng::substream(seed, 0x6d6f64656cULL);
    if (cfg_.blocks == 0) {
      add_conv("head", cfg_.out_features(), cfg_.in_features(), 1, rng);
    } else {
      add_conv("expand.conv", cfg_.channels, cfg_.in_features(), 3, rng);
      add_bn("expand.bn", cfg_.channels);
      for (int b = 1; b <= cfg_.blocks; ++b) {
        const std::string p = "block" + std::to_string(b);
        add_conv(p + ".conv1", cfg_.channels, cfg_.channels, 3, rng);
        add_bn(p + ".bn1", cfg_.channels);
        add_conv(p + ".conv2", cfg_.channels, cfg_.channels, 1, rng);
        add_bn(p + ".bn2", cfg_.channels);
      }
      add_conv("head", cfg_.out_features(), cfg_.channels, 1, rng);
    }
  }

  const TcnConfig& config() const { return cfg_; }
  int receptive_field() const { return cfg_.receptive_field(); }

  bool training() const { return training_; }
  void set_training(bool t) { training_ = t; }

  int trained_epochs() const { return trained_epochs_; }
  void set_trained_epochs(int e) { trained_epochs_ = e; }

  std::vector<NamedTensor>& slots() { return slots_; }
  const std::vector<NamedTensor>& slots() const { return slots_; }

  Tensor& tensor(const std::string& name) {
    for (auto& s : slots_)
      if (s.name == name) return s.tensor;
    fail(errc::state_error, "model has no tensor named '" + name + "'");
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& s : slots_)
      if (s.is_param) n += s.tensor.numel();
    return n;
  }

  // Records the full forward pass on the tape and returns the output node.
  // Every parameter is registered on the tape, so parameters that a config
  // keeps off the loss path still receive (exactly zero) gradients.
  // `dropout_rng` may be null in eval mode.
  Tape::NodeId forward(Tape& tape, Tape::NodeId input,
                       Rng* dropout_rng = nullptr) {
    require(!slots_.empty(), errc::state_error,
            "forward on a default-constructed model");
    const Tensor& in = tape.value(input);
    require(in.rank() == 3 && in.dim(1) == cfg_.in_features(), errc::shape_error,
            "model expects input [batch, " + std::to_string(cfg_.in_features()) +
                ", time], got " + in.shape_str());
    require(in.dim(2) >= receptive_field(), errc::sequence_too_short,
            "input time " + std::to_string(in.dim(2)) +
                " is shorter than the receptive field " +
                std::to_string(receptive_field()));

    std::map<std::string, Tape::NodeId> ids;
    for (auto& s : slots_)
      if (s.is_param) ids[s.name] = tape.param(s.tensor, s.name);

    auto conv = [&](Tape::NodeId x, const std::string& p, std::int64_t dil) {
      const Tape::NodeId y =
          tape.conv1d(x, ids.at(p + ".w"), ids.at(p + ".b"), dil, p);
      tape.check_finite(y, p);
      return y;
    };
    auto bn_relu_drop = [&](Tape::NodeId x, const std::string& p) {
      Tape::NodeId y = tape.batchnorm(x, ids.at(p + ".gamma"), ids.at(p + ".beta"),
                                      &tensor(p + ".running_mean"),
                                      &tensor(p + ".running_var"), training_,
                                      cfg_.bn_momentum, cfg_.bn_eps, p);
      tape.check_finite(y, p);
      y = tape.relu(y, p + ".relu");
      return tape.dropout(y, cfg_.dropout, dropout_rng, training_, p + ".drop");
    };

    if (cfg_.blocks == 0) {
      const Tape::NodeId y = conv(input, "head", 1);
      return y;
    }
    Tape::NodeId x = bn_relu_drop(conv(input, "expand.conv", 1), "expand.bn");
    std::int64_t dilation = 3;
    for (int b = 1; b <= cfg_.blocks; ++b) {
      const std::string p = "block" + std::to_string(b);
      Tape::NodeId h = bn_relu_drop(conv(x, p + ".conv1", dilation), p + ".bn1");
      h = bn_relu_drop(conv(h, p + ".conv2", 1), p + ".bn2");
      x = tape.residual_add(x, h, p + ".residual");
      dilation *= 3;
    }
    const Tape::NodeId out = conv(x, "head", 1);
    return out;
  }

  // Convenience eval-mode forward for plain tensors.
  Tensor predict(const Tensor& input) {
    const bool was_training = training_;
    training_ = false;
    Tape tape;
    const Tape::NodeId in = tape.constant(input, "input");
    const Tape::NodeId out = forward(tape, in);
    Tensor result = tape.value(out);
    training_ = was_training;
    return result;
  }

 private:
  // He-uniform fan-in init, matching the relu nonlinearity.
  void add_conv(const std::string& prefix, int out_ch, int in_ch, int k,
                Rng& rng) {
    Tensor w = Tensor::zeros({out_ch, in_ch, k});
    const double bound = std::sqrt(6.0 / (in_ch * k));
    for (auto& v : w.values) v = rng.uniform(-bound, bound);
    slots_.push_back({prefix + ".w", std::move(w), true, false});
    slots_.push_back({prefix + ".b", Tensor::zeros({out_ch}), true, false});
  }

  void add_bn(const std::string& prefix, int ch) {
    slots_.push_back({prefix + ".gamma", Tensor::full({ch}, 1.0), true, true});
    slots_.push_back({prefix + ".beta", Tensor::zeros({ch}), true, true});
    slots_.push_back({prefix + ".running_mean", Tensor::zeros({ch}), false, true});
    slots_.push_back({prefix + ".running_var", Tensor::full({ch}, 1.0), false, true});
  }

  TcnConfig cfg_;
  std::vector<NamedTensor> slots_;
  bool training_ = true;
  int trained_epochs_ = 0;
};

}  // namespace lift3d
