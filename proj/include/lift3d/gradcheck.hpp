#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <json.hpp>
#include <string>
#include <thread>
#include <vector>

#include "lift3d/error.hpp"
#include "lift3d/rng.hpp"
#include "lift3d/tape.hpp"
#include "lift3d/tcn.hpp"

namespace lift3d {

struct GradcheckLayer {
  std::string name;
  double max_rel_err = 0;
  std::int64_t checked = 0;
  bool pass = false;
};

struct GradcheckReport {
  std::vector<GradcheckLayer> layers;
  double tolerance = 1e-4;
  double eps = 1e-4;
  bool all_pass = false;

  nlohmann::json to_json() const {
    nlohmann::json ls = nlohmann::json::array();
    for (const auto& l : layers)
      ls.push_back({{"name", l.name},
                    {"max_rel_err", l.max_rel_err},
                    {"parameters", l.checked},
                    {"pass", l.pass}});
    return {{"tolerance", tolerance},
            {"eps", eps},
            {"all_pass", all_pass},
            {"layers", ls}};
  }
};

namespace detail {
// The probe loss: masked triangulation-style term plus a rigid-mapped
// pairwise term, so every op kind that training differentiates is on the
// path. Shared by the analytic pass and every finite-difference evaluation.
struct GradcheckProblem {
  Tensor input;
  std::shared_ptr<Tensor> target;
  std::shared_ptr<std::vector<std::uint8_t>> mask;
  std::shared_ptr<std::vector<Eigen::Matrix3d>> R;
  std::shared_ptr<std::vector<Eigen::Vector3d>> T;

  Tape::NodeId build(Tape& tape, TcnModel& model) const {
    const Tape::NodeId in = tape.constant(input, "input");
    const Tape::NodeId out = model.forward(tape, in);
    const double inv = 1.0 / static_cast<double>(input.dim(0));
    const Tape::NodeId tri = tape.masked_frob_loss(out, target, mask, inv);
    const Tape::NodeId carried = tape.rigid_map(out, R, T);
    const Tape::NodeId con = tape.pair_frob_loss(out, carried, inv);
    return tape.weighted_sum({{1.0, tri}, {0.5, con}});
  }

  double value(TcnModel& model) const {
    Tape tape;
    return tape.value(build(tape, model)).values[0];
  }
};
}  // namespace detail

// Central finite differences over every parameter element of a model,
// compared with the tape's analytic gradients on a synthetic micro-batch.
// Eval mode keeps the loss a deterministic function of the parameters
// (dropout off, fixed running stats), which a finite-difference probe
// requires. Data is O(1)-scale so cancellation noise stays far below the
// tolerance. Parameter tensors are independent, so `workers` threads can
// split them (each works on its own model copy) without changing results.
//
// corrupt_layer (testing hook): analytic gradients of that layer are scaled
// by 1.02 before comparison, so the check must flag exactly that layer.
inline GradcheckReport gradcheck_model(const TcnConfig& cfg, std::uint64_t seed,
                                       double eps = 1e-4, double tolerance = 1e-4,
                                       const std::string& corrupt_layer = "",
                                       int workers = 1) {
  TcnConfig c = cfg;
  c.validate();
  TcnModel model(c, seed);
  model.set_training(false);

  Rng rng = Rng::substream(seed, 0x67636bULL);
  const std::int64_t B = 2;
  const std::int64_t L = model.receptive_field();
  const int n = c.num_joints;

  detail::GradcheckProblem prob;
  prob.input = Tensor::zeros({B, 2 * n, L});
  for (auto& v : prob.input.values) v = rng.uniform(-1.0, 1.0);
  prob.target = std::make_shared<Tensor>(Tensor::zeros({B, 3 * n, 1}));
  for (auto& v : prob.target->values) v = rng.uniform(-1.0, 1.0);
  prob.mask = std::make_shared<std::vector<std::uint8_t>>(
      static_cast<std::size_t>(B * n), 0);
  for (auto& m : *prob.mask) m = rng.bernoulli(0.8) ? 1 : 0;
  (*prob.mask)[0] = 1;  // keep the triangulation term non-empty
  prob.R = std::make_shared<std::vector<Eigen::Matrix3d>>();
  prob.T = std::make_shared<std::vector<Eigen::Vector3d>>();
  for (std::int64_t i = 0; i < B; ++i) {
    Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
    axis.normalize();
    prob.R->push_back(
        Eigen::AngleAxisd(rng.uniform(-1.5, 1.5), axis).toRotationMatrix());
    prob.T->push_back(Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()));
  }

  // Analytic gradients.
  {
    Tape tape;
    tape.backward(prob.build(tape, model));
  }
  std::vector<std::string> names;
  std::vector<std::vector<double>> analytic;
  for (auto& s : model.slots()) {
    if (!s.is_param) continue;
    names.push_back(s.name);
    std::vector<double> g = s.tensor.grad;
    if (!corrupt_layer.empty() && s.name == corrupt_layer)
      for (auto& v : g) v *= 1.02;
    analytic.push_back(std::move(g));
  }
  if (!corrupt_layer.empty()) {
    bool found = false;
    for (const auto& nm : names) found = found || nm == corrupt_layer;
    require(found, errc::config_error,
            "no parameter layer named '" + corrupt_layer + "'");
  }

  std::vector<GradcheckLayer> layers(names.size());
  auto check_slot = [&](TcnModel& m, std::size_t pi) {
    std::size_t seen = 0;
    NamedTensor* slot = nullptr;
    for (auto& s : m.slots()) {
      if (!s.is_param) continue;
      if (seen++ == pi) {
        slot = &s;
        break;
      }
    }
    GradcheckLayer layer;
    layer.name = slot->name;
    layer.checked = slot->tensor.numel();
    double worst = 0;
    for (std::size_t i = 0; i < slot->tensor.values.size(); ++i) {
      const double keep = slot->tensor.values[i];
      slot->tensor.values[i] = keep + eps;
      const double up = prob.value(m);
      slot->tensor.values[i] = keep - eps;
      const double dn = prob.value(m);
      slot->tensor.values[i] = keep;
      const double fd = (up - dn) / (2.0 * eps);
      const double an = analytic[pi][i];
      const double rel =
          std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
      if (rel > worst) worst = rel;
    }
    layer.max_rel_err = worst;
    layer.pass = worst < tolerance;
    layers[pi] = layer;
  };

  const int nw = std::max(1, std::min<int>(workers, static_cast<int>(names.size())));
  if (nw == 1) {
    for (std::size_t pi = 0; pi < names.size(); ++pi) check_slot(model, pi);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < nw; ++w)
      pool.emplace_back([&, w] {
        TcnModel local = model;  // private copy: fd perturbs parameters
        for (std::size_t pi = static_cast<std::size_t>(w); pi < names.size();
             pi += static_cast<std::size_t>(nw))
          check_slot(local, pi);
      });
    for (auto& t : pool) t.join();
  }

  GradcheckReport report;
  report.tolerance = tolerance;
  report.eps = eps;
  report.all_pass = true;
  for (auto& l : layers) report.all_pass = report.all_pass && l.pass;
  report.layers = std::move(layers);
  return report;
}

}  // namespace lift3d
