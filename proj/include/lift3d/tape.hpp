#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lift3d/error.hpp"
#include "lift3d/rng.hpp"
#include "lift3d/tensor.hpp"

namespace lift3d {

// Valid (no padding) dilated 1D cross-correlation.
// x: [batch, in_ch, time], w: [out_ch, in_ch, k], b: [out_ch].
// out[n, co, t] = b[co] + sum_{ci, j} w[co, ci, j] * x[n, ci, t + j*dilation]
// with output time = time - (k-1)*dilation.
inline Tensor conv1d_dilated(const Tensor& x, const Tensor& w, const Tensor& b,
                             std::int64_t dilation) {
  require(dilation >= 1, errc::config_error, "dilation must be >= 1");
  require(x.rank() == 3, errc::shape_error, "conv input must be [batch, ch, time]");
  require(w.rank() == 3, errc::shape_error, "conv weight must be [out, in, k]");
  const std::int64_t B = x.dim(0), Ci = x.dim(1), T = x.dim(2);
  const std::int64_t Co = w.dim(0), K = w.dim(2);
  require(w.dim(1) == Ci, errc::shape_error,
          "conv weight expects " + std::to_string(w.dim(1)) +
              " input channels, input has " + std::to_string(Ci));
  require(b.rank() == 1 && b.dim(0) == Co, errc::shape_error,
          "conv bias shape does not match output channels");
  const std::int64_t To = T - (K - 1) * dilation;
  require(To >= 1, errc::sequence_too_short,
          "input time " + std::to_string(T) + " is shorter than the kernel span " +
              std::to_string((K - 1) * dilation + 1));

  Tensor out = Tensor::zeros({B, Co, To});
  for (std::int64_t n = 0; n < B; ++n) {
    for (std::int64_t co = 0; co < Co; ++co) {
      double* orow = &out.values[static_cast<std::size_t>((n * Co + co) * To)];
      const double bias = b.values[static_cast<std::size_t>(co)];
      for (std::int64_t t = 0; t < To; ++t) orow[t] = bias;
      for (std::int64_t ci = 0; ci < Ci; ++ci) {
        const double* xrow = &x.values[static_cast<std::size_t>((n * Ci + ci) * T)];
        const double* wrow = &w.values[static_cast<std::size_t>((co * Ci + ci) * K)];
        for (std::int64_t j = 0; j < K; ++j) {
          const double wv = wrow[j];
          const double* xs = xrow + j * dilation;
          for (std::int64_t t = 0; t < To; ++t) orow[t] += wv * xs[t];
        }
      }
    }
  }
  return out;
}

// Reverse-mode tape over Tensors. Building an op records the forward value
// and a closure that routes this node's gradient into its inputs; backward()
// walks the nodes once in reverse creation order. Gradients start at exact
// zero, so parameters off the loss path finish with exactly zero gradient.
class Tape {
 public:
  using NodeId = int;

  NodeId constant(Tensor t, std::string label = "const") {
    return push(std::move(t), false, nullptr, std::move(label));
  }

  // Registers an externally-owned parameter tensor. After backward(), the
  // accumulated gradient is written to param.grad. Re-registering the same
  // tensor (a second forward pass on this tape) returns the original node,
  // so every use site routes its gradient into one accumulator; separate
  // nodes per registration would leave only the last pass's gradient after
  // the write-back.
  NodeId param(Tensor& p, std::string label) {
    for (const auto& [id, tensor] : params_)
      if (tensor == &p) return id;
    const NodeId id = push(p, true, nullptr, std::move(label));
    params_.push_back({id, &p});
    return id;
  }

  const Tensor& value(NodeId id) const { return node(id).value; }
  const std::vector<double>& grad(NodeId id) const { return node(id).grad; }
  int size() const { return static_cast<int>(nodes_.size()); }

  // Throws numeric-failure naming `where` if a node's value is non-finite.
  void check_finite(NodeId id, const std::string& where) const {
    require(node(id).value.all_finite(), errc::numeric_failure,
            "non-finite values after " + where);
  }

  NodeId conv1d(NodeId x, NodeId w, NodeId b, std::int64_t dilation,
                std::string label = "conv1d") {
    Tensor out = conv1d_dilated(value(x), value(w), value(b), dilation);
    const bool rg = needs_grad(x) || needs_grad(w) || needs_grad(b);
    const NodeId y = push(std::move(out), rg, nullptr, std::move(label));
    if (!rg) return y;
    node(y).backprop = [x, w, b, y, dilation](Tape& tp) {
      const Tensor& xv = tp.value(x);
      const Tensor& wv = tp.value(w);
      const std::vector<double>& g = tp.grad(y);
      const std::int64_t B = xv.dim(0), Ci = xv.dim(1), T = xv.dim(2);
      const std::int64_t Co = wv.dim(0), K = wv.dim(2);
      const std::int64_t To = T - (K - 1) * dilation;
      const bool need_x = tp.needs_grad(x);
      const bool need_w = tp.needs_grad(w);
      const bool need_b = tp.needs_grad(b);
      for (std::int64_t n = 0; n < B; ++n) {
        for (std::int64_t co = 0; co < Co; ++co) {
          const double* grow =
              &g[static_cast<std::size_t>((n * Co + co) * To)];
          if (need_b) {
            double s = 0;
            for (std::int64_t t = 0; t < To; ++t) s += grow[t];
            tp.grad_of(b)[static_cast<std::size_t>(co)] += s;
          }
          for (std::int64_t ci = 0; ci < Ci; ++ci) {
            const double* xrow =
                &xv.values[static_cast<std::size_t>((n * Ci + ci) * T)];
            const double* wrow =
                &wv.values[static_cast<std::size_t>((co * Ci + ci) * K)];
            double* dxrow =
                need_x ? &tp.grad_of(x)[static_cast<std::size_t>((n * Ci + ci) * T)]
                       : nullptr;
            double* dwrow =
                need_w ? &tp.grad_of(w)[static_cast<std::size_t>((co * Ci + ci) * K)]
                       : nullptr;
            for (std::int64_t j = 0; j < K; ++j) {
              const std::int64_t off = j * dilation;
              if (need_x) {
                const double wvj = wrow[j];
                double* dxs = dxrow + off;
                for (std::int64_t t = 0; t < To; ++t) dxs[t] += wvj * grow[t];
              }
              if (need_w) {
                const double* xs = xrow + off;
                double s = 0;
                for (std::int64_t t = 0; t < To; ++t) s += xs[t] * grow[t];
                dwrow[j] += s;
              }
            }
          }
        }
      }
    };
    return y;
  }

  // Batch normalisation over the batch and time axes, one moment pair per
  // channel, biased variance. In training mode the batch moments normalise
  // and the running stats (plain tensors owned by the model, not
  // differentiated) are updated in place; in eval mode the running stats
  // normalise and stay untouched.
  NodeId batchnorm(NodeId x, NodeId gamma, NodeId beta, Tensor* running_mean,
                   Tensor* running_var, bool training, double momentum,
                   double eps = 1e-5, std::string label = "batchnorm") {
    const Tensor& xv = value(x);
    require(xv.rank() == 3, errc::shape_error, "batchnorm input must be [batch, ch, time]");
    const std::int64_t B = xv.dim(0), C = xv.dim(1), T = xv.dim(2);
    require(value(gamma).rank() == 1 && value(gamma).dim(0) == C &&
                value(beta).rank() == 1 && value(beta).dim(0) == C,
            errc::shape_error, "batchnorm gamma/beta must be [ch]");
    require(running_mean && running_var && running_mean->numel() == C &&
                running_var->numel() == C,
            errc::shape_error, "batchnorm running stats must be [ch]");
    const std::int64_t M = B * T;
    require(M >= 1, errc::shape_error, "batchnorm needs at least one sample");

    auto xhat = std::make_shared<std::vector<double>>(xv.values.size());
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(C));
    Tensor out = Tensor::zeros({B, C, T});
    const Tensor& gv = value(gamma);
    const Tensor& bv = value(beta);

    for (std::int64_t c = 0; c < C; ++c) {
      double mean, var;
      if (training) {
        double s = 0, s2 = 0;
        for (std::int64_t n = 0; n < B; ++n) {
          const double* row = &xv.values[static_cast<std::size_t>((n * C + c) * T)];
          for (std::int64_t t = 0; t < T; ++t) s += row[t];
        }
        mean = s / static_cast<double>(M);
        for (std::int64_t n = 0; n < B; ++n) {
          const double* row = &xv.values[static_cast<std::size_t>((n * C + c) * T)];
          for (std::int64_t t = 0; t < T; ++t) {
            const double d = row[t] - mean;
            s2 += d * d;
          }
        }
        var = s2 / static_cast<double>(M);
        auto& rm = running_mean->values[static_cast<std::size_t>(c)];
        auto& rv = running_var->values[static_cast<std::size_t>(c)];
        rm = (1.0 - momentum) * rm + momentum * mean;
        rv = (1.0 - momentum) * rv + momentum * var;
      } else {
        mean = running_mean->values[static_cast<std::size_t>(c)];
        var = running_var->values[static_cast<std::size_t>(c)];
      }
      const double inv = 1.0 / std::sqrt(var + eps);
      (*inv_std)[static_cast<std::size_t>(c)] = inv;
      const double gc = gv.values[static_cast<std::size_t>(c)];
      const double bc = bv.values[static_cast<std::size_t>(c)];
      for (std::int64_t n = 0; n < B; ++n) {
        const std::size_t base = static_cast<std::size_t>((n * C + c) * T);
        for (std::int64_t t = 0; t < T; ++t) {
          const double xh = (xv.values[base + static_cast<std::size_t>(t)] - mean) * inv;
          (*xhat)[base + static_cast<std::size_t>(t)] = xh;
          out.values[base + static_cast<std::size_t>(t)] = gc * xh + bc;
        }
      }
    }

    const bool rg = needs_grad(x) || needs_grad(gamma) || needs_grad(beta);
    const NodeId y = push(std::move(out), rg, nullptr, std::move(label));
    if (!rg) return y;
    node(y).backprop = [x, gamma, beta, y, xhat, inv_std, B, C, T,
                        training](Tape& tp) {
      const std::vector<double>& g = tp.grad(y);
      const Tensor& gv = tp.value(gamma);
      const double Md = static_cast<double>(B * T);
      for (std::int64_t c = 0; c < C; ++c) {
        double sum_g = 0, sum_gx = 0;
        for (std::int64_t n = 0; n < B; ++n) {
          const std::size_t base = static_cast<std::size_t>((n * C + c) * T);
          for (std::int64_t t = 0; t < T; ++t) {
            const std::size_t i = base + static_cast<std::size_t>(t);
            sum_g += g[i];
            sum_gx += g[i] * (*xhat)[i];
          }
        }
        if (tp.needs_grad(beta)) tp.grad_of(beta)[static_cast<std::size_t>(c)] += sum_g;
        if (tp.needs_grad(gamma)) tp.grad_of(gamma)[static_cast<std::size_t>(c)] += sum_gx;
        if (!tp.needs_grad(x)) continue;
        const double gc = gv.values[static_cast<std::size_t>(c)];
        const double inv = (*inv_std)[static_cast<std::size_t>(c)];
        std::vector<double>& dx = tp.grad_of(x);
        for (std::int64_t n = 0; n < B; ++n) {
          const std::size_t base = static_cast<std::size_t>((n * C + c) * T);
          for (std::int64_t t = 0; t < T; ++t) {
            const std::size_t i = base + static_cast<std::size_t>(t);
            if (training) {
              // d/dx of (x - mu)/sigma with mu, sigma functions of the batch.
              dx[i] += gc * inv / Md *
                       (Md * g[i] - sum_g - (*xhat)[i] * sum_gx);
            } else {
              dx[i] += gc * inv * g[i];
            }
          }
        }
      }
    };
    return y;
  }

  NodeId relu(NodeId x, std::string label = "relu") {
    const Tensor& xv = value(x);
    Tensor out = xv;
    for (auto& v : out.values) v = v > 0 ? v : 0.0;
    const bool rg = needs_grad(x);
    const NodeId y = push(std::move(out), rg, nullptr, std::move(label));
    if (!rg) return y;
    node(y).backprop = [x, y](Tape& tp) {
      const Tensor& xv = tp.value(x);
      const std::vector<double>& g = tp.grad(y);
      std::vector<double>& dx = tp.grad_of(x);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (xv.values[i] > 0) dx[i] += g[i];
    };
    return y;
  }

  // Inverted dropout: kept activations are scaled by 1/(1-rate) so the
  // expectation is unchanged. Identity (no node) when not training.
  NodeId dropout(NodeId x, double rate, Rng* rng, bool training,
                 std::string label = "dropout") {
    require(rate >= 0.0 && rate < 1.0, errc::config_error,
            "dropout rate must be in [0, 1)");
    if (!training || rate == 0.0) return x;
    require(rng != nullptr, errc::state_error, "training dropout needs an rng");
    const Tensor& xv = value(x);
    auto mask = std::make_shared<std::vector<double>>(xv.values.size());
    const double keep = 1.0 - rate;
    const double scale = 1.0 / keep;
    Tensor out = xv;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      const double m = rng->bernoulli(keep) ? scale : 0.0;
      (*mask)[i] = m;
      out.values[i] *= m;
    }
    const bool rg = needs_grad(x);
    const NodeId y = push(std::move(out), rg, nullptr, std::move(label));
    if (!rg) return y;
    node(y).backprop = [x, y, mask](Tape& tp) {
      const std::vector<double>& g = tp.grad(y);
      std::vector<double>& dx = tp.grad_of(x);
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * (*mask)[i];
    };
    return y;
  }

  // skip + x where skip's time axis is longer by an even margin; the skip is
  // cropped symmetrically, matching how valid convolutions shrink time.
  NodeId residual_add(NodeId skip, NodeId x, std::string label = "residual") {
    const Tensor& sv = value(skip);
    const Tensor& xv = value(x);
    require(sv.rank() == 3 && xv.rank() == 3, errc::shape_error,
            "residual_add operands must be [batch, ch, time]");
    require(sv.dim(0) == xv.dim(0) && sv.dim(1) == xv.dim(1), errc::shape_error,
            "residual_add operands disagree on batch/channels");
    const std::int64_t Ts = sv.dim(2), Tx = xv.dim(2);
    require(Ts >= Tx && (Ts - Tx) % 2 == 0, errc::shape_error,
            "residual skip time " + std::to_string(Ts) +
                " cannot be centre-cropped to " + std::to_string(Tx));
    const std::int64_t off = (Ts - Tx) / 2;
    const std::int64_t B = xv.dim(0), C = xv.dim(1);
    Tensor out = Tensor::zeros({B, C, Tx});
    for (std::int64_t n = 0; n < B; ++n)
      for (std::int64_t c = 0; c < C; ++c) {
        const double* srow =
            &sv.values[static_cast<std::size_t>((n * C + c) * Ts + off)];
        const double* xrow = &xv.values[static_cast<std::size_t>((n * C + c) * Tx)];
        double* orow = &out.values[static_cast<std::size_t>((n * C + c) * Tx)];
        for (std::int64_t t = 0; t < Tx; ++t) orow[t] = srow[t] + xrow[t];
      }
    const bool rg = needs_grad(skip) || needs_grad(x);
    const NodeId y = push(std::move(out), rg, nullptr, std::move(label));
    if (!rg) return y;
    node(y).backprop = [skip, x, y, off, B, C, Ts, Tx](Tape& tp) {
      const std::vector<double>& g = tp.grad(y);
      for (std::int64_t n = 0; n < B; ++n)
        for (std::int64_t c = 0; c < C; ++c) {
          const std::size_t gbase = static_cast<std::size_t>((n * C + c) * Tx);
          if (tp.needs_grad(skip)) {
            double* ds =
                &tp.grad_of(skip)[static_cast<std::size_t>((n * C + c) * Ts + off)];
            for (std::int64_t t = 0; t < Tx; ++t)
              ds[t] += g[gbase + static_cast<std::size_t>(t)];
          }
          if (tp.needs_grad(x)) {
            double* dx = &tp.grad_of(x)[gbase];
            for (std::int64_t t = 0; t < Tx; ++t)
              dx[t] += g[gbase + static_cast<std::size_t>(t)];
          }
        }
    };
    return y;
  }

  // Per-batch-item rigid map on packed 3D joint channels:
  // y[n, 3j..3j+2, t] = R[n] * x[n, 3j..3j+2, t] + T[n].
  NodeId rigid_map(NodeId x, std::shared_ptr<std::vector<Eigen::Matrix3d>> R,
                   std::shared_ptr<std::vector<Eigen::Vector3d>> T3,
                   std::string label = "rigid_map") {
    const Tensor& xv = value(x);
    require(xv.rank() == 3, errc::shape_error, "rigid_map input must be [batch, 3N, time]");
    const std::int64_t B = xv.dim(0), C = xv.dim(1), T = xv.dim(2);
    require(C % 3 == 0, errc::shape_error, "rigid_map channels must be a multiple of 3");
    require(R && T3 && static_cast<std::int64_t>(R->size()) == B &&
                static_cast<std::int64_t>(T3->size()) == B,
            errc::shape_error, "rigid_map needs one transform per batch item");
    const std::int64_t N = C / 3;
    Tensor out = Tensor::zeros({B, C, T});
    for (std::int64_t n = 0; n < B; ++n) {
      const Eigen::Matrix3d& Rn = (*R)[static_cast<std::size_t>(n)];
      const Eigen::Vector3d& Tn = (*T3)[static_cast<std::size_t>(n)];
      for (std::int64_t j = 0; j < N; ++j) {
        const double* x0 = &xv.values[static_cast<std::size_t>((n * C + 3 * j) * T)];
        const double* x1 = x0 + T;
        const double* x2 = x1 + T;
        double* y0 = &out.values[static_cast<std::size_t>((n * C + 3 * j) * T)];
        double* y1 = y0 + T;
        double* y2 = y1 + T;
        for (std::int64_t t = 0; t < T; ++t) {
          const double a = x0[t], b = x1[t], c = x2[t];
          y0[t] = Rn(0, 0) * a + Rn(0, 1) * b + Rn(0, 2) * c + Tn(0);
          y1[t] = Rn(1, 0) * a + Rn(1, 1) * b + Rn(1, 2) * c + Tn(1);
          y2[t] = Rn(2, 0) * a + Rn(2, 1) * b + Rn(2, 2) * c + Tn(2);
        }
      }
    }
    const bool rg = needs_grad(x);
    const NodeId y = push(std::move(out), rg, nullptr, std::move(label));
    if (!rg) return y;
    node(y).backprop = [x, y, R, B, C, T](Tape& tp) {
      const std::vector<double>& g = tp.grad(y);
      std::vector<double>& dx = tp.grad_of(x);
      const std::int64_t N = C / 3;
      for (std::int64_t n = 0; n < B; ++n) {
        const Eigen::Matrix3d& Rn = (*R)[static_cast<std::size_t>(n)];
        for (std::int64_t j = 0; j < N; ++j) {
          const std::size_t base = static_cast<std::size_t>((n * C + 3 * j) * T);
          const double* g0 = &g[base];
          const double* g1 = g0 + T;
          const double* g2 = g1 + T;
          double* d0 = &dx[base];
          double* d1 = d0 + T;
          double* d2 = d1 + T;
          for (std::int64_t t = 0; t < T; ++t) {
            const double a = g0[t], b = g1[t], c = g2[t];
            d0[t] += Rn(0, 0) * a + Rn(1, 0) * b + Rn(2, 0) * c;
            d1[t] += Rn(0, 1) * a + Rn(1, 1) * b + Rn(2, 1) * c;
            d2[t] += Rn(0, 2) * a + Rn(1, 2) * b + Rn(2, 2) * c;
          }
        }
      }
    };
    return y;
  }

  // Sum over frames of the per-frame Frobenius norm of (pred - target),
  // restricted to valid joints, scaled by inv_count. Frames whose valid set
  // is empty contribute zero. mask is [batch, N, time] for pred [batch, 3N,
  // time]. The gradient at an exactly-zero norm is defined as zero.
  NodeId masked_frob_loss(NodeId pred, std::shared_ptr<Tensor> target,
                          std::shared_ptr<std::vector<std::uint8_t>> mask,
                          double inv_count, std::string label = "frob_loss") {
    const Tensor& pv = value(pred);
    require(pv.rank() == 3 && pv.dim(1) % 3 == 0, errc::shape_error,
            "loss input must be [batch, 3N, time]");
    require(target && target->same_shape(pv), errc::shape_error,
            "loss target shape " + (target ? target->shape_str() : "null") +
                " does not match prediction " + pv.shape_str());
    const std::int64_t B = pv.dim(0), C = pv.dim(1), T = pv.dim(2);
    const std::int64_t N = C / 3;
    require(mask && static_cast<std::int64_t>(mask->size()) == B * N * T,
            errc::shape_error, "loss mask must be [batch, N, time]");

    auto norms = std::make_shared<std::vector<double>>(
        static_cast<std::size_t>(B * T), 0.0);
    double total = 0;
    for (std::int64_t n = 0; n < B; ++n)
      for (std::int64_t t = 0; t < T; ++t) {
        double s = 0;
        for (std::int64_t j = 0; j < N; ++j) {
          if (!(*mask)[static_cast<std::size_t>((n * N + j) * T + t)]) continue;
          for (std::int64_t r = 0; r < 3; ++r) {
            const std::size_t i =
                static_cast<std::size_t>((n * C + 3 * j + r) * T + t);
            const double d = pv.values[i] - target->values[i];
            s += d * d;
          }
        }
        const double nrm = std::sqrt(s);
        (*norms)[static_cast<std::size_t>(n * T + t)] = nrm;
        total += nrm;
      }

    const bool rg = needs_grad(pred);
    const NodeId y =
        push(Tensor::scalar(total * inv_count), rg, nullptr, std::move(label));
    if (!rg) return y;
    node(y).backprop = [pred, y, target, mask, norms, inv_count, B, C, T,
                        N](Tape& tp) {
      const double gy = tp.grad(y)[0];
      const Tensor& pv = tp.value(pred);
      std::vector<double>& dx = tp.grad_of(pred);
      for (std::int64_t n = 0; n < B; ++n)
        for (std::int64_t t = 0; t < T; ++t) {
          const double nrm = (*norms)[static_cast<std::size_t>(n * T + t)];
          if (nrm <= 0.0) continue;
          const double coef = gy * inv_count / nrm;
          for (std::int64_t j = 0; j < N; ++j) {
            if (!(*mask)[static_cast<std::size_t>((n * N + j) * T + t)]) continue;
            for (std::int64_t r = 0; r < 3; ++r) {
              const std::size_t i =
                  static_cast<std::size_t>((n * C + 3 * j + r) * T + t);
              dx[i] += coef * (pv.values[i] - target->values[i]);
            }
          }
        }
    };
    return y;
  }

  // Sum over frames of the per-frame Frobenius norm of (a - b) over all
  // channels, scaled by inv_count. Gradient flows into both operands.
  NodeId pair_frob_loss(NodeId a, NodeId b, double inv_count,
                        std::string label = "pair_loss") {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require(av.rank() == 3 && av.same_shape(bv), errc::shape_error,
            "pair loss operands must share shape [batch, ch, time]");
    const std::int64_t B = av.dim(0), C = av.dim(1), T = av.dim(2);
    auto norms = std::make_shared<std::vector<double>>(
        static_cast<std::size_t>(B * T), 0.0);
    double total = 0;
    for (std::int64_t n = 0; n < B; ++n)
      for (std::int64_t t = 0; t < T; ++t) {
        double s = 0;
        for (std::int64_t c = 0; c < C; ++c) {
          const std::size_t i = static_cast<std::size_t>((n * C + c) * T + t);
          const double d = av.values[i] - bv.values[i];
          s += d * d;
        }
        const double nrm = std::sqrt(s);
        (*norms)[static_cast<std::size_t>(n * T + t)] = nrm;
        total += nrm;
      }
    const bool rg = needs_grad(a) || needs_grad(b);
    const NodeId y =
        push(Tensor::scalar(total * inv_count), rg, nullptr, std::move(label));
    if (!rg) return y;
    node(y).backprop = [a, b, y, norms, inv_count, B, C, T](Tape& tp) {
      const double gy = tp.grad(y)[0];
      const Tensor& av = tp.value(a);
      const Tensor& bv = tp.value(b);
      for (std::int64_t n = 0; n < B; ++n)
        for (std::int64_t t = 0; t < T; ++t) {
          const double nrm = (*norms)[static_cast<std::size_t>(n * T + t)];
          if (nrm <= 0.0) continue;
          const double coef = gy * inv_count / nrm;
          for (std::int64_t c = 0; c < C; ++c) {
            const std::size_t i = static_cast<std::size_t>((n * C + c) * T + t);
            const double d = coef * (av.values[i] - bv.values[i]);
            if (tp.needs_grad(a)) tp.grad_of(a)[i] += d;
            if (tp.needs_grad(b)) tp.grad_of(b)[i] -= d;
          }
        }
    };
    return y;
  }

  // Weighted sum of scalar nodes.
  NodeId weighted_sum(const std::vector<std::pair<double, NodeId>>& terms,
                      std::string label = "wsum") {
    double total = 0;
    bool rg = false;
    for (const auto& [w, id] : terms) {
      require(value(id).numel() == 1, errc::shape_error,
              "weighted_sum needs scalar terms");
      total += w * value(id).values[0];
      rg = rg || needs_grad(id);
    }
    const NodeId y = push(Tensor::scalar(total), rg, nullptr, std::move(label));
    if (!rg) return y;
    auto terms_copy = terms;
    node(y).backprop = [y, terms_copy](Tape& tp) {
      const double gy = tp.grad(y)[0];
      for (const auto& [w, id] : terms_copy)
        if (tp.needs_grad(id)) tp.grad_of(id)[0] += w * gy;
    };
    return y;
  }

  // Seeds d(loss)/d(loss) = 1, walks the tape in reverse, then writes each
  // registered parameter's gradient into its tensor.
  void backward(NodeId loss) {
    require(!nodes_.empty(), errc::state_error,
            "backward called on an empty tape (no forward pass recorded)");
    require(loss >= 0 && loss < size(), errc::state_error,
            "backward target is not a node of this tape");
    require(node(loss).value.numel() == 1, errc::shape_error,
            "backward needs a scalar loss node");
    require(!backward_done_, errc::state_error,
            "backward already ran on this tape");
    backward_done_ = true;

    for (auto& n : nodes_)
      if (n.requires_grad) n.grad.assign(n.value.values.size(), 0.0);
    if (!node(loss).requires_grad)
      node(loss).grad.assign(1, 0.0);
    node(loss).grad[0] = 1.0;

    for (NodeId i = loss; i >= 0; --i) {
      Node& n = node(i);
      if (n.requires_grad && n.backprop) n.backprop(*this);
    }
    for (const auto& [id, tensor] : params_) tensor->grad = node(id).grad;
  }

  bool needs_grad(NodeId id) const { return node(id).requires_grad; }

  std::vector<double>& grad_of(NodeId id) {
    Node& n = node(id);
    require(!n.grad.empty(), errc::state_error,
            "gradient requested before backward allocated it");
    return n.grad;
  }

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    std::function<void(Tape&)> backprop;
    bool requires_grad = false;
    std::string label;
  };

  Node& node(NodeId id) {
    require(id >= 0 && id < size(), errc::state_error, "node id out of range");
    return nodes_[static_cast<std::size_t>(id)];
  }
  const Node& node(NodeId id) const {
    require(id >= 0 && id < size(), errc::state_error, "node id out of range");
    return nodes_[static_cast<std::size_t>(id)];
  }

  NodeId push(Tensor value, bool requires_grad,
              std::function<void(Tape&)> backprop, std::string label) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backprop = std::move(backprop);
    n.label = std::move(label);
    nodes_.push_back(std::move(n));
    return size() - 1;
  }

  std::vector<Node> nodes_;
  std::vector<std::pair<NodeId, Tensor*>> params_;
  bool backward_done_ = false;
};

}  // namespace lift3d
