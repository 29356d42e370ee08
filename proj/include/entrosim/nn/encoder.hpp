#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "entrosim/entropy.hpp"
#include "entrosim/nn/layers.hpp"
#include "entrosim/nn/losses.hpp"
#include "entrosim/nn/params.hpp"

namespace entrosim::nn {

struct ConvBlock {
  std::size_t n_conv = 1;
  std::size_t filters = 8;
  bool operator==(const ConvBlock&) const = default;
};

/// VGG-shaped stack: each block is n_conv (3x3 conv + ReLU) followed by a
/// 2x2/2 max-pool, then flatten -> fc1 + ReLU -> embed (linear). A linear
/// head maps the embedding to n_classes logits.
struct EncoderConfig {
  std::size_t input_h = 64;
  std::size_t input_w = 64;
  std::vector<ConvBlock> blocks{{1, 8}, {1, 16}, {2, 32}};
  std::size_t fc1_units = 128;
  std::size_t embed_units = 64;
  std::size_t n_classes = 2;
  double input_scale = 0.125;  // entropy cells in [0,8] -> [0,1]

  /// 64x64 input, blocks [{1,8},{1,16},{2,32}], fc 128, embed 64.
  static EncoderConfig desk(std::size_t n_classes);
  /// 224x224 input, VGG-16 blocks [{2,64},{2,128},{3,256},{3,512},{3,512}], fc 1024, embed 512.
  static EncoderConfig paper(std::size_t n_classes);

  void validate() const;
  /// Channels * H * W after the last pool.
  std::size_t flat_features() const;

  bool operator==(const EncoderConfig&) const = default;
};

struct ParamSpec {
  std::string name;
  Shape shape;
  std::size_t fan_in;  // 0 for biases
};

/// Names and shapes of every trainable tensor, in canonical order.
std::vector<ParamSpec> parameter_layout(const EncoderConfig& config);

std::string conv_weight_name(std::size_t block, std::size_t conv);  // 1-based
std::string conv_bias_name(std::size_t block, std::size_t conv);

/// He-uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases. The
/// draws are made in double, so float and double sets agree up to rounding.
template <typename T>
ParamSet<T> initialize_parameters(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  ParamSet<T> params;
  std::mt19937_64 rng(seed);
  for (const auto& spec : parameter_layout(config)) {
    Tensor<T> t(spec.shape);
    if (spec.fan_in > 0) {
      const double bound = std::sqrt(6.0 / static_cast<double>(spec.fan_in));
      std::uniform_real_distribution<double> uni(-bound, bound);
      for (auto& v : t.storage()) v = static_cast<T>(uni(rng));
    }
    params.add(spec.name, std::move(t));
  }
  return params;
}

/// Activations kept from a forward pass for the backward pass.
template <typename T>
struct EncoderTrace {
  struct ConvStep {
    Tensor<T> input;
    Tensor<T> pre;  // before ReLU
  };
  struct PoolStep {
    Shape input_shape;
    std::vector<std::size_t> argmax;
  };
  std::vector<ConvStep> convs;
  std::vector<PoolStep> pools;
  Shape pooled_shape;
  Tensor<T> flat;
  Tensor<T> fc1_pre;
  Tensor<T> fc1_out;
};

/// Packs graphs into an [N,1,H,W] batch (raw entropy values).
template <typename T>
Tensor<T> make_input_batch(std::span<const EntropyGraph* const> graphs, const EncoderConfig& config) {
  Tensor<T> batch({graphs.size(), 1, config.input_h, config.input_w});
  const std::size_t cells = config.input_h * config.input_w;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const EntropyGraph& g = *graphs[i];
    if (g.height != config.input_h || g.width != config.input_w) {
      throw ShapeError("encoder: graph '" + g.sample_id + "' is " + std::to_string(g.height) + "x" +
                       std::to_string(g.width) + ", encoder expects " + std::to_string(config.input_h) + "x" +
                       std::to_string(config.input_w));
    }
    for (std::size_t k = 0; k < cells; ++k) batch[i * cells + k] = static_cast<T>(g.cells[k]);
  }
  return batch;
}

/// batch [N,1,H,W] -> embeddings [N, embed_units]
template <typename T>
Tensor<T> encode(const EncoderConfig& config, const ParamSet<T>& params, const Tensor<T>& batch,
                 EncoderTrace<T>* trace = nullptr) {
  if (batch.rank() != 4 || batch.dim(1) != 1 || batch.dim(2) != config.input_h || batch.dim(3) != config.input_w) {
    throw ShapeError("encoder: input " + shape_string(batch.shape()) + " does not match configured [N,1," +
                     std::to_string(config.input_h) + "," + std::to_string(config.input_w) + "]");
  }
  Tensor<T> x = batch;
  const T scale = static_cast<T>(config.input_scale);
  for (auto& v : x.storage()) v *= scale;

  for (std::size_t b = 0; b < config.blocks.size(); ++b) {
    for (std::size_t k = 0; k < config.blocks[b].n_conv; ++k) {
      const auto wname = conv_weight_name(b + 1, k + 1);
      Tensor<T> pre = conv2d(x, params.at(wname), params.at(conv_bias_name(b + 1, k + 1)), wname);
      Tensor<T> act = relu(pre);
      if (trace) trace->convs.push_back({std::move(x), std::move(pre)});
      x = std::move(act);
    }
    auto pooled = maxpool2(x, "enc.block" + std::to_string(b + 1) + ".pool");
    if (trace) trace->pools.push_back({x.shape(), std::move(pooled.argmax)});
    x = std::move(pooled.output);
  }
  if (trace) trace->pooled_shape = x.shape();
  Tensor<T> flat = flatten(x);
  Tensor<T> fc1_pre = dense(flat, params.at("head.fc1.w"), params.at("head.fc1.b"), "head.fc1");
  Tensor<T> fc1_out = relu(fc1_pre);
  Tensor<T> z = dense(fc1_out, params.at("head.embed.w"), params.at("head.embed.b"), "head.embed");
  if (trace) {
    trace->flat = std::move(flat);
    trace->fc1_pre = std::move(fc1_pre);
    trace->fc1_out = std::move(fc1_out);
  }
  return z;
}

namespace detail {
template <typename T>
void accumulate(ParamSet<T>& grads, const std::string& name, const Tensor<T>& g) {
  auto& dst = grads.at(name);
  if (dst.size() != g.size()) throw ShapeError("gradient size mismatch for " + name);
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}
}  // namespace detail

/// Adds d loss / d params into `grads` given d loss / d embedding.
template <typename T>
void encode_backward(const EncoderConfig& config, const ParamSet<T>& params, const EncoderTrace<T>& trace,
                     const Tensor<T>& grad_z, ParamSet<T>& grads) {
  auto ge = dense_grad(trace.fc1_out, params.at("head.embed.w"), grad_z, true, "head.embed");
  detail::accumulate(grads, "head.embed.w", ge.weights);
  detail::accumulate(grads, "head.embed.b", ge.bias);
  Tensor<T> g = relu_grad(trace.fc1_pre, ge.input);
  auto gf = dense_grad(trace.flat, params.at("head.fc1.w"), g, true, "head.fc1");
  detail::accumulate(grads, "head.fc1.w", gf.weights);
  detail::accumulate(grads, "head.fc1.b", gf.bias);
  g = gf.input.reshaped(trace.pooled_shape);

  std::size_t conv_index = trace.convs.size();
  for (std::size_t b = config.blocks.size(); b-- > 0;) {
    const auto& pool = trace.pools[b];
    g = maxpool2_grad(g, pool.argmax, pool.input_shape);
    for (std::size_t k = config.blocks[b].n_conv; k-- > 0;) {
      const auto& step = trace.convs[--conv_index];
      g = relu_grad(step.pre, g);
      const auto wname = conv_weight_name(b + 1, k + 1);
      const bool need_input = conv_index > 0;
      auto gc = conv2d_grad(step.input, params.at(wname), g, need_input, wname);
      detail::accumulate(grads, wname, gc.weights);
      detail::accumulate(grads, conv_bias_name(b + 1, k + 1), gc.bias);
      if (need_input) g = std::move(gc.input);
    }
  }
}

/// Embedding of one graph (batch of one).
template <typename T>
std::vector<T> encoder_forward(const EntropyGraph& graph, const EncoderConfig& config, const ParamSet<T>& params) {
  const EntropyGraph* one[] = {&graph};
  return encode(config, params, make_input_batch<T>(one, config)).storage();
}

/// Element-wise mean of the two branch embeddings.
template <typename T>
Tensor<T> fuse_embeddings(const Tensor<T>& z1, const Tensor<T>& z2) {
  if (z1.shape() != z2.shape()) {
    throw ShapeError("fuse_embeddings: shapes " + shape_string(z1.shape()) + " and " + shape_string(z2.shape()) +
                     " differ");
  }
  Tensor<T> z(z1.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = (z1[i] + z2[i]) / T{2};
  return z;
}

template <typename T>
std::vector<T> fuse_embeddings(std::span<const T> z1, std::span<const T> z2) {
  if (z1.size() != z2.size()) throw ShapeError("fuse_embeddings: length mismatch");
  std::vector<T> z(z1.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = (z1[i] + z2[i]) / T{2};
  return z;
}

/// One side of the Siamese pair. Both branches hold the same parameter
/// object, so a change made through one is visible through the other.
template <typename T>
class EncoderBranch {
 public:
  EncoderBranch(const EncoderConfig* config, std::shared_ptr<ParamSet<T>> params)
      : config_(config), params_(std::move(params)) {}

  Tensor<T> forward(const Tensor<T>& batch, EncoderTrace<T>* trace = nullptr) const {
    return encode(*config_, *params_, batch, trace);
  }
  void backward(const EncoderTrace<T>& trace, const Tensor<T>& grad_z, ParamSet<T>& grads) const {
    encode_backward(*config_, *params_, trace, grad_z, grads);
  }
  ParamSet<T>& params() const noexcept { return *params_; }

 private:
  const EncoderConfig* config_;
  std::shared_ptr<ParamSet<T>> params_;
};

template <typename T>
struct PairStep {
  LossBreakdown loss;
  Tensor<T> fused;   // [P, D]
  Tensor<T> logits;  // [P, K]
};

template <typename T>
class SiameseNet {
 public:
  SiameseNet(EncoderConfig config, ParamSet<T> params)
      : config_(std::make_unique<EncoderConfig>(std::move(config))),
        params_(std::make_shared<ParamSet<T>>(std::move(params))) {
    config_->validate();
    for (const auto& spec : parameter_layout(*config_)) {
      const auto* t = params_->find(spec.name);
      if (!t) throw ConfigError("model is missing parameter '" + spec.name + "'");
      if (t->shape() != spec.shape) {
        throw ShapeError("parameter '" + spec.name + "' has shape " + shape_string(t->shape()) + ", expected " +
                         shape_string(spec.shape));
      }
    }
  }

  static SiameseNet initialized(const EncoderConfig& config, std::uint64_t seed) {
    return SiameseNet(config, initialize_parameters<T>(config, seed));
  }

  const EncoderConfig& config() const noexcept { return *config_; }
  ParamSet<T>& params() noexcept { return *params_; }
  const ParamSet<T>& params() const noexcept { return *params_; }

  EncoderBranch<T> branch(int /*which*/) const { return EncoderBranch<T>(config_.get(), params_); }

  Tensor<T> logits(const Tensor<T>& fused) const {
    return dense(fused, params_->at("head.logits.w"), params_->at("head.logits.b"), "head.logits");
  }

  /// Single-sample inference: the batch goes through one branch and is
  /// fused with itself, which leaves the embedding unchanged.
  Tensor<T> embed(const Tensor<T>& batch) const { return branch(0).forward(batch); }

  /// Row-wise class probabilities for an [N,1,H,W] batch.
  Tensor<T> probabilities(const Tensor<T>& batch) const {
    Tensor<T> z = embed(batch);
    Tensor<T> lg = logits(fuse_embeddings(z, z));
    const std::size_t k = lg.dim(1);
    for (std::size_t i = 0; i < lg.dim(0); ++i) {
      const auto p = softmax<T>({lg.data() + i * k, k});
      std::copy(p.begin(), p.end(), lg.data() + i * k);
    }
    return lg;
  }

  /// Forward both branches on aligned pair batches, evaluate the combined
  /// objective on the fused embedding, and (if `grads` is given) add the
  /// parameter gradients of the total loss into it.
  PairStep<T> pair_step(const Tensor<T>& batch_a, const Tensor<T>& batch_b, std::span<const int> labels,
                        const CenterBank& bank, double alpha, ParamSet<T>* grads) const {
    if (batch_a.shape() != batch_b.shape()) throw ShapeError("pair_step: branch batches differ in shape");
    EncoderTrace<T> trace_a, trace_b;
    const auto ba = branch(0);
    const auto bb = branch(1);
    Tensor<T> za = ba.forward(batch_a, grads ? &trace_a : nullptr);
    Tensor<T> zb = bb.forward(batch_b, grads ? &trace_b : nullptr);
    Tensor<T> fused = fuse_embeddings(za, zb);
    Tensor<T> lg = logits(fused);
    auto obj = combined_loss(lg, labels, fused, bank, alpha);
    if (grads) {
      auto gh = dense_grad(fused, params_->at("head.logits.w"), obj.grad_logits, true, "head.logits");
      detail::accumulate(*grads, "head.logits.w", gh.weights);
      detail::accumulate(*grads, "head.logits.b", gh.bias);
      Tensor<T> gz = std::move(gh.input);
      for (std::size_t i = 0; i < gz.size(); ++i) gz[i] = (gz[i] + obj.grad_z[i]) / T{2};
      ba.backward(trace_a, gz, *grads);
      bb.backward(trace_b, gz, *grads);
    }
    return {obj.loss, std::move(fused), std::move(lg)};
  }

 private:
  std::unique_ptr<EncoderConfig> config_;
  std::shared_ptr<ParamSet<T>> params_;
};

}  // namespace entrosim::nn
