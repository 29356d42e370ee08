#include "entrosim/errors.hpp"
#include "entrosim/nn/encoder.hpp"

namespace entrosim::nn {

EncoderConfig EncoderConfig::desk(std::size_t n_classes) {
  EncoderConfig c;
  c.input_h = 64;
  c.input_w = 64;
  c.blocks = {{1, 8}, {1, 16}, {2, 32}};
  c.fc1_units = 128;
  c.embed_units = 64;
  c.n_classes = n_classes;
  return c;
}

EncoderConfig EncoderConfig::paper(std::size_t n_classes) {
  EncoderConfig c;
  c.input_h = 224;
  c.input_w = 224;
  c.blocks = {{2, 64}, {2, 128}, {3, 256}, {3, 512}, {3, 512}};
  c.fc1_units = 1024;
  c.embed_units = 512;
  c.n_classes = n_classes;
  return c;
}

void EncoderConfig::validate() const {
  if (blocks.empty()) throw ConfigError("encoder: at least one conv block is required");
  if (input_h == 0 || input_w == 0) throw ConfigError("encoder: input dims must be >= 1");
  if (fc1_units == 0 || embed_units == 0) throw ConfigError("encoder: fc1_units and embed_units must be >= 1");
  if (n_classes < 2) throw ConfigError("encoder: n_classes must be >= 2");
  if (!(input_scale > 0.0)) throw ConfigError("encoder: input_scale must be > 0");
  std::size_t h = input_h, w = input_w;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].n_conv == 0 || blocks[b].filters == 0) {
      throw ConfigError("encoder: block " + std::to_string(b + 1) + " needs n_conv >= 1 and filters >= 1");
    }
    if (h < 2 || w < 2) {
      throw ConfigError("encoder: spatial size " + std::to_string(h) + "x" + std::to_string(w) + " before block " +
                        std::to_string(b + 1) + " pool is below 2");
    }
    h /= 2;
    w /= 2;
  }
}

std::size_t EncoderConfig::flat_features() const {
  std::size_t h = input_h, w = input_w;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    h /= 2;
    w /= 2;
  }
  return blocks.back().filters * h * w;
}

std::string conv_weight_name(std::size_t block, std::size_t conv) {
  return "enc.block" + std::to_string(block) + ".conv" + std::to_string(conv) + ".w";
}

std::string conv_bias_name(std::size_t block, std::size_t conv) {
  return "enc.block" + std::to_string(block) + ".conv" + std::to_string(conv) + ".b";
}

std::vector<ParamSpec> parameter_layout(const EncoderConfig& config) {
  std::vector<ParamSpec> specs;
  std::size_t channels = 1;
  for (std::size_t b = 0; b < config.blocks.size(); ++b) {
    for (std::size_t k = 0; k < config.blocks[b].n_conv; ++k) {
      const std::size_t out = config.blocks[b].filters;
      specs.push_back({conv_weight_name(b + 1, k + 1), {out, channels, 3, 3}, channels * 9});
      specs.push_back({conv_bias_name(b + 1, k + 1), {out}, 0});
      channels = out;
    }
  }
  const std::size_t flat = config.flat_features();
  specs.push_back({"head.fc1.w", {config.fc1_units, flat}, flat});
  specs.push_back({"head.fc1.b", {config.fc1_units}, 0});
  specs.push_back({"head.embed.w", {config.embed_units, config.fc1_units}, config.fc1_units});
  specs.push_back({"head.embed.b", {config.embed_units}, 0});
  specs.push_back({"head.logits.w", {config.n_classes, config.embed_units}, config.embed_units});
  specs.push_back({"head.logits.b", {config.n_classes}, 0});
  return specs;
}

}  // namespace entrosim::nn
