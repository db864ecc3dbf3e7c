#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "vitens/classifier.hpp"
#include "vitens/layers.hpp"
#include "vitens/ops.hpp"

namespace vitens {

struct ViTConfig {
  std::size_t image_size = 32;
  std::size_t patch_size = 4;
  std::size_t channels = 3;
  std::size_t embed_dim = 64;
  std::size_t num_blocks = 8;
  std::size_t num_heads = 4;
  std::size_t mlp_ratio = 4;
  std::size_t num_classes = 10;

  void validate() const;
  std::size_t grid() const { return image_size / patch_size; }
  std::size_t num_patches() const { return grid() * grid(); }
  std::size_t patch_dim() const { return channels * patch_size * patch_size; }
  Shape image_shape() const { return {channels, image_size, image_size}; }

  bool operator==(const ViTConfig&) const = default;
};

template <class T>
struct BlockParams {
  NormParams<T> norm1;
  LinearParams<T> qkv;
  LinearParams<T> proj;
  NormParams<T> norm2;
  LinearParams<T> fc1;
  LinearParams<T> fc2;
};

template <class T>
struct ViTParams {
  LinearParams<T> patch_embed;
  T class_token;  // [1, d]
  T pos_embed;    // [m + 1, d]
  std::vector<BlockParams<T>> blocks;
  NormParams<T> norm;
  LinearParams<T> head;
};

// Calls f(name, p.member...) for every parameter, in checkpoint order. All
// bundles must have the same number of blocks.
template <class F, class First, class... Rest>
void visit_parameters(F&& f, First& first, Rest&... rest) {
  f("patch_embed.weight", first.patch_embed.weight, rest.patch_embed.weight...);
  f("patch_embed.bias", first.patch_embed.bias, rest.patch_embed.bias...);
  f("class_token", first.class_token, rest.class_token...);
  f("pos_embed", first.pos_embed, rest.pos_embed...);
  for (std::size_t i = 0; i < first.blocks.size(); ++i) {
    const std::string p = "blocks." + std::to_string(i) + ".";
    f(p + "norm1.gamma", first.blocks[i].norm1.gamma, rest.blocks[i].norm1.gamma...);
    f(p + "norm1.beta", first.blocks[i].norm1.beta, rest.blocks[i].norm1.beta...);
    f(p + "qkv.weight", first.blocks[i].qkv.weight, rest.blocks[i].qkv.weight...);
    f(p + "qkv.bias", first.blocks[i].qkv.bias, rest.blocks[i].qkv.bias...);
    f(p + "proj.weight", first.blocks[i].proj.weight, rest.blocks[i].proj.weight...);
    f(p + "proj.bias", first.blocks[i].proj.bias, rest.blocks[i].proj.bias...);
    f(p + "norm2.gamma", first.blocks[i].norm2.gamma, rest.blocks[i].norm2.gamma...);
    f(p + "norm2.beta", first.blocks[i].norm2.beta, rest.blocks[i].norm2.beta...);
    f(p + "fc1.weight", first.blocks[i].fc1.weight, rest.blocks[i].fc1.weight...);
    f(p + "fc1.bias", first.blocks[i].fc1.bias, rest.blocks[i].fc1.bias...);
    f(p + "fc2.weight", first.blocks[i].fc2.weight, rest.blocks[i].fc2.weight...);
    f(p + "fc2.bias", first.blocks[i].fc2.bias, rest.blocks[i].fc2.bias...);
  }
  f("norm.gamma", first.norm.gamma, rest.norm.gamma...);
  f("norm.beta", first.norm.beta, rest.norm.beta...);
  f("head.weight", first.head.weight, rest.head.weight...);
  f("head.bias", first.head.bias, rest.head.bias...);
}

// Tokens leaving one transformer block.
struct BlockTokens {
  Tensor class_token;   // [1, d]
  Tensor patch_tokens;  // [m, d]
};

struct IntermediateStates {
  std::vector<BlockTokens> blocks;  // one per transformer block, in depth order
  Tensor logits;                    // [num_classes]
};

// Pre-norm vision transformer: patch embedding, a class token prepended at
// position 0, learned positional embeddings, n blocks of multi-head
// self-attention + GELU MLP with residuals, and the head g = final layer
// norm followed by one linear layer.
class ViTModel : public Trainable {
 public:
  using Bound = ViTParams<Tensor>;

  ViTModel(const ViTConfig& config, std::uint64_t seed);

  const ViTConfig& config() const { return config_; }
  ViTParams<Array>& params() { return params_; }
  const ViTParams<Array>& params() const { return params_; }

  Bound bind(Tape& tape, bool trainable) const;

  Tensor forward(const Bound& p, const Tensor& image) const;
  // Per-block tokens plus final logits, bit-identical to forward().
  IntermediateStates forward_collect(const Bound& p, const Tensor& image) const;
  // g: final norm + linear head, token [1,d] -> logits [num_classes].
  Tensor head(const Bound& p, const Tensor& token) const;
  // Self-ensemble: entry k is g(class token of block k). The last entry
  // equals states.logits exactly.
  std::vector<Tensor> ensemble_logits(const Bound& p, const IntermediateStates& states) const;

  Shape input_shape() const override { return config_.image_shape(); }
  std::size_t num_classes() const override { return config_.num_classes; }
  Tensor logits(Tape& tape, const Tensor& image) const override;

  std::vector<NamedParam> parameters() override;
  Tensor training_logits(Tape& tape, const Tensor& image,
                         std::vector<Tensor>& leaves) const override;

 private:
  Tensor embed(const Bound& p, const Tensor& image) const;
  Tensor block(const BlockParams<Tensor>& b, const Tensor& tokens) const;

  ViTConfig config_;
  ViTParams<Array> params_;
  ops::IndexMap patch_index_;
};

// Index map that cuts an image [C,H,W] into row-major patches [m, C*p*p].
ops::IndexMap patch_index_map(const ViTConfig& config);

}  // namespace vitens
