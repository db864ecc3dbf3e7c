#include "vitens/vit.hpp"

#include <cmath>
#include <stdexcept>

namespace vitens {

namespace {
constexpr double kInitStd = 0.02;
}

void ViTConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("ViTConfig: " + what); };
  if (image_size == 0 || patch_size == 0 || channels == 0 || embed_dim == 0 || num_blocks == 0 ||
      num_heads == 0 || mlp_ratio == 0 || num_classes < 2) {
    fail("all sizes must be positive and num_classes >= 2");
  }
  if (image_size % patch_size != 0) {
    fail("image_size " + std::to_string(image_size) + " not divisible by patch_size " +
         std::to_string(patch_size));
  }
  if (embed_dim % num_heads != 0) {
    fail("embed_dim " + std::to_string(embed_dim) + " not divisible by num_heads " +
         std::to_string(num_heads));
  }
}

ops::IndexMap patch_index_map(const ViTConfig& c) {
  const std::size_t g = c.grid(), p = c.patch_size, s = c.image_size;
  auto map = std::make_shared<std::vector<std::int64_t>>();
  map->reserve(c.num_patches() * c.patch_dim());
  for (std::size_t gy = 0; gy < g; ++gy)
    for (std::size_t gx = 0; gx < g; ++gx)
      for (std::size_t ch = 0; ch < c.channels; ++ch)
        for (std::size_t py = 0; py < p; ++py)
          for (std::size_t px = 0; px < p; ++px)
            map->push_back(static_cast<std::int64_t>((ch * s + gy * p + py) * s + gx * p + px));
  return map;
}

ViTModel::ViTModel(const ViTConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = config_.embed_dim;
  const std::size_t hidden = d * config_.mlp_ratio;
  params_.patch_embed =
      init_linear(config_.patch_dim(), d, 1.0 / std::sqrt(static_cast<double>(config_.patch_dim())), rng);
  params_.class_token = random_normal({1, d}, kInitStd, rng);
  params_.pos_embed = random_normal({config_.num_patches() + 1, d}, kInitStd, rng);
  for (std::size_t i = 0; i < config_.num_blocks; ++i) {
    BlockParams<Array> b;
    b.norm1 = init_norm(d);
    b.qkv = init_linear_xavier(d, 3 * d, rng);
    b.proj = init_linear_xavier(d, d, rng);
    b.norm2 = init_norm(d);
    b.fc1 = init_linear_xavier(d, hidden, rng);
    b.fc2 = init_linear_xavier(hidden, d, rng);
    params_.blocks.push_back(std::move(b));
  }
  params_.norm = init_norm(d);
  params_.head = init_linear(d, config_.num_classes, kInitStd, rng);
  patch_index_ = patch_index_map(config_);
}

ViTModel::Bound ViTModel::bind(Tape& tape, bool trainable) const {
  Bound bound;
  bound.blocks.resize(params_.blocks.size());
  visit_parameters([&](const std::string&, const Array& a, Tensor& t) { t = tape.parameter(a, trainable); },
                   params_, bound);
  return bound;
}

Tensor ViTModel::embed(const Bound& p, const Tensor& image) const {
  require_image_shape(config_.image_shape(), image.shape(), "ViTModel");
  Tensor patches = ops::gather(image, {config_.num_patches(), config_.patch_dim()}, patch_index_);
  Tensor tokens = ops::concat_rows(p.class_token, apply(p.patch_embed, patches));
  return ops::add(tokens, p.pos_embed);
}

Tensor ViTModel::block(const BlockParams<Tensor>& b, const Tensor& tokens) const {
  Tensor h = ops::layer_norm(tokens, b.norm1.gamma, b.norm1.beta);
  Tensor attn = ops::multi_head_attention(apply(b.qkv, h), config_.num_heads);
  Tensor x = ops::add(tokens, apply(b.proj, attn));
  Tensor m = apply(b.fc2, ops::gelu(apply(b.fc1, ops::layer_norm(x, b.norm2.gamma, b.norm2.beta))));
  return ops::add(x, m);
}

Tensor ViTModel::head(const Bound& p, const Tensor& token) const {
  Tensor z = apply(p.head, ops::layer_norm(token, p.norm.gamma, p.norm.beta));
  return ops::reshape(z, {config_.num_classes});
}

Tensor ViTModel::forward(const Bound& p, const Tensor& image) const {
  Tensor tokens = embed(p, image);
  for (const auto& b : p.blocks) tokens = block(b, tokens);
  return head(p, ops::slice_rows(tokens, 0, 1));
}

IntermediateStates ViTModel::forward_collect(const Bound& p, const Tensor& image) const {
  IntermediateStates states;
  Tensor tokens = embed(p, image);
  for (const auto& b : p.blocks) {
    tokens = block(b, tokens);
    states.blocks.push_back(
        {ops::slice_rows(tokens, 0, 1), ops::slice_rows(tokens, 1, config_.num_patches())});
  }
  states.logits = head(p, states.blocks.back().class_token);
  return states;
}

std::vector<Tensor> ViTModel::ensemble_logits(const Bound& p,
                                              const IntermediateStates& states) const {
  if (states.blocks.size() != config_.num_blocks) {
    throw std::invalid_argument("ensemble_logits: states hold " +
                                std::to_string(states.blocks.size()) + " blocks, model has " +
                                std::to_string(config_.num_blocks));
  }
  std::vector<Tensor> out;
  out.reserve(states.blocks.size());
  for (std::size_t k = 0; k + 1 < states.blocks.size(); ++k) {
    out.push_back(head(p, states.blocks[k].class_token));
  }
  out.push_back(states.logits);
  return out;
}

Tensor ViTModel::logits(Tape& tape, const Tensor& image) const {
  return forward(bind(tape, false), image);
}

std::vector<NamedParam> ViTModel::parameters() {
  std::vector<NamedParam> out;
  visit_parameters([&](const std::string& name, Array& a) { out.push_back({name, &a}); }, params_);
  return out;
}

Tensor ViTModel::training_logits(Tape& tape, const Tensor& image,
                                 std::vector<Tensor>& leaves) const {
  Bound p = bind(tape, true);
  leaves.clear();
  visit_parameters([&](const std::string&, Tensor& t) { leaves.push_back(t); }, p);
  return forward(p, image);
}

}  // namespace vitens
