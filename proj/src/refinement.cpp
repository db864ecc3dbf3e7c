#include "vitens/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vitens/checkpoint.hpp"
#include "vitens/training.hpp"

namespace vitens {

Tensor rearrange_to_grid(const Tensor& patch_tokens) {
  const Shape& s = patch_tokens.shape();
  if (s.size() != 2) {
    throw std::invalid_argument("rearrange_to_grid: expected [m,d] tokens, got " + shape_to_string(s));
  }
  const std::size_t m = s[0];
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(m))));
  if (side * side != m) {
    throw std::invalid_argument("rearrange_to_grid: token count " + std::to_string(m) +
                                " is not a perfect square");
  }
  return ops::reshape(ops::transpose(patch_tokens), {s[1], side, side});
}

RefinementModule::RefinementModule(std::size_t embed_dim, std::mt19937_64& rng) : embed_dim_(embed_dim) {
  if (embed_dim % kRefinementGroups != 0) {
    throw std::invalid_argument("RefinementModule: embed_dim " + std::to_string(embed_dim) +
                                " not divisible by " + std::to_string(kRefinementGroups) + " groups");
  }
  const std::size_t d = embed_dim;
  params_.norm1 = init_norm(d);
  params_.conv1_weight = random_normal({d, d, 3, 3}, std::sqrt(2.0 / static_cast<double>(9 * d)), rng);
  params_.conv1_bias = Array({d});
  params_.norm2 = init_norm(d);
  params_.conv2_weight = Array({d, d, 3, 3});
  params_.conv2_bias = Array({d});
  params_.class_map.weight = Array({d, d});
  for (std::size_t i = 0; i < d; ++i) params_.class_map.weight[i * d + i] = 1.0;
  params_.class_map.bias = Array({d});
}

RefinementModule::Bound RefinementModule::bind(Tape& tape, bool trainable) const {
  Bound b;
  visit_refinement([&](const char*, const Array& a, Tensor& t) { t = tape.parameter(a, trainable); }, params_,
                   b);
  return b;
}

Tensor RefinementModule::refine(const Bound& p, const Tensor& class_token, const Tensor& patch_tokens) const {
  if (class_token.shape() != Shape{1, embed_dim_} || patch_tokens.shape().size() != 2 ||
      patch_tokens.shape()[1] != embed_dim_) {
    throw std::invalid_argument("refine: expected class token [1," + std::to_string(embed_dim_) +
                                "] and patch tokens [m," + std::to_string(embed_dim_) + "], got " +
                                shape_to_string(class_token.shape()) + " and " +
                                shape_to_string(patch_tokens.shape()));
  }
  Tensor grid = rearrange_to_grid(patch_tokens);
  Tensor h = ops::group_norm(grid, p.norm1.gamma, p.norm1.beta, kRefinementGroups);
  h = ops::gelu(ops::conv2d(h, p.conv1_weight, p.conv1_bias, 1, 1));
  h = ops::group_norm(h, p.norm2.gamma, p.norm2.beta, kRefinementGroups);
  h = ops::conv2d(h, p.conv2_weight, p.conv2_bias, 1, 1);
  Tensor pooled = ops::global_avg_pool(ops::add(grid, h));
  return ops::add(apply(p.class_map, class_token), ops::reshape(pooled, {1, embed_dim_}));
}

RefinedEnsemble::RefinedEnsemble(ViTModel model, std::uint64_t seed) : backbone(std::move(model)) {
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < backbone.config().num_blocks; ++k) {
    modules.emplace_back(backbone.config().embed_dim, rng);
  }
}

RefinedBound bind(const RefinedEnsemble& ensemble, Tape& tape, bool train_modules) {
  RefinedBound b{ensemble.backbone.bind(tape, false), {}};
  for (const auto& m : ensemble.modules) b.modules.push_back(m.bind(tape, train_modules));
  return b;
}

std::vector<Tensor> refined_ensemble_logits(const RefinedEnsemble& ensemble, const RefinedBound& p,
                                            const IntermediateStates& states) {
  if (states.blocks.size() != ensemble.modules.size()) {
    throw std::invalid_argument("refined_ensemble_logits: " + std::to_string(states.blocks.size()) +
                                " block states for " + std::to_string(ensemble.modules.size()) + " modules");
  }
  std::vector<Tensor> out;
  out.reserve(states.blocks.size());
  for (std::size_t k = 0; k < states.blocks.size(); ++k) {
    const auto& t = states.blocks[k];
    out.push_back(ensemble.backbone.head(
        p.backbone, ensemble.modules[k].refine(p.modules[k], t.class_token, t.patch_tokens)));
  }
  return out;
}

std::vector<Tensor> refined_ensemble_logits(const RefinedEnsemble& ensemble, Tape& tape,
                                            const Tensor& image) {
  RefinedBound p = bind(ensemble, tape, false);
  return refined_ensemble_logits(ensemble, p, ensemble.backbone.forward_collect(p.backbone, image));
}

RefinedEnsemble train_refinement(const ViTModel& backbone, const Dataset& train,
                                 const RefinementOptions& options, RefinementReport* report) {
  if (train.empty()) throw std::invalid_argument("train_refinement: training set is empty");
  if (options.batch_size == 0) throw std::invalid_argument("train_refinement: batch_size must be >= 1");
  train.validate();
  require_image_shape(backbone.input_shape(), train.image_shape(), "train_refinement");

  RefinedEnsemble ensemble(backbone, options.seed);
  std::vector<NamedParam> params;
  for (std::size_t k = 0; k < ensemble.modules.size(); ++k) {
    visit_refinement(
        [&](const char* name, Array& a) {
          params.push_back({"refinement/" + std::to_string(k) + "/" + name, &a});
        },
        ensemble.modules[k].params());
  }
  Sgd optimizer(params, options.momentum);

  std::mt19937_64 rng(options.seed ^ 0x7f4a7c15ULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Array> batch_grads;
  for (const auto& p : params) batch_grads.emplace_back(p.array->shape);

  RefinementReport rep;
  double loss_sum = 0.0;
  Tape tape;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      for (auto& g : batch_grads) std::fill(g.data.begin(), g.data.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        tape.clear();
        RefinedBound p = bind(ensemble, tape, true);
        std::vector<Tensor> leaves;
        for (auto& m : p.modules) {
          visit_refinement([&](const char*, Tensor& t) { leaves.push_back(t); }, m);
        }
        const auto states = ensemble.backbone.forward_collect(p.backbone, tape.constant(train.image(order[i])));
        const auto logits = refined_ensemble_logits(ensemble, p, states);
        Tensor loss = ops::softmax_cross_entropy(logits[0], train.labels[order[i]]);
        for (std::size_t k = 1; k < logits.size(); ++k) {
          loss = ops::add(loss, ops::softmax_cross_entropy(logits[k], train.labels[order[i]]));
        }
        loss_sum += loss.item();
        const auto grads = tape.grad(loss, leaves);
        for (std::size_t j = 0; j < grads.size(); ++j)
          for (std::size_t e = 0; e < grads[j].numel(); ++e) batch_grads[j][e] += grads[j][e];
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& g : batch_grads)
        for (double& v : g.data) v *= inv;
      optimizer.step(batch_grads, options.learning_rate);
      ++rep.steps;
      if (options.log && rep.steps % 500 == 0) {
        options.log("step " + std::to_string(rep.steps) + " mean loss " +
                    std::to_string(loss_sum / static_cast<double>(end + epoch * order.size())));
      }
    }
  }
  rep.mean_loss = loss_sum / static_cast<double>(options.epochs * order.size());
  if (report) *report = rep;
  return ensemble;
}

std::uint64_t backbone_hash(const RefinedEnsemble& ensemble) { return parameter_hash(ensemble.backbone); }

void save_refined(const RefinedEnsemble& ensemble, const std::filesystem::path& path) {
  Archive a;
  a.set_meta("kind", "vit+refinement");
  vit_config_to_meta(ensemble.backbone.config(), a);
  a.set_meta("refinement.blocks", std::to_string(ensemble.modules.size()));
  add_vit_arrays(ensemble.backbone, a);
  for (std::size_t k = 0; k < ensemble.modules.size(); ++k) {
    visit_refinement(
        [&](const char* name, const Array& arr) {
          a.add("refinement/" + std::to_string(k) + "/" + name, arr);
        },
        ensemble.modules[k].params());
  }
  write_archive(path, a);
}

bool has_refinement(const std::filesystem::path& path) {
  return read_archive(path).find_meta("refinement.blocks") != nullptr;
}

RefinedEnsemble load_refined(const std::filesystem::path& path) {
  const Archive a = read_archive(path);
  const std::string origin = "checkpoint " + path.string();
  if (!a.find_meta("refinement.blocks")) {
    throw std::runtime_error(origin + ": holds no refinement modules (backbone-only checkpoint)");
  }
  ViTModel backbone(vit_config_from_meta(a, origin), 0);
  fill_vit_arrays(a, backbone, origin);
  RefinedEnsemble ensemble(std::move(backbone), 0);
  std::vector<std::string> problems;
  for (std::size_t k = 0; k < ensemble.modules.size(); ++k) {
    visit_refinement(
        [&](const char* name, Array& dst) {
          const std::string key = "refinement/" + std::to_string(k) + "/" + name;
          const Array* src = a.find(key);
          if (!src) {
            problems.push_back(key + " missing");
          } else if (src->shape != dst.shape) {
            problems.push_back(key + " expects " + shape_to_string(dst.shape) + " got " +
                               shape_to_string(src->shape));
          } else {
            dst = *src;
          }
        },
        ensemble.modules[k].params());
  }
  if (!problems.empty()) {
    std::string msg = origin + ": bad refinement arrays:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw std::runtime_error(msg);
  }
  return ensemble;
}

}  // namespace vitens
