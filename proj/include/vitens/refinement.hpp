#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "vitens/dataset.hpp"
#include "vitens/layers.hpp"
#include "vitens/vit.hpp"

namespace vitens {

template <class T>
struct RefinementParams {
  NormParams<T> norm1;
  T conv1_weight;  // [d, d, 3, 3]
  T conv1_bias;
  NormParams<T> norm2;
  T conv2_weight;
  T conv2_bias;
  LinearParams<T> class_map;  // d -> d
};

template <class F, class First, class... Rest>
void visit_refinement(F&& f, First& first, Rest&... rest) {
  f("norm1.gamma", first.norm1.gamma, rest.norm1.gamma...);
  f("norm1.beta", first.norm1.beta, rest.norm1.beta...);
  f("conv1.weight", first.conv1_weight, rest.conv1_weight...);
  f("conv1.bias", first.conv1_bias, rest.conv1_bias...);
  f("norm2.gamma", first.norm2.gamma, rest.norm2.gamma...);
  f("norm2.beta", first.norm2.beta, rest.norm2.beta...);
  f("conv2.weight", first.conv2_weight, rest.conv2_weight...);
  f("conv2.bias", first.conv2_bias, rest.conv2_bias...);
  f("class_map.weight", first.class_map.weight, rest.class_map.weight...);
  f("class_map.bias", first.class_map.bias, rest.class_map.bias...);
}

inline constexpr std::size_t kRefinementGroups = 8;

// Patch tokens [m,d] -> grid [d, sqrt(m), sqrt(m)]; token j lands in cell
// (j / sqrt(m), j % sqrt(m)).
Tensor rearrange_to_grid(const Tensor& patch_tokens);

// Refines one block's tokens into a single [1,d] token:
//   class_map(class_token) + avg_pool(grid + conv2(gelu(gn2(conv1(gn1(grid))))))
// with grid = rearrange_to_grid(patch_tokens).
class RefinementModule {
 public:
  using Bound = RefinementParams<Tensor>;

  // Identity start: class_map = I, conv2 = 0, so the output is
  // class_token + mean(patch_tokens).
  RefinementModule(std::size_t embed_dim, std::mt19937_64& rng);

  std::size_t embed_dim() const { return embed_dim_; }
  RefinementParams<Array>& params() { return params_; }
  const RefinementParams<Array>& params() const { return params_; }

  Bound bind(Tape& tape, bool trainable) const;
  Tensor refine(const Bound& p, const Tensor& class_token, const Tensor& patch_tokens) const;

 private:
  std::size_t embed_dim_;
  RefinementParams<Array> params_;
};

// Frozen backbone plus one refinement module per block. Immutable once
// trained; safe to share across threads.
struct RefinedEnsemble {
  ViTModel backbone;
  std::vector<RefinementModule> modules;

  RefinedEnsemble(ViTModel backbone, std::uint64_t seed);

  std::size_t num_blocks() const { return modules.size(); }
};

struct RefinedBound {
  ViTModel::Bound backbone;
  std::vector<RefinementModule::Bound> modules;
};

RefinedBound bind(const RefinedEnsemble& ensemble, Tape& tape, bool train_modules);

// Entry k = g(refine_k(class_token_k, patch_tokens_k)).
std::vector<Tensor> refined_ensemble_logits(const RefinedEnsemble& ensemble, const RefinedBound& p,
                                            const IntermediateStates& states);
std::vector<Tensor> refined_ensemble_logits(const RefinedEnsemble& ensemble, Tape& tape,
                                            const Tensor& image);

struct RefinementOptions {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::size_t batch_size = 1;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  std::function<void(const std::string&)> log;
};

struct RefinementReport {
  std::size_t steps = 0;
  double mean_loss = 0.0;  // summed per-block CE, averaged over samples
};

// Trains only the refinement modules with SGD on the sum over blocks of the
// per-block cross entropy. Backbone and head stay bit-identical.
RefinedEnsemble train_refinement(const ViTModel& backbone, const Dataset& train,
                                 const RefinementOptions& options, RefinementReport* report = nullptr);

// Hash over backbone parameters, unchanged by refinement training.
std::uint64_t backbone_hash(const RefinedEnsemble& ensemble);

// Backbone arrays plus "refinement/<k>/<name>" arrays in one archive.
void save_refined(const RefinedEnsemble& ensemble, const std::filesystem::path& path);
RefinedEnsemble load_refined(const std::filesystem::path& path);
bool has_refinement(const std::filesystem::path& path);

}  // namespace vitens
