#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vitens/array.hpp"
#include "vitens/ops.hpp"
#include "vitens/surrogate.hpp"

namespace vitens {

enum class AttackMethod { fgsm, pgd, mim, dim };

std::string to_string(AttackMethod method);
AttackMethod parse_attack_method(const std::string& text);

struct AttackConfig {
  double epsilon = 16.0 / 255.0;
  std::size_t steps = 10;
  double step_size = 2.0 / 255.0;  // PGD; MIM and DIM step epsilon / steps
  double momentum = 1.0;
  double diversity_prob = 0.7;
  double resize_min = 0.85;  // DIM rescale factor drawn from [resize_min, 1)
  std::optional<std::size_t> target;
  ObjectiveMode mode = ObjectiveMode::baseline;
  // Zero-based block indices summed in ensemble/refined modes; nullopt = all.
  std::optional<std::vector<std::size_t>> block_subset;
  std::uint64_t seed = 0;

  void validate(AttackMethod method) const;
};

// Loss maximized by the attacker. Untargeted: sum of CE(logits_k, label)
// over the selected members; targeted: minus the same sum towards `target`.
// Baseline mode uses the last entry only.
Tensor attack_loss(const std::vector<Tensor>& logits, std::size_t label, const AttackConfig& config);

struct AdversarialBatch {
  Array clean;                                 // [N,C,H,W]
  Array adversarial;                           // [N,C,H,W]
  std::vector<std::size_t> labels;             // label each sample was attacked with
  std::vector<std::vector<double>> loss_trace; // per sample, one loss per gradient step
  AttackMethod method = AttackMethod::pgd;
  AttackConfig config;

  // Arrays in the checkpoint archive format plus a "<path>.json" metadata record.
  void save(const std::filesystem::path& path) const;
  static AdversarialBatch load(const std::filesystem::path& path);
};

// velocity <- momentum * velocity + grad / mean|grad| (grad left as zero
// when it vanishes).
void accumulate_momentum(Array& velocity, const Array& grad, double momentum);

// Nearest-neighbour downscale by a factor in [resize_min, 1) and zero-pad at
// a random offset, applied with probability p; nullptr means identity.
ops::IndexMap dim_index_map(const Shape& image_shape, double p, double resize_min, std::mt19937_64& rng);
Tensor dim_transform(const Tensor& image, double p, std::uint64_t seed, double resize_min = 0.85);

// All attacks take images [N,C,H,W] in [0,1]. Without labels, each sample
// is attacked with the model's clean prediction. Sample i draws randomness
// from seed_seq{config.seed, i}.
AdversarialBatch fgsm(const SurrogateView& model, const Array& images, const AttackConfig& config,
                      const std::vector<std::size_t>* labels = nullptr);
AdversarialBatch pgd(const SurrogateView& model, const Array& images, const AttackConfig& config,
                     const std::vector<std::size_t>* labels = nullptr);
AdversarialBatch mim(const SurrogateView& model, const Array& images, const AttackConfig& config,
                     const std::vector<std::size_t>* labels = nullptr);
AdversarialBatch dim(const SurrogateView& model, const Array& images, const AttackConfig& config,
                     const std::vector<std::size_t>* labels = nullptr);
AdversarialBatch run_attack(AttackMethod method, const SurrogateView& model, const Array& images,
                            const AttackConfig& config, const std::vector<std::size_t>* labels = nullptr);

}  // namespace vitens
