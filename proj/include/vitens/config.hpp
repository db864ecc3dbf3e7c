#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vitens/attacks.hpp"
#include "vitens/cnn.hpp"
#include "vitens/dataset.hpp"
#include "vitens/vit.hpp"

namespace vitens {

// Everything a pipeline needs, loaded from an INI file:
//
//   [data]        source = synthetic | idx, seed, n_per_class, train_images,
//                 train_labels, val_images, val_labels
//   [model]       image_size, patch_size, channels, embed_dim, num_blocks,
//                 num_heads, mlp_ratio, num_classes, seed
//   [train]       epochs, batch_size, learning_rate, weight_decay,
//                 warmup_fraction
//   [refinement]  learning_rate, momentum, batch_size, epochs, seed
//   [cnn]         widths (comma list), seed
//   [attack]      method, variant, epsilon (0-255 units), steps,
//                 step_size (0-255 units), momentum, diversity_prob,
//                 resize_min, target (class or "none"),
//                 blocks ("all" or comma list of zero-based indices)
//   [benchmark]   seeds (comma list), samples_per_seed, attacks (comma list)
//   [output]      dir
//
// Unknown sections or keys are errors. Omitted keys keep their defaults.
struct ExperimentConfig {
  struct Data {
    std::string source = "synthetic";
    std::uint64_t seed = 0;
    std::size_t n_per_class = 600;
    std::string train_images, train_labels, val_images, val_labels;
    bool operator==(const Data&) const = default;
  } data;

  ViTConfig model;
  std::uint64_t model_seed = 0;

  struct Train {
    std::size_t epochs = 5;
    std::size_t batch_size = 32;
    double learning_rate = 2e-3;
    double weight_decay = 0.05;
    double warmup_fraction = 0.1;
    bool operator==(const Train&) const = default;
  } train;

  struct Refinement {
    double learning_rate = 1e-3;
    double momentum = 0.9;
    std::size_t batch_size = 1;
    std::size_t epochs = 1;
    std::uint64_t seed = 0;
    bool operator==(const Refinement&) const = default;
  } refinement;

  std::vector<std::size_t> cnn_widths = {16, 32, 64};
  std::uint64_t cnn_seed = 1;

  struct Attack {
    AttackMethod method = AttackMethod::mim;
    ObjectiveMode variant = ObjectiveMode::refined;
    double epsilon = 16.0;    // 0-255 units
    double step_size = 2.0;   // 0-255 units
    std::size_t steps = 10;
    double momentum = 1.0;
    double diversity_prob = 0.7;
    double resize_min = 0.85;
    std::optional<std::size_t> target;
    std::optional<std::vector<std::size_t>> blocks;
    bool operator==(const Attack&) const = default;
  } attack;

  struct Benchmark {
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    std::size_t samples_per_seed = 100;
    std::vector<AttackMethod> attacks = {AttackMethod::pgd, AttackMethod::mim};
    bool operator==(const Benchmark&) const = default;
  } benchmark;

  std::string output_dir = "out";

  bool operator==(const ExperimentConfig&) const = default;

  void validate() const;
  AttackConfig attack_config(std::uint64_t seed) const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& config);
// "section.key=value", same value grammar as the file. Does not validate.
void apply_override(ExperimentConfig& config, const std::string& assignment);

// Synthetic or IDX splits as configured. IDX without validation files keeps
// every sixth sample for validation.
DatasetSplits load_datasets(const ExperimentConfig& config);

}  // namespace vitens
