#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vitens/attacks.hpp"
#include "vitens/dataset.hpp"
#include "vitens/surrogate.hpp"

namespace vitens {

// Percentage of positions where the predictions differ.
double fool_rate(const std::vector<std::size_t>& clean, const std::vector<std::size_t>& adversarial);

// preds[i][k]: prediction of member k on image i.
std::vector<std::vector<std::size_t>> member_predictions(const SurrogateView& model, const Array& images,
                                                         ObjectiveMode mode);

// Top-1 accuracy (percent) of every ensemble member. Baseline mode is
// treated as ensemble.
std::vector<double> per_block_accuracy(const SurrogateView& model, const Dataset& data,
                                       ObjectiveMode mode = ObjectiveMode::ensemble);

// Entry k: fool rate of self-ensemble member k between clean and
// adversarial images.
std::vector<double> blockwise_fool_rate(const SurrogateView& model, const Array& clean, const Array& adversarial);
// Runs the attack on `data` (clean-prediction labels) and measures it.
std::vector<double> blockwise_fool_rate(const SurrogateView& model, AttackMethod method,
                                        const AttackConfig& config, const Dataset& data);

struct NamedSurrogate {
  std::string name;
  std::shared_ptr<const ViTView> view;
};

struct NamedTarget {
  std::string name;
  std::shared_ptr<const Classifier> model;
};

struct TransferCell {
  std::string surrogate;
  std::string attack;
  std::string variant;
  std::string target;
  std::uint64_t seed = 0;
  std::size_t n_samples = 0;
  double fool_rate = 0.0;
};

struct WhiteboxCell {
  std::string surrogate;
  std::string attack;
  std::string variant;
  std::uint64_t seed = 0;
  std::size_t n_samples = 0;
  double fool_rate = 0.0;              // final head of the surrogate
  std::vector<double> blockwise;       // one per self-ensemble member
};

struct TransferReport {
  std::vector<TransferCell> cells;
  std::vector<WhiteboxCell> whitebox;
  // Clean per-block accuracy on the evaluation pool, keyed by surrogate.
  std::vector<std::pair<std::string, std::vector<double>>> block_accuracy;
  std::vector<std::pair<std::string, std::vector<double>>> refined_block_accuracy;
  std::vector<std::uint64_t> seeds;

  // Mean fool rate over seeds for one (surrogate, attack, variant, target).
  double mean(const std::string& surrogate, const std::string& attack, const std::string& variant,
              const std::string& target) const;
  double whitebox_mean(const std::string& surrogate, const std::string& attack, const std::string& variant) const;

  // surrogate,attack,variant,target,seed,n_samples,fool_rate
  std::string to_csv() const;
  // JSON mirror of the CSV plus white-box and per-block vectors.
  std::string to_text() const;
};

struct BenchmarkOptions {
  std::vector<AttackMethod> attacks = {AttackMethod::pgd, AttackMethod::mim};
  std::vector<ObjectiveMode> variants = {ObjectiveMode::baseline, ObjectiveMode::ensemble,
                                         ObjectiveMode::refined};
  AttackConfig attack;  // mode and seed are overridden per cell
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::size_t samples_per_seed = 100;
  // Model whose correctness, together with the surrogate's, filters the
  // evaluation pool. Defaults to the first target.
  std::shared_ptr<const Classifier> reference;
  std::function<void(const std::string&)> log;
};

// For every surrogate and seed: draw samples_per_seed images from the pool
// both the surrogate and the reference classify correctly, attack them in
// each variant and record fool rates on every target.
TransferReport run_transfer_benchmark(const std::vector<NamedSurrogate>& surrogates,
                                      const std::vector<NamedTarget>& targets, const Dataset& data,
                                      const BenchmarkOptions& options);

}  // namespace vitens
