#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vitens/classifier.hpp"
#include "vitens/dataset.hpp"
#include "vitens/vit.hpp"

namespace vitens {

// Decoupled-weight-decay Adam. Decay applies to arrays of rank >= 2 only.
class AdamW {
 public:
  AdamW(std::vector<NamedParam> params, double weight_decay, double beta1 = 0.9,
        double beta2 = 0.999, double eps = 1e-8);
  void step(const std::vector<Array>& grads, double learning_rate);

 private:
  std::vector<NamedParam> params_;
  std::vector<Array> m_, v_;
  double weight_decay_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

// Plain SGD with optional heavy-ball momentum.
class Sgd {
 public:
  Sgd(std::vector<NamedParam> params, double momentum = 0.0);
  void step(const std::vector<Array>& grads, double learning_rate);

 private:
  std::vector<NamedParam> params_;
  std::vector<Array> velocity_;
  double momentum_;
};

struct TrainOptions {
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double learning_rate = 2e-3;
  double weight_decay = 0.05;
  double warmup_fraction = 0.1;  // linear warmup, then cosine decay to zero
  std::uint64_t seed = 0;
  std::function<void(const std::string&)> log;
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;  // running accuracy during the epoch, percent
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double train_accuracy = 0.0;  // percent
  double val_accuracy = 0.0;    // percent
};

double accuracy(const Classifier& model, const Dataset& data);

// Minibatch AdamW on cross entropy of the final logits. Deterministic for a
// fixed seed.
TrainReport fit_classifier(Trainable& model, const Dataset& train, const Dataset& val,
                           const TrainOptions& options);

struct TrainedViT {
  ViTModel model;
  TrainReport report;
};

// Initializes a ViT from options.seed and trains it. Only the last class
// token is supervised.
TrainedViT train_backbone(const ViTConfig& config, const Dataset& train, const Dataset& val,
                          const TrainOptions& options);

}  // namespace vitens
