#include "vitens/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

#include "vitens/ops.hpp"

namespace vitens {

AdamW::AdamW(std::vector<NamedParam> params, double weight_decay, double beta1, double beta2,
             double eps)
    : params_(std::move(params)), weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.array->shape);
    v_.emplace_back(p.array->shape);
  }
}

void AdamW::step(const std::vector<Array>& grads, double lr) {
  if (grads.size() != params_.size()) throw std::invalid_argument("AdamW: gradient count mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Array& w = *params_[i].array;
    const double decay = w.shape.size() >= 2 ? weight_decay_ : 0.0;
    for (std::size_t j = 0; j < w.numel(); ++j) {
      const double g = grads[i][j];
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
      const double update = (m_[i][j] / c1) / (std::sqrt(v_[i][j] / c2) + eps_);
      w[j] -= lr * (update + decay * w[j]);
    }
  }
}

Sgd::Sgd(std::vector<NamedParam> params, double momentum)
    : params_(std::move(params)), momentum_(momentum) {
  for (const auto& p : params_) velocity_.emplace_back(p.array->shape);
}

void Sgd::step(const std::vector<Array>& grads, double lr) {
  if (grads.size() != params_.size()) throw std::invalid_argument("Sgd: gradient count mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Array& w = *params_[i].array;
    for (std::size_t j = 0; j < w.numel(); ++j) {
      velocity_[i][j] = momentum_ * velocity_[i][j] + grads[i][j];
      w[j] -= lr * velocity_[i][j];
    }
  }
}

double accuracy(const Classifier& model, const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("accuracy: empty dataset");
  const auto preds = predict(model, data.images);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == data.labels[i];
  return 100.0 * static_cast<double>(correct) / static_cast<double>(preds.size());
}

TrainReport fit_classifier(Trainable& model, const Dataset& train, const Dataset& val,
                           const TrainOptions& options) {
  if (train.empty()) throw std::invalid_argument("fit_classifier: training set is empty");
  if (options.batch_size == 0) throw std::invalid_argument("fit_classifier: batch_size must be >= 1");
  train.validate();
  require_image_shape(model.input_shape(), train.image_shape(), "fit_classifier");

  auto params = model.parameters();
  AdamW optimizer(params, options.weight_decay);
  std::mt19937_64 rng(options.seed ^ 0x5deece66dULL);

  const std::size_t n = train.size();
  const std::size_t steps_per_epoch = (n + options.batch_size - 1) / options.batch_size;
  const std::size_t total_steps = steps_per_epoch * options.epochs;
  const auto warmup = static_cast<std::size_t>(options.warmup_fraction * static_cast<double>(total_steps));
  auto lr_at = [&](std::size_t step) {
    if (step < warmup) return options.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup);
    const double progress = static_cast<double>(step - warmup) /
                            static_cast<double>(std::max<std::size_t>(1, total_steps - warmup));
    return options.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  };

  TrainReport report;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<Array> batch_grads;
  for (const auto& p : params) batch_grads.emplace_back(p.array->shape);
  std::vector<Tensor> leaves;
  Tape tape;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += options.batch_size) {
      const std::size_t end = std::min(n, start + options.batch_size);
      for (auto& g : batch_grads) std::fill(g.data.begin(), g.data.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t idx = order[i];
        tape.clear();
        Tensor logits = model.training_logits(tape, tape.constant(train.image(idx)), leaves);
        Tensor loss = ops::softmax_cross_entropy(logits, train.labels[idx]);
        loss_sum += loss.item();
        correct += argmax(logits.value()) == train.labels[idx];
        auto grads = tape.grad(loss, leaves);
        for (std::size_t p = 0; p < grads.size(); ++p)
          for (std::size_t j = 0; j < grads[p].numel(); ++j) batch_grads[p][j] += grads[p][j];
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& g : batch_grads)
        for (double& v : g.data) v *= inv;
      optimizer.step(batch_grads, lr_at(step++));
    }
    EpochStats stats{epoch + 1, loss_sum / static_cast<double>(n),
                     100.0 * static_cast<double>(correct) / static_cast<double>(n)};
    report.epochs.push_back(stats);
    if (options.log) {
      options.log("epoch " + std::to_string(stats.epoch) + " loss " + std::to_string(stats.mean_loss) +
                  " train_acc " + std::to_string(stats.train_accuracy));
    }
  }
  report.train_accuracy = report.epochs.empty() ? accuracy(model, train) : report.epochs.back().train_accuracy;
  report.val_accuracy = val.empty() ? 0.0 : accuracy(model, val);
  return report;
}

TrainedViT train_backbone(const ViTConfig& config, const Dataset& train, const Dataset& val,
                          const TrainOptions& options) {
  if (train.empty()) throw std::invalid_argument("train_backbone: training set is empty");
  TrainedViT out{ViTModel(config, options.seed), {}};
  out.report = fit_classifier(out.model, train, val, options);
  return out;
}

}  // namespace vitens
