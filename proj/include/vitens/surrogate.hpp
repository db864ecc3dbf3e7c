#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vitens/classifier.hpp"
#include "vitens/refinement.hpp"
#include "vitens/vit.hpp"

namespace vitens {

enum class ObjectiveMode { baseline, ensemble, refined };

std::string to_string(ObjectiveMode mode);
// Accepts "baseline"/"base", "ensemble"/"e", "refined"/"re".
ObjectiveMode parse_objective_mode(const std::string& text);

// A white-box model exposing one logit vector per classifier member.
class SurrogateView : public Classifier {
 public:
  virtual std::size_t num_blocks() const = 0;
  virtual bool supports(ObjectiveMode mode) const = 0;
  // baseline and ensemble: the self-ensemble, last entry = plain logits.
  // refined: the refined self-ensemble.
  virtual std::vector<Tensor> member_logits(Tape& tape, const Tensor& image, ObjectiveMode mode) const = 0;
};

// View over a ViT, optionally with refinement modules. Holds shared
// ownership so views can be copied freely across worker threads.
class ViTView : public SurrogateView {
 public:
  explicit ViTView(std::shared_ptr<const ViTModel> model);
  explicit ViTView(std::shared_ptr<const RefinedEnsemble> ensemble);

  const ViTModel& model() const { return *model_; }
  const RefinedEnsemble* refined() const { return refined_.get(); }

  Shape input_shape() const override { return model_->input_shape(); }
  std::size_t num_classes() const override { return model_->num_classes(); }
  Tensor logits(Tape& tape, const Tensor& image) const override;

  std::size_t num_blocks() const override { return model_->config().num_blocks; }
  bool supports(ObjectiveMode mode) const override;
  std::vector<Tensor> member_logits(Tape& tape, const Tensor& image, ObjectiveMode mode) const override;

 private:
  std::shared_ptr<const RefinedEnsemble> refined_;
  std::shared_ptr<const ViTModel> owned_model_;
  const ViTModel* model_ = nullptr;
};

}  // namespace vitens
