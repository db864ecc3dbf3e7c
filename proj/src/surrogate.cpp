#include "vitens/surrogate.hpp"

#include <cctype>
#include <stdexcept>

namespace vitens {

std::string to_string(ObjectiveMode mode) {
  switch (mode) {
    case ObjectiveMode::baseline:
      return "base";
    case ObjectiveMode::ensemble:
      return "E";
    case ObjectiveMode::refined:
      return "RE";
  }
  return "?";
}

ObjectiveMode parse_objective_mode(const std::string& text) {
  std::string t;
  for (char c : text) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t == "baseline" || t == "base") return ObjectiveMode::baseline;
  if (t == "ensemble" || t == "e") return ObjectiveMode::ensemble;
  if (t == "refined" || t == "re") return ObjectiveMode::refined;
  throw std::invalid_argument("unknown objective variant '" + text + "' (expected base, e or re)");
}

ViTView::ViTView(std::shared_ptr<const ViTModel> model) : owned_model_(std::move(model)) {
  if (!owned_model_) throw std::invalid_argument("ViTView: null model");
  model_ = owned_model_.get();
}

ViTView::ViTView(std::shared_ptr<const RefinedEnsemble> ensemble) : refined_(std::move(ensemble)) {
  if (!refined_) throw std::invalid_argument("ViTView: null ensemble");
  model_ = &refined_->backbone;
}

Tensor ViTView::logits(Tape& tape, const Tensor& image) const { return model_->logits(tape, image); }

bool ViTView::supports(ObjectiveMode mode) const {
  return mode != ObjectiveMode::refined || refined_ != nullptr;
}

std::vector<Tensor> ViTView::member_logits(Tape& tape, const Tensor& image, ObjectiveMode mode) const {
  if (mode == ObjectiveMode::refined) {
    if (!refined_) throw std::invalid_argument("ViTView: refined objective needs refinement modules");
    return refined_ensemble_logits(*refined_, tape, image);
  }
  const auto p = model_->bind(tape, false);
  return model_->ensemble_logits(p, model_->forward_collect(p, image));
}

}  // namespace vitens
