#include "vitens/cnn.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "vitens/checkpoint.hpp"

namespace vitens {

void CnnConfig::validate() const {
  if (widths.empty() || channels == 0 || num_classes < 2) {
    throw std::invalid_argument("CnnConfig: need at least one stage, channels and two classes");
  }
  const std::size_t factor = std::size_t{1} << widths.size();
  if (image_size == 0 || image_size % factor != 0) {
    throw std::invalid_argument("CnnConfig: image_size " + std::to_string(image_size) +
                                " must be divisible by " + std::to_string(factor));
  }
}

CnnModel::CnnModel(const CnnConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  std::size_t in = config_.channels;
  for (std::size_t out : config_.widths) {
    const double std = std::sqrt(2.0 / static_cast<double>(9 * in));
    convs_.push_back({random_normal({out, in, 3, 3}, std, rng), Array({out})});
    in = out;
  }
  head_ = init_linear_xavier(in, config_.num_classes, rng);
}

Tensor CnnModel::forward(const std::vector<ConvParams<Tensor>>& convs, const LinearParams<Tensor>& head,
                         const Tensor& image) const {
  require_image_shape(config_.image_shape(), image.shape(), "CnnModel");
  Tensor h = image;
  for (const auto& c : convs) h = ops::max_pool2d(ops::relu(ops::conv2d(h, c.weight, c.bias, 1, 1)), 2);
  return apply(head, ops::global_avg_pool(h));
}

Tensor CnnModel::logits(Tape& tape, const Tensor& image) const {
  std::vector<ConvParams<Tensor>> convs;
  for (const auto& c : convs_) convs.push_back({tape.parameter(c.weight, false), tape.parameter(c.bias, false)});
  return forward(convs, {tape.parameter(head_.weight, false), tape.parameter(head_.bias, false)}, image);
}

std::vector<NamedParam> CnnModel::parameters() {
  std::vector<NamedParam> out;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    out.push_back({"conv" + std::to_string(i) + ".weight", &convs_[i].weight});
    out.push_back({"conv" + std::to_string(i) + ".bias", &convs_[i].bias});
  }
  out.push_back({"head.weight", &head_.weight});
  out.push_back({"head.bias", &head_.bias});
  return out;
}

Tensor CnnModel::training_logits(Tape& tape, const Tensor& image, std::vector<Tensor>& leaves) const {
  leaves.clear();
  std::vector<ConvParams<Tensor>> convs;
  for (const auto& c : convs_) {
    convs.push_back({tape.parameter(c.weight), tape.parameter(c.bias)});
    leaves.push_back(convs.back().weight);
    leaves.push_back(convs.back().bias);
  }
  LinearParams<Tensor> head{tape.parameter(head_.weight), tape.parameter(head_.bias)};
  leaves.push_back(head.weight);
  leaves.push_back(head.bias);
  return forward(convs, head, image);
}

void CnnModel::save(const std::filesystem::path& path) const {
  Archive a;
  a.set_meta("kind", "cnn");
  a.set_meta("cnn.image_size", std::to_string(config_.image_size));
  a.set_meta("cnn.channels", std::to_string(config_.channels));
  a.set_meta("cnn.num_classes", std::to_string(config_.num_classes));
  std::string widths;
  for (std::size_t i = 0; i < config_.widths.size(); ++i) widths += (i ? "," : "") + std::to_string(config_.widths[i]);
  a.set_meta("cnn.widths", widths);
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    a.add("conv" + std::to_string(i) + ".weight", convs_[i].weight);
    a.add("conv" + std::to_string(i) + ".bias", convs_[i].bias);
  }
  a.add("head.weight", head_.weight);
  a.add("head.bias", head_.bias);
  write_archive(path, a);
}

CnnModel CnnModel::load(const std::filesystem::path& path) {
  const Archive a = read_archive(path);
  const std::string origin = "checkpoint " + path.string();
  const std::string* kind = a.find_meta("kind");
  if (!kind || *kind != "cnn") throw std::runtime_error(origin + ": not a CNN checkpoint");
  CnnConfig c;
  try {
    c.image_size = std::stoul(a.require_meta("cnn.image_size", origin));
    c.channels = std::stoul(a.require_meta("cnn.channels", origin));
    c.num_classes = std::stoul(a.require_meta("cnn.num_classes", origin));
    c.widths.clear();
    std::stringstream ss(a.require_meta("cnn.widths", origin));
    std::string item;
    while (std::getline(ss, item, ',')) c.widths.push_back(std::stoul(item));
  } catch (const std::logic_error& e) {
    throw std::runtime_error(origin + ": bad CNN config: " + e.what());
  }
  CnnModel model(c, 0);
  std::string problems;
  for (const auto& p : model.parameters()) {
    const Array* src = a.find(p.name);
    if (!src || src->shape != p.array->shape) {
      problems += "\n  " + p.name + (src ? " has shape " + shape_to_string(src->shape) : " missing");
    } else {
      *p.array = *src;
    }
  }
  if (!problems.empty()) throw std::runtime_error(origin + ": bad arrays:" + problems);
  return model;
}

}  // namespace vitens
