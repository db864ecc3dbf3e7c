#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "vitens/classifier.hpp"
#include "vitens/layers.hpp"

namespace vitens {

struct CnnConfig {
  std::size_t image_size = 32;
  std::size_t channels = 3;
  std::vector<std::size_t> widths = {16, 32, 64};
  std::size_t num_classes = 10;

  void validate() const;
  Shape image_shape() const { return {channels, image_size, image_size}; }
  bool operator==(const CnnConfig&) const = default;
};

template <class T>
struct ConvParams {
  T weight;  // [out, in, 3, 3]
  T bias;    // [out]
};

// Convolutional classifier with no attention: per stage conv3x3 + ReLU +
// 2x2 max pool, then global average pool and a linear head.
class CnnModel : public Trainable {
 public:
  CnnModel(const CnnConfig& config, std::uint64_t seed);

  const CnnConfig& config() const { return config_; }

  Shape input_shape() const override { return config_.image_shape(); }
  std::size_t num_classes() const override { return config_.num_classes; }
  Tensor logits(Tape& tape, const Tensor& image) const override;

  std::vector<NamedParam> parameters() override;
  Tensor training_logits(Tape& tape, const Tensor& image, std::vector<Tensor>& leaves) const override;

  void save(const std::filesystem::path& path) const;
  static CnnModel load(const std::filesystem::path& path);

 private:
  Tensor forward(const std::vector<ConvParams<Tensor>>& convs, const LinearParams<Tensor>& head,
                 const Tensor& image) const;

  CnnConfig config_;
  std::vector<ConvParams<Array>> convs_;
  LinearParams<Array> head_;
};

}  // namespace vitens
