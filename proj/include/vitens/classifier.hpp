#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vitens/array.hpp"
#include "vitens/layers.hpp"
#include "vitens/tape.hpp"

namespace vitens {

// Anything that maps one image [C,H,W] to class logits [num_classes].
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual Shape input_shape() const = 0;
  virtual std::size_t num_classes() const = 0;
  // Parameters are recorded as constants; gradients flow only to `image`.
  virtual Tensor logits(Tape& tape, const Tensor& image) const = 0;
};

// A classifier whose parameters can be trained by gradient descent.
class Trainable : public Classifier {
 public:
  virtual std::vector<NamedParam> parameters() = 0;
  // Same logits as Classifier::logits, with every parameter bound as a
  // gradient leaf. `leaves` receives them in parameters() order.
  virtual Tensor training_logits(Tape& tape, const Tensor& image,
                                 std::vector<Tensor>& leaves) const = 0;
};

std::size_t argmax(std::span<const double> values);

// Predicted class for every image of a batch [N,C,H,W].
std::vector<std::size_t> predict(const Classifier& model, const Array& images);

void require_image_shape(const Shape& expected, const Shape& got, const char* who);

}  // namespace vitens
