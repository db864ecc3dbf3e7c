#include "vitens/classifier.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "vitens/parallel.hpp"

namespace vitens {

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax: empty input");
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

std::vector<std::size_t> predict(const Classifier& model, const Array& images) {
  if (images.shape.size() != 4) {
    throw std::invalid_argument("predict: expected [N,C,H,W], got " + shape_to_string(images.shape));
  }
  std::vector<std::size_t> out(images.shape[0]);
  parallel_for(out.size(), [&](std::size_t i) {
    Tape tape;
    out[i] = argmax(model.logits(tape, tape.constant(take_leading(images, i))).value());
  });
  return out;
}

void require_image_shape(const Shape& expected, const Shape& got, const char* who) {
  if (expected != got) {
    throw std::invalid_argument(std::string(who) + ": expected image " + shape_to_string(expected) +
                                ", got " + shape_to_string(got));
  }
}

}  // namespace vitens
