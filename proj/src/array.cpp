#include "vitens/array.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace vitens {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Array::Array(Shape s, double fill) : shape(std::move(s)), data(shape_numel(shape), fill) {}

Array::Array(Shape s, Buffer values) : shape(std::move(s)), data(std::move(values)) {
  if (shape_numel(shape) != data.size()) {
    throw std::invalid_argument("Array: shape " + shape_to_string(shape) + " does not match " +
                                std::to_string(data.size()) + " values");
  }
}

Array::Array(Shape s, const std::vector<double>& values) : Array(std::move(s), Buffer(values.begin(), values.end())) {}

Array::Array(Shape s, std::initializer_list<double> values) : Array(std::move(s), Buffer(values)) {}

Array random_normal(const Shape& shape, double stddev, std::mt19937_64& rng) {
  Array out(shape);
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : out.data) v = dist(rng);
  return out;
}

Array random_uniform(const Shape& shape, double lo, double hi, std::mt19937_64& rng) {
  Array out(shape);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : out.data) v = dist(rng);
  return out;
}

Array take_leading(const Array& batch, std::size_t index) {
  if (batch.shape.empty() || index >= batch.shape[0]) {
    throw std::out_of_range("take_leading: index " + std::to_string(index) + " outside " +
                            shape_to_string(batch.shape));
  }
  Shape inner(batch.shape.begin() + 1, batch.shape.end());
  const std::size_t n = shape_numel(inner);
  Array out(inner);
  std::copy_n(batch.data.begin() + static_cast<std::ptrdiff_t>(index * n), n, out.data.begin());
  return out;
}

Array stack(std::span<const Array> items) {
  if (items.empty()) throw std::invalid_argument("stack: no items");
  Shape shape{items.size()};
  shape.insert(shape.end(), items[0].shape.begin(), items[0].shape.end());
  Array out(shape);
  for (std::size_t i = 0; i < items.size(); ++i) put_leading(out, i, items[i]);
  return out;
}

void put_leading(Array& batch, std::size_t index, const Array& item) {
  const std::size_t n = item.numel();
  if (batch.shape.empty() || index >= batch.shape[0] || n * batch.shape[0] != batch.numel()) {
    throw std::invalid_argument("put_leading: item " + shape_to_string(item.shape) +
                                " does not fit batch " + shape_to_string(batch.shape));
  }
  std::copy(item.data.begin(), item.data.end(),
            batch.data.begin() + static_cast<std::ptrdiff_t>(index * n));
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("max_abs_diff: size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace vitens
