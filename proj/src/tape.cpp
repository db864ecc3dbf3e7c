#include "vitens/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vitens {

Tape& Tensor::tape() const {
  if (!tape_) throw std::logic_error("Tensor: handle is not attached to a tape");
  return *tape_;
}

const Shape& Tensor::shape() const { return tape().shape_of(id_); }
std::size_t Tensor::numel() const { return value().size(); }
std::span<const double> Tensor::value() const { return tape().value_of(id_); }
bool Tensor::requires_grad() const { return tape().needs_grad(id_); }

double Tensor::item() const {
  auto v = value();
  if (v.size() != 1) {
    throw std::invalid_argument("Tensor::item: tensor of shape " + shape_to_string(shape()) +
                                " is not a scalar");
  }
  return v[0];
}

Array Tensor::to_array() const {
  auto v = value();
  return Array(shape(), Buffer(v.begin(), v.end()));
}

Tensor Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::constant(Array value) {
  Node n;
  n.shape = std::move(value.shape);
  n.owned = std::move(value.data);
  return push(std::move(n));
}

Tensor Tape::variable(Array value) {
  Node n;
  n.shape = std::move(value.shape);
  n.owned = std::move(value.data);
  n.requires_grad = true;
  return push(std::move(n));
}

Tensor Tape::parameter(const Array& value, bool requires_grad) {
  Node n;
  n.shape = value.shape;
  n.borrowed = value.data.data();
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Tensor Tape::record(Shape shape, Buffer value, std::initializer_list<Tensor> inputs,
                    Backward backward) {
  if (shape_numel(shape) != value.size()) {
    throw std::logic_error("Tape::record: shape " + shape_to_string(shape) + " holds " +
                           std::to_string(shape_numel(shape)) + " values, got " +
                           std::to_string(value.size()));
  }
#ifndef NDEBUG
  for (double v : value) {
    if (!std::isfinite(v)) throw std::runtime_error("Tape::record: non-finite value produced");
  }
#endif
  Node n;
  n.shape = std::move(shape);
  n.owned = std::move(value);
  for (const Tensor& in : inputs) {
    if (!owns(in)) throw std::invalid_argument("Tape::record: input belongs to another tape");
    n.requires_grad = n.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

std::span<const double> Tape::value_of(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.borrowed) return {n.borrowed, shape_numel(n.shape)};
  return n.owned;
}

std::span<double> Tape::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(shape_numel(n.shape), 0.0);
  return n.grad;
}

std::vector<Array> Tape::grad(const Tensor& loss, std::span<const Tensor> leaves) {
  if (!owns(loss)) throw std::invalid_argument("grad: loss is not recorded on this tape");
  if (shape_numel(nodes_[loss.id_].shape) != 1) {
    throw std::invalid_argument("grad: loss must be a scalar, got shape " +
                                shape_to_string(nodes_[loss.id_].shape));
  }
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (!owns(leaves[i])) {
      throw std::invalid_argument("grad: leaf " + std::to_string(i) + " is not on this tape");
    }
  }
  for (auto& n : nodes_) n.grad.clear();

  if (nodes_[loss.id_].requires_grad) {
    grad_of(loss.id_)[0] = 1.0;
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && !n.grad.empty()) n.backward(*this, i);
    }
  }

  std::vector<Array> out;
  out.reserve(leaves.size());
  for (const Tensor& leaf : leaves) {
    const Node& n = nodes_[leaf.id_];
    Array g(n.shape);
    if (!n.grad.empty()) g.data = n.grad;
    out.push_back(std::move(g));
  }
  return out;
}

void Tape::clear() { nodes_.clear(); }

}  // namespace vitens
