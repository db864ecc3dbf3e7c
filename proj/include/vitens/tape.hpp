#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "vitens/array.hpp"

namespace vitens {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid until the
// owning tape is cleared or destroyed.
class Tensor {
 public:
  Tensor() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const;
  std::size_t id() const { return id_; }

  const Shape& shape() const;
  std::size_t numel() const;
  std::span<const double> value() const;
  double item() const;
  bool requires_grad() const;
  Array to_array() const;

 private:
  friend class Tape;
  Tensor(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records operations in execution order and replays them backwards.
//
// A tape is reusable: grad() zeroes every gradient buffer before each pass,
// so it may be called repeatedly for different losses on the same recording.
// clear() drops the recording and invalidates all handles. A tape is confined
// to one thread; parameters borrowed through parameter() are only read.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that owns its data and does not require a gradient.
  Tensor constant(Array value);
  // Leaf that owns its data and requires a gradient.
  Tensor variable(Array value);
  // Leaf that borrows storage; `value` must outlive the recording.
  Tensor parameter(const Array& value, bool requires_grad = true);

  // d loss / d leaf for each leaf. Leaves reached by no path get zeros.
  std::vector<Array> grad(const Tensor& loss, std::span<const Tensor> leaves);
  std::vector<Array> grad(const Tensor& loss, std::initializer_list<Tensor> leaves) {
    return grad(loss, std::span<const Tensor>(leaves.begin(), leaves.size()));
  }

  void clear();
  std::size_t size() const { return nodes_.size(); }

  // Kernel-facing interface.
  Tensor record(Shape shape, Buffer value, std::initializer_list<Tensor> inputs,
                Backward backward);
  const Shape& shape_of(std::size_t id) const { return nodes_[id].shape; }
  std::span<const double> value_of(std::size_t id) const;
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient buffer of a node, allocated zeroed on first access.
  std::span<double> grad_of(std::size_t id);
  bool owns(const Tensor& t) const { return t.tape_ == this && t.id_ < nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    Buffer owned;
    const double* borrowed = nullptr;
    bool requires_grad = false;
    Buffer grad;
    Backward backward;
  };

  Tensor push(Node node);

  std::vector<Node> nodes_;
};

}  // namespace vitens
