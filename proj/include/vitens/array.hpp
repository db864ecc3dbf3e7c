#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace vitens {

using Shape = std::vector<std::size_t>;

// Vectorized kernels pick code paths by address alignment, which would make
// results depend on where the heap placed a buffer.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Dense row-major array of doubles. Plain value type used for parameters,
// images and gradients outside of a tape.
struct Array {
  Shape shape;
  Buffer data;

  Array() = default;
  explicit Array(Shape s, double fill = 0.0);
  Array(Shape s, Buffer values);
  Array(Shape s, const std::vector<double>& values);
  Array(Shape s, std::initializer_list<double> values);

  std::size_t numel() const { return data.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  std::span<double> span() { return data; }
  std::span<const double> span() const { return data; }

  bool operator==(const Array&) const = default;
};

Array random_normal(const Shape& shape, double stddev, std::mt19937_64& rng);
Array random_uniform(const Shape& shape, double lo, double hi, std::mt19937_64& rng);

// Slice [index] out of the leading axis: [N, ...] -> [...].
Array take_leading(const Array& batch, std::size_t index);
// Stack equally shaped arrays along a new leading axis.
Array stack(std::span<const Array> items);
void put_leading(Array& batch, std::size_t index, const Array& item);

double max_abs_diff(std::span<const double> a, std::span<const double> b);

}  // namespace vitens
