#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "vitens/array.hpp"
#include "vitens/ops.hpp"

// Parameter bundles templated on the element type: Array for stored weights,
// Tensor for the same weights bound onto a tape.
namespace vitens {

template <class T>
struct LinearParams {
  T weight;  // [in, out]
  T bias;    // [out]
};

template <class T>
struct NormParams {
  T gamma;
  T beta;
};

inline LinearParams<Array> init_linear(std::size_t in, std::size_t out, double stddev,
                                       std::mt19937_64& rng) {
  return {random_normal({in, out}, stddev, rng), Array({out})};
}

// Xavier-uniform weights, zero bias.
inline LinearParams<Array> init_linear_xavier(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  return {random_uniform({in, out}, -limit, limit, rng), Array({out})};
}

inline NormParams<Array> init_norm(std::size_t width) {
  return {Array({width}, 1.0), Array({width}, 0.0)};
}

inline Tensor apply(const LinearParams<Tensor>& p, const Tensor& x) {
  return ops::linear(x, p.weight, p.bias);
}

// Named parameter reference used by optimizers and checkpoints.
struct NamedParam {
  std::string name;
  Array* array;
};

}  // namespace vitens
