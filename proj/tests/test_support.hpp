#pragma once

#include <random>

#include "vitens/array.hpp"
#include "vitens/vit.hpp"

namespace vitens::testing {

inline ViTConfig tiny_config() {
  ViTConfig c;
  c.image_size = 8;
  c.patch_size = 4;
  c.channels = 3;
  c.embed_dim = 16;
  c.num_blocks = 3;
  c.num_heads = 2;
  c.mlp_ratio = 2;
  c.num_classes = 4;
  return c;
}

inline Array random_images(std::size_t n, const Shape& image, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Shape s{n};
  s.insert(s.end(), image.begin(), image.end());
  return random_uniform(s, 0.0, 1.0, rng);
}

}  // namespace vitens::testing
