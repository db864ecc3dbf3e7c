#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "vitens/array.hpp"
#include "vitens/attacks.hpp"

namespace vitens {

struct TileLayout {
  Shape original;  // [C,H,W]
  std::size_t tile_size = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::pair<std::size_t, std::size_t>> order;  // (row, col), row-major
};

struct Tiles {
  std::vector<Array> tiles;  // each [C, tile, tile]
  TileLayout layout;
};

// Splits image [C,H,W] into row-major tiles. H and W must be multiples of
// tile_size; rescale first with resize_nearest otherwise.
Tiles tile(const Array& image, std::size_t tile_size);
Array assemble(const std::vector<Array>& tiles, const TileLayout& layout);

// Seed used for tile `index`; tile 0 uses the global seed unchanged.
std::uint64_t tile_seed(std::uint64_t seed, std::size_t index);

// Labels each tile with the model's clean prediction, attacks every tile
// independently and reassembles. Output shape equals input shape.
Array attack_tiled(const SurrogateView& model, AttackMethod method, const Array& image,
                   const AttackConfig& config);

}  // namespace vitens
