#include "vitens/tiling.hpp"

#include <stdexcept>
#include <string>

#include "vitens/parallel.hpp"

namespace vitens {

Tiles tile(const Array& image, std::size_t tile_size) {
  if (image.shape.size() != 3) {
    throw std::invalid_argument("tile: expected an image [C,H,W], got " + shape_to_string(image.shape));
  }
  if (tile_size == 0) throw std::invalid_argument("tile: tile size must be positive");
  const std::size_t c = image.shape[0], h = image.shape[1], w = image.shape[2];
  if (h % tile_size != 0 || w % tile_size != 0 || h == 0 || w == 0) {
    throw std::invalid_argument("tile: image " + std::to_string(h) + "x" + std::to_string(w) +
                                " is not a multiple of tile size " + std::to_string(tile_size) +
                                "; rescale it first (resize_nearest)");
  }
  Tiles out;
  out.layout = {image.shape, tile_size, h / tile_size, w / tile_size, {}};
  for (std::size_t r = 0; r < out.layout.rows; ++r) {
    for (std::size_t q = 0; q < out.layout.cols; ++q) {
      out.layout.order.emplace_back(r, q);
      Array t({c, tile_size, tile_size});
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < tile_size; ++y)
          for (std::size_t x = 0; x < tile_size; ++x)
            t[(ch * tile_size + y) * tile_size + x] = image[(ch * h + r * tile_size + y) * w + q * tile_size + x];
      out.tiles.push_back(std::move(t));
    }
  }
  return out;
}

Array assemble(const std::vector<Array>& tiles, const TileLayout& layout) {
  if (tiles.size() != layout.order.size()) {
    throw std::invalid_argument("assemble: " + std::to_string(tiles.size()) + " tiles for a layout of " +
                                std::to_string(layout.order.size()));
  }
  const std::size_t c = layout.original.at(0), h = layout.original.at(1), w = layout.original.at(2);
  const std::size_t s = layout.tile_size;
  Array image(layout.original);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    if (tiles[i].shape != Shape{c, s, s}) {
      throw std::invalid_argument("assemble: tile " + std::to_string(i) + " has shape " +
                                  shape_to_string(tiles[i].shape));
    }
    const auto [r, q] = layout.order[i];
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < s; ++y)
        for (std::size_t x = 0; x < s; ++x)
          image[(ch * h + r * s + y) * w + q * s + x] = tiles[i][(ch * s + y) * s + x];
  }
  if (image.shape != layout.original) throw std::logic_error("assemble: shape changed");
  return image;
}

std::uint64_t tile_seed(std::uint64_t seed, std::size_t index) {
  return seed ^ (static_cast<std::uint64_t>(index) * 0x9E3779B97F4A7C15ULL);
}

Array attack_tiled(const SurrogateView& model, AttackMethod method, const Array& image,
                   const AttackConfig& config) {
  const Shape native = model.input_shape();
  if (image.shape.size() != 3 || image.shape[0] != native.at(0)) {
    throw std::invalid_argument("attack_tiled: image " + shape_to_string(image.shape) +
                                " does not match model channels " + std::to_string(native.at(0)));
  }
  Tiles parts = tile(image, native.at(1));
  std::vector<Array> adversarial(parts.tiles.size());
  parallel_for(parts.tiles.size(), [&](std::size_t i) {
    try {
      AttackConfig cfg = config;
      cfg.seed = tile_seed(config.seed, i);
      const std::vector<Array> one{parts.tiles[i]};
      const Array batch = stack(one);
      adversarial[i] = take_leading(run_attack(method, model, batch, cfg).adversarial, 0);
    } catch (const std::exception& e) {
      throw std::runtime_error("attack_tiled: tile " + std::to_string(i) + " failed: " + e.what());
    }
  });
  return assemble(adversarial, parts.layout);
}

}  // namespace vitens
