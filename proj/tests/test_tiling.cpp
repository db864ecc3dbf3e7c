#include "doctest.h"

#include <memory>
#include <random>

#include "test_support.hpp"
#include "vitens/tiling.hpp"

using namespace vitens;
using vitens::testing::tiny_config;

namespace {

Array random_image(std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_uniform({c, h, w}, 0.0, 1.0, rng);
}

std::shared_ptr<const ViTView> tiny_view() {
  return std::make_shared<ViTView>(std::make_shared<const ViTModel>(tiny_config(), 3));
}

}  // namespace

TEST_CASE("a 64x64 image splits into a 2x2 layout and reassembles exactly") {
  const Array img = random_image(3, 64, 64, 1);
  const Tiles t = tile(img, 32);
  CHECK(t.tiles.size() == 4);
  CHECK(t.layout.rows == 2);
  CHECK(t.layout.cols == 2);
  CHECK(assemble(t.tiles, t.layout).data == img.data);
}

TEST_CASE("tiles are enumerated row-major") {
  const Array img = random_image(1, 96, 64, 2);
  const Tiles t = tile(img, 32);
  REQUIRE(t.tiles.size() == 6);
  const std::vector<std::pair<std::size_t, std::size_t>> expected{{0, 0}, {0, 1}, {1, 0}, {1, 1}, {2, 0}, {2, 1}};
  CHECK(t.layout.order == expected);
  // Tile (1,0) starts at row 32, column 0.
  CHECK(t.tiles[2][0] == img[32 * 64]);
  CHECK(t.tiles[1][0] == img[32]);
}

TEST_CASE("non-multiple sizes ask for a rescale") {
  CHECK_THROWS_WITH_AS(tile(random_image(3, 40, 32, 3), 32), doctest::Contains("rescale"), std::invalid_argument);
  const Array resized = resize_nearest(random_image(3, 40, 32, 3), 64, 32);
  CHECK(tile(resized, 32).tiles.size() == 2);
}

TEST_CASE("a single tile equals the direct attack") {
  const auto view = tiny_view();
  const Array img = random_image(3, 8, 8, 4);
  AttackConfig cfg;
  cfg.seed = 17;
  for (AttackMethod m : {AttackMethod::pgd, AttackMethod::dim}) {
    const Array direct = take_leading(run_attack(m, *view, stack(std::vector<Array>{img}), cfg).adversarial, 0);
    CHECK(attack_tiled(*view, m, img, cfg).data == direct.data);
  }
}

TEST_CASE("zero budget returns the input") {
  AttackConfig cfg;
  cfg.epsilon = 0.0;
  const Array img = random_image(3, 16, 24, 5);
  CHECK(attack_tiled(*tiny_view(), AttackMethod::mim, img, cfg).data == img.data);
}

TEST_CASE("each tile is attacked independently") {
  const auto view = tiny_view();
  const Array img = random_image(3, 16, 16, 6);
  AttackConfig cfg;
  cfg.seed = 23;
  const Array out = attack_tiled(*view, AttackMethod::dim, img, cfg);
  CHECK(out.shape == img.shape);
  const Tiles parts = tile(img, 8);
  AttackConfig tile_cfg = cfg;
  tile_cfg.seed = tile_seed(cfg.seed, 1);
  const Array direct =
      take_leading(run_attack(AttackMethod::dim, *view, stack(std::vector<Array>{parts.tiles[1]}), tile_cfg).adversarial,
                   0);
  CHECK(tile(out, 8).tiles[1].data == direct.data);

  // Changing another tile's content does not move tile (0,1).
  Array edited = img;
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t y = 8; y < 16; ++y)
      for (std::size_t x = 0; x < 8; ++x) edited[(ch * 16 + y) * 16 + x] = 0.5;
  CHECK(tile(attack_tiled(*view, AttackMethod::dim, edited, cfg), 8).tiles[1].data == direct.data);
}

TEST_CASE("output shape matches input for several multiples") {
  const auto view = tiny_view();
  AttackConfig cfg;
  cfg.steps = 2;
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 16}, {16, 16}, {24, 8}}) {
    const Array img = random_image(3, h, w, h * 31 + w);
    const Array out = attack_tiled(*view, AttackMethod::pgd, img, cfg);
    CHECK(out.shape == img.shape);
    for (std::size_t i = 0; i < img.numel(); ++i) CHECK(std::abs(out[i] - img[i]) <= cfg.epsilon + 1e-9);
  }
}

TEST_CASE("tile failures name the tile") {
  AttackConfig cfg;
  cfg.target = 99;
  CHECK_THROWS_WITH_AS(attack_tiled(*tiny_view(), AttackMethod::pgd, random_image(3, 16, 8, 7), cfg),
                       doctest::Contains("tile"), std::runtime_error);
}
