#include "doctest.h"

#include <filesystem>
#include <random>

#include "test_support.hpp"
#include "vitens/checkpoint.hpp"
#include "vitens/ops.hpp"
#include "vitens/refinement.hpp"

using namespace vitens;
using vitens::testing::random_images;
using vitens::testing::tiny_config;

TEST_CASE("tokens land on the grid in row-major order") {
  Tape tape;
  Tensor t = tape.constant(Array({4, 1}, std::vector<double>{1, 2, 3, 4}));
  const Array g = rearrange_to_grid(t).to_array();
  CHECK(g.shape == Shape{1, 2, 2});
  CHECK(g.data == Buffer{1, 2, 3, 4});

  std::mt19937_64 rng(1);
  const Array tokens = random_normal({64, 64}, 1.0, rng);
  Tensor grid = rearrange_to_grid(tape.constant(tokens));
  CHECK(grid.shape() == Shape{64, 8, 8});
  const Array back = ops::transpose(ops::reshape(grid, {64, 64})).to_array();
  CHECK(back.data == tokens.data);
}

TEST_CASE("non-square token counts are rejected") {
  Tape tape;
  CHECK_THROWS_AS(rearrange_to_grid(tape.constant(Array({6, 4}))), std::invalid_argument);
}

TEST_CASE("a fresh module returns class token plus mean patch token") {
  std::mt19937_64 rng(2);
  const RefinementModule m(16, rng);
  const Array cls = random_normal({1, 16}, 1.0, rng);
  const Array patches = random_normal({9, 16}, 1.0, rng);
  Tape tape;
  const Array out = m.refine(m.bind(tape, false), tape.constant(cls), tape.constant(patches)).to_array();
  for (std::size_t j = 0; j < 16; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 9; ++i) mean += patches[i * 16 + j];
    CHECK(out[j] == doctest::Approx(cls[j] + mean / 9.0).epsilon(1e-12));
  }

  Tape t2;
  const Array zero = m.refine(m.bind(t2, false), t2.constant(cls), t2.constant(Array({9, 16}))).to_array();
  for (std::size_t j = 0; j < 16; ++j) CHECK(zero[j] == doctest::Approx(cls[j]).epsilon(1e-12));
}

TEST_CASE("refine checks token shapes") {
  std::mt19937_64 rng(3);
  const RefinementModule m(16, rng);
  Tape tape;
  const auto p = m.bind(tape, false);
  CHECK_THROWS_AS(m.refine(p, tape.constant(Array({1, 8})), tape.constant(Array({4, 16}))), std::invalid_argument);
  CHECK_THROWS_AS(m.refine(p, tape.constant(Array({1, 16})), tape.constant(Array({4, 8}))), std::invalid_argument);
  CHECK_THROWS_AS(RefinementModule(12, rng), std::invalid_argument);
}

TEST_CASE("identity-initialized ensemble composes head with class plus mean tokens") {
  const ViTModel backbone(tiny_config(), 4);
  const RefinedEnsemble ens(backbone, 5);
  const Array x = take_leading(random_images(1, backbone.input_shape(), 6), 0);
  Tape tape;
  const auto refined = refined_ensemble_logits(ens, tape, tape.constant(x));
  REQUIRE(refined.size() == 3);

  Tape ref;
  const auto p = backbone.bind(ref, false);
  const auto states = backbone.forward_collect(p, ref.constant(x));
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(refined[k].shape() == Shape{4});
    const auto& b = states.blocks[k];
    Tensor mean = ops::reshape(ops::global_avg_pool(ops::transpose(b.patch_tokens)), {1, 16});
    const auto expected = backbone.head(p, ops::add(b.class_token, mean)).to_array();
    for (std::size_t c = 0; c < 4; ++c) CHECK(refined[k].value()[c] == doctest::Approx(expected[c]).epsilon(1e-12));
  }
}

TEST_CASE("training leaves the backbone untouched and rejects empty data") {
  const ViTModel backbone(tiny_config(), 7);
  const auto before = parameter_hash(backbone);
  const auto data = generate_synthetic(0, 3, 4, 8);
  RefinementOptions opt;
  opt.learning_rate = 0.01;
  RefinementReport rep;
  const RefinedEnsemble ens = train_refinement(backbone, data.train, opt, &rep);
  CHECK(parameter_hash(backbone) == before);
  CHECK(backbone_hash(ens) == before);
  CHECK(rep.steps == data.train.size());
  const RefinedEnsemble fresh(backbone, 0);
  CHECK(ens.modules[0].params().conv2_weight.data != fresh.modules[0].params().conv2_weight.data);
  CHECK_THROWS_AS(train_refinement(backbone, Dataset{}, opt), std::invalid_argument);
}

TEST_CASE("refined checkpoints round trip and stay loadable as plain backbones") {
  const ViTModel backbone(tiny_config(), 8);
  RefinedEnsemble ens(backbone, 9);
  std::mt19937_64 rng(10);
  for (auto& m : ens.modules) m.params().conv2_weight = random_normal(m.params().conv2_weight.shape, 0.1, rng);
  const auto path = std::filesystem::temp_directory_path() / "vitens_test_refined.vtfg";
  save_refined(ens, path);
  CHECK(has_refinement(path));
  const RefinedEnsemble loaded = load_refined(path);
  const Array x = take_leading(random_images(1, backbone.input_shape(), 11), 0);
  Tape a, b;
  const auto la = refined_ensemble_logits(ens, a, a.constant(x));
  const auto lb = refined_ensemble_logits(loaded, b, b.constant(x));
  for (std::size_t k = 0; k < la.size(); ++k) CHECK(la[k].to_array().data == lb[k].to_array().data);
  CHECK(parameter_hash(load_checkpoint(path)) == parameter_hash(backbone));

  save_checkpoint(backbone, path);
  CHECK_FALSE(has_refinement(path));
  CHECK_THROWS_WITH_AS(load_refined(path), doctest::Contains("no refinement"), std::runtime_error);
  std::filesystem::remove(path);
}
