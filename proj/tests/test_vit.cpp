#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "test_support.hpp"
#include "vitens/checkpoint.hpp"
#include "vitens/ops.hpp"
#include "vitens/training.hpp"
#include "vitens/vit.hpp"

using namespace vitens;
using vitens::testing::random_images;
using vitens::testing::tiny_config;

namespace {

std::vector<double> plain_logits(const ViTModel& m, const Array& image) {
  Tape tape;
  const auto v = m.logits(tape, tape.constant(image)).value();
  return {v.begin(), v.end()};
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("vitens_test_vit_" + name);
}

}  // namespace

TEST_CASE("config validation") {
  ViTConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.num_patches() == 64);
  c.patch_size = 5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = ViTConfig{};
  c.num_heads = 5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("default model exposes eight blocks of 64x64 patch tokens") {
  const ViTModel m(ViTConfig{}, 0);
  Tape tape;
  const auto p = m.bind(tape, false);
  const auto states = m.forward_collect(p, tape.constant(take_leading(random_images(1, m.input_shape(), 1), 0)));
  REQUIRE(states.blocks.size() == 8);
  for (const auto& b : states.blocks) {
    CHECK(b.class_token.shape() == Shape{1, 64});
    CHECK(b.patch_tokens.shape() == Shape{64, 64});
  }
  const auto ens = m.ensemble_logits(p, states);
  REQUIRE(ens.size() == 8);
  for (const auto& e : ens) CHECK(e.shape() == Shape{10});
}

TEST_CASE("collected logits and the last ensemble member equal the plain forward exactly") {
  const ViTModel m(tiny_config(), 3);
  const Array images = random_images(20, m.input_shape(), 4);
  for (std::size_t i = 0; i < 20; ++i) {
    const Array x = take_leading(images, i);
    Tape tape;
    const auto p = m.bind(tape, false);
    const auto states = m.forward_collect(p, tape.constant(x));
    const auto ens = m.ensemble_logits(p, states);
    const auto plain = plain_logits(m, x);
    CHECK(std::equal(plain.begin(), plain.end(), states.logits.value().begin()));
    CHECK(std::equal(plain.begin(), plain.end(), ens.back().value().begin()));
  }
}

TEST_CASE("wrong image size is rejected") {
  const ViTModel m(tiny_config(), 0);
  Tape tape;
  CHECK_THROWS_AS(m.logits(tape, tape.constant(Array({3, 16, 16}))), std::invalid_argument);
}

TEST_CASE("untrained members sit near chance on random inputs") {
  const ViTModel m(ViTConfig{}, 11);
  const Array images = random_images(100, m.input_shape(), 12);
  std::mt19937_64 rng(13);
  std::vector<std::size_t> labels(100);
  for (auto& y : labels) y = std::uniform_int_distribution<std::size_t>(0, 9)(rng);
  std::vector<std::size_t> correct(8, 0);
  for (std::size_t i = 0; i < 100; ++i) {
    Tape tape;
    const auto p = m.bind(tape, false);
    const auto ens = m.ensemble_logits(p, m.forward_collect(p, tape.constant(take_leading(images, i))));
    for (std::size_t k = 0; k < 8; ++k) correct[k] += argmax(ens[k].value()) == labels[i];
  }
  for (std::size_t k = 0; k < 8; ++k) {
    INFO("block " << k << " accuracy " << correct[k]);
    CHECK(correct[k] <= 25);
  }
}

TEST_CASE("permuting patches together with their position codes leaves logits unchanged") {
  const ViTConfig c = tiny_config();
  ViTModel m(c, 5);
  ViTModel permuted = m;
  const std::size_t g = c.grid(), p = c.patch_size, s = c.image_size, d = c.embed_dim;
  std::vector<std::size_t> perm(c.num_patches());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(6);
  std::shuffle(perm.begin(), perm.end(), rng);

  const Array x = take_leading(random_images(1, m.input_shape(), 7), 0);
  Array moved(x.shape);
  // Patch j of x goes to slot perm[j]; its position code follows it.
  for (std::size_t j = 0; j < perm.size(); ++j) {
    const std::size_t sy = j / g, sx = j % g, ty = perm[j] / g, tx = perm[j] % g;
    for (std::size_t ch = 0; ch < c.channels; ++ch)
      for (std::size_t y = 0; y < p; ++y)
        for (std::size_t q = 0; q < p; ++q)
          moved[(ch * s + ty * p + y) * s + tx * p + q] = x[(ch * s + sy * p + y) * s + sx * p + q];
    for (std::size_t e = 0; e < d; ++e) {
      permuted.params().pos_embed[(1 + perm[j]) * d + e] = m.params().pos_embed[(1 + j) * d + e];
    }
  }
  const auto a = plain_logits(m, x);
  const auto b = plain_logits(permuted, moved);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-6);
}

TEST_CASE("argmax is invariant to positive logit scaling") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 50; ++t) {
    Array l = random_normal({10}, 1.0, rng);
    const std::size_t before = argmax(l.data);
    const double k = std::uniform_real_distribution<double>(0.01, 100.0)(rng);
    for (double& v : l.data) v *= k;
    CHECK(argmax(l.data) == before);
  }
}

TEST_CASE("zero epochs returns the initial model") {
  const auto data = generate_synthetic(0, 12);
  TrainOptions opt;
  opt.epochs = 0;
  const auto trained = train_backbone(ViTConfig{}, data.train, data.val, opt);
  CHECK(parameter_hash(trained.model) == parameter_hash(ViTModel(ViTConfig{}, 0)));
  CHECK(trained.report.val_accuracy <= 30.0);
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto data = generate_synthetic(1, 3, 4, 8);
  TrainOptions opt;
  opt.epochs = 2;
  opt.batch_size = 4;
  opt.seed = 9;
  const auto a = train_backbone(tiny_config(), data.train, data.val, opt);
  const auto b = train_backbone(tiny_config(), data.train, data.val, opt);
  CHECK(parameter_hash(a.model) == parameter_hash(b.model));
  CHECK(parameter_hash(a.model) != parameter_hash(ViTModel(tiny_config(), 9)));
  Dataset empty;
  CHECK_THROWS_AS(train_backbone(tiny_config(), empty, data.val, opt), std::invalid_argument);
}

TEST_CASE("checkpoint round trip preserves outputs bit for bit") {
  const ViTModel m(tiny_config(), 21);
  const auto path = temp_path("roundtrip.vtfg");
  save_checkpoint(m, path);
  const ViTModel loaded = load_checkpoint(path);
  CHECK(loaded.config() == m.config());
  CHECK(parameter_hash(loaded) == parameter_hash(m));
  const Array x = take_leading(random_images(1, m.input_shape(), 22), 0);
  CHECK(plain_logits(m, x) == plain_logits(loaded, x));
  std::filesystem::remove(path);
}

TEST_CASE("corrupt magic bytes name the file") {
  const auto path = temp_path("corrupt.vtfg");
  save_checkpoint(ViTModel(tiny_config(), 0), path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  try {
    load_checkpoint(path);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(path.string()) != std::string::npos);
    CHECK(std::string(e.what()).find("magic") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("truncated checkpoints and version mismatches are reported") {
  const auto path = temp_path("trunc.vtfg");
  save_checkpoint(ViTModel(tiny_config(), 0), path);
  const auto full = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full - 8);
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("truncated"), std::runtime_error);

  save_checkpoint(ViTModel(tiny_config(), 0), path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const char v[4] = {9, 0, 0, 0};
    f.write(v, 4);
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version 9"), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("loading into a narrower config lists the offending arrays") {
  const auto path = temp_path("wide.vtfg");
  save_checkpoint(ViTModel(ViTConfig{}, 0), path);
  ViTConfig narrow;
  narrow.embed_dim = 32;
  try {
    load_checkpoint(path, narrow);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("shape mismatch") != std::string::npos);
    CHECK(msg.find("patch_embed.weight") != std::string::npos);
    CHECK(msg.find("blocks.7.fc2.weight") != std::string::npos);
  }
  std::filesystem::remove(path);
}
