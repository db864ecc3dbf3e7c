#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "vitens/config.hpp"
#include "vitens/dataset.hpp"

using namespace vitens;

namespace {
std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("vitens_test_data_" + name);
}
}  // namespace

TEST_CASE("synthetic data is deterministic and split 5:1") {
  const auto a = generate_synthetic(3, 12);
  const auto b = generate_synthetic(3, 12);
  CHECK(a.train.images.data == b.train.images.data);
  CHECK(a.train.labels == b.train.labels);
  CHECK(a.val.images.data == b.val.images.data);
  const auto c = generate_synthetic(4, 12);
  CHECK(a.train.images.data != c.train.images.data);

  const auto full = generate_synthetic(0, 600);
  CHECK(full.train.size() == 5000);
  CHECK(full.val.size() == 1000);
  CHECK(full.train.images.shape == Shape{5000, 3, 32, 32});
  CHECK_NOTHROW(full.train.validate());
  CHECK_NOTHROW(full.val.validate());
  std::vector<std::size_t> per_class(10, 0);
  for (std::size_t y : full.val.labels) ++per_class[y];
  for (std::size_t n : per_class) CHECK(n == 100);
}

TEST_CASE("dataset validation catches bad labels and pixels") {
  auto d = generate_synthetic(0, 6).val;
  d.labels[0] = 10;
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  d = generate_synthetic(0, 6).val;
  d.images[0] = 1.5;
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
}

TEST_CASE("IDX round trip rescales pixels and replicates channels") {
  const auto images = temp_path("img.idx"), labels = temp_path("lab.idx");
  std::vector<std::uint8_t> pixels(2 * 4 * 4, 0);
  pixels[0] = 255;
  pixels[16 + 5] = 51;
  write_idx(images, labels, pixels, 2, 4, 4, {7, 2});
  const Dataset d = load_idx(images, labels, 3, 8, 10);
  CHECK(d.size() == 2);
  CHECK(d.images.shape == Shape{2, 3, 8, 8});
  CHECK(d.labels == std::vector<std::size_t>{7, 2});
  CHECK(d.images[0] == 1.0);
  CHECK(d.images[64] == 1.0);   // channel 1 replicates channel 0
  CHECK(d.images[128] == 1.0);  // channel 2
  CHECK(d.images[1] == 1.0);    // 2x nearest upscale
  CHECK(d.images[2] == 0.0);
  std::filesystem::remove(images);
  std::filesystem::remove(labels);
}

TEST_CASE("IDX count mismatch names both counts") {
  const auto images = temp_path("img2.idx"), labels = temp_path("lab2.idx");
  write_idx(images, labels, std::vector<std::uint8_t>(3 * 4), 3, 2, 2, {1, 2, 3});
  const auto other_images = temp_path("img3.idx"), other_labels = temp_path("lab3.idx");
  write_idx(other_images, other_labels, std::vector<std::uint8_t>(2 * 4), 2, 2, 2, {1, 2});
  try {
    load_idx(images, other_labels, 1, 2);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("3 images") != std::string::npos);
    CHECK(msg.find("2 labels") != std::string::npos);
  }
  for (const auto& p : {images, labels, other_images, other_labels}) std::filesystem::remove(p);
}

TEST_CASE("IDX bad magic is reported in hex") {
  const auto images = temp_path("img4.idx"), labels = temp_path("lab4.idx");
  write_idx(images, labels, std::vector<std::uint8_t>(4), 1, 2, 2, {0});
  CHECK_THROWS_WITH_AS(load_idx(labels, labels, 1, 2), doctest::Contains("0x00000801"), std::runtime_error);
  std::filesystem::remove(images);
  std::filesystem::remove(labels);
}

TEST_CASE("nearest resize picks floor-scaled source pixels") {
  Array img({1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  const Array up = resize_nearest(img, 4, 4);
  CHECK(up.data == Buffer{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4});
  const Array down = resize_nearest(up, 2, 2);
  CHECK(down.data == img.data);
}

TEST_CASE("config round trip is the identity") {
  ExperimentConfig c;
  c.model.num_blocks = 12;
  c.train.learning_rate = 0.0007;
  c.attack.epsilon = 8;
  c.attack.target = 3;
  c.attack.blocks = std::vector<std::size_t>{0, 5, 11};
  c.benchmark.seeds = {10, 11};
  c.output_dir = "runs/a b";
  const ExperimentConfig parsed = parse_config(serialize_config(c));
  CHECK(parsed == c);
  CHECK(parse_config(serialize_config(parsed)) == parsed);
  CHECK(parse_config(serialize_config(ExperimentConfig{})) == ExperimentConfig{});
}

TEST_CASE("config rejects unknown keys, sections and bad values") {
  CHECK_THROWS_WITH_AS(parse_config("[attack]\nepsilonn = 8\n"), doctest::Contains("attack.epsilonn"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("[atack]\nepsilon = 8\n"), doctest::Contains("[atack]"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("[attack]\nsteps = -1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("[attack]\nmethod = cw\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("[model]\npatch_size = 5\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("[attack]\nblocks = 0,9\n"), std::invalid_argument);
  const auto c = parse_config("[attack]\nepsilon = 4\nvariant = e\n");
  CHECK(c.attack_config(3).epsilon == 4.0 / 255.0);
  CHECK(c.attack_config(3).mode == ObjectiveMode::ensemble);
  CHECK(c.attack_config(3).seed == 3);
}

TEST_CASE("overrides use the file grammar") {
  ExperimentConfig c;
  apply_override(c, "attack.blocks=1,2");
  apply_override(c, "train.learning_rate = 0.01");
  apply_override(c, "attack.target=none");
  CHECK(c.attack.blocks == std::vector<std::size_t>{1, 2});
  CHECK(c.train.learning_rate == 0.01);
  CHECK_FALSE(c.attack.target.has_value());
  CHECK_THROWS_AS(apply_override(c, "attack.steps"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(c, "steps=3"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(apply_override(c, "attack.stepz=3"), doctest::Contains("attack.stepz"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(c, "model.embed_dim=x"), std::invalid_argument);
}

TEST_CASE("configured datasets come from the generator or IDX files") {
  ExperimentConfig c;
  c.data.n_per_class = 6;
  c.model.image_size = 16;
  c.model.num_classes = 3;
  const auto synth = load_datasets(c);
  CHECK(synth.train.size() == 15);
  CHECK(synth.val.size() == 3);
  CHECK(synth.train.image_shape() == Shape{3, 16, 16});

  const auto images = temp_path("cfg_img.idx"), labels = temp_path("cfg_lab.idx");
  std::vector<std::uint8_t> pixels(12 * 16 * 16, 128), labs(12);
  for (std::size_t i = 0; i < 12; ++i) labs[i] = static_cast<std::uint8_t>(i % 3);
  write_idx(images, labels, pixels, 12, 16, 16, labs);
  c.data.source = "idx";
  c.data.train_images = images.string();
  c.data.train_labels = labels.string();
  c.validate();
  const auto idx = load_datasets(c);
  CHECK(idx.train.size() == 10);
  CHECK(idx.val.size() == 2);
  CHECK(idx.val.labels == std::vector<std::size_t>{2, 2});
  c.data.val_images = images.string();
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  std::filesystem::remove(images);
  std::filesystem::remove(labels);
}
