#include "doctest.h"

#include <filesystem>
#include <memory>
#include <random>
#include <sstream>

#include "test_support.hpp"
#include "vitens/cnn.hpp"
#include "vitens/evaluation.hpp"
#include "vitens/training.hpp"

using namespace vitens;
using vitens::testing::tiny_config;

TEST_CASE("fool rate counts flipped predictions") {
  CHECK(fool_rate({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(fool_rate({1, 2, 3}, {0, 0, 0}) == 100.0);
  CHECK(fool_rate({0, 1, 2, 3}, {0, 9, 2, 9}) == 50.0);
  CHECK_THROWS_AS(fool_rate({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(fool_rate({1}, {1, 2}), std::invalid_argument);
}

TEST_CASE("fool rate agrees with a brute-force recount") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 50)(rng);
    std::vector<std::size_t> a(n), b(n);
    std::size_t flips = 0;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng() % 4;
      b[i] = rng() % 4;
      if (a[i] != b[i]) ++flips;
    }
    CHECK(fool_rate(a, b) == 100.0 * static_cast<double>(flips) / static_cast<double>(n));
  }
}

namespace {

struct Fixture {
  DatasetSplits data = generate_synthetic(2, 4, 4, 8);
  std::shared_ptr<RefinedEnsemble> ens = std::make_shared<RefinedEnsemble>(ViTModel(tiny_config(), 5), 6);
  std::shared_ptr<const ViTView> view = std::make_shared<ViTView>(std::shared_ptr<const RefinedEnsemble>(ens));
  std::shared_ptr<CnnModel> cnn;

  Fixture() {
    CnnConfig c;
    c.image_size = 8;
    c.widths = {4, 8};
    c.num_classes = 4;
    cnn = std::make_shared<CnnModel>(c, 7);
  }
};

}  // namespace

TEST_CASE("last per-block accuracy equals plain top-1") {
  Fixture f;
  const auto acc = per_block_accuracy(*f.view, f.data.train);
  REQUIRE(acc.size() == 3);
  CHECK(acc.back() == accuracy(*f.view, f.data.train));
  CHECK(per_block_accuracy(*f.view, f.data.train, ObjectiveMode::refined).size() == 3);
  CHECK_THROWS_AS(per_block_accuracy(*f.view, Dataset{}), std::invalid_argument);
}

TEST_CASE("blockwise fool rate has one entry per block and is zero without budget") {
  Fixture f;
  AttackConfig cfg;
  cfg.epsilon = 0.0;
  const auto rates = blockwise_fool_rate(*f.view, AttackMethod::mim, cfg, f.data.val);
  CHECK(rates == std::vector<double>(3, 0.0));
}

TEST_CASE("transfer benchmark bookkeeping") {
  Fixture f;
  BenchmarkOptions opt;
  opt.seeds = {0, 1};
  opt.samples_per_seed = 3;
  opt.attack.steps = 2;
  // Any sample is eligible when the reference accepts everything the
  // surrogate gets right; use the surrogate itself as reference.
  opt.reference = f.view;
  std::vector<NamedSurrogate> surrogates{{"vit", f.view}};
  std::vector<NamedTarget> targets{{"cnn", f.cnn}, {"vit2", std::make_shared<ViTModel>(tiny_config(), 99)}};

  const bool any_correct = accuracy(*f.view, f.data.train) > 0.0;
  REQUIRE(any_correct);
  const auto report = run_transfer_benchmark(surrogates, targets, f.data.train, opt);
  CHECK(report.cells.size() == 1 * 2 * 3 * 2 * 2);
  for (const auto& c : report.cells) {
    CHECK(c.fool_rate >= 0.0);
    CHECK(c.fool_rate <= 100.0);
    CHECK(c.n_samples >= 1);
  }
  std::istringstream csv(report.to_csv());
  std::string header;
  std::getline(csv, header);
  CHECK(header == "surrogate,attack,variant,target,seed,n_samples,fool_rate");
  std::size_t rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  CHECK(rows == report.cells.size());
  CHECK(report.to_text().find("blockwise_fool_rate") != std::string::npos);

  const auto again = run_transfer_benchmark(surrogates, targets, f.data.train, opt);
  CHECK(again.to_csv() == report.to_csv());

  opt.attack.epsilon = 0.0;
  for (const auto& c : run_transfer_benchmark(surrogates, targets, f.data.train, opt).cells) CHECK(c.fool_rate == 0.0);
}

TEST_CASE("a target that is the surrogate is rejected") {
  Fixture f;
  BenchmarkOptions opt;
  std::vector<NamedSurrogate> surrogates{{"vit", f.view}};
  std::vector<NamedTarget> same{{"vit", f.view}};
  CHECK_THROWS_AS(run_transfer_benchmark(surrogates, same, f.data.train, opt), std::invalid_argument);
  std::vector<NamedTarget> backbone{{"other", std::shared_ptr<const Classifier>(f.ens, &f.ens->backbone)}};
  CHECK_THROWS_AS(run_transfer_benchmark(surrogates, backbone, f.data.train, opt), std::invalid_argument);
}

TEST_CASE("CNN target trains deterministically and round trips") {
  auto data = generate_synthetic(3, 4, 4, 8);
  CnnConfig c;
  c.image_size = 8;
  c.widths = {4, 8};
  c.num_classes = 4;
  CnnModel a(c, 1), b(c, 1);
  TrainOptions opt;
  opt.epochs = 2;
  opt.batch_size = 4;
  fit_classifier(a, data.train, data.val, opt);
  fit_classifier(b, data.train, data.val, opt);
  const auto path = std::filesystem::temp_directory_path() / "vitens_test_cnn.vtfg";
  a.save(path);
  const CnnModel loaded = CnnModel::load(path);
  CHECK(loaded.config() == c);
  CHECK(predict(loaded, data.val.images) == predict(a, data.val.images));
  CHECK(predict(b, data.val.images) == predict(a, data.val.images));
  std::filesystem::remove(path);
  CnnConfig bad = c;
  bad.image_size = 6;
  CHECK_THROWS_AS(CnnModel(bad, 0), std::invalid_argument);
}
