#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "vitens/attacks.hpp"
#include "vitens/cli.hpp"

using namespace vitens;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "vitens_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    std::ofstream(d / "tiny.ini") << "[data]\nn_per_class = 12\n"
                                     "[model]\nimage_size = 16\nembed_dim = 16\nnum_blocks = 3\nnum_heads = 2\n"
                                     "mlp_ratio = 2\nnum_classes = 2\n"
                                     "[train]\nepochs = 1\nbatch_size = 4\n"
                                     "[cnn]\nwidths = 4,8\n"
                                     "[benchmark]\nsamples_per_seed = 2\n"
                                     "[attack]\nsteps = 2\n";
    return d;
  }();
  return dir;
}

std::vector<std::string> with_config(std::vector<std::string> args) {
  args.insert(args.end(), {"-c", (workdir() / "tiny.ini").string(), "-o", (workdir() / "run").string()});
  return args;
}

}  // namespace

TEST_CASE("usage errors exit nonzero") {
  CHECK(cli({}).code != 0);
  CHECK(cli({"bogus"}).code != 0);
  CHECK(cli({"gradcheck", "--no-such-flag"}).code != 0);
  const Run r = cli({"attack", "--set", "attack.epsilonn=3"});
  CHECK(r.code != 0);
  CHECK(r.err.find("attack.epsilonn") != std::string::npos);
  CHECK(cli({"attack", "--eps", "300"}).code != 0);
  CHECK(cli({"attack", "--method", "cw"}).code != 0);
  CHECK(cli({"train-backbone", "--arch", "mlp"}).code != 0);
  CHECK(cli({"evaluate", "-c", "/nonexistent.ini"}).code != 0);
}

TEST_CASE("gradcheck subcommand passes") {
  const Run r = cli({"gradcheck", "--seed", "0", "--instances", "2"});
  CHECK(r.code == 0);
  CHECK(r.out.find("all gradients match") != std::string::npos);
}

TEST_CASE("dataset-gen writes the archive and IDX files") {
  const Run r = cli(with_config({"dataset-gen", "--idx"}));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("train 20 val 4") != std::string::npos);
  CHECK(fs::exists(workdir() / "run" / "dataset.vtfg"));
  CHECK(fs::exists(workdir() / "run" / "val-labels-idx1-ubyte"));
}

TEST_CASE("pipeline from training to transfer matrix") {
  REQUIRE(cli(with_config({"train-backbone"})).code == 0);
  REQUIRE(cli(with_config({"train-backbone", "--arch", "cnn"})).code == 0);
  REQUIRE(cli(with_config({"train-trm"})).code == 0);
  const fs::path run = workdir() / "run";
  CHECK(fs::exists(run / "backbone.vtfg"));
  CHECK(fs::exists(run / "refined.vtfg"));

  SUBCASE("attack budget is given in 0-255 units") {
    const Run r = cli(with_config({"attack", "--method", "mim", "--variant", "re", "--eps", "16", "--samples", "3"}));
    REQUIRE(r.code == 0);
    const auto batch = AdversarialBatch::load(run / "adv_mim_RE.vtfg");
    CHECK(batch.config.epsilon == doctest::Approx(16.0 / 255.0));
    CHECK(batch.config.mode == ObjectiveMode::refined);
    CHECK(batch.clean.shape[0] == 3);
    for (std::size_t i = 0; i < batch.clean.numel(); ++i) {
      CHECK(std::abs(batch.adversarial[i] - batch.clean[i]) <= 16.0 / 255.0 + 1e-9);
    }
    CHECK(fs::exists(run / "adv_mim_RE.metrics.json"));
    CHECK(cli(with_config({"evaluate", "--model", (run / "cnn.vtfg").string(), "--adv",
                           (run / "adv_mim_RE.vtfg").string()}))
              .code == 0);
  }

  SUBCASE("transfer-matrix writes every cell") {
    const Run r = cli(with_config({"transfer-matrix", "--seeds", "5", "--target", "cnn=" + (run / "cnn.vtfg").string()}));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    std::ifstream csv(run / "transfer.csv");
    std::size_t lines = 0;
    for (std::string line; std::getline(csv, line);) ++lines;
    // 1 surrogate x 2 attacks x 3 variants x 1 target x 5 seeds, plus header.
    CHECK(lines == 1 + 2 * 3 * 1 * 5);
  }

  SUBCASE("the same config reproduces the same checkpoint") {
    const fs::path again = workdir() / "again";
    REQUIRE(cli({"train-backbone", "-c", (workdir() / "tiny.ini").string(), "-o", again.string()}).code == 0);
    std::ifstream a(run / "backbone.vtfg", std::ios::binary), b(again / "backbone.vtfg", std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
  }
}
