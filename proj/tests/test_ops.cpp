#include "doctest.h"

#include <cmath>
#include <random>
#include <stdexcept>

#include "vitens/gradcheck.hpp"
#include "vitens/ops.hpp"

using namespace vitens;

TEST_CASE("every kernel matches central differences over 20 seeds") {
  for (const auto& r : check_kernel_gradients(7, 20)) {
    INFO(r.name << " rel err " << r.relative_error);
    CHECK(r.passed);
  }
}

namespace {
Array values(Shape s, std::vector<double> v) { return Array(std::move(s), std::move(v)); }
}  // namespace

TEST_CASE("cross entropy of uniform logits is ln C") {
  Tape tape;
  Tensor l = tape.constant(Array({3}, 0.0));
  CHECK(ops::softmax_cross_entropy(l, 0).item() == doctest::Approx(std::log(3.0)).epsilon(1e-15));
}

TEST_CASE("cross entropy with a confident margin") {
  Tape tape;
  Tensor l = tape.constant(values({2}, {10, 0}));
  const double expected = -std::log(1.0 / (1.0 + std::exp(-10.0)));
  CHECK(ops::softmax_cross_entropy(l, 0).item() == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(4.54e-5).epsilon(1e-3));
}

TEST_CASE("cross entropy gradient is softmax minus one-hot") {
  Tape tape;
  Tensor l = tape.variable(values({4}, {0.3, -1.2, 2.0, 0.5}));
  const auto g = tape.grad(ops::softmax_cross_entropy(l, 2), {l});
  const auto p = ops::softmax(l).to_array();
  for (std::size_t i = 0; i < 4; ++i) CHECK(g[0][i] == doctest::Approx(p[i] - (i == 2 ? 1.0 : 0.0)).epsilon(1e-14));
}

TEST_CASE("cross entropy rejects labels out of range") {
  Tape tape;
  CHECK_THROWS_AS(ops::softmax_cross_entropy(tape.constant(Array({3})), 3), std::out_of_range);
}

TEST_CASE("softmax rows sum to one") {
  std::mt19937_64 rng(5);
  Tape tape;
  const auto p = ops::softmax(tape.constant(random_normal({6, 7}, 5.0, rng))).to_array();
  for (std::size_t r = 0; r < 6; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 7; ++c) s += p[r * 7 + c];
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
}

TEST_CASE("identity 1x1 convolution returns its input") {
  std::mt19937_64 rng(1);
  Tape tape;
  const Array x = random_normal({3, 4, 5}, 1.0, rng);
  Array w({3, 3, 1, 1});
  for (std::size_t c = 0; c < 3; ++c) w[c * 3 + c] = 1.0;
  const auto y = ops::conv2d(tape.constant(x), tape.constant(w), tape.constant(Array({3})), 1, 0).to_array();
  CHECK(y.data == x.data);
}

TEST_CASE("3x3 ones convolution counts overlaps") {
  Tape tape;
  const auto y = ops::conv2d(tape.constant(Array({1, 3, 3}, 1.0)), tape.constant(Array({1, 1, 3, 3}, 1.0)),
                             tape.constant(Array({1})), 1, 1)
                     .to_array();
  CHECK(y.shape == Shape{1, 3, 3});
  CHECK(y[4] == 9.0);
  CHECK(y[0] == 4.0);
  CHECK(y[2] == 4.0);
  CHECK(y[6] == 4.0);
  CHECK(y[8] == 4.0);
}

TEST_CASE("convolution with a fractional output size is rejected") {
  Tape tape;
  CHECK_THROWS_AS(ops::conv2d(tape.constant(Array({1, 4, 4})), tape.constant(Array({1, 1, 3, 3})),
                              tape.constant(Array({1})), 2, 0),
                  std::invalid_argument);
}

TEST_CASE("forward passes are deterministic") {
  std::mt19937_64 a(9), b(9);
  Tape t1, t2;
  const auto x1 = ops::gelu(ops::layer_norm(t1.constant(random_normal({4, 8}, 1.0, a)), t1.constant(Array({8}, 1.0)),
                                            t1.constant(Array({8}))))
                      .to_array();
  const auto x2 = ops::gelu(ops::layer_norm(t2.constant(random_normal({4, 8}, 1.0, b)), t2.constant(Array({8}, 1.0)),
                                            t2.constant(Array({8}))))
                      .to_array();
  CHECK(x1.data == x2.data);
}

TEST_CASE("gelu follows the tanh formula") {
  Tape tape;
  const double x = 0.8;
  const double expected = 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (x + 0.044715 * x * x * x)));
  CHECK(ops::gelu(tape.constant(Array({1}, x))).value()[0] == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("shape mismatches are rejected") {
  Tape tape;
  CHECK_THROWS_AS(ops::add(tape.constant(Array({2})), tape.constant(Array({3}))), std::invalid_argument);
  CHECK_THROWS_AS(ops::matmul(tape.constant(Array({2, 3})), tape.constant(Array({2, 3}))), std::invalid_argument);
  CHECK_THROWS_AS(ops::reshape(tape.constant(Array({2, 3})), {4}), std::invalid_argument);
}
