#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "vitens/gradcheck.hpp"
#include "vitens/ops.hpp"
#include "vitens/tape.hpp"

using namespace vitens;

TEST_CASE("sum gradient is all ones") {
  Tape tape;
  Tensor x = tape.variable(Array({2, 3}, 0.7));
  const auto g = tape.grad(ops::sum(x), {x});
  CHECK(g[0].shape == Shape{2, 3});
  for (double v : g[0].data) CHECK(v == 1.0);
}

TEST_CASE("sum of squares gradient is 2x") {
  Tape tape;
  Tensor x = tape.variable(Array({3}, std::vector<double>{1, -2, 3}));
  const auto g = tape.grad(ops::sum(ops::mul(x, x)), {x});
  CHECK(g[0].data == Buffer{2, -4, 6});
}

TEST_CASE("a leaf used twice accumulates both contributions") {
  Tape tape;
  Tensor x = tape.variable(Array({2}, std::vector<double>{1.5, -1}));
  Tensor y = ops::add(ops::scale(x, 3.0), x);
  const auto g = tape.grad(ops::sum(y), {x});
  CHECK(g[0].data == Buffer{4, 4});
}

TEST_CASE("grad can be called repeatedly on one recording") {
  Tape tape;
  Tensor x = tape.variable(Array({2}, std::vector<double>{1, 2}));
  Tensor a = ops::sum(ops::mul(x, x));
  Tensor b = ops::sum(x);
  const auto g1 = tape.grad(a, {x});
  const auto g2 = tape.grad(b, {x});
  const auto g3 = tape.grad(a, {x});
  CHECK(g1[0].data == g3[0].data);
  CHECK(g2[0].data == Buffer{1, 1});
}

TEST_CASE("unreached leaves get zero gradients") {
  Tape tape;
  Tensor x = tape.variable(Array({2}, 1.0));
  Tensor unused = tape.variable(Array({3}, 1.0));
  const auto g = tape.grad(ops::sum(x), {x, unused});
  CHECK(g[1].data == Buffer(3, 0.0));
}

TEST_CASE("grad rejects non-scalar losses and foreign leaves") {
  Tape tape, other;
  Tensor x = tape.variable(Array({2}, 1.0));
  Tensor y = other.variable(Array({2}, 1.0));
  CHECK_THROWS_AS(tape.grad(x, {x}), std::invalid_argument);
  CHECK_THROWS_AS(tape.grad(ops::sum(x), {y}), std::invalid_argument);
}

TEST_CASE("parameters borrow storage without copying") {
  Array w({2}, std::vector<double>{3, 4});
  Tape tape;
  Tensor p = tape.parameter(w);
  CHECK(p.value().data() == w.data.data());
  const auto g = tape.grad(ops::sum(ops::mul(p, p)), {p});
  CHECK(g[0].data == Buffer{6, 8});
}

TEST_CASE("three-layer MLP and model objectives match finite differences") {
  for (const auto& r : check_model_gradients(3, 20)) {
    INFO(r.name << " rel err " << r.relative_error);
    CHECK(r.passed);
  }
}
