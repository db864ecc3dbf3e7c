#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vitens/array.hpp"
#include "vitens/tape.hpp"

namespace vitens {

// Builds a scalar loss from leaves recorded on `tape`.
using ScalarFn = std::function<Tensor(Tape& tape, std::span<const Tensor> leaves)>;

struct GradCheckResult {
  std::string name;
  double relative_error = 0.0;  // worst over the instances checked
  std::size_t instances = 0;
  bool passed = false;
};

// Compares the tape gradient of fn against central differences with step h,
// evaluating fn through forward values only. The error for one leaf is
// ||analytic - numeric||_2 / max(||analytic||_2, ||numeric||_2, 1e-12);
// the worst leaf is returned.
double gradient_error(const ScalarFn& fn, const std::vector<Array>& inputs, double h = 1e-5);

// Finite-difference suite over every differentiable kernel, with
// `instances` random instances per kernel derived from `seed`.
std::vector<GradCheckResult> check_kernel_gradients(std::uint64_t seed, std::size_t instances,
                                                    double tolerance = 1e-4);

// End-to-end checks: a 3-layer MLP, the ViT input gradient, the refinement
// module and the baseline / self-ensemble / refined attack objectives on a
// small model.
std::vector<GradCheckResult> check_model_gradients(std::uint64_t seed, std::size_t instances,
                                                   double tolerance = 1e-4);

}  // namespace vitens
