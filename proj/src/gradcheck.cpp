#include "vitens/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vitens/attacks.hpp"
#include "vitens/ops.hpp"
#include "vitens/refinement.hpp"

namespace vitens {

double gradient_error(const ScalarFn& fn, const std::vector<Array>& inputs, double h) {
  Tape tape;
  std::vector<Tensor> leaves;
  for (const Array& a : inputs) leaves.push_back(tape.variable(a));
  Tensor loss = fn(tape, leaves);
  const auto analytic = tape.grad(loss, leaves);

  auto evaluate = [&](const std::vector<Array>& values) {
    Tape t;
    std::vector<Tensor> ls;
    for (const Array& a : values) ls.push_back(t.constant(a));
    return fn(t, ls).item();
  };

  double worst = 0.0;
  std::vector<Array> probe = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t j = 0; j < inputs[i].numel(); ++j) {
      const double orig = probe[i][j];
      probe[i][j] = orig + h;
      const double up = evaluate(probe);
      probe[i][j] = orig - h;
      const double down = evaluate(probe);
      probe[i][j] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i][j];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
    }
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
    worst = std::max(worst, std::sqrt(diff2) / denom);
  }
  return worst;
}

namespace {

// Reduces a tensor-valued kernel to a scalar with a fixed random weighting,
// so the check covers the whole Jacobian-vector product.
Tensor weighted_sum(const Tensor& y, const Array& weights) {
  Tape& tape = y.tape();
  Tensor w = tape.constant(Array(y.shape(), weights.data));
  return ops::sum(ops::mul(y, w));
}

struct KernelCase {
  std::string name;
  std::function<std::vector<Array>(std::mt19937_64&)> inputs;
  std::function<Tensor(std::span<const Tensor>)> kernel;
};

std::vector<KernelCase> kernel_cases() {
  auto normal = [](Shape s, double sd = 1.0) {
    return [s, sd](std::mt19937_64& rng) { return random_normal(s, sd, rng); };
  };
  std::vector<KernelCase> cases;
  cases.push_back({"matmul",
                   [=](std::mt19937_64& r) { return std::vector{normal({3, 4})(r), normal({4, 5})(r)}; },
                   [](auto l) { return ops::matmul(l[0], l[1]); }});
  cases.push_back({"linear",
                   [=](std::mt19937_64& r) {
                     return std::vector{normal({3, 4})(r), normal({4, 5})(r), normal({5})(r)};
                   },
                   [](auto l) { return ops::linear(l[0], l[1], l[2]); }});
  cases.push_back({"linear_vector",
                   [=](std::mt19937_64& r) {
                     return std::vector{normal({4})(r), normal({4, 3})(r), normal({3})(r)};
                   },
                   [](auto l) { return ops::linear(l[0], l[1], l[2]); }});
  cases.push_back({"add",
                   [=](std::mt19937_64& r) { return std::vector{normal({2, 3})(r), normal({2, 3})(r)}; },
                   [](auto l) { return ops::add(l[0], l[1]); }});
  cases.push_back({"sub",
                   [=](std::mt19937_64& r) { return std::vector{normal({2, 3})(r), normal({2, 3})(r)}; },
                   [](auto l) { return ops::sub(l[0], l[1]); }});
  cases.push_back({"mul",
                   [=](std::mt19937_64& r) { return std::vector{normal({2, 3})(r), normal({2, 3})(r)}; },
                   [](auto l) { return ops::mul(l[0], l[1]); }});
  cases.push_back({"scale", [=](std::mt19937_64& r) { return std::vector{normal({5})(r)}; },
                   [](auto l) { return ops::scale(l[0], -1.7); }});
  cases.push_back({"gelu", [=](std::mt19937_64& r) { return std::vector{normal({4, 6}, 2.0)(r)}; },
                   [](auto l) { return ops::gelu(l[0]); }});
  cases.push_back({"relu", [=](std::mt19937_64& r) { return std::vector{normal({4, 6})(r)}; },
                   [](auto l) { return ops::relu(l[0]); }});
  cases.push_back({"softmax", [=](std::mt19937_64& r) { return std::vector{normal({3, 5}, 2.0)(r)}; },
                   [](auto l) { return ops::softmax(l[0]); }});
  cases.push_back({"layer_norm",
                   [=](std::mt19937_64& r) {
                     return std::vector{normal({3, 8})(r), normal({8})(r), normal({8})(r)};
                   },
                   [](auto l) { return ops::layer_norm(l[0], l[1], l[2]); }});
  cases.push_back({"group_norm",
                   [=](std::mt19937_64& r) {
                     return std::vector{normal({4, 3, 3})(r), normal({4})(r), normal({4})(r)};
                   },
                   [](auto l) { return ops::group_norm(l[0], l[1], l[2], 2); }});
  cases.push_back({"conv2d",
                   [=](std::mt19937_64& r) {
                     return std::vector{normal({2, 5, 5})(r), normal({3, 2, 3, 3})(r), normal({3})(r)};
                   },
                   [](auto l) { return ops::conv2d(l[0], l[1], l[2], 1, 1); }});
  cases.push_back({"conv2d_stride2",
                   [=](std::mt19937_64& r) {
                     return std::vector{normal({2, 5, 5})(r), normal({3, 2, 3, 3})(r), normal({3})(r)};
                   },
                   [](auto l) { return ops::conv2d(l[0], l[1], l[2], 2, 1); }});
  cases.push_back({"max_pool2d", [=](std::mt19937_64& r) { return std::vector{normal({2, 4, 4})(r)}; },
                   [](auto l) { return ops::max_pool2d(l[0], 2); }});
  cases.push_back({"global_avg_pool",
                   [=](std::mt19937_64& r) { return std::vector{normal({3, 2, 2})(r)}; },
                   [](auto l) { return ops::global_avg_pool(l[0]); }});
  cases.push_back({"multi_head_attention",
                   [=](std::mt19937_64& r) { return std::vector{normal({5, 12})(r)}; },
                   [](auto l) { return ops::multi_head_attention(l[0], 2); }});
  cases.push_back({"reshape", [=](std::mt19937_64& r) { return std::vector{normal({2, 6})(r)}; },
                   [](auto l) { return ops::reshape(l[0], {3, 4}); }});
  cases.push_back({"transpose", [=](std::mt19937_64& r) { return std::vector{normal({3, 4})(r)}; },
                   [](auto l) { return ops::transpose(l[0]); }});
  cases.push_back({"slice_rows", [=](std::mt19937_64& r) { return std::vector{normal({5, 3})(r)}; },
                   [](auto l) { return ops::slice_rows(l[0], 1, 3); }});
  cases.push_back({"concat_rows",
                   [=](std::mt19937_64& r) { return std::vector{normal({2, 3})(r), normal({3, 3})(r)}; },
                   [](auto l) { return ops::concat_rows(l[0], l[1]); }});
  cases.push_back({"gather", [=](std::mt19937_64& r) { return std::vector{normal({2, 3})(r)}; },
                   [](auto l) {
                     auto map = std::make_shared<std::vector<std::int64_t>>(
                         std::vector<std::int64_t>{5, -1, 0, 0, 3, 2, -1, 1});
                     return ops::gather(l[0], {2, 4}, map);
                   }});
  cases.push_back({"embedding_lookup", [=](std::mt19937_64& r) { return std::vector{normal({5, 3})(r)}; },
                   [](auto l) { return ops::embedding_lookup(l[0], {4, 0, 4}); }});
  return cases;
}

}  // namespace

std::vector<GradCheckResult> check_kernel_gradients(std::uint64_t seed, std::size_t instances,
                                                    double tolerance) {
  std::vector<GradCheckResult> results;
  std::size_t case_index = 0;
  for (const auto& kc : kernel_cases()) {
    GradCheckResult res{kc.name, 0.0, instances, true};
    for (std::size_t inst = 0; inst < instances; ++inst) {
      std::seed_seq seq{seed, static_cast<std::uint64_t>(case_index), static_cast<std::uint64_t>(inst)};
      std::mt19937_64 rng(seq);
      auto inputs = kc.inputs(rng);
      Tape probe;
      std::vector<Tensor> ls;
      for (const auto& a : inputs) ls.push_back(probe.constant(a));
      const Array weights = random_normal(kc.kernel(ls).shape(), 1.0, rng);
      const double err = gradient_error(
          [&](Tape&, std::span<const Tensor> l) { return weighted_sum(kc.kernel(l), weights); }, inputs);
      res.relative_error = std::max(res.relative_error, err);
    }
    res.passed = res.relative_error < tolerance;
    results.push_back(res);
    ++case_index;
  }

  // Cross entropy is already scalar; check it directly with a random label.
  GradCheckResult ce{"softmax_cross_entropy", 0.0, instances, true};
  for (std::size_t inst = 0; inst < instances; ++inst) {
    std::seed_seq seq{seed, std::uint64_t{1000}, static_cast<std::uint64_t>(inst)};
    std::mt19937_64 rng(seq);
    const std::size_t label = std::uniform_int_distribution<std::size_t>(0, 5)(rng);
    const double err = gradient_error(
        [&](Tape&, std::span<const Tensor> l) { return ops::softmax_cross_entropy(l[0], label); },
        {random_normal({6}, 2.0, rng)});
    ce.relative_error = std::max(ce.relative_error, err);
  }
  ce.passed = ce.relative_error < tolerance;
  results.push_back(ce);
  return results;
}

namespace {

ViTConfig tiny_vit_config() {
  ViTConfig c;
  c.image_size = 8;
  c.patch_size = 4;
  c.channels = 3;
  c.embed_dim = 16;
  c.num_blocks = 2;
  c.num_heads = 2;
  c.mlp_ratio = 2;
  c.num_classes = 4;
  return c;
}

// Refinement modules start at an identity; perturb every parameter so the
// check exercises the whole residual branch.
void randomize(RefinementModule& m, std::mt19937_64& rng) {
  visit_refinement(
      [&](const char*, Array& a) {
        const Array noise = random_normal(a.shape, 0.3, rng);
        for (std::size_t i = 0; i < a.numel(); ++i) a[i] += noise[i];
      },
      m.params());
}

template <class Fn>
GradCheckResult run_instances(const std::string& name, std::uint64_t seed, std::uint64_t tag,
                              std::size_t instances, double tolerance, Fn&& one) {
  GradCheckResult res{name, 0.0, instances, true};
  for (std::size_t inst = 0; inst < instances; ++inst) {
    std::seed_seq seq{seed, tag, static_cast<std::uint64_t>(inst)};
    std::mt19937_64 rng(seq);
    res.relative_error = std::max(res.relative_error, one(rng));
  }
  res.passed = res.relative_error < tolerance;
  return res;
}

}  // namespace

std::vector<GradCheckResult> check_model_gradients(std::uint64_t seed, std::size_t instances,
                                                   double tolerance) {
  std::vector<GradCheckResult> results;

  results.push_back(run_instances("mlp3", seed, 2000, instances, tolerance, [](std::mt19937_64& rng) {
    const std::size_t label = std::uniform_int_distribution<std::size_t>(0, 3)(rng);
    std::vector<Array> inputs{random_normal({5}, 1.0, rng),    random_normal({5, 6}, 0.5, rng),
                              random_normal({6}, 0.5, rng),    random_normal({6, 6}, 0.5, rng),
                              random_normal({6}, 0.5, rng),    random_normal({6, 4}, 0.5, rng),
                              random_normal({4}, 0.5, rng)};
    return gradient_error(
        [label](Tape&, std::span<const Tensor> l) {
          Tensor h = ops::gelu(ops::linear(l[0], l[1], l[2]));
          h = ops::gelu(ops::linear(h, l[3], l[4]));
          return ops::softmax_cross_entropy(ops::linear(h, l[5], l[6]), label);
        },
        inputs);
  }));

  results.push_back(run_instances("vit_input", seed, 2001, instances, tolerance, [](std::mt19937_64& rng) {
    const ViTModel model(tiny_vit_config(), rng());
    const std::size_t label = std::uniform_int_distribution<std::size_t>(0, 3)(rng);
    return gradient_error(
        [&](Tape& tape, std::span<const Tensor> l) {
          return ops::softmax_cross_entropy(model.logits(tape, l[0]), label);
        },
        {random_uniform(model.input_shape(), 0.0, 1.0, rng)});
  }));

  results.push_back(run_instances("refinement", seed, 2002, instances, tolerance, [](std::mt19937_64& rng) {
    RefinementModule module(16, rng);
    randomize(module, rng);
    std::vector<Array> inputs{random_normal({1, 16}, 1.0, rng), random_normal({4, 16}, 1.0, rng)};
    visit_refinement([&](const char*, const Array& a) { inputs.push_back(a); }, module.params());
    const Array weights = random_normal({1, 16}, 1.0, rng);
    return gradient_error(
        [&](Tape& tape, std::span<const Tensor> l) {
          RefinementModule::Bound p;
          std::size_t next = 2;
          visit_refinement([&](const char*, Tensor& t) { t = l[next++]; }, p);
          return ops::sum(ops::mul(module.refine(p, l[0], l[1]), tape.constant(weights)));
        },
        inputs);
  }));

  const ObjectiveMode modes[] = {ObjectiveMode::baseline, ObjectiveMode::ensemble, ObjectiveMode::refined};
  for (std::size_t mi = 0; mi < 3; ++mi) {
    const ObjectiveMode mode = modes[mi];
    results.push_back(run_instances(
        "attack_loss_" + to_string(mode), seed, 2003 + mi, instances, tolerance, [mode](std::mt19937_64& rng) {
          auto ensemble = std::make_shared<RefinedEnsemble>(ViTModel(tiny_vit_config(), rng()), rng());
          for (auto& m : ensemble->modules) randomize(m, rng);
          const ViTView view{std::shared_ptr<const RefinedEnsemble>(ensemble)};
          AttackConfig cfg;
          cfg.mode = mode;
          const std::size_t label = std::uniform_int_distribution<std::size_t>(0, 3)(rng);
          return gradient_error(
              [&](Tape& tape, std::span<const Tensor> l) {
                return attack_loss(view.member_logits(tape, l[0], mode), label, cfg);
              },
              {random_uniform(view.input_shape(), 0.0, 1.0, rng)});
        }));
  }
  return results;
}

}  // namespace vitens
