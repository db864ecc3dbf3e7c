#include "vitens/attacks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "vitens/checkpoint.hpp"
#include "vitens/parallel.hpp"

namespace vitens {

std::string to_string(AttackMethod method) {
  switch (method) {
    case AttackMethod::fgsm:
      return "fgsm";
    case AttackMethod::pgd:
      return "pgd";
    case AttackMethod::mim:
      return "mim";
    case AttackMethod::dim:
      return "dim";
  }
  return "?";
}

AttackMethod parse_attack_method(const std::string& text) {
  std::string t;
  for (char c : text) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t == "fgsm") return AttackMethod::fgsm;
  if (t == "pgd") return AttackMethod::pgd;
  if (t == "mim") return AttackMethod::mim;
  if (t == "dim") return AttackMethod::dim;
  throw std::invalid_argument("unknown attack '" + text + "' (expected fgsm, pgd, mim or dim)");
}

void AttackConfig::validate(AttackMethod method) const {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("attack: epsilon must be >= 0");
  if (method != AttackMethod::fgsm) {
    if (steps == 0) throw std::invalid_argument("attack: steps must be >= 1");
    if (method == AttackMethod::pgd && !(step_size > 0.0)) {
      throw std::invalid_argument("attack: step size must be > 0");
    }
  }
  if (!(diversity_prob >= 0.0 && diversity_prob <= 1.0)) {
    throw std::invalid_argument("attack: diversity probability must lie in [0,1]");
  }
  if (!(resize_min > 0.0 && resize_min <= 1.0)) {
    throw std::invalid_argument("attack: resize_min must lie in (0,1]");
  }
  if (!(momentum >= 0.0)) throw std::invalid_argument("attack: momentum must be >= 0");
  if (block_subset && block_subset->empty()) throw std::invalid_argument("attack: empty block subset");
}

Tensor attack_loss(const std::vector<Tensor>& logits, std::size_t label, const AttackConfig& config) {
  if (logits.empty()) throw std::invalid_argument("attack_loss: no logits");
  const std::size_t y = config.target.value_or(label);
  const double sign = config.target ? -1.0 : 1.0;
  if (config.mode == ObjectiveMode::baseline) {
    return ops::scale(ops::softmax_cross_entropy(logits.back(), y), sign);
  }
  std::vector<std::size_t> members;
  if (config.block_subset) {
    if (config.block_subset->empty()) throw std::invalid_argument("attack_loss: empty block subset");
    members = *config.block_subset;
  } else {
    for (std::size_t k = 0; k < logits.size(); ++k) members.push_back(k);
  }
  Tensor total;
  for (std::size_t k : members) {
    if (k >= logits.size()) {
      throw std::invalid_argument("attack_loss: block " + std::to_string(k) + " out of range for " +
                                  std::to_string(logits.size()) + " members");
    }
    Tensor ce = ops::softmax_cross_entropy(logits[k], y);
    total = total.valid() ? ops::add(total, ce) : ce;
  }
  return ops::scale(total, sign);
}

ops::IndexMap dim_index_map(const Shape& shape, double p, double resize_min, std::mt19937_64& rng) {
  if (shape.size() != 3) throw std::invalid_argument("dim_transform: expected [C,H,W], got " + shape_to_string(shape));
  if (!std::bernoulli_distribution(p)(rng)) return nullptr;
  const double s = resize_min < 1.0 ? std::uniform_real_distribution<double>(resize_min, 1.0)(rng) : 1.0;
  const std::size_t c = shape[0], h = shape[1], w = shape[2];
  const std::size_t rh = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(static_cast<double>(h) * s)));
  const std::size_t rw = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(static_cast<double>(w) * s)));
  const std::size_t oy = std::uniform_int_distribution<std::size_t>(0, h - rh)(rng);
  const std::size_t ox = std::uniform_int_distribution<std::size_t>(0, w - rw)(rng);
  auto map = std::make_shared<std::vector<std::int64_t>>(c * h * w, -1);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = oy; y < oy + rh; ++y) {
      const std::size_t sy = (y - oy) * h / rh;
      for (std::size_t x = ox; x < ox + rw; ++x) {
        const std::size_t sx = (x - ox) * w / rw;
        (*map)[(ch * h + y) * w + x] = static_cast<std::int64_t>((ch * h + sy) * w + sx);
      }
    }
  }
  return map;
}

Tensor dim_transform(const Tensor& image, double p, std::uint64_t seed, double resize_min) {
  std::mt19937_64 rng(seed);
  auto map = dim_index_map(image.shape(), p, resize_min, rng);
  return map ? ops::gather(image, image.shape(), std::move(map)) : image;
}

void accumulate_momentum(Array& velocity, const Array& grad, double momentum) {
  if (velocity.shape != grad.shape) throw std::invalid_argument("accumulate_momentum: shape mismatch");
  double mean_abs = 0.0;
  for (double v : grad.data) mean_abs += std::abs(v);
  mean_abs /= static_cast<double>(grad.numel());
  const double inv = mean_abs > 0.0 ? 1.0 / mean_abs : 0.0;
  for (std::size_t i = 0; i < grad.numel(); ++i) velocity[i] = momentum * velocity[i] + grad[i] * inv;
}

namespace {

struct SampleResult {
  Array adversarial;
  std::vector<double> trace;
};

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

SampleResult attack_sample(AttackMethod method, const SurrogateView& model, const Array& x, std::size_t label,
                           const AttackConfig& cfg, std::mt19937_64& rng) {
  const std::size_t n = x.numel();
  Array lo(x.shape), hi(x.shape);
  for (std::size_t i = 0; i < n; ++i) {
    lo[i] = x[i] - cfg.epsilon;
    hi[i] = x[i] + cfg.epsilon;
  }
  auto project = [&](Array& v) {
    for (std::size_t i = 0; i < n; ++i) {
      const double r = std::min(std::max(v[i], 0.0), 1.0);
      v[i] = std::min(std::max(r, lo[i]), hi[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!(std::abs(v[i] - x[i]) <= cfg.epsilon + 1e-9 && v[i] >= 0.0 && v[i] <= 1.0)) {
        throw std::logic_error("attack: projection left the epsilon ball");
      }
    }
  };

  SampleResult out{x, {}};
  Tape tape;
  auto gradient = [&](const Array& at, bool diverse) {
    tape.clear();
    Tensor xv = tape.variable(at);
    Tensor input = xv;
    if (diverse) {
      if (auto map = dim_index_map(at.shape, cfg.diversity_prob, cfg.resize_min, rng)) {
        input = ops::gather(xv, at.shape, std::move(map));
      }
    }
    Tensor loss = attack_loss(model.member_logits(tape, input, cfg.mode), label, cfg);
    out.trace.push_back(loss.item());
    return tape.grad(loss, {xv})[0];
  };

  if (method == AttackMethod::fgsm) {
    const Array g = gradient(x, false);
    for (std::size_t i = 0; i < n; ++i) out.adversarial[i] = x[i] + cfg.epsilon * sign_of(g[i]);
    project(out.adversarial);
    return out;
  }

  if (method == AttackMethod::pgd) {
    for (std::size_t t = 0; t < cfg.steps; ++t) {
      const Array g = gradient(out.adversarial, false);
      for (std::size_t i = 0; i < n; ++i) out.adversarial[i] += cfg.step_size * sign_of(g[i]);
      project(out.adversarial);
    }
    return out;
  }

  const double alpha = cfg.epsilon / static_cast<double>(cfg.steps);
  Array velocity(x.shape);
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    accumulate_momentum(velocity, gradient(out.adversarial, method == AttackMethod::dim), cfg.momentum);
    for (std::size_t i = 0; i < n; ++i) out.adversarial[i] += alpha * sign_of(velocity[i]);
    project(out.adversarial);
  }
  return out;
}

}  // namespace

AdversarialBatch run_attack(AttackMethod method, const SurrogateView& model, const Array& images,
                            const AttackConfig& config, const std::vector<std::size_t>* labels) {
  config.validate(method);
  if (images.shape.size() != 4) {
    throw std::invalid_argument("attack: expected images [N,C,H,W], got " + shape_to_string(images.shape));
  }
  require_image_shape(model.input_shape(), Shape(images.shape.begin() + 1, images.shape.end()), "attack");
  if (!model.supports(config.mode)) {
    throw std::invalid_argument("attack: surrogate does not support the " + to_string(config.mode) + " objective");
  }
  if (config.target && *config.target >= model.num_classes()) {
    throw std::invalid_argument("attack: target class " + std::to_string(*config.target) + " out of range");
  }
  for (double v : images.data) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("attack: pixel outside [0,1]");
  }
  const std::size_t count = images.shape[0];
  AdversarialBatch batch;
  batch.clean = images;
  batch.adversarial = images;
  batch.method = method;
  batch.config = config;
  if (labels) {
    if (labels->size() != count) {
      throw std::invalid_argument("attack: " + std::to_string(labels->size()) + " labels for " +
                                  std::to_string(count) + " images");
    }
    for (std::size_t y : *labels) {
      if (y >= model.num_classes()) throw std::invalid_argument("attack: label out of range");
    }
    batch.labels = *labels;
  } else {
    batch.labels = predict(model, images);
  }
  batch.loss_trace.resize(count);
  parallel_for(count, [&](std::size_t i) {
    std::seed_seq seq{config.seed, static_cast<std::uint64_t>(i)};
    std::mt19937_64 rng(seq);
    auto r = attack_sample(method, model, take_leading(images, i), batch.labels[i], config, rng);
    put_leading(batch.adversarial, i, r.adversarial);
    batch.loss_trace[i] = std::move(r.trace);
  });
  return batch;
}

AdversarialBatch fgsm(const SurrogateView& model, const Array& images, const AttackConfig& config,
                      const std::vector<std::size_t>* labels) {
  return run_attack(AttackMethod::fgsm, model, images, config, labels);
}

AdversarialBatch pgd(const SurrogateView& model, const Array& images, const AttackConfig& config,
                     const std::vector<std::size_t>* labels) {
  return run_attack(AttackMethod::pgd, model, images, config, labels);
}

AdversarialBatch mim(const SurrogateView& model, const Array& images, const AttackConfig& config,
                     const std::vector<std::size_t>* labels) {
  return run_attack(AttackMethod::mim, model, images, config, labels);
}

AdversarialBatch dim(const SurrogateView& model, const Array& images, const AttackConfig& config,
                     const std::vector<std::size_t>* labels) {
  return run_attack(AttackMethod::dim, model, images, config, labels);
}

namespace {

nlohmann::json config_to_json(const AttackConfig& c) {
  nlohmann::json j;
  j["epsilon"] = c.epsilon;
  j["steps"] = c.steps;
  j["step_size"] = c.step_size;
  j["momentum"] = c.momentum;
  j["diversity_prob"] = c.diversity_prob;
  j["resize_min"] = c.resize_min;
  j["target"] = c.target ? nlohmann::json(*c.target) : nlohmann::json(nullptr);
  j["mode"] = to_string(c.mode);
  j["block_subset"] = c.block_subset ? nlohmann::json(*c.block_subset) : nlohmann::json(nullptr);
  j["seed"] = c.seed;
  return j;
}

AttackConfig config_from_json(const nlohmann::json& j) {
  AttackConfig c;
  c.epsilon = j.at("epsilon").get<double>();
  c.steps = j.at("steps").get<std::size_t>();
  c.step_size = j.at("step_size").get<double>();
  c.momentum = j.at("momentum").get<double>();
  c.diversity_prob = j.at("diversity_prob").get<double>();
  c.resize_min = j.at("resize_min").get<double>();
  if (!j.at("target").is_null()) c.target = j.at("target").get<std::size_t>();
  c.mode = parse_objective_mode(j.at("mode").get<std::string>());
  if (!j.at("block_subset").is_null()) c.block_subset = j.at("block_subset").get<std::vector<std::size_t>>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::filesystem::path meta_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

}  // namespace

void AdversarialBatch::save(const std::filesystem::path& path) const {
  Archive a;
  a.set_meta("kind", "adversarial-batch");
  a.add("clean", clean);
  a.add("adversarial", adversarial);
  Array lab({labels.size()});
  for (std::size_t i = 0; i < labels.size(); ++i) lab[i] = static_cast<double>(labels[i]);
  a.add("labels", lab);
  write_archive(path, a);

  double max_diff = 0.0;
  for (std::size_t i = 0; i < clean.numel(); ++i) max_diff = std::max(max_diff, std::abs(adversarial[i] - clean[i]));
  nlohmann::json j;
  j["method"] = to_string(method);
  j["config"] = config_to_json(config);
  j["samples"] = labels.size();
  j["max_abs_perturbation"] = max_diff;
  j["loss_trace"] = loss_trace;
  std::ofstream out(meta_path(path));
  if (!out) throw std::runtime_error("cannot write " + meta_path(path).string());
  out << j.dump(2) << '\n';
}

AdversarialBatch AdversarialBatch::load(const std::filesystem::path& path) {
  const Archive a = read_archive(path);
  const std::string origin = "adversarial batch " + path.string();
  auto need = [&](const char* name) -> const Array& {
    const Array* arr = a.find(name);
    if (!arr) throw std::runtime_error(origin + ": missing array '" + name + "'");
    return *arr;
  };
  AdversarialBatch b;
  b.clean = need("clean");
  b.adversarial = need("adversarial");
  for (double v : need("labels").data) b.labels.push_back(static_cast<std::size_t>(v));
  std::ifstream in(meta_path(path));
  if (!in) throw std::runtime_error(origin + ": missing metadata file " + meta_path(path).string());
  try {
    const auto j = nlohmann::json::parse(in);
    b.method = parse_attack_method(j.at("method").get<std::string>());
    b.config = config_from_json(j.at("config"));
    b.loss_trace = j.at("loss_trace").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(origin + ": bad metadata: " + e.what());
  }
  return b;
}

}  // namespace vitens
