#include "vitens/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "vitens/parallel.hpp"

namespace vitens {

double fool_rate(const std::vector<std::size_t>& clean, const std::vector<std::size_t>& adversarial) {
  if (clean.size() != adversarial.size()) {
    throw std::invalid_argument("fool_rate: " + std::to_string(clean.size()) + " clean vs " +
                                std::to_string(adversarial.size()) + " adversarial predictions");
  }
  if (clean.empty()) throw std::invalid_argument("fool_rate: empty prediction lists");
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) flipped += clean[i] != adversarial[i];
  return 100.0 * static_cast<double>(flipped) / static_cast<double>(clean.size());
}

std::vector<std::vector<std::size_t>> member_predictions(const SurrogateView& model, const Array& images,
                                                         ObjectiveMode mode) {
  if (images.shape.size() != 4) {
    throw std::invalid_argument("member_predictions: expected [N,C,H,W], got " + shape_to_string(images.shape));
  }
  if (mode == ObjectiveMode::baseline) mode = ObjectiveMode::ensemble;
  std::vector<std::vector<std::size_t>> out(images.shape[0]);
  parallel_for(out.size(), [&](std::size_t i) {
    Tape tape;
    for (const Tensor& l : model.member_logits(tape, tape.constant(take_leading(images, i)), mode)) {
      out[i].push_back(argmax(l.value()));
    }
  });
  return out;
}

std::vector<double> per_block_accuracy(const SurrogateView& model, const Dataset& data, ObjectiveMode mode) {
  if (data.empty()) throw std::invalid_argument("per_block_accuracy: empty dataset");
  const auto preds = member_predictions(model, data.images, mode);
  std::vector<double> acc(model.num_blocks(), 0.0);
  for (std::size_t i = 0; i < preds.size(); ++i)
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += preds[i][k] == data.labels[i];
  for (double& a : acc) a *= 100.0 / static_cast<double>(preds.size());
  return acc;
}

std::vector<double> blockwise_fool_rate(const SurrogateView& model, const Array& clean, const Array& adversarial) {
  if (clean.shape != adversarial.shape) {
    throw std::invalid_argument("blockwise_fool_rate: clean " + shape_to_string(clean.shape) +
                                " vs adversarial " + shape_to_string(adversarial.shape));
  }
  const auto before = member_predictions(model, clean, ObjectiveMode::ensemble);
  const auto after = member_predictions(model, adversarial, ObjectiveMode::ensemble);
  std::vector<double> rates;
  for (std::size_t k = 0; k < model.num_blocks(); ++k) {
    std::vector<std::size_t> a, b;
    for (std::size_t i = 0; i < before.size(); ++i) {
      a.push_back(before[i][k]);
      b.push_back(after[i][k]);
    }
    rates.push_back(fool_rate(a, b));
  }
  return rates;
}

std::vector<double> blockwise_fool_rate(const SurrogateView& model, AttackMethod method,
                                        const AttackConfig& config, const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("blockwise_fool_rate: empty dataset");
  const auto batch = run_attack(method, model, data.images, config);
  return blockwise_fool_rate(model, batch.clean, batch.adversarial);
}

double TransferReport::mean(const std::string& surrogate, const std::string& attack, const std::string& variant,
                            const std::string& target) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : cells) {
    if (c.surrogate == surrogate && c.attack == attack && c.variant == variant && c.target == target) {
      sum += c.fool_rate;
      ++n;
    }
  }
  if (n == 0) {
    throw std::invalid_argument("TransferReport: no cell for " + surrogate + "/" + attack + "/" + variant + "/" +
                                target);
  }
  return sum / static_cast<double>(n);
}

double TransferReport::whitebox_mean(const std::string& surrogate, const std::string& attack,
                                     const std::string& variant) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : whitebox) {
    if (c.surrogate == surrogate && c.attack == attack && c.variant == variant) {
      sum += c.fool_rate;
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("TransferReport: no white-box cell for " + surrogate + "/" + attack);
  return sum / static_cast<double>(n);
}

std::string TransferReport::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "surrogate,attack,variant,target,seed,n_samples,fool_rate\n";
  for (const auto& c : cells) {
    out << c.surrogate << ',' << c.attack << ',' << c.variant << ',' << c.target << ',' << c.seed << ','
        << c.n_samples << ',' << c.fool_rate << '\n';
  }
  return out.str();
}

std::string TransferReport::to_text() const {
  nlohmann::json j;
  j["seeds"] = seeds;
  j["cells"] = nlohmann::json::array();
  for (const auto& c : cells) {
    j["cells"].push_back({{"surrogate", c.surrogate},
                          {"attack", c.attack},
                          {"variant", c.variant},
                          {"target", c.target},
                          {"seed", c.seed},
                          {"n_samples", c.n_samples},
                          {"fool_rate", c.fool_rate}});
  }
  j["whitebox"] = nlohmann::json::array();
  for (const auto& c : whitebox) {
    j["whitebox"].push_back({{"surrogate", c.surrogate},
                             {"attack", c.attack},
                             {"variant", c.variant},
                             {"seed", c.seed},
                             {"n_samples", c.n_samples},
                             {"fool_rate", c.fool_rate},
                             {"blockwise_fool_rate", c.blockwise}});
  }
  for (const auto& [name, acc] : block_accuracy) j["block_accuracy"][name] = acc;
  for (const auto& [name, acc] : refined_block_accuracy) j["refined_block_accuracy"][name] = acc;
  return j.dump(2) + "\n";
}

TransferReport run_transfer_benchmark(const std::vector<NamedSurrogate>& surrogates,
                                      const std::vector<NamedTarget>& targets, const Dataset& data,
                                      const BenchmarkOptions& options) {
  if (surrogates.empty()) throw std::invalid_argument("transfer benchmark: no surrogate");
  if (targets.empty()) throw std::invalid_argument("transfer benchmark: no target");
  if (data.empty()) throw std::invalid_argument("transfer benchmark: empty dataset");
  if (options.seeds.empty()) throw std::invalid_argument("transfer benchmark: no seeds");
  if (options.samples_per_seed == 0) throw std::invalid_argument("transfer benchmark: samples_per_seed is 0");
  for (const auto& s : surrogates) {
    if (!s.view) throw std::invalid_argument("transfer benchmark: surrogate '" + s.name + "' is null");
    for (ObjectiveMode v : options.variants) {
      if (!s.view->supports(v)) {
        throw std::invalid_argument("transfer benchmark: surrogate '" + s.name + "' lacks the " + to_string(v) +
                                    " objective");
      }
    }
    for (const auto& t : targets) {
      const Classifier* backbone = &s.view->model();
      if (t.name == s.name || t.model.get() == backbone || t.model.get() == s.view.get()) {
        throw std::invalid_argument("transfer benchmark: target '" + t.name + "' is the surrogate '" + s.name +
                                    "'; white-box rates are reported separately");
      }
    }
  }
  const Classifier& reference = options.reference ? *options.reference : *targets.front().model;
  auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };

  TransferReport report;
  report.seeds = options.seeds;
  const auto reference_preds = predict(reference, data.images);
  for (const auto& s : surrogates) {
    const ViTView& view = *s.view;
    const auto own = predict(view, data.images);
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (own[i] == data.labels[i] && reference_preds[i] == data.labels[i]) pool.push_back(i);
    }
    if (pool.empty()) throw std::runtime_error("transfer benchmark: no sample is classified correctly by both '" +
                                               s.name + "' and the reference");
    const Dataset pooled = data.subset(pool);
    log(s.name + ": evaluation pool " + std::to_string(pool.size()) + " of " + std::to_string(data.size()));
    report.block_accuracy.emplace_back(s.name, per_block_accuracy(view, pooled, ObjectiveMode::ensemble));
    if (view.supports(ObjectiveMode::refined)) {
      report.refined_block_accuracy.emplace_back(s.name, per_block_accuracy(view, pooled, ObjectiveMode::refined));
    }

    for (std::uint64_t seed : options.seeds) {
      std::vector<std::size_t> chosen(pool.size());
      std::iota(chosen.begin(), chosen.end(), 0);
      std::mt19937_64 rng(seed);
      std::shuffle(chosen.begin(), chosen.end(), rng);
      chosen.resize(std::min(chosen.size(), options.samples_per_seed));
      std::sort(chosen.begin(), chosen.end());
      const Dataset subset = pooled.subset(chosen);

      std::vector<std::vector<std::size_t>> clean_target;
      for (const auto& t : targets) clean_target.push_back(predict(*t.model, subset.images));

      for (AttackMethod method : options.attacks) {
        for (ObjectiveMode variant : options.variants) {
          AttackConfig cfg = options.attack;
          cfg.mode = variant;
          cfg.seed = seed;
          const auto batch = run_attack(method, view, subset.images, cfg, &subset.labels);
          WhiteboxCell wb{s.name, to_string(method), to_string(variant), seed, subset.size(),
                          fool_rate(batch.labels, predict(view, batch.adversarial)),
                          blockwise_fool_rate(view, batch.clean, batch.adversarial)};
          report.whitebox.push_back(wb);
          for (std::size_t t = 0; t < targets.size(); ++t) {
            const double rate = fool_rate(clean_target[t], predict(*targets[t].model, batch.adversarial));
            report.cells.push_back({s.name, to_string(method), to_string(variant), targets[t].name, seed,
                                    subset.size(), rate});
            log(s.name + " " + to_string(method) + "/" + to_string(variant) + " -> " + targets[t].name +
                " seed " + std::to_string(seed) + ": " + std::to_string(rate));
          }
        }
      }
    }
  }
  return report;
}

}  // namespace vitens
