#include "vitens/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vitens/checkpoint.hpp"
#include "vitens/cnn.hpp"
#include "vitens/config.hpp"
#include "vitens/evaluation.hpp"
#include "vitens/gradcheck.hpp"
#include "vitens/refinement.hpp"
#include "vitens/training.hpp"

namespace vitens {

using nlohmann::json;
namespace fs = std::filesystem;

std::shared_ptr<const Classifier> load_classifier(const fs::path& path) {
  const Archive a = read_archive(path);
  const std::string& kind = a.require_meta("kind", path.string());
  if (kind == "cnn") return std::make_shared<const CnnModel>(CnnModel::load(path));
  if (kind == "vit" || kind == "vit+refinement") return load_surrogate(path);
  throw std::runtime_error(path.string() + " holds a '" + kind + "' archive, not a model");
}

std::shared_ptr<const ViTView> load_surrogate(const fs::path& path) {
  if (has_refinement(path)) {
    return std::make_shared<const ViTView>(std::make_shared<const RefinedEnsemble>(load_refined(path)));
  }
  return std::make_shared<const ViTView>(std::make_shared<const ViTModel>(load_checkpoint(path)));
}

namespace {

// Every file of a run goes through one writer so concurrent pipeline stages
// never interleave partial files.
class OutputDir {
 public:
  OutputDir(fs::path root, std::ostream& log) : root_(std::move(root)), log_(log) {
    fs::create_directories(root_);
  }

  fs::path path(const std::string& name) const { return root_ / name; }

  template <class Fn>
  void write(const std::string& name, Fn&& fn) {
    std::lock_guard lock(mutex_);
    fn(root_ / name);
    log_ << "wrote " << (root_ / name).string() << '\n';
  }

  void write_text(const std::string& name, const std::string& text) {
    write(name, [&](const fs::path& p) {
      std::ofstream out(p, std::ios::binary);
      out << text;
      if (!out) throw std::runtime_error("cannot write " + p.string());
    });
  }

 private:
  fs::path root_;
  std::ostream& log_;
  std::mutex mutex_;
};

struct Common {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
};

void add_common(CLI::App& cmd, Common& c) {
  cmd.add_option("-c,--config", c.config_path, "experiment config (INI)")->check(CLI::ExistingFile);
  cmd.add_option("-o,--out", c.out_dir, "output directory (overrides output.dir)");
  cmd.add_option("--set", c.overrides, "override a config value: section.key=value")->take_all();
}

// Flags set on the command line are collected as overrides and applied after
// --set, so explicit flags win.
ExperimentConfig resolve(const Common& c, const std::vector<std::string>& flag_overrides) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
  for (const auto& o : c.overrides) apply_override(cfg, o);
  for (const auto& o : flag_overrides) apply_override(cfg, o);
  if (!c.out_dir.empty()) cfg.output_dir = c.out_dir;
  cfg.validate();
  return cfg;
}

template <class T>
void flag_override(std::vector<std::string>& out, CLI::Option* opt, const std::string& key, const T& value) {
  if (opt->count() == 0) return;
  std::ostringstream s;
  s << std::setprecision(17) << value;
  out.push_back(key + "=" + s.str());
}

std::string fmt(double v, int digits = 2) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string join(const std::vector<double>& v, int digits = 1) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i], digits);
  return s;
}

fs::path default_model(const OutputDir& dir) {
  const fs::path refined = dir.path("refined.vtfg");
  return fs::exists(refined) ? refined : dir.path("backbone.vtfg");
}

std::pair<std::string, fs::path> named_path(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) return {fs::path(spec).stem().string(), spec};
  return {spec.substr(0, eq), spec.substr(eq + 1)};
}

// ---------------------------------------------------------------- commands

int cmd_dataset_gen(const ExperimentConfig& cfg, bool idx, std::ostream& out) {
  OutputDir dir(cfg.output_dir, out);
  const DatasetSplits data = load_datasets(cfg);
  Archive a;
  a.set_meta("kind", "dataset");
  a.set_meta("provenance", data.train.provenance);
  a.set_meta("num_classes", std::to_string(data.train.num_classes));
  for (const Dataset* d : {&data.train, &data.val}) {
    a.add(d->split + "/images", d->images);
    a.add(d->split + "/labels", Array({d->size()}, std::vector<double>(d->labels.begin(), d->labels.end())));
  }
  dir.write("dataset.vtfg", [&](const fs::path& p) { write_archive(p, a); });
  if (idx) {
    // IDX holds one 8-bit plane per image; colour images are averaged.
    for (const Dataset* d : {&data.train, &data.val}) {
      const Shape s = d->image_shape();
      const std::size_t c = s[0], h = s[1], w = s[2];
      std::vector<std::uint8_t> pixels(d->size() * h * w), labels(d->size());
      for (std::size_t n = 0; n < d->size(); ++n) {
        labels[n] = static_cast<std::uint8_t>(d->labels[n]);
        for (std::size_t i = 0; i < h * w; ++i) {
          double v = 0.0;
          for (std::size_t ch = 0; ch < c; ++ch) v += d->images[(n * c + ch) * h * w + i];
          pixels[n * h * w + i] = static_cast<std::uint8_t>(std::lround(255.0 * v / static_cast<double>(c)));
        }
      }
      const std::string stem = d->split + "-";
      dir.write(stem + "images-idx3-ubyte", [&](const fs::path& p) {
        write_idx(p, dir.path(stem + "labels-idx1-ubyte"), pixels, d->size(), h, w, labels);
      });
    }
  }
  out << "train " << data.train.size() << " val " << data.val.size() << " classes " << data.train.num_classes
      << " (" << data.train.provenance << ")\n";
  return 0;
}

json report_json(const TrainReport& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"train_accuracy", e.train_accuracy}});
  }
  return {{"epochs", epochs}, {"train_accuracy", r.train_accuracy}, {"val_accuracy", r.val_accuracy}};
}

int cmd_train_backbone(const ExperimentConfig& cfg, const std::string& arch, std::string name, std::ostream& out) {
  OutputDir dir(cfg.output_dir, out);
  const DatasetSplits data = load_datasets(cfg);
  TrainOptions opt;
  opt.epochs = cfg.train.epochs;
  opt.batch_size = cfg.train.batch_size;
  opt.learning_rate = cfg.train.learning_rate;
  opt.weight_decay = cfg.train.weight_decay;
  opt.warmup_fraction = cfg.train.warmup_fraction;
  opt.log = [&](const std::string& line) { out << line << std::endl; };
  const auto t0 = std::chrono::steady_clock::now();
  json report;
  if (arch == "cnn") {
    if (name.empty()) name = "cnn.vtfg";
    opt.seed = cfg.cnn_seed;
    CnnModel model({cfg.model.image_size, cfg.model.channels, cfg.cnn_widths, cfg.model.num_classes}, cfg.cnn_seed);
    report = report_json(fit_classifier(model, data.train, data.val, opt));
    dir.write(name, [&](const fs::path& p) { model.save(p); });
  } else {
    if (name.empty()) name = "backbone.vtfg";
    opt.seed = cfg.model_seed;
    const TrainedViT trained = train_backbone(cfg.model, data.train, data.val, opt);
    report = report_json(trained.report);
    report["parameter_hash"] = parameter_hash(trained.model);
    report["val_block_accuracy"] = per_block_accuracy(ViTView(std::make_shared<const ViTModel>(trained.model)),
                                                      data.val);
    dir.write(name, [&](const fs::path& p) { save_checkpoint(trained.model, p); });
  }
  report["arch"] = arch;
  report["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  dir.write_text(fs::path(name).stem().string() + ".json", report.dump(2) + "\n");
  dir.write_text(fs::path(name).stem().string() + ".ini", serialize_config(cfg));
  out << "val accuracy " << fmt(report["val_accuracy"].get<double>()) << "%\n";
  return 0;
}

int cmd_train_trm(const ExperimentConfig& cfg, std::string backbone_path, std::string name, std::ostream& out) {
  OutputDir dir(cfg.output_dir, out);
  if (backbone_path.empty()) backbone_path = dir.path("backbone.vtfg").string();
  if (name.empty()) name = "refined.vtfg";
  const DatasetSplits data = load_datasets(cfg);
  auto backbone = std::make_shared<const ViTModel>(load_checkpoint(backbone_path, cfg.model));
  RefinementOptions opt;
  opt.learning_rate = cfg.refinement.learning_rate;
  opt.momentum = cfg.refinement.momentum;
  opt.batch_size = cfg.refinement.batch_size;
  opt.epochs = cfg.refinement.epochs;
  opt.seed = cfg.refinement.seed;
  opt.log = [&](const std::string& line) { out << line << std::endl; };
  RefinementReport rr;
  auto ensemble = std::make_shared<const RefinedEnsemble>(train_refinement(*backbone, data.train, opt, &rr));
  const ViTView view(ensemble);
  const auto before = per_block_accuracy(view, data.val, ObjectiveMode::ensemble);
  const auto after = per_block_accuracy(view, data.val, ObjectiveMode::refined);
  dir.write(name, [&](const fs::path& p) { save_refined(*ensemble, p); });
  json report{{"steps", rr.steps},
              {"mean_loss", rr.mean_loss},
              {"backbone", backbone_path},
              {"backbone_hash", backbone_hash(*ensemble)},
              {"val_block_accuracy", before},
              {"val_refined_block_accuracy", after}};
  dir.write_text(fs::path(name).stem().string() + ".json", report.dump(2) + "\n");
  out << "per-block val accuracy  E: " << join(before) << "\n                       RE: " << join(after) << '\n';
  return 0;
}

int cmd_attack(const ExperimentConfig& cfg, std::string model_path, std::size_t samples, std::uint64_t seed,
               std::ostream& out) {
  OutputDir dir(cfg.output_dir, out);
  if (model_path.empty()) model_path = default_model(dir).string();
  const auto view = load_surrogate(model_path);
  const DatasetSplits data = load_datasets(cfg);
  const Dataset& val = data.val;
  std::vector<std::size_t> idx(std::min(samples, val.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const Dataset pool = val.subset(idx);

  const AttackConfig ac = cfg.attack_config(seed);
  const auto batch = run_attack(cfg.attack.method, *view, pool.images, ac);
  const auto clean = predict(*view, batch.clean);
  const auto adv = predict(*view, batch.adversarial);
  const auto blockwise = blockwise_fool_rate(*view, batch.clean, batch.adversarial);
  double max_delta = 0.0;
  for (std::size_t i = 0; i < batch.clean.numel(); ++i) {
    max_delta = std::max(max_delta, std::abs(batch.adversarial[i] - batch.clean[i]));
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) correct += clean[i] == pool.labels[i];

  const std::string stem = "adv_" + to_string(cfg.attack.method) + "_" + to_string(cfg.attack.variant);
  dir.write(stem + ".vtfg", [&](const fs::path& p) { batch.save(p); });
  json metrics{{"model", model_path},
               {"method", to_string(cfg.attack.method)},
               {"variant", to_string(cfg.attack.variant)},
               {"epsilon_255", cfg.attack.epsilon},
               {"samples", pool.size()},
               {"clean_accuracy", 100.0 * static_cast<double>(correct) / static_cast<double>(pool.size())},
               {"whitebox_fool_rate", fool_rate(clean, adv)},
               {"blockwise_fool_rate", blockwise},
               {"max_abs_perturbation", max_delta}};
  dir.write_text(stem + ".metrics.json", metrics.dump(2) + "\n");
  out << to_string(cfg.attack.method) << "^" << to_string(cfg.attack.variant) << " eps " << cfg.attack.epsilon
      << "/255 on " << pool.size() << " samples: white-box fool rate " << fmt(fool_rate(clean, adv))
      << "%\nper-block fool rate: " << join(blockwise) << '\n';
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, std::vector<std::string> models, const std::string& adv_path,
                 std::ostream& out) {
  OutputDir dir(cfg.output_dir, out);
  if (models.empty()) models.push_back(default_model(dir).string());
  const DatasetSplits data = load_datasets(cfg);
  std::optional<AdversarialBatch> batch;
  if (!adv_path.empty()) batch = AdversarialBatch::load(adv_path);
  json report = json::array();
  for (const auto& spec : models) {
    const auto [name, path] = named_path(spec);
    const auto model = load_classifier(path);
    json entry{{"name", name}, {"path", path.string()}, {"val_accuracy", accuracy(*model, data.val)}};
    out << name << ": val accuracy " << fmt(entry["val_accuracy"].get<double>()) << "%\n";
    if (const auto* view = dynamic_cast<const ViTView*>(model.get())) {
      entry["block_accuracy"] = per_block_accuracy(*view, data.val);
      out << "  per-block E:  " << join(entry["block_accuracy"].get<std::vector<double>>()) << '\n';
      if (view->supports(ObjectiveMode::refined)) {
        entry["refined_block_accuracy"] = per_block_accuracy(*view, data.val, ObjectiveMode::refined);
        out << "  per-block RE: " << join(entry["refined_block_accuracy"].get<std::vector<double>>()) << '\n';
      }
    }
    if (batch) {
      const double rate = fool_rate(predict(*model, batch->clean), predict(*model, batch->adversarial));
      entry["fool_rate"] = rate;
      out << "  fool rate on " << adv_path << ": " << fmt(rate) << "%\n";
    }
    report.push_back(entry);
  }
  dir.write_text("evaluate.json", report.dump(2) + "\n");
  return 0;
}

int cmd_transfer(const ExperimentConfig& cfg, std::vector<std::string> surrogate_specs,
                 std::vector<std::string> target_specs, std::ostream& out) {
  OutputDir dir(cfg.output_dir, out);
  if (surrogate_specs.empty()) surrogate_specs.push_back("vit=" + default_model(dir).string());
  if (target_specs.empty()) {
    for (const char* n : {"cnn", "heldout"}) {
      if (fs::exists(dir.path(std::string(n) + ".vtfg"))) {
        target_specs.push_back(std::string(n) + "=" + dir.path(std::string(n) + ".vtfg").string());
      }
    }
    if (target_specs.empty()) throw std::invalid_argument("transfer-matrix: no --target given and none in output dir");
  }
  std::vector<NamedSurrogate> surrogates;
  for (const auto& s : surrogate_specs) {
    const auto [name, path] = named_path(s);
    surrogates.push_back({name, load_surrogate(path)});
  }
  std::vector<NamedTarget> targets;
  for (const auto& s : target_specs) {
    const auto [name, path] = named_path(s);
    targets.push_back({name, load_classifier(path)});
  }
  const DatasetSplits data = load_datasets(cfg);
  BenchmarkOptions opt;
  opt.attacks = cfg.benchmark.attacks;
  opt.attack = cfg.attack_config(0);
  opt.seeds = cfg.benchmark.seeds;
  opt.samples_per_seed = cfg.benchmark.samples_per_seed;
  opt.log = [&](const std::string& line) { out << line << std::endl; };
  if (std::none_of(surrogates.begin(), surrogates.end(),
                   [](const auto& s) { return s.view->supports(ObjectiveMode::refined); })) {
    opt.variants = {ObjectiveMode::baseline, ObjectiveMode::ensemble};
  }
  const TransferReport report = run_transfer_benchmark(surrogates, targets, data.val, opt);
  dir.write_text("transfer.csv", report.to_csv());
  dir.write_text("transfer.json", report.to_text());

  out << "mean fool rate (%) over " << opt.seeds.size() << " seeds\n";
  for (const auto& s : surrogates) {
    for (AttackMethod m : opt.attacks) {
      for (ObjectiveMode v : opt.variants) {
        if (!s.view->supports(v)) continue;
        out << "  " << s.name << " " << to_string(m) << "^" << to_string(v) << ":";
        for (const auto& t : targets) {
          out << "  " << t.name << " " << fmt(report.mean(s.name, to_string(m), to_string(v), t.name));
        }
        out << "  (white-box " << fmt(report.whitebox_mean(s.name, to_string(m), to_string(v))) << ")\n";
      }
    }
  }
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t instances, double tolerance, std::ostream& out) {
  auto results = check_kernel_gradients(seed, instances, tolerance);
  const auto model = check_model_gradients(seed, instances, tolerance);
  results.insert(results.end(), model.begin(), model.end());
  bool ok = true;
  for (const auto& r : results) {
    out << (r.passed ? "ok   " : "FAIL ") << std::left << std::setw(24) << r.name << " max rel err "
        << std::scientific << std::setprecision(2) << r.relative_error << std::defaultfloat << " over "
        << r.instances << " instances\n";
    ok = ok && r.passed;
  }
  out << (ok ? "all gradients match" : "gradient check failed") << " (tolerance " << tolerance << ")\n";
  return ok ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-ensemble ViT adversarial transfer toolkit"};
  app.name("vitens");
  app.require_subcommand(1);

  Common common;
  std::vector<std::string> flags;

  auto* gen = app.add_subcommand("dataset-gen", "generate (or ingest) the configured dataset and store it");
  add_common(*gen, common);
  std::uint64_t data_seed = 0;
  std::size_t n_per_class = 0;
  bool write_idx_files = false;
  auto* gen_seed = gen->add_option("--seed", data_seed, "data seed");
  auto* gen_n = gen->add_option("--n-per-class", n_per_class, "samples per class");
  gen->add_flag("--idx", write_idx_files, "also write grayscale IDX files");

  auto* train = app.add_subcommand("train-backbone", "train the ViT backbone or the CNN target");
  add_common(*train, common);
  std::string arch = "vit", train_name;
  std::size_t epochs = 0;
  std::uint64_t model_seed = 0;
  double lr = 0.0;
  train->add_option("--arch", arch, "vit or cnn")->check(CLI::IsMember({"vit", "cnn"}));
  auto* train_epochs = train->add_option("--epochs", epochs);
  auto* train_seed = train->add_option("--seed", model_seed, "initialization seed");
  auto* train_lr = train->add_option("--lr", lr);
  train->add_option("--name", train_name, "checkpoint file name inside the output directory");

  auto* trm = app.add_subcommand("train-trm", "train token refinement modules on a frozen backbone");
  add_common(*trm, common);
  std::string trm_backbone, trm_name;
  std::uint64_t trm_seed_value = 0;
  std::size_t trm_epochs_value = 0;
  double trm_lr_value = 0.0;
  trm->add_option("--backbone", trm_backbone, "backbone checkpoint (default <out>/backbone.vtfg)");
  auto* trm_seed = trm->add_option("--seed", trm_seed_value);
  auto* trm_epochs = trm->add_option("--epochs", trm_epochs_value);
  auto* trm_lr = trm->add_option("--lr", trm_lr_value);
  trm->add_option("--name", trm_name, "output checkpoint name (default refined.vtfg)");

  auto* attack = app.add_subcommand("attack", "attack validation images with a surrogate");
  add_common(*attack, common);
  std::string attack_model, method, variant, blocks;
  double eps = 0.0;
  std::size_t steps = 0, samples = 100;
  std::uint64_t attack_seed = 0;
  attack->add_option("--model", attack_model, "surrogate checkpoint (default <out>/refined.vtfg or backbone.vtfg)");
  auto* attack_method = attack->add_option("--method", method, "fgsm, pgd, mim or dim");
  auto* attack_variant = attack->add_option("--variant", variant, "base, e or re");
  auto* attack_eps = attack->add_option("--eps", eps, "budget in 0-255 units");
  auto* attack_steps = attack->add_option("--steps", steps);
  auto* attack_blocks = attack->add_option("--blocks", blocks, "zero-based block list or 'all'");
  attack->add_option("--samples", samples, "number of validation images")->check(CLI::PositiveNumber);
  attack->add_option("--seed", attack_seed, "attack seed");

  auto* eval = app.add_subcommand("evaluate", "clean, per-block and adversarial accuracy of checkpoints");
  add_common(*eval, common);
  std::vector<std::string> eval_models;
  std::string eval_adv;
  eval->add_option("--model", eval_models, "[name=]checkpoint, repeatable");
  eval->add_option("--adv", eval_adv, "adversarial batch to measure fool rates on")->check(CLI::ExistingFile);

  auto* transfer = app.add_subcommand("transfer-matrix", "black-box transfer benchmark");
  add_common(*transfer, common);
  std::vector<std::string> surrogate_specs, target_specs;
  std::size_t n_seeds = 0, per_seed = 0;
  transfer->add_option("--surrogate", surrogate_specs, "[name=]checkpoint, repeatable");
  transfer->add_option("--target", target_specs, "[name=]checkpoint, repeatable");
  auto* transfer_seeds = transfer->add_option("--seeds", n_seeds, "use seeds 0..N-1")->check(CLI::PositiveNumber);
  auto* transfer_samples =
      transfer->add_option("--samples", per_seed, "samples per seed")->check(CLI::PositiveNumber);

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  std::uint64_t grad_seed = 0;
  std::size_t instances = 20;
  double tolerance = 1e-4;
  grad->add_option("--seed", grad_seed);
  grad->add_option("--instances", instances)->check(CLI::PositiveNumber);
  grad->add_option("--tolerance", tolerance);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*grad) return cmd_gradcheck(grad_seed, instances, tolerance, out);
    if (*gen) {
      flag_override(flags, gen_seed, "data.seed", data_seed);
      flag_override(flags, gen_n, "data.n_per_class", n_per_class);
      return cmd_dataset_gen(resolve(common, flags), write_idx_files, out);
    }
    if (*train) {
      flag_override(flags, train_epochs, "train.epochs", epochs);
      flag_override(flags, train_lr, "train.learning_rate", lr);
      flag_override(flags, train_seed, arch == "cnn" ? "cnn.seed" : "model.seed", model_seed);
      return cmd_train_backbone(resolve(common, flags), arch, train_name, out);
    }
    if (*trm) {
      flag_override(flags, trm_seed, "refinement.seed", trm_seed_value);
      flag_override(flags, trm_epochs, "refinement.epochs", trm_epochs_value);
      flag_override(flags, trm_lr, "refinement.learning_rate", trm_lr_value);
      return cmd_train_trm(resolve(common, flags), trm_backbone, trm_name, out);
    }
    if (*attack) {
      flag_override(flags, attack_method, "attack.method", method);
      flag_override(flags, attack_variant, "attack.variant", variant);
      flag_override(flags, attack_eps, "attack.epsilon", eps);
      flag_override(flags, attack_steps, "attack.steps", steps);
      flag_override(flags, attack_blocks, "attack.blocks", blocks);
      return cmd_attack(resolve(common, flags), attack_model, samples, attack_seed, out);
    }
    if (*eval) return cmd_evaluate(resolve(common, flags), eval_models, eval_adv, out);
    if (*transfer) {
      if (transfer_seeds->count()) {
        std::string list;
        for (std::size_t s = 0; s < n_seeds; ++s) list += (s ? "," : "") + std::to_string(s);
        flags.push_back("benchmark.seeds=" + list);
      }
      flag_override(flags, transfer_samples, "benchmark.samples_per_seed", per_seed);
      return cmd_transfer(resolve(common, flags), surrogate_specs, target_specs, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace vitens
