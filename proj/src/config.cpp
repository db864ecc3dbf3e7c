#include "vitens/config.hpp"

#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace vitens {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  std::size_t used = 0;
  if (v.empty() || v[0] == '-') throw std::invalid_argument("expected a non-negative integer");
  const auto r = std::stoull(v, &used);
  if (used != v.size()) throw std::invalid_argument("expected a non-negative integer");
  return r;
}

double to_double(const std::string& v) {
  std::size_t used = 0;
  const double r = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("expected a number");
  return r;
}

template <class T>
std::string join(const std::vector<T>& items, const std::function<std::string(const T&)>& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + fmt(items[i]);
  return out;
}

std::string num(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, std::map<std::string, Setter>>& setters() {
  static const std::map<std::string, std::map<std::string, Setter>> table = {
      {"data",
       {{"source", [](auto& c, auto& v) { c.data.source = v; }},
        {"seed", [](auto& c, auto& v) { c.data.seed = to_u64(v); }},
        {"n_per_class", [](auto& c, auto& v) { c.data.n_per_class = to_u64(v); }},
        {"train_images", [](auto& c, auto& v) { c.data.train_images = v; }},
        {"train_labels", [](auto& c, auto& v) { c.data.train_labels = v; }},
        {"val_images", [](auto& c, auto& v) { c.data.val_images = v; }},
        {"val_labels", [](auto& c, auto& v) { c.data.val_labels = v; }}}},
      {"model",
       {{"image_size", [](auto& c, auto& v) { c.model.image_size = to_u64(v); }},
        {"patch_size", [](auto& c, auto& v) { c.model.patch_size = to_u64(v); }},
        {"channels", [](auto& c, auto& v) { c.model.channels = to_u64(v); }},
        {"embed_dim", [](auto& c, auto& v) { c.model.embed_dim = to_u64(v); }},
        {"num_blocks", [](auto& c, auto& v) { c.model.num_blocks = to_u64(v); }},
        {"num_heads", [](auto& c, auto& v) { c.model.num_heads = to_u64(v); }},
        {"mlp_ratio", [](auto& c, auto& v) { c.model.mlp_ratio = to_u64(v); }},
        {"num_classes", [](auto& c, auto& v) { c.model.num_classes = to_u64(v); }},
        {"seed", [](auto& c, auto& v) { c.model_seed = to_u64(v); }}}},
      {"train",
       {{"epochs", [](auto& c, auto& v) { c.train.epochs = to_u64(v); }},
        {"batch_size", [](auto& c, auto& v) { c.train.batch_size = to_u64(v); }},
        {"learning_rate", [](auto& c, auto& v) { c.train.learning_rate = to_double(v); }},
        {"weight_decay", [](auto& c, auto& v) { c.train.weight_decay = to_double(v); }},
        {"warmup_fraction", [](auto& c, auto& v) { c.train.warmup_fraction = to_double(v); }}}},
      {"refinement",
       {{"learning_rate", [](auto& c, auto& v) { c.refinement.learning_rate = to_double(v); }},
        {"momentum", [](auto& c, auto& v) { c.refinement.momentum = to_double(v); }},
        {"batch_size", [](auto& c, auto& v) { c.refinement.batch_size = to_u64(v); }},
        {"epochs", [](auto& c, auto& v) { c.refinement.epochs = to_u64(v); }},
        {"seed", [](auto& c, auto& v) { c.refinement.seed = to_u64(v); }}}},
      {"cnn",
       {{"widths",
         [](auto& c, auto& v) {
           c.cnn_widths.clear();
           for (const auto& w : split_list(v)) c.cnn_widths.push_back(to_u64(w));
         }},
        {"seed", [](auto& c, auto& v) { c.cnn_seed = to_u64(v); }}}},
      {"attack",
       {{"method", [](auto& c, auto& v) { c.attack.method = parse_attack_method(v); }},
        {"variant", [](auto& c, auto& v) { c.attack.variant = parse_objective_mode(v); }},
        {"epsilon", [](auto& c, auto& v) { c.attack.epsilon = to_double(v); }},
        {"step_size", [](auto& c, auto& v) { c.attack.step_size = to_double(v); }},
        {"steps", [](auto& c, auto& v) { c.attack.steps = to_u64(v); }},
        {"momentum", [](auto& c, auto& v) { c.attack.momentum = to_double(v); }},
        {"diversity_prob", [](auto& c, auto& v) { c.attack.diversity_prob = to_double(v); }},
        {"resize_min", [](auto& c, auto& v) { c.attack.resize_min = to_double(v); }},
        {"target",
         [](auto& c, auto& v) {
           if (v == "none") {
             c.attack.target.reset();
           } else {
             c.attack.target = to_u64(v);
           }
         }},
        {"blocks",
         [](auto& c, auto& v) {
           if (v == "all") {
             c.attack.blocks.reset();
             return;
           }
           std::vector<std::size_t> blocks;
           for (const auto& b : split_list(v)) blocks.push_back(to_u64(b));
           c.attack.blocks = blocks;
         }}}},
      {"benchmark",
       {{"seeds",
         [](auto& c, auto& v) {
           c.benchmark.seeds.clear();
           for (const auto& s : split_list(v)) c.benchmark.seeds.push_back(to_u64(s));
         }},
        {"samples_per_seed", [](auto& c, auto& v) { c.benchmark.samples_per_seed = to_u64(v); }},
        {"attacks",
         [](auto& c, auto& v) {
           c.benchmark.attacks.clear();
           for (const auto& a : split_list(v)) c.benchmark.attacks.push_back(parse_attack_method(a));
         }}}},
      {"output", {{"dir", [](auto& c, auto& v) { c.output_dir = v; }}}},
  };
  return table;
}

void set_value(ExperimentConfig& config, const std::string& section, const std::string& key,
               const std::string& value) {
  const auto& table = setters();
  const auto sit = table.find(section);
  if (sit == table.end()) throw std::invalid_argument("config: unknown section [" + section + "]");
  const auto kit = sit->second.find(key);
  if (kit == sit->second.end()) throw std::invalid_argument("config: unknown key '" + section + "." + key + "'");
  try {
    kit->second(config, trim(value));
  } catch (const std::exception& e) {
    throw std::invalid_argument("config: bad value '" + value + "' for " + section + "." + key + ": " + e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
  if (data.source != "synthetic" && data.source != "idx") fail("data.source must be 'synthetic' or 'idx'");
  if (data.source == "synthetic" && data.n_per_class < 2) fail("data.n_per_class must be >= 2");
  if (data.source == "idx" && (data.train_images.empty() || data.train_labels.empty())) {
    fail("data.source = idx needs train_images and train_labels");
  }
  if (data.val_images.empty() != data.val_labels.empty()) fail("data.val_images and data.val_labels go together");
  model.validate();
  if (train.batch_size == 0) fail("train.batch_size must be >= 1");
  if (!(train.learning_rate > 0.0)) fail("train.learning_rate must be > 0");
  if (!(train.warmup_fraction >= 0.0 && train.warmup_fraction < 1.0)) fail("train.warmup_fraction must lie in [0,1)");
  if (!(refinement.learning_rate > 0.0)) fail("refinement.learning_rate must be > 0");
  if (refinement.batch_size == 0 || refinement.epochs == 0) fail("refinement batch_size and epochs must be >= 1");
  if (!(attack.epsilon >= 0.0 && attack.epsilon <= 255.0)) fail("attack.epsilon must lie in [0,255]");
  if (attack.target && *attack.target >= model.num_classes) fail("attack.target out of range");
  if (attack.blocks) {
    if (attack.blocks->empty()) fail("attack.blocks is empty");
    for (std::size_t b : *attack.blocks) {
      if (b >= model.num_blocks) fail("attack.blocks index " + std::to_string(b) + " out of range");
    }
  }
  if (benchmark.seeds.empty()) fail("benchmark.seeds is empty");
  if (benchmark.samples_per_seed == 0) fail("benchmark.samples_per_seed must be >= 1");
  if (benchmark.attacks.empty()) fail("benchmark.attacks is empty");
  CnnConfig{model.image_size, model.channels, cnn_widths, model.num_classes}.validate();
  attack_config(0).validate(attack.method);
}

AttackConfig ExperimentConfig::attack_config(std::uint64_t seed) const {
  AttackConfig c;
  c.epsilon = attack.epsilon / 255.0;
  c.step_size = attack.step_size / 255.0;
  c.steps = attack.steps;
  c.momentum = attack.momentum;
  c.diversity_prob = attack.diversity_prob;
  c.resize_min = attack.resize_min;
  c.target = attack.target;
  c.mode = attack.variant;
  c.block_subset = attack.blocks;
  c.seed = seed;
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument("config: " + std::string(e.what()));
  }
  ExperimentConfig config;
  for (const auto& [section, node] : tree) {
    if (node.empty()) throw std::invalid_argument("config: key '" + section + "' outside any section");
    for (const auto& [key, value] : node) set_value(config, section, key, value.data());
  }
  config.validate();
  return config;
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw std::invalid_argument("config: override '" + assignment + "' is not section.key=value");
  }
  set_value(config, trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)),
            assignment.substr(eq + 1));
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

DatasetSplits load_datasets(const ExperimentConfig& c) {
  const ViTConfig& m = c.model;
  if (c.data.source == "synthetic") {
    return generate_synthetic(c.data.seed, c.data.n_per_class, m.num_classes, m.image_size, m.channels);
  }
  DatasetSplits out;
  const Dataset train = load_idx(c.data.train_images, c.data.train_labels, m.channels, m.image_size, m.num_classes);
  if (!c.data.val_images.empty()) {
    out.train = train;
    out.val = load_idx(c.data.val_images, c.data.val_labels, m.channels, m.image_size, m.num_classes);
  } else {
    // Every sixth sample goes to validation.
    std::vector<std::size_t> tr, va;
    for (std::size_t i = 0; i < train.size(); ++i) (i % 6 == 5 ? va : tr).push_back(i);
    if (tr.empty() || va.empty()) throw std::invalid_argument("load_datasets: too few IDX samples to split");
    out.train = train.subset(tr);
    out.val = train.subset(va);
  }
  out.train.split = "train";
  out.val.split = "val";
  return out;
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "[data]\nsource = " << c.data.source << "\nseed = " << c.data.seed << "\nn_per_class = " << c.data.n_per_class
    << '\n';
  if (!c.data.train_images.empty()) o << "train_images = " << c.data.train_images << '\n';
  if (!c.data.train_labels.empty()) o << "train_labels = " << c.data.train_labels << '\n';
  if (!c.data.val_images.empty()) o << "val_images = " << c.data.val_images << '\n';
  if (!c.data.val_labels.empty()) o << "val_labels = " << c.data.val_labels << '\n';
  o << "\n[model]\nimage_size = " << c.model.image_size << "\npatch_size = " << c.model.patch_size
    << "\nchannels = " << c.model.channels << "\nembed_dim = " << c.model.embed_dim
    << "\nnum_blocks = " << c.model.num_blocks << "\nnum_heads = " << c.model.num_heads
    << "\nmlp_ratio = " << c.model.mlp_ratio << "\nnum_classes = " << c.model.num_classes
    << "\nseed = " << c.model_seed << '\n';
  o << "\n[train]\nepochs = " << c.train.epochs << "\nbatch_size = " << c.train.batch_size
    << "\nlearning_rate = " << num(c.train.learning_rate) << "\nweight_decay = " << num(c.train.weight_decay)
    << "\nwarmup_fraction = " << num(c.train.warmup_fraction) << '\n';
  o << "\n[refinement]\nlearning_rate = " << num(c.refinement.learning_rate)
    << "\nmomentum = " << num(c.refinement.momentum) << "\nbatch_size = " << c.refinement.batch_size
    << "\nepochs = " << c.refinement.epochs << "\nseed = " << c.refinement.seed << '\n';
  o << "\n[cnn]\nwidths = " << join<std::size_t>(c.cnn_widths, [](auto w) { return std::to_string(w); })
    << "\nseed = " << c.cnn_seed << '\n';
  o << "\n[attack]\nmethod = " << to_string(c.attack.method) << "\nvariant = " << to_string(c.attack.variant)
    << "\nepsilon = " << num(c.attack.epsilon) << "\nstep_size = " << num(c.attack.step_size)
    << "\nsteps = " << c.attack.steps << "\nmomentum = " << num(c.attack.momentum)
    << "\ndiversity_prob = " << num(c.attack.diversity_prob) << "\nresize_min = " << num(c.attack.resize_min)
    << "\ntarget = " << (c.attack.target ? std::to_string(*c.attack.target) : "none") << "\nblocks = "
    << (c.attack.blocks ? join<std::size_t>(*c.attack.blocks, [](auto b) { return std::to_string(b); }) : "all")
    << '\n';
  o << "\n[benchmark]\nseeds = " << join<std::uint64_t>(c.benchmark.seeds, [](auto s) { return std::to_string(s); })
    << "\nsamples_per_seed = " << c.benchmark.samples_per_seed << "\nattacks = "
    << join<AttackMethod>(c.benchmark.attacks, [](auto a) { return to_string(a); }) << '\n';
  o << "\n[output]\ndir = " << c.output_dir << '\n';
  return o.str();
}

}  // namespace vitens
