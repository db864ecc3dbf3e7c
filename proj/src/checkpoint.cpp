#include "vitens/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vitens {

static_assert(std::endian::native == std::endian::little,
              "archive I/O writes host doubles directly and assumes a little-endian host");

void Archive::set_meta(const std::string& key, const std::string& value) {
  if (key.find_first_of(" \n") != std::string::npos || value.find('\n') != std::string::npos) {
    throw std::invalid_argument("Archive: meta key/value contains a separator: " + key);
  }
  for (auto& kv : meta) {
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  }
  meta.emplace_back(key, value);
}

const std::string* Archive::find_meta(const std::string& key) const {
  for (const auto& kv : meta)
    if (kv.first == key) return &kv.second;
  return nullptr;
}

const std::string& Archive::require_meta(const std::string& key, const std::string& origin) const {
  const std::string* v = find_meta(key);
  if (!v) throw std::runtime_error(origin + ": manifest lacks '" + key + "'");
  return *v;
}

void Archive::add(std::string name, Array array) {
  if (name.empty() || name.find_first_of(" \n") != std::string::npos) {
    throw std::invalid_argument("Archive: invalid array name '" + name + "'");
  }
  if (find(name)) throw std::invalid_argument("Archive: duplicate array '" + name + "'");
  arrays.push_back({std::move(name), std::move(array)});
}

const Array* Archive::find(const std::string& name) const {
  for (const auto& e : arrays)
    if (e.name == name) return &e.array;
  return nullptr;
}

namespace {

constexpr char kMagic[4] = {'V', 'T', 'F', 'G'};

template <class T>
void write_le(std::ostream& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(buf, sizeof(T));
}

template <class T>
T read_le(std::istream& in, const std::string& origin, const char* what) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) throw std::runtime_error(origin + ": truncated while reading " + what);
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

std::string dims_to_text(const Shape& s) {
  if (s.empty()) return "scalar";
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out;
}

Shape dims_from_text(const std::string& text, const std::string& origin) {
  if (text == "scalar") return {};
  Shape s;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      s.push_back(std::stoul(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw std::runtime_error(origin + ": bad dimension '" + item + "' in manifest");
    }
  }
  return s;
}

}  // namespace

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  std::ostringstream manifest;
  for (const auto& [k, v] : archive.meta) manifest << "meta " << k << ' ' << v << '\n';
  for (const auto& e : archive.arrays) {
    manifest << "array " << e.name << " f64 " << dims_to_text(e.array.shape) << '\n';
  }
  const std::string text = manifest.str();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kMagic, 4);
  write_le<std::uint32_t>(out, kArchiveVersion);
  write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& e : archive.arrays) {
    out.write(reinterpret_cast<const char*>(e.array.data.data()),
              static_cast<std::streamsize>(e.array.data.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Archive read_archive(const std::filesystem::path& path) {
  const std::string origin = "checkpoint " + path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(origin + ": cannot open for reading");
  char magic[4];
  if (!in.read(magic, 4)) throw std::runtime_error(origin + ": truncated before magic bytes");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error(origin + ": bad magic bytes (not a VTFG archive)");
  }
  const auto version = read_le<std::uint32_t>(in, origin, "version");
  if (version != kArchiveVersion) {
    throw std::runtime_error(origin + ": unsupported format version " + std::to_string(version) +
                             " (expected " + std::to_string(kArchiveVersion) + ")");
  }
  const auto length = read_le<std::uint64_t>(in, origin, "manifest length");
  if (length > (std::uint64_t{1} << 30)) throw std::runtime_error(origin + ": implausible manifest length");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) {
    throw std::runtime_error(origin + ": truncated manifest");
  }

  Archive archive;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      archive.meta.emplace_back(key, value);
    } else if (kind == "array") {
      std::string name, dtype, dims;
      if (!(ls >> name >> dtype >> dims)) throw std::runtime_error(origin + ": malformed line '" + line + "'");
      if (dtype != "f64") throw std::runtime_error(origin + ": unsupported dtype '" + dtype + "' for " + name);
      archive.arrays.push_back({name, Array(dims_from_text(dims, origin))});
    } else {
      throw std::runtime_error(origin + ": unknown manifest record '" + kind + "'");
    }
  }
  for (auto& e : archive.arrays) {
    if (!in.read(reinterpret_cast<char*>(e.array.data.data()),
                 static_cast<std::streamsize>(e.array.data.size() * sizeof(double)))) {
      throw std::runtime_error(origin + ": truncated payload in array '" + e.name + "'");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error(origin + ": trailing bytes after payload");
  }
  return archive;
}

void vit_config_to_meta(const ViTConfig& c, Archive& a) {
  a.set_meta("vit.image_size", std::to_string(c.image_size));
  a.set_meta("vit.patch_size", std::to_string(c.patch_size));
  a.set_meta("vit.channels", std::to_string(c.channels));
  a.set_meta("vit.embed_dim", std::to_string(c.embed_dim));
  a.set_meta("vit.num_blocks", std::to_string(c.num_blocks));
  a.set_meta("vit.num_heads", std::to_string(c.num_heads));
  a.set_meta("vit.mlp_ratio", std::to_string(c.mlp_ratio));
  a.set_meta("vit.num_classes", std::to_string(c.num_classes));
}

ViTConfig vit_config_from_meta(const Archive& a, const std::string& origin) {
  auto get = [&](const char* key) -> std::size_t {
    const std::string& v = a.require_meta(key, origin);
    try {
      return std::stoul(v);
    } catch (const std::exception&) {
      throw std::runtime_error(origin + ": bad value '" + v + "' for " + key);
    }
  };
  ViTConfig c;
  c.image_size = get("vit.image_size");
  c.patch_size = get("vit.patch_size");
  c.channels = get("vit.channels");
  c.embed_dim = get("vit.embed_dim");
  c.num_blocks = get("vit.num_blocks");
  c.num_heads = get("vit.num_heads");
  c.mlp_ratio = get("vit.mlp_ratio");
  c.num_classes = get("vit.num_classes");
  return c;
}

void add_vit_arrays(const ViTModel& model, Archive& archive) {
  visit_parameters([&](const std::string& name, const Array& a) { archive.add(name, a); }, model.params());
}

void fill_vit_arrays(const Archive& archive, ViTModel& model, const std::string& origin) {
  std::vector<std::string> problems;
  visit_parameters(
      [&](const std::string& name, Array& dst) {
        const Array* src = archive.find(name);
        if (!src) {
          problems.push_back(name + " missing");
        } else if (src->shape != dst.shape) {
          problems.push_back(name + " expects " + shape_to_string(dst.shape) + " got " +
                             shape_to_string(src->shape));
        } else {
          dst = *src;
        }
      },
      model.params());
  if (!problems.empty()) {
    std::string msg = origin + ": shape mismatch in " + std::to_string(problems.size()) + " arrays:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw std::runtime_error(msg);
  }
}

void save_checkpoint(const ViTModel& model, const std::filesystem::path& path) {
  Archive a;
  a.set_meta("kind", "vit");
  vit_config_to_meta(model.config(), a);
  add_vit_arrays(model, a);
  write_archive(path, a);
}

ViTModel load_checkpoint(const std::filesystem::path& path) {
  Archive a = read_archive(path);
  const std::string origin = "checkpoint " + path.string();
  ViTModel model(vit_config_from_meta(a, origin), 0);
  fill_vit_arrays(a, model, origin);
  return model;
}

ViTModel load_checkpoint(const std::filesystem::path& path, const ViTConfig& expected) {
  Archive a = read_archive(path);
  ViTModel model(expected, 0);
  fill_vit_arrays(a, model, "checkpoint " + path.string());
  return model;
}

std::uint64_t parameter_hash(const ViTModel& model) {
  // FNV-1a over names and raw bytes.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  visit_parameters(
      [&](const std::string& name, const Array& a) {
        mix(name.data(), name.size());
        mix(a.data.data(), a.data.size() * sizeof(double));
      },
      model.params());
  return h;
}

}  // namespace vitens
