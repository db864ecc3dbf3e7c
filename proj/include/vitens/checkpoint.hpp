#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vitens/array.hpp"
#include "vitens/vit.hpp"

// Binary array archive shared by checkpoints and attack outputs.
//
// Layout (all integers little-endian):
//   4 bytes   magic "VTFG"
//   u32       format version (kArchiveVersion)
//   u64       manifest length in bytes
//   manifest  UTF-8 text, one record per line:
//               meta <key> <value>
//               array <name> f64 <d0>,<d1>,...
//   payload   raw little-endian f64 arrays in manifest order
namespace vitens {

inline constexpr std::uint32_t kArchiveVersion = 1;

struct ArchiveEntry {
  std::string name;
  Array array;
};

struct Archive {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<ArchiveEntry> arrays;

  void set_meta(const std::string& key, const std::string& value);
  const std::string* find_meta(const std::string& key) const;
  // Throws naming `origin` when the key is absent.
  const std::string& require_meta(const std::string& key, const std::string& origin) const;
  void add(std::string name, Array array);
  const Array* find(const std::string& name) const;
};

void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

void vit_config_to_meta(const ViTConfig& config, Archive& archive);
ViTConfig vit_config_from_meta(const Archive& archive, const std::string& origin);
void add_vit_arrays(const ViTModel& model, Archive& archive);
// Copies archive arrays into `model`, throwing one error that lists every
// missing or mis-shaped array.
void fill_vit_arrays(const Archive& archive, ViTModel& model, const std::string& origin);

void save_checkpoint(const ViTModel& model, const std::filesystem::path& path);
ViTModel load_checkpoint(const std::filesystem::path& path);
// Loads into a model built from `expected`; a checkpoint with different
// array shapes is rejected.
ViTModel load_checkpoint(const std::filesystem::path& path, const ViTConfig& expected);

// Hash over every parameter bit pattern, used to verify frozen weights.
std::uint64_t parameter_hash(const ViTModel& model);

}  // namespace vitens
