#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vitens/array.hpp"

namespace vitens {

struct Dataset {
  Array images;                      // [N, C, H, W], values in [0, 1]
  std::vector<std::size_t> labels;   // [N]
  std::size_t num_classes = 10;
  std::string split;                 // "train" / "val" / free-form
  std::string provenance;            // synthetic seed or source path

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  Array image(std::size_t i) const { return take_leading(images, i); }
  Shape image_shape() const;

  // Throws unless labels < num_classes, pixels in [0,1] and N > 0.
  void validate() const;
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

struct DatasetSplits {
  Dataset train;
  Dataset val;
};

// Procedural 10-class image set ("synthetic-shapes"): disk, square,
// triangle, plus, ring, and horizontal / vertical / diagonal stripes,
// checkerboard and dot lattice, each with random pose, colors and pixel
// noise. n_per_class samples per class are split 5:1 into train and val.
DatasetSplits generate_synthetic(std::uint64_t seed, std::size_t n_per_class,
                                 std::size_t num_classes = 10, std::size_t size = 32,
                                 std::size_t channels = 3);

// IDX pair (magic 0x00000803 images, 0x00000801 labels, big-endian).
// Pixels become value/255, grayscale is replicated to `channels`, and images
// are resized to size x size by nearest neighbour.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::size_t channels = 3, std::size_t size = 32, std::size_t num_classes = 10);

// Writes an IDX pair from 8-bit pixels [N,H,W] (used by tests and dataset-gen).
void write_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
               const std::vector<std::uint8_t>& pixels, std::size_t count, std::size_t rows,
               std::size_t cols, const std::vector<std::uint8_t>& labels);

// Nearest-neighbour resize of an image [C,H,W] to [C,height,width]. Source
// pixel for output (y,x) is (floor(y*H/height), floor(x*W/width)).
Array resize_nearest(const Array& image, std::size_t height, std::size_t width);

}  // namespace vitens
