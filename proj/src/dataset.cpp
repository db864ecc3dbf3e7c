#include "vitens/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace vitens {

Shape Dataset::image_shape() const {
  if (images.shape.size() != 4) return {};
  return {images.shape[1], images.shape[2], images.shape[3]};
}

void Dataset::validate() const {
  if (labels.empty()) throw std::invalid_argument("Dataset: split '" + split + "' is empty");
  if (images.shape.size() != 4 || images.shape[0] != labels.size()) {
    throw std::invalid_argument("Dataset: images " + shape_to_string(images.shape) + " do not match " +
                                std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw std::invalid_argument("Dataset: label " + std::to_string(labels[i]) + " at index " +
                                  std::to_string(i) + " >= num_classes " +
                                  std::to_string(num_classes));
    }
  }
  for (double v : images.data) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("Dataset: pixel outside [0,1]");
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.num_classes = num_classes;
  out.split = split;
  out.provenance = provenance;
  Shape shape = images.shape;
  shape[0] = indices.size();
  out.images = Array(shape);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    put_leading(out.images, i, image(indices[i]));
    out.labels.push_back(labels.at(indices[i]));
  }
  return out;
}

namespace {

using Color = std::array<double, 3>;

double frac(double v) { return v - std::floor(v); }

// Renders one sample; coordinates are in pixels, origin top-left.
Array render(std::size_t cls, std::size_t size, std::size_t channels, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  // Dark background, bright foreground; hues vary per sample.
  Color bg{uniform(0.0, 0.4), uniform(0.0, 0.4), uniform(0.0, 0.4)};
  Color fg{uniform(0.6, 1.0), uniform(0.6, 1.0), uniform(0.6, 1.0)};

  const double s = static_cast<double>(size);
  const double cx = uniform(0.4, 0.6) * s;
  const double cy = uniform(0.4, 0.6) * s;
  const double radius = uniform(0.26, 0.38) * s;
  const double theta = uniform(0.0, 2.0 * std::numbers::pi);
  // Square and plus stay near axis-aligned so their corners/arms separate
  // them from the disk at 32 px.
  const double tilt = uniform(-0.25, 0.25);
  const double cos_t = std::cos(tilt), sin_t = std::sin(tilt);
  const double period = uniform(4.0, 8.0);
  const double phase = unit(rng);
  const double jitter = uniform(-0.15, 0.15);
  const double diag = (unit(rng) < 0.5 ? 0.25 : 0.75) * std::numbers::pi + jitter;
  const double cell = uniform(3.0, 6.0);
  const double spacing = uniform(6.0, 9.0);
  const double dot = uniform(1.5, 2.4);

  auto inside = [&](double x, double y) -> bool {
    const double dx = x - cx, dy = y - cy;
    const double rx = cos_t * dx + sin_t * dy;
    const double ry = -sin_t * dx + cos_t * dy;
    const double dist = std::hypot(dx, dy);
    switch (cls) {
      case 0:
        return dist <= radius;
      case 1:
        return std::max(std::abs(rx), std::abs(ry)) <= 0.85 * radius;
      case 2: {
        // Equilateral triangle with circumradius `radius`: three half-planes.
        for (int e = 0; e < 3; ++e) {
          const double a = theta + 2.0 * std::numbers::pi * e / 3.0;
          if (std::cos(a) * dx + std::sin(a) * dy > 0.5 * radius) return false;
        }
        return true;
      }
      case 3:
        return (std::abs(rx) <= radius && std::abs(ry) <= 0.25 * radius) ||
               (std::abs(ry) <= radius && std::abs(rx) <= 0.25 * radius);
      case 4:
        return dist <= radius && dist >= 0.55 * radius;
      case 5:
        return frac((y * std::cos(jitter) + x * std::sin(jitter)) / period + phase) < 0.5;
      case 6:
        return frac((x * std::cos(jitter) + y * std::sin(jitter)) / period + phase) < 0.5;
      case 7:
        return frac((x * std::cos(diag) + y * std::sin(diag)) / period + phase) < 0.5;
      case 8: {
        const double u = (x * std::cos(jitter) + y * std::sin(jitter)) / cell + phase;
        const double v = (-x * std::sin(jitter) + y * std::cos(jitter)) / cell + phase;
        return (static_cast<long>(std::floor(u)) + static_cast<long>(std::floor(v))) % 2 == 0;
      }
      case 9: {
        const double u = frac(x / spacing + phase) - 0.5;
        const double v = frac(y / spacing + phase) - 0.5;
        return std::hypot(u, v) * spacing <= dot;
      }
      default:
        return false;
    }
  };

  std::normal_distribution<double> noise(0.0, 0.04);
  Array img({channels, size, size});
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const bool on = inside(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5);
      const Color& c = on ? fg : bg;
      for (std::size_t ch = 0; ch < channels; ++ch) {
        const double base = channels == 3 ? c[ch] : (c[0] + c[1] + c[2]) / 3.0;
        img[(ch * size + y) * size + x] = std::clamp(base + noise(rng), 0.0, 1.0);
      }
    }
  }
  return img;
}

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw std::runtime_error("load_idx: " + path.string() + " is truncated in its header");
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

}  // namespace

DatasetSplits generate_synthetic(std::uint64_t seed, std::size_t n_per_class, std::size_t num_classes,
                                 std::size_t size, std::size_t channels) {
  if (n_per_class == 0) throw std::invalid_argument("generate_synthetic: n_per_class must be >= 1");
  if (num_classes < 2 || num_classes > 10) {
    throw std::invalid_argument("generate_synthetic: supports 2..10 classes, got " +
                                std::to_string(num_classes));
  }
  if (channels != 1 && channels != 3) {
    throw std::invalid_argument("generate_synthetic: channels must be 1 or 3");
  }
  // Validation takes every sixth sample of each class, rounded up.
  const std::size_t n_val = (n_per_class + 5) / 6;
  const std::size_t n_train = n_per_class - n_val;
  if (n_train == 0) throw std::invalid_argument("generate_synthetic: n_per_class too small to split");

  DatasetSplits out;
  for (Dataset* d : {&out.train, &out.val}) {
    d->num_classes = num_classes;
    d->provenance = "synthetic-shapes seed=" + std::to_string(seed);
  }
  out.train.split = "train";
  out.val.split = "val";
  out.train.images = Array({n_train * num_classes, channels, size, size});
  out.val.images = Array({n_val * num_classes, channels, size, size});

  std::size_t ti = 0, vi = 0;
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (std::size_t cls = 0; cls < num_classes; ++cls) {
      std::seed_seq seq{seed, static_cast<std::uint64_t>(cls), static_cast<std::uint64_t>(i)};
      std::mt19937_64 rng(seq);
      Array img = render(cls, size, channels, rng);
      if (i < n_train) {
        put_leading(out.train.images, ti++, img);
        out.train.labels.push_back(cls);
      } else {
        put_leading(out.val.images, vi++, img);
        out.val.labels.push_back(cls);
      }
    }
  }
  return out;
}

Array resize_nearest(const Array& image, std::size_t height, std::size_t width) {
  if (image.shape.size() != 3 || height == 0 || width == 0) {
    throw std::invalid_argument("resize_nearest: expected [C,H,W] and positive target size");
  }
  const std::size_t c = image.shape[0], h = image.shape[1], w = image.shape[2];
  Array out({c, height, width});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x)
        out[(ch * height + y) * width + x] = image[(ch * h + y * h / height) * w + x * w / width];
  return out;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::size_t channels, std::size_t size, std::size_t num_classes) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("load_idx: cannot open " + images_path.string());
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("load_idx: cannot open " + labels_path.string());

  const std::uint32_t img_magic = read_be32(img, images_path);
  if (img_magic != 0x00000803) {
    throw std::runtime_error("load_idx: " + images_path.string() + " has magic " +
                             hex32(img_magic) + ", expected 0x00000803");
  }
  const std::uint32_t lab_magic = read_be32(lab, labels_path);
  if (lab_magic != 0x00000801) {
    throw std::runtime_error("load_idx: " + labels_path.string() + " has magic " +
                             hex32(lab_magic) + ", expected 0x00000801");
  }
  const std::size_t n_images = read_be32(img, images_path);
  const std::size_t rows = read_be32(img, images_path);
  const std::size_t cols = read_be32(img, images_path);
  const std::size_t n_labels = read_be32(lab, labels_path);
  if (n_images != n_labels) {
    throw std::runtime_error("load_idx: image file holds " + std::to_string(n_images) +
                             " images but label file holds " + std::to_string(n_labels) + " labels");
  }
  if (n_images == 0 || rows == 0 || cols == 0) throw std::runtime_error("load_idx: empty IDX file");

  std::vector<unsigned char> pixels(n_images * rows * cols);
  if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()))) {
    throw std::runtime_error("load_idx: " + images_path.string() + " is truncated");
  }
  std::vector<unsigned char> raw_labels(n_labels);
  if (!lab.read(reinterpret_cast<char*>(raw_labels.data()),
                static_cast<std::streamsize>(raw_labels.size()))) {
    throw std::runtime_error("load_idx: " + labels_path.string() + " is truncated");
  }

  Dataset out;
  out.num_classes = num_classes;
  out.split = "idx";
  out.provenance = images_path.string();
  out.images = Array({n_images, channels, size, size});
  Array gray({1, rows, cols});
  for (std::size_t i = 0; i < n_images; ++i) {
    for (std::size_t p = 0; p < rows * cols; ++p) gray[p] = pixels[i * rows * cols + p] / 255.0;
    Array small = resize_nearest(gray, size, size);
    Array colored({channels, size, size});
    for (std::size_t ch = 0; ch < channels; ++ch)
      std::copy(small.data.begin(), small.data.end(),
                colored.data.begin() + static_cast<std::ptrdiff_t>(ch * size * size));
    put_leading(out.images, i, colored);
    out.labels.push_back(raw_labels[i]);
  }
  out.validate();
  return out;
}

void write_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
               const std::vector<std::uint8_t>& pixels, std::size_t count, std::size_t rows,
               std::size_t cols, const std::vector<std::uint8_t>& labels) {
  if (pixels.size() != count * rows * cols || labels.size() != count) {
    throw std::invalid_argument("write_idx: buffer sizes do not match count/rows/cols");
  }
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img || !lab) throw std::runtime_error("write_idx: cannot open output files");
  write_be32(img, 0x00000803);
  write_be32(img, static_cast<std::uint32_t>(count));
  write_be32(img, static_cast<std::uint32_t>(rows));
  write_be32(img, static_cast<std::uint32_t>(cols));
  img.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  write_be32(lab, 0x00000801);
  write_be32(lab, static_cast<std::uint32_t>(count));
  lab.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

}  // namespace vitens
