#include "xatk/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "xatk/binio.hpp"

namespace xatk {

void LabeledDataset::validate() const {
  if (images.size() != labels.size()) {
    throw DataError("dataset: image/label count mismatch");
  }
  for (int label : labels) {
    if (label < 0 || label >= class_count) {
      throw DataError("dataset: label " + std::to_string(label) +
                      " out of range [0," + std::to_string(class_count) + ")");
    }
  }
  for (const auto& img : images) {
    if (img.shape() != image_shape()) {
      throw ShapeError("dataset: non-uniform image shapes");
    }
  }
}

std::vector<std::size_t> LabeledDataset::indices_of_class(int label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) out.push_back(i);
  }
  return out;
}

namespace {

// Piecewise-linear hue wheel: t in [0,1) -> RGB in [0,1].
void hue_to_rgb(double t, double& r, double& g, double& b) {
  t -= std::floor(t);
  const double h = t * 6.0;
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  switch (sector) {
    case 0: r = 1; g = f; b = 0; break;
    case 1: r = 1 - f; g = 1; b = 0; break;
    case 2: r = 0; g = 1; b = f; break;
    case 3: r = 0; g = 1 - f; b = 1; break;
    case 4: r = f; g = 0; b = 1; break;
    default: r = 1; g = 0; b = 1 - f; break;
  }
}

inline double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

LabeledDataset generate_toy_dataset(int classes, int per_class, int side,
                                    std::uint64_t seed) {
  if (classes < 2) throw ConfigError("generate_toy_dataset: need >= 2 classes");
  if (per_class < 1) throw ConfigError("generate_toy_dataset: need >= 1 image per class");
  if (side < 8) throw ConfigError("generate_toy_dataset: side must be >= 8");

  LabeledDataset ds;
  ds.class_count = classes;
  ds.provenance = "toy(seed=" + std::to_string(seed) + ")";
  ds.images.reserve(static_cast<std::size_t>(classes) * per_class);
  ds.labels.reserve(ds.images.capacity());

  Rng root(seed);
  const double cx0 = (side - 1) / 2.0;
  const double cy0 = (side - 1) / 2.0;

  for (int j = 0; j < classes; ++j) {
    Rng rng = root.stream("class").stream(static_cast<std::uint64_t>(j));
    for (int s = 0; s < per_class; ++s) {
      // Class identity is a point on a cyclic continuum; the jitter
      // pushes samples toward neighbouring classes so the trained model
      // has meaningful running-up classes.
      const double jitter = (rng.uniform() - 0.5) * 0.7;
      const double t = (j + jitter) / classes;

      // Hue, disc size, and disc position all follow the same cyclic
      // parameter, so every class has distinct visual support while
      // adjacent classes stay similar.
      double fr, fg, fb;
      hue_to_rgb(t, fr, fg, fb);
      const double angle = 2.0 * std::numbers::pi * t;
      const double radius =
          side * (0.16 + 0.03 * std::sin(2.0 * std::numbers::pi * t));
      const double ring = side * 0.28;
      const double cx =
          cx0 + ring * std::cos(angle) + (rng.uniform() - 0.5) * 1.5;
      const double cy =
          cy0 + ring * std::sin(angle) + (rng.uniform() - 0.5) * 1.5;

      ImageTensor img(side, side, 3, 0.0);
      for (int h = 0; h < side; ++h) {
        for (int w = 0; w < side; ++w) {
          const double d = std::hypot(w - cx, h - cy);
          // Soft disc edge, one pixel wide.
          const double m = clip01(radius + 0.5 - d);
          // Bright core fading toward the rim concentrates the most
          // class-informative pixels at the disc centre.
          const double shade =
              0.55 + 0.45 * clip01(1.0 - d / std::max(radius, 1.0));
          const double bg = 0.02;
          img.at(w, h, 0) = m * fr * shade + (1 - m) * bg;
          img.at(w, h, 1) = m * fg * shade + (1 - m) * bg;
          img.at(w, h, 2) = m * fb * shade + (1 - m) * bg;
        }
      }
      // Low dense noise keeps unit activations bimodal; occasional
      // strong speckle teaches invariance to isolated pixel corruption.
      for (auto& v : img.data()) {
        v = clip01(v + 0.02 * rng.gaussian());
        if (rng.uniform() < 0.45) {
          v = clip01(v + 0.9 * rng.gaussian());
        }
      }
      ds.images.push_back(std::move(img));
      ds.labels.push_back(j);
    }
  }
  return ds;
}

ImageTensor ppm_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError(FormatError::Kind::Io, "cannot open: " + path);
  }
  char magic[2];
  in.read(magic, 2);
  if (in.gcount() != 2 || magic[0] != 'P' || magic[1] != '6') {
    throw FormatError(FormatError::Kind::BadMagic,
                      path + ": not a binary P6 PPM file");
  }

  // Header tokens may be separated by whitespace and '#' comments.
  auto next_int = [&in, &path]() {
    int ch = in.get();
    while (ch != EOF && (std::isspace(ch) || ch == '#')) {
      if (ch == '#') {
        while (ch != EOF && ch != '\n') ch = in.get();
      }
      ch = in.get();
    }
    if (ch == EOF || !std::isdigit(ch)) {
      throw FormatError(FormatError::Kind::BadValue,
                        path + ": malformed PPM header");
    }
    long v = 0;
    while (ch != EOF && std::isdigit(ch)) {
      v = v * 10 + (ch - '0');
      ch = in.get();
    }
    if (ch != EOF) in.unget();
    return v;
  };

  const long width = next_int();
  const long height = next_int();
  const long maxval = next_int();
  if (maxval != 255) {
    throw FormatError(FormatError::Kind::BadValue,
                      path + ": unsupported maxval " + std::to_string(maxval) +
                          " (only 255)");
  }
  in.get();  // single whitespace byte before the payload

  const std::size_t count = static_cast<std::size_t>(width) * height * 3;
  std::vector<unsigned char> bytes(count);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) {
    throw FormatError(FormatError::Kind::Truncated,
                      path + ": truncated PPM payload (got " +
                          std::to_string(in.gcount()) + " of " +
                          std::to_string(count) + " bytes)",
                      static_cast<std::size_t>(in.gcount()));
  }

  ImageTensor img(static_cast<int>(width), static_cast<int>(height), 3);
  // PPM pixel order is row-major top-to-bottom, RGB interleaved, which
  // matches the channel-fastest layout directly.
  for (std::size_t i = 0; i < count; ++i) {
    img[i] = bytes[i] / 255.0;
  }
  return img;
}

void ppm_write(const std::string& path, const ImageTensor& image) {
  if (image.channels() != 3) {
    throw ShapeError("ppm_write: PPM requires 3 channels, got " +
                     image.shape().str());
  }
  validate_image(image, "ppm_write");
  std::ostringstream header;
  header << "P6\n" << image.width() << " " << image.height() << "\n255\n";

  BinaryWriter w(path);
  const std::string h = header.str();
  w.write_bytes(h.data(), h.size());
  std::vector<unsigned char> bytes(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::lround(image[i] * 255.0));
  }
  w.write_bytes(bytes.data(), bytes.size());
  w.commit();
}

namespace {

void check_magic(BinaryReader& r, const std::string& path,
                 const char* expected /* 8 bytes, last 3 = version */) {
  char magic[8];
  r.read_bytes(magic, 8);
  if (std::memcmp(magic, expected, 5) != 0) {
    throw FormatError(FormatError::Kind::BadMagic,
                      path + ": bad magic (expected " +
                          std::string(expected, 5) + ")");
  }
  if (std::memcmp(magic + 5, expected + 5, 3) != 0) {
    throw FormatError(FormatError::Kind::BadVersion,
                      path + ": unsupported version " +
                          std::string(magic + 5, 3));
  }
}

}  // namespace

void dataset_save(const std::string& path, const LabeledDataset& dataset) {
  dataset.validate();
  BinaryWriter w(path);
  w.write_bytes("XATKD001", 8);
  w.write_u32(static_cast<std::uint32_t>(dataset.class_count));
  w.write_u32(static_cast<std::uint32_t>(dataset.size()));
  const Shape s = dataset.image_shape();
  w.write_u32(static_cast<std::uint32_t>(s.width));
  w.write_u32(static_cast<std::uint32_t>(s.height));
  w.write_u32(static_cast<std::uint32_t>(s.channels));
  w.write_string(dataset.provenance);
  for (int label : dataset.labels) {
    w.write_u32(static_cast<std::uint32_t>(label));
  }
  for (const auto& img : dataset.images) {
    w.write_f64_array(img.data());
  }
  w.commit();
}

LabeledDataset dataset_load(const std::string& path) {
  BinaryReader r(path);
  check_magic(r, path, "XATKD001");
  LabeledDataset ds;
  ds.class_count = static_cast<int>(r.read_u32());
  const std::uint32_t count = r.read_u32();
  const int width = static_cast<int>(r.read_u32());
  const int height = static_cast<int>(r.read_u32());
  const int channels = static_cast<int>(r.read_u32());
  ds.provenance = r.read_string();
  ds.labels.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    ds.labels.push_back(static_cast<int>(r.read_u32()));
  }
  const Shape shape{width, height, channels};
  ds.images.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    ds.images.emplace_back(shape, r.read_f64_array(shape.size()));
  }
  ds.validate();
  return ds;
}

void tensors_save(const std::string& path, const std::vector<Tensor>& tensors) {
  BinaryWriter w(path);
  w.write_bytes("XATKT001", 8);
  w.write_u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.write_u32(static_cast<std::uint32_t>(t.width()));
    w.write_u32(static_cast<std::uint32_t>(t.height()));
    w.write_u32(static_cast<std::uint32_t>(t.channels()));
    w.write_f64_array(t.data());
  }
  w.commit();
}

std::vector<Tensor> tensors_load(const std::string& path) {
  BinaryReader r(path);
  check_magic(r, path, "XATKT001");
  const std::uint32_t count = r.read_u32();
  std::vector<Tensor> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const int width = static_cast<int>(r.read_u32());
    const int height = static_cast<int>(r.read_u32());
    const int channels = static_cast<int>(r.read_u32());
    const Shape shape{width, height, channels};
    out.emplace_back(shape, r.read_f64_array(shape.size()));
  }
  return out;
}

}  // namespace xatk
