#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xatk/tensor.hpp"

namespace xatk {

// Images with integer class labels; uniform shape throughout.
struct LabeledDataset {
  std::vector<ImageTensor> images;
  std::vector<int> labels;
  int class_count = 0;
  std::string provenance;

  std::size_t size() const { return images.size(); }
  Shape image_shape() const {
    return images.empty() ? Shape{} : images.front().shape();
  }
  void validate() const;

  // Indices of all images with the given label.
  std::vector<std::size_t> indices_of_class(int label) const;

  bool operator==(const LabeledDataset&) const = default;
};

// Procedural 3-channel toy set: each class is a colored disc on a dark
// background, with class identity encoded by a point on a cyclic
// hue-and-radius continuum. Per-sample jitter along the continuum makes
// adjacent classes genuinely confusable, so running-up classes carry
// signal. Deterministic per seed.
LabeledDataset generate_toy_dataset(int classes, int per_class, int side,
                                    std::uint64_t seed);

// Binary P6 PPM, maxval 255. Bytes map to [0,1] as b/255; writing rounds
// v*255 to nearest. Round-tripping an 8-bit-exact tensor is lossless.
ImageTensor ppm_read(const std::string& path);
void ppm_write(const std::string& path, const ImageTensor& image);

// Versioned container for a whole dataset, magic "XATKD001".
void dataset_save(const std::string& path, const LabeledDataset& dataset);
LabeledDataset dataset_load(const std::string& path);

// Versioned container for a list of raw tensors (attribution dumps),
// magic "XATKT001". No [0,1] constraint on the payload.
void tensors_save(const std::string& path, const std::vector<Tensor>& tensors);
std::vector<Tensor> tensors_load(const std::string& path);

}  // namespace xatk
