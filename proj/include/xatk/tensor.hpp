#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "xatk/errors.hpp"

namespace xatk {

// Shape of a dense W x H x C tensor.
struct Shape {
  int width = 0;
  int height = 0;
  int channels = 0;

  bool operator==(const Shape&) const = default;
  std::size_t size() const {
    return static_cast<std::size_t>(width) * height * channels;
  }
  std::string str() const;
};

// Dense 3-D array of doubles. Used both for images (values in [0,1]) and
// for attribution maps (signed values). The flat layout is channel-fastest:
//
//     flat(w, h, c) = c + C * (w + W * h)
//
// Every file format and every module addresses tensors through this layout.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int width, int height, int channels, double fill = 0.0)
      : shape_{width, height, channels}, data_(check_dims(shape_), fill) {}
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  int width() const { return shape_.width; }
  int height() const { return shape_.height; }
  int channels() const { return shape_.channels; }
  std::size_t size() const { return data_.size(); }

  std::size_t flat_index(int w, int h, int c) const {
    return static_cast<std::size_t>(c) +
           static_cast<std::size_t>(shape_.channels) *
               (static_cast<std::size_t>(w) +
                static_cast<std::size_t>(shape_.width) * h);
  }
  // Inverse of flat_index.
  std::array<int, 3> unflatten(std::size_t flat) const;

  double& at(int w, int h, int c) { return data_[flat_index(w, h, c)]; }
  double at(int w, int h, int c) const { return data_[flat_index(w, h, c)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool operator==(const Tensor&) const = default;

 private:
  static std::size_t check_dims(const Shape& s);

  Shape shape_;
  std::vector<double> data_;
};

using ImageTensor = Tensor;
using AttributionMap = Tensor;

// Throws ShapeError naming both shapes when they differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* context);

// Image invariant: all entries finite and in [0,1].
void validate_image(const Tensor& t, const char* context);
// Attribution invariant: all entries finite.
void validate_attribution(const Tensor& t, const char* context);

// Sum of |a - b| over all entries (the explanation-difference kernel).
double abs_diff_sum(const Tensor& a, const Tensor& b);
// Sum of |a| over all entries.
double abs_sum(const Tensor& a);

// Seedable pseudo-random generator. The engine is the 64-bit Mersenne
// Twister (std::mt19937_64), whose output sequence is fixed by the C++
// standard, so identical (seed, stream label) pairs produce bit-identical
// sequences on every platform. Child streams are derived by FNV-1a hashing
// the parent seed together with the label; workers never share a stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  // Independent substream named by a label.
  Rng stream(const std::string& label) const;
  // Substream addressed by numeric coordinates (sweep cells).
  Rng stream(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const;

  std::uint64_t next_u64();
  // Uniform in [0, 1), 53-bit resolution.
  double uniform();
  // Unbiased integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via the Marsaglia polar transform.
  double gaussian();
  std::vector<double> gaussian_vector(std::size_t n);

  // k distinct indices drawn uniformly from [0, n), ascending order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k);
  // Deterministic Fisher-Yates shuffle of index vector [0, n).
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace xatk
