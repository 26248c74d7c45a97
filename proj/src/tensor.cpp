#include "xatk/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace xatk {

std::string Shape::str() const {
  std::ostringstream os;
  os << width << "x" << height << "x" << channels;
  return os.str();
}

std::size_t Tensor::check_dims(const Shape& s) {
  if (s.width <= 0 || s.height <= 0 || s.channels <= 0) {
    throw ShapeError("tensor dimensions must be positive, got " + s.str());
  }
  return s.size();
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != check_dims(shape_)) {
    std::ostringstream os;
    os << "tensor data length " << data_.size() << " does not match shape "
       << shape_.str() << " (" << shape_.size() << " entries)";
    throw ShapeError(os.str());
  }
}

std::array<int, 3> Tensor::unflatten(std::size_t flat) const {
  const int c = static_cast<int>(flat % shape_.channels);
  const std::size_t pix = flat / shape_.channels;
  const int w = static_cast<int>(pix % shape_.width);
  const int h = static_cast<int>(pix / shape_.width);
  return {w, h, c};
}

void require_same_shape(const Tensor& a, const Tensor& b,
                        const char* context) {
  if (!a.same_shape(b)) {
    std::ostringstream os;
    os << context << ": shape mismatch " << a.shape().str() << " vs "
       << b.shape().str();
    throw ShapeError(os.str());
  }
}

void validate_image(const Tensor& t, const char* context) {
  for (double v : t.data()) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      std::ostringstream os;
      os << context << ": image entry " << v << " outside [0,1]";
      throw DataError(os.str());
    }
  }
}

void validate_attribution(const Tensor& t, const char* context) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) {
      throw DataError(std::string(context) +
                      ": non-finite attribution entry");
    }
  }
}

double abs_diff_sum(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "abs_diff_sum");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += std::abs(a[i] - b[i]);
  }
  return sum;
}

double abs_sum(const Tensor& a) {
  double sum = 0.0;
  for (double v : a.data()) sum += std::abs(v);
  return sum;
}

namespace {

// FNV-1a over an arbitrary byte string, seeded so that distinct parent
// seeds produce distinct stream families.
std::uint64_t fnv1a(std::uint64_t seed, const void* bytes, std::size_t len) {
  std::uint64_t h = 14695981039346656037ull ^ seed;
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

Rng Rng::stream(const std::string& label) const {
  return Rng(fnv1a(seed_, label.data(), label.size()));
}

Rng Rng::stream(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
  const std::uint64_t words[3] = {a, b, c};
  return Rng(fnv1a(seed_, words, sizeof(words)));
}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection sampling; unbiased and engine-order deterministic.
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Marsaglia polar method.
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  has_spare_ = true;
  return u * m;
}

std::vector<double> Rng::gaussian_vector(std::size_t n) {
  std::vector<double> out(n);
  for (auto& x : out) x = gaussian();
  return out;
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n,
                                                         std::size_t k) {
  if (k > n) {
    throw ConfigError("sample_without_replacement: k exceeds population");
  }
  // Partial Fisher-Yates over the index vector.
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t j = i + below(n - i);
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

}  // namespace xatk
