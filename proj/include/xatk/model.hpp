#pragma once

#include <functional>
#include <string>
#include <vector>

#include "xatk/tensor.hpp"

namespace xatk {

// One layer of a traced forward pass. Linear layers carry a
// vector-Jacobian product so attribution methods can walk the network
// backwards without knowing the architecture; nonlinear layers carry
// their pre/post activations instead.
struct LayerRecord {
  enum class Kind { Linear, Relu };

  std::string name;
  Kind kind = Kind::Linear;
  std::vector<double> input;
  std::vector<double> output;
  // Maps a cotangent on the output to a cotangent on the input.
  // Set only for Linear records.
  std::function<std::vector<double>(const std::vector<double>&)> vjp;
};

struct LayerTrace {
  std::vector<LayerRecord> layers;
  std::vector<double> logits;
};

using ClassProbs = std::vector<double>;

// Numerically stable softmax.
ClassProbs softmax(const std::vector<double>& logits);

// The abstract classifier the attack treats as a black box: predictions,
// input gradients, and a layer trace (the latter needed only by DeepLIFT).
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  virtual Shape input_shape() const = 0;
  virtual int num_classes() const = 0;

  virtual std::vector<double> logits(const ImageTensor& x) const = 0;

  // softmax(logits(x)); entries in (0,1), summing to 1.
  virtual ClassProbs predict(const ImageTensor& x) const {
    return softmax(logits(x));
  }

  // d logit_j / d x, exact reverse mode.
  virtual AttributionMap input_gradient(const ImageTensor& x,
                                        int class_index) const = 0;

  virtual LayerTrace layer_trace(const ImageTensor& x) const = 0;

 protected:
  void check_input(const ImageTensor& x) const;
  void check_class(int j) const;
};

}  // namespace xatk
