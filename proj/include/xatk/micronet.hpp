#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xatk/model.hpp"
#include "xatk/tensor.hpp"

namespace xatk {

struct LabeledDataset;  // data_io.hpp

// Activation used after both conv layers. Identity exists for the
// linearized-network tests where gradient-based and reference-based
// attributions must coincide.
enum class Activation { Relu, Identity };

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 0.05;
  int batch_size = 16;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

// Small fixed-architecture convolutional classifier:
//
//   conv 3x3, 8 filters, stride 1, zero padding -> ReLU
//   -> average pool 2x2
//   -> conv 3x3, 16 filters, stride 1, zero padding -> ReLU
//   -> global average pool -> dense(J)
//
// Forward, reverse-mode input gradients, and training are implemented as
// fixed per-layer passes. All parameters are doubles.
class MicroNet : public ModelBackend {
 public:
  static constexpr int kConv1Filters = 8;
  static constexpr int kConv2Filters = 16;
  static constexpr int kKernel = 3;

  MicroNet() = default;
  MicroNet(Shape input_shape, int num_classes);

  // He-style random initialization from the given stream.
  static MicroNet random_init(Shape input_shape, int num_classes, Rng& rng);

  Shape input_shape() const override { return in_shape_; }
  int num_classes() const override { return num_classes_; }
  Activation activation() const { return activation_; }
  void set_activation(Activation a) { activation_ = a; }

  std::vector<double> logits(const ImageTensor& x) const override;
  AttributionMap input_gradient(const ImageTensor& x,
                                int class_index) const override;
  LayerTrace layer_trace(const ImageTensor& x) const override;

  // In-place SGD with cross-entropy loss; deterministic given rng.
  // Throws DataError on an empty dataset or when the loss goes non-finite.
  std::vector<EpochStats> train(const LabeledDataset& dataset,
                                const TrainConfig& cfg, Rng& rng);

  double accuracy(const LabeledDataset& dataset) const;

  void save_weights(const std::string& path) const;
  static MicroNet load_weights(const std::string& path);

  // Flat views over all parameters, in serialization order.
  std::vector<std::pair<std::string, std::vector<double>*>> parameters();
  std::vector<std::pair<std::string, const std::vector<double>*>> parameters()
      const;

  // Structural equality over shape, class count, activation, and every
  // parameter (exact double comparison).
  bool operator==(const MicroNet& other) const;

 private:
  struct ForwardPass {
    std::vector<double> conv1_pre, conv1_post;   // W x H x 8
    std::vector<double> pool1;                   // W/2 x H/2 x 8
    std::vector<double> conv2_pre, conv2_post;   // W/2 x H/2 x 16
    std::vector<double> gap;                     // 16
    std::vector<double> logits;                  // J
  };

  struct Gradients;

  ForwardPass forward(const ImageTensor& x) const;
  // Backward pass from d(loss)/d(logits); fills weight grads and
  // optionally the input gradient.
  void backward(const ImageTensor& x, const ForwardPass& fp,
                const std::vector<double>& dlogits, Gradients* grads,
                std::vector<double>* dinput) const;

  double act(double v) const;
  double act_grad(double pre) const;

  Shape in_shape_;
  int num_classes_ = 0;
  Activation activation_ = Activation::Relu;

  // conv weights laid out [out][ky][kx][in]; dense laid out [j][feature].
  std::vector<double> conv1_w_, conv1_b_;
  std::vector<double> conv2_w_, conv2_b_;
  std::vector<double> dense_w_, dense_b_;
};

}  // namespace xatk
