#include "xatk/micronet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "xatk/binio.hpp"
#include "xatk/data_io.hpp"

namespace xatk {

namespace {

constexpr int kK = MicroNet::kKernel;

inline std::size_t fm_index(int w, int h, int c, int width, int channels) {
  return static_cast<std::size_t>(c) +
         static_cast<std::size_t>(channels) *
             (static_cast<std::size_t>(w) +
              static_cast<std::size_t>(width) * h);
}

// conv weight index, layout [out][ky][kx][in].
inline std::size_t cw_index(int o, int ky, int kx, int i, int in_ch) {
  return static_cast<std::size_t>(
      ((o * kK + ky) * kK + kx) * in_ch + i);
}

// Same-padding 3x3 convolution.
void conv_forward(const std::vector<double>& in, int width, int height,
                  int in_ch, const std::vector<double>& weights,
                  const std::vector<double>& bias, int out_ch,
                  std::vector<double>& out) {
  out.assign(static_cast<std::size_t>(width) * height * out_ch, 0.0);
  for (int h = 0; h < height; ++h) {
    for (int w = 0; w < width; ++w) {
      for (int o = 0; o < out_ch; ++o) {
        double acc = bias[o];
        for (int ky = 0; ky < kK; ++ky) {
          const int hh = h + ky - 1;
          if (hh < 0 || hh >= height) continue;
          for (int kx = 0; kx < kK; ++kx) {
            const int ww = w + kx - 1;
            if (ww < 0 || ww >= width) continue;
            for (int i = 0; i < in_ch; ++i) {
              acc += in[fm_index(ww, hh, i, width, in_ch)] *
                     weights[cw_index(o, ky, kx, i, in_ch)];
            }
          }
        }
        out[fm_index(w, h, o, width, out_ch)] = acc;
      }
    }
  }
}

// Cotangent of the convolution input given the cotangent of its output.
void conv_backward_input(const std::vector<double>& dout, int width,
                         int height, int in_ch,
                         const std::vector<double>& weights, int out_ch,
                         std::vector<double>& din) {
  din.assign(static_cast<std::size_t>(width) * height * in_ch, 0.0);
  for (int h = 0; h < height; ++h) {
    for (int w = 0; w < width; ++w) {
      for (int o = 0; o < out_ch; ++o) {
        const double g = dout[fm_index(w, h, o, width, out_ch)];
        if (g == 0.0) continue;
        for (int ky = 0; ky < kK; ++ky) {
          const int hh = h + ky - 1;
          if (hh < 0 || hh >= height) continue;
          for (int kx = 0; kx < kK; ++kx) {
            const int ww = w + kx - 1;
            if (ww < 0 || ww >= width) continue;
            for (int i = 0; i < in_ch; ++i) {
              din[fm_index(ww, hh, i, width, in_ch)] +=
                  g * weights[cw_index(o, ky, kx, i, in_ch)];
            }
          }
        }
      }
    }
  }
}

void conv_backward_weights(const std::vector<double>& dout,
                           const std::vector<double>& in, int width,
                           int height, int in_ch, int out_ch,
                           std::vector<double>& dw, std::vector<double>& db) {
  for (int h = 0; h < height; ++h) {
    for (int w = 0; w < width; ++w) {
      for (int o = 0; o < out_ch; ++o) {
        const double g = dout[fm_index(w, h, o, width, out_ch)];
        if (g == 0.0) continue;
        db[o] += g;
        for (int ky = 0; ky < kK; ++ky) {
          const int hh = h + ky - 1;
          if (hh < 0 || hh >= height) continue;
          for (int kx = 0; kx < kK; ++kx) {
            const int ww = w + kx - 1;
            if (ww < 0 || ww >= width) continue;
            for (int i = 0; i < in_ch; ++i) {
              dw[cw_index(o, ky, kx, i, in_ch)] +=
                  g * in[fm_index(ww, hh, i, width, in_ch)];
            }
          }
        }
      }
    }
  }
}

void avgpool2_forward(const std::vector<double>& in, int width, int height,
                      int ch, std::vector<double>& out) {
  const int ow = width / 2, oh = height / 2;
  out.assign(static_cast<std::size_t>(ow) * oh * ch, 0.0);
  for (int h = 0; h < oh; ++h) {
    for (int w = 0; w < ow; ++w) {
      for (int c = 0; c < ch; ++c) {
        const double s = in[fm_index(2 * w, 2 * h, c, width, ch)] +
                         in[fm_index(2 * w + 1, 2 * h, c, width, ch)] +
                         in[fm_index(2 * w, 2 * h + 1, c, width, ch)] +
                         in[fm_index(2 * w + 1, 2 * h + 1, c, width, ch)];
        out[fm_index(w, h, c, ow, ch)] = 0.25 * s;
      }
    }
  }
}

void avgpool2_backward(const std::vector<double>& dout, int width, int height,
                       int ch, std::vector<double>& din) {
  const int ow = width / 2, oh = height / 2;
  din.assign(static_cast<std::size_t>(width) * height * ch, 0.0);
  for (int h = 0; h < oh; ++h) {
    for (int w = 0; w < ow; ++w) {
      for (int c = 0; c < ch; ++c) {
        const double g = 0.25 * dout[fm_index(w, h, c, ow, ch)];
        din[fm_index(2 * w, 2 * h, c, width, ch)] += g;
        din[fm_index(2 * w + 1, 2 * h, c, width, ch)] += g;
        din[fm_index(2 * w, 2 * h + 1, c, width, ch)] += g;
        din[fm_index(2 * w + 1, 2 * h + 1, c, width, ch)] += g;
      }
    }
  }
}

}  // namespace

struct MicroNet::Gradients {
  std::vector<double> conv1_w, conv1_b;
  std::vector<double> conv2_w, conv2_b;
  std::vector<double> dense_w, dense_b;

  void init_like(const MicroNet& net) {
    conv1_w.assign(net.parameters()[0].second->size(), 0.0);
    conv1_b.assign(net.parameters()[1].second->size(), 0.0);
    conv2_w.assign(net.parameters()[2].second->size(), 0.0);
    conv2_b.assign(net.parameters()[3].second->size(), 0.0);
    dense_w.assign(net.parameters()[4].second->size(), 0.0);
    dense_b.assign(net.parameters()[5].second->size(), 0.0);
  }
};

MicroNet::MicroNet(Shape input_shape, int num_classes)
    : in_shape_(input_shape), num_classes_(num_classes) {
  if (num_classes_ < 2) {
    throw ConfigError("MicroNet needs at least 2 classes");
  }
  if (in_shape_.width < 2 || in_shape_.height < 2 ||
      in_shape_.width % 2 != 0 || in_shape_.height % 2 != 0) {
    throw ConfigError("MicroNet input sides must be even and >= 2, got " +
                      in_shape_.str());
  }
  const int c = in_shape_.channels;
  conv1_w_.assign(static_cast<std::size_t>(kConv1Filters) * kK * kK * c, 0.0);
  conv1_b_.assign(kConv1Filters, 0.0);
  conv2_w_.assign(
      static_cast<std::size_t>(kConv2Filters) * kK * kK * kConv1Filters, 0.0);
  conv2_b_.assign(kConv2Filters, 0.0);
  dense_w_.assign(static_cast<std::size_t>(num_classes_) * kConv2Filters, 0.0);
  dense_b_.assign(num_classes_, 0.0);
}

MicroNet MicroNet::random_init(Shape input_shape, int num_classes, Rng& rng) {
  MicroNet net(input_shape, num_classes);
  auto fill = [&rng](std::vector<double>& w, int fan_in) {
    const double scale = std::sqrt(2.0 / fan_in);
    for (auto& v : w) v = rng.gaussian() * scale;
  };
  fill(net.conv1_w_, kK * kK * input_shape.channels);
  fill(net.conv2_w_, kK * kK * kConv1Filters);
  fill(net.dense_w_, kConv2Filters);
  // Slightly negative conv biases start the ReLUs sparse: units only
  // come alive where the input drives them, which keeps flat regions
  // of the input from sitting on the activation boundary.
  for (auto& v : net.conv1_b_) v = -0.1;
  for (auto& v : net.conv2_b_) v = -0.1;
  return net;
}

double MicroNet::act(double v) const {
  return activation_ == Activation::Relu ? (v > 0.0 ? v : 0.0) : v;
}

double MicroNet::act_grad(double pre) const {
  return activation_ == Activation::Relu ? (pre > 0.0 ? 1.0 : 0.0) : 1.0;
}

MicroNet::ForwardPass MicroNet::forward(const ImageTensor& x) const {
  check_input(x);
  const int W = in_shape_.width, H = in_shape_.height, C = in_shape_.channels;
  const int W2 = W / 2, H2 = H / 2;
  ForwardPass fp;

  conv_forward(x.data(), W, H, C, conv1_w_, conv1_b_, kConv1Filters,
               fp.conv1_pre);
  fp.conv1_post.resize(fp.conv1_pre.size());
  for (std::size_t i = 0; i < fp.conv1_pre.size(); ++i) {
    fp.conv1_post[i] = act(fp.conv1_pre[i]);
  }

  avgpool2_forward(fp.conv1_post, W, H, kConv1Filters, fp.pool1);

  conv_forward(fp.pool1, W2, H2, kConv1Filters, conv2_w_, conv2_b_,
               kConv2Filters, fp.conv2_pre);
  fp.conv2_post.resize(fp.conv2_pre.size());
  for (std::size_t i = 0; i < fp.conv2_pre.size(); ++i) {
    fp.conv2_post[i] = act(fp.conv2_pre[i]);
  }

  fp.gap.assign(kConv2Filters, 0.0);
  const double inv_area = 1.0 / (W2 * H2);
  for (int h = 0; h < H2; ++h) {
    for (int w = 0; w < W2; ++w) {
      for (int f = 0; f < kConv2Filters; ++f) {
        fp.gap[f] += fp.conv2_post[fm_index(w, h, f, W2, kConv2Filters)];
      }
    }
  }
  for (auto& v : fp.gap) v *= inv_area;

  fp.logits.assign(num_classes_, 0.0);
  for (int j = 0; j < num_classes_; ++j) {
    double acc = dense_b_[j];
    for (int f = 0; f < kConv2Filters; ++f) {
      acc += dense_w_[static_cast<std::size_t>(j) * kConv2Filters + f] *
             fp.gap[f];
    }
    fp.logits[j] = acc;
  }
  return fp;
}

void MicroNet::backward(const ImageTensor& x, const ForwardPass& fp,
                        const std::vector<double>& dlogits, Gradients* grads,
                        std::vector<double>* dinput) const {
  const int W = in_shape_.width, H = in_shape_.height, C = in_shape_.channels;
  const int W2 = W / 2, H2 = H / 2;

  // dense
  std::vector<double> dgap(kConv2Filters, 0.0);
  for (int j = 0; j < num_classes_; ++j) {
    const double g = dlogits[j];
    if (grads) grads->dense_b[j] += g;
    for (int f = 0; f < kConv2Filters; ++f) {
      const std::size_t wi = static_cast<std::size_t>(j) * kConv2Filters + f;
      dgap[f] += dense_w_[wi] * g;
      if (grads) grads->dense_w[wi] += g * fp.gap[f];
    }
  }

  // global average pool
  std::vector<double> dconv2_post(fp.conv2_post.size());
  const double inv_area = 1.0 / (W2 * H2);
  for (int h = 0; h < H2; ++h) {
    for (int w = 0; w < W2; ++w) {
      for (int f = 0; f < kConv2Filters; ++f) {
        dconv2_post[fm_index(w, h, f, W2, kConv2Filters)] =
            dgap[f] * inv_area;
      }
    }
  }

  // activation 2
  std::vector<double> dconv2_pre(fp.conv2_pre.size());
  for (std::size_t i = 0; i < dconv2_pre.size(); ++i) {
    dconv2_pre[i] = dconv2_post[i] * act_grad(fp.conv2_pre[i]);
  }

  // conv2
  std::vector<double> dpool1;
  conv_backward_input(dconv2_pre, W2, H2, kConv1Filters, conv2_w_,
                      kConv2Filters, dpool1);
  if (grads) {
    conv_backward_weights(dconv2_pre, fp.pool1, W2, H2, kConv1Filters,
                          kConv2Filters, grads->conv2_w, grads->conv2_b);
  }

  // average pool
  std::vector<double> dconv1_post;
  avgpool2_backward(dpool1, W, H, kConv1Filters, dconv1_post);

  // activation 1
  std::vector<double> dconv1_pre(fp.conv1_pre.size());
  for (std::size_t i = 0; i < dconv1_pre.size(); ++i) {
    dconv1_pre[i] = dconv1_post[i] * act_grad(fp.conv1_pre[i]);
  }

  // conv1
  if (grads) {
    conv_backward_weights(dconv1_pre, x.data(), W, H, C, kConv1Filters,
                          grads->conv1_w, grads->conv1_b);
  }
  if (dinput) {
    conv_backward_input(dconv1_pre, W, H, C, conv1_w_, kConv1Filters,
                        *dinput);
  }
}

std::vector<double> MicroNet::logits(const ImageTensor& x) const {
  return forward(x).logits;
}

AttributionMap MicroNet::input_gradient(const ImageTensor& x,
                                        int class_index) const {
  check_class(class_index);
  const ForwardPass fp = forward(x);
  std::vector<double> dlogits(num_classes_, 0.0);
  dlogits[class_index] = 1.0;
  std::vector<double> dinput;
  backward(x, fp, dlogits, nullptr, &dinput);
  return AttributionMap(in_shape_, std::move(dinput));
}

LayerTrace MicroNet::layer_trace(const ImageTensor& x) const {
  const ForwardPass fp = forward(x);
  const int W = in_shape_.width, H = in_shape_.height, C = in_shape_.channels;
  const int W2 = W / 2, H2 = H / 2;
  const int J = num_classes_;

  LayerTrace trace;
  trace.logits = fp.logits;

  auto add_linear = [&trace](std::string name, std::vector<double> in,
                             std::vector<double> out,
                             std::function<std::vector<double>(
                                 const std::vector<double>&)> vjp) {
    LayerRecord rec;
    rec.name = std::move(name);
    rec.kind = LayerRecord::Kind::Linear;
    rec.input = std::move(in);
    rec.output = std::move(out);
    rec.vjp = std::move(vjp);
    trace.layers.push_back(std::move(rec));
  };
  auto add_act = [&trace, this](std::string name, std::vector<double> in,
                                std::vector<double> out) {
    LayerRecord rec;
    rec.name = std::move(name);
    rec.input = std::move(in);
    rec.output = std::move(out);
    if (activation_ == Activation::Relu) {
      rec.kind = LayerRecord::Kind::Relu;
    } else {
      rec.kind = LayerRecord::Kind::Linear;
      rec.vjp = [](const std::vector<double>& d) { return d; };
    }
    trace.layers.push_back(std::move(rec));
  };

  add_linear("conv1", x.data(), fp.conv1_pre,
             [this, W, H, C](const std::vector<double>& d) {
               std::vector<double> din;
               conv_backward_input(d, W, H, C, conv1_w_, kConv1Filters, din);
               return din;
             });
  add_act("act1", fp.conv1_pre, fp.conv1_post);
  add_linear("pool1", fp.conv1_post, fp.pool1,
             [W, H](const std::vector<double>& d) {
               std::vector<double> din;
               avgpool2_backward(d, W, H, kConv1Filters, din);
               return din;
             });
  add_linear("conv2", fp.pool1, fp.conv2_pre,
             [this, W2, H2](const std::vector<double>& d) {
               std::vector<double> din;
               conv_backward_input(d, W2, H2, kConv1Filters, conv2_w_,
                                   kConv2Filters, din);
               return din;
             });
  add_act("act2", fp.conv2_pre, fp.conv2_post);
  add_linear("gap", fp.conv2_post, fp.gap,
             [W2, H2](const std::vector<double>& d) {
               std::vector<double> din(
                   static_cast<std::size_t>(W2) * H2 * kConv2Filters);
               const double inv_area = 1.0 / (W2 * H2);
               for (int h = 0; h < H2; ++h) {
                 for (int w = 0; w < W2; ++w) {
                   for (int f = 0; f < kConv2Filters; ++f) {
                     din[fm_index(w, h, f, W2, kConv2Filters)] =
                         d[f] * inv_area;
                   }
                 }
               }
               return din;
             });
  add_linear("dense", fp.gap, fp.logits,
             [this, J](const std::vector<double>& d) {
               std::vector<double> din(kConv2Filters, 0.0);
               for (int j = 0; j < J; ++j) {
                 for (int f = 0; f < kConv2Filters; ++f) {
                   din[f] +=
                       dense_w_[static_cast<std::size_t>(j) * kConv2Filters +
                                f] *
                       d[j];
                 }
               }
               return din;
             });
  return trace;
}

std::vector<EpochStats> MicroNet::train(const LabeledDataset& dataset,
                                        const TrainConfig& cfg, Rng& rng) {
  if (dataset.images.empty()) {
    throw DataError("train: empty dataset");
  }
  for (int label : dataset.labels) {
    if (label < 0 || label >= num_classes_) {
      throw DataError("train: label " + std::to_string(label) +
                      " out of range [0," + std::to_string(num_classes_) +
                      ")");
    }
  }

  const std::size_t n = dataset.images.size();
  std::vector<EpochStats> log;
  log.reserve(cfg.epochs);
  Rng shuffle_rng = rng.stream("train-shuffle");

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffle_rng.permutation(n);
    double loss_sum = 0.0;
    std::size_t correct = 0;

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end =
          std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      Gradients grads;
      grads.init_like(*this);

      for (std::size_t k = start; k < end; ++k) {
        const ImageTensor& x = dataset.images[order[k]];
        const int y = dataset.labels[order[k]];
        const ForwardPass fp = forward(x);
        const ClassProbs p = softmax(fp.logits);
        loss_sum += -std::log(std::max(p[y], 1e-300));
        const int pred = static_cast<int>(std::distance(
            p.begin(), std::max_element(p.begin(), p.end())));
        if (pred == y) ++correct;

        std::vector<double> dlogits(p);
        dlogits[y] -= 1.0;
        backward(x, fp, dlogits, &grads, nullptr);
      }

      const double step = cfg.learning_rate / static_cast<double>(end - start);
      auto apply = [step](std::vector<double>& w,
                          const std::vector<double>& g) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= step * g[i];
      };
      apply(conv1_w_, grads.conv1_w);
      apply(conv1_b_, grads.conv1_b);
      apply(conv2_w_, grads.conv2_w);
      apply(conv2_b_, grads.conv2_b);
      apply(dense_w_, grads.dense_w);
      apply(dense_b_, grads.dense_b);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(n);
    stats.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    if (!std::isfinite(stats.mean_loss)) {
      throw DataError("train: loss went non-finite at epoch " +
                      std::to_string(epoch));
    }
    log.push_back(stats);
  }
  return log;
}

double MicroNet::accuracy(const LabeledDataset& dataset) const {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    const ClassProbs p = predict(dataset.images[i]);
    const int pred = static_cast<int>(
        std::distance(p.begin(), std::max_element(p.begin(), p.end())));
    if (pred == dataset.labels[i]) ++correct;
  }
  return dataset.images.empty()
             ? 0.0
             : static_cast<double>(correct) / dataset.images.size();
}

std::vector<std::pair<std::string, std::vector<double>*>>
MicroNet::parameters() {
  return {{"conv1_w", &conv1_w_}, {"conv1_b", &conv1_b_},
          {"conv2_w", &conv2_w_}, {"conv2_b", &conv2_b_},
          {"dense_w", &dense_w_}, {"dense_b", &dense_b_}};
}

std::vector<std::pair<std::string, const std::vector<double>*>>
MicroNet::parameters() const {
  return {{"conv1_w", &conv1_w_}, {"conv1_b", &conv1_b_},
          {"conv2_w", &conv2_w_}, {"conv2_b", &conv2_b_},
          {"dense_w", &dense_w_}, {"dense_b", &dense_b_}};
}

bool MicroNet::operator==(const MicroNet& other) const {
  if (in_shape_ != other.in_shape_ || num_classes_ != other.num_classes_ ||
      activation_ != other.activation_) {
    return false;
  }
  const auto a = parameters();
  const auto b = other.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (*a[i].second != *b[i].second) return false;
  }
  return true;
}

namespace {
constexpr char kWeightsMagic[6] = {'X', 'A', 'T', 'K', 'W', '\0'};
constexpr char kWeightsVersion[4] = {'0', '0', '1', '\0'};

// Parameter ranks/dims in serialization order, given (J, C).
std::vector<std::vector<std::uint32_t>> param_dims(int j, int c) {
  const auto f1 = static_cast<std::uint32_t>(MicroNet::kConv1Filters);
  const auto f2 = static_cast<std::uint32_t>(MicroNet::kConv2Filters);
  const auto k = static_cast<std::uint32_t>(MicroNet::kKernel);
  return {
      {f1, k, k, static_cast<std::uint32_t>(c)},
      {f1},
      {f2, k, k, f1},
      {f2},
      {static_cast<std::uint32_t>(j), f2},
      {static_cast<std::uint32_t>(j)},
  };
}
}  // namespace

void MicroNet::save_weights(const std::string& path) const {
  BinaryWriter w(path);
  w.write_bytes("XATKW001", 8);
  w.write_u32(static_cast<std::uint32_t>(num_classes_));
  w.write_u32(static_cast<std::uint32_t>(in_shape_.width));
  w.write_u32(static_cast<std::uint32_t>(in_shape_.height));
  w.write_u32(static_cast<std::uint32_t>(in_shape_.channels));

  const auto dims = param_dims(num_classes_, in_shape_.channels);
  const auto params = parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    w.write_string(params[p].first);
    w.write_u32(static_cast<std::uint32_t>(dims[p].size()));
    for (std::uint32_t d : dims[p]) w.write_u32(d);
    w.write_f64_array(*params[p].second);
  }
  w.commit();
}

MicroNet MicroNet::load_weights(const std::string& path) {
  BinaryReader r(path);
  char magic[8];
  r.read_bytes(magic, 8);
  if (std::memcmp(magic, kWeightsMagic, 5) != 0) {
    throw FormatError(FormatError::Kind::BadMagic,
                      path + ": not a weights file (bad magic)");
  }
  if (std::memcmp(magic + 5, kWeightsVersion, 3) != 0) {
    throw FormatError(FormatError::Kind::BadVersion,
                      path + ": unsupported weights version " +
                          std::string(magic + 5, 3));
  }
  const int j = static_cast<int>(r.read_u32());
  const int width = static_cast<int>(r.read_u32());
  const int height = static_cast<int>(r.read_u32());
  const int channels = static_cast<int>(r.read_u32());

  MicroNet net(Shape{width, height, channels}, j);
  const auto expected_dims = param_dims(j, channels);
  auto params = net.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    const std::string name = r.read_string();
    if (name != params[p].first) {
      throw FormatError(FormatError::Kind::BadValue,
                        path + ": unexpected parameter '" + name +
                            "', expected '" + params[p].first + "'");
    }
    const std::uint32_t rank = r.read_u32();
    if (rank != expected_dims[p].size()) {
      throw FormatError(FormatError::Kind::BadValue,
                        path + ": bad rank for " + name);
    }
    std::size_t count = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = r.read_u32();
      if (dim != expected_dims[p][d]) {
        throw FormatError(FormatError::Kind::BadValue,
                          path + ": bad dimension for " + name);
      }
      count *= dim;
    }
    *params[p].second = r.read_f64_array(count);
    for (double v : *params[p].second) {
      if (!std::isfinite(v)) {
        throw FormatError(FormatError::Kind::BadValue,
                          path + ": non-finite weight in " + name);
      }
    }
  }
  return net;
}

}  // namespace xatk
