#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "test_support.hpp"
#include "xatk/attribution.hpp"
#include "xatk/data_io.hpp"
#include "xatk/micronet.hpp"

using namespace xatk;
using xatk::test::LinearBackend;
using xatk::test::random_image;

namespace {

LinearBackend make_linear(Shape s, Rng& rng, int classes = 3) {
  std::vector<std::vector<double>> w(classes);
  std::vector<double> b(classes);
  for (int j = 0; j < classes; ++j) {
    w[j].resize(s.size());
    for (auto& v : w[j]) v = rng.gaussian();
    b[j] = rng.gaussian();
  }
  return LinearBackend(s, std::move(w), std::move(b));
}

// Scalar network logit_0 = relu(x0): one Linear pass-through record
// followed by one Relu record, enough to exercise the rescale rule.
class ReluBackend : public ModelBackend {
 public:
  Shape input_shape() const override { return Shape{1, 1, 1}; }
  int num_classes() const override { return 1; }

  std::vector<double> logits(const ImageTensor& x) const override {
    return {std::max(0.0, x[0])};
  }

  AttributionMap input_gradient(const ImageTensor& x, int) const override {
    AttributionMap g(1, 1, 1);
    g[0] = x[0] > 0.0 ? 1.0 : 0.0;
    return g;
  }

  LayerTrace layer_trace(const ImageTensor& x) const override {
    LayerTrace tr;
    LayerRecord lin;
    lin.name = "identity";
    lin.kind = LayerRecord::Kind::Linear;
    lin.input = {x[0]};
    lin.output = {x[0]};
    lin.vjp = [](const std::vector<double>& cot) { return cot; };
    LayerRecord relu;
    relu.name = "relu";
    relu.kind = LayerRecord::Kind::Relu;
    relu.input = {x[0]};
    relu.output = {std::max(0.0, x[0])};
    tr.logits = relu.output;
    tr.layers.push_back(std::move(lin));
    tr.layers.push_back(std::move(relu));
    return tr;
  }
};

MicroNet trained_micronet() {
  auto ds = generate_toy_dataset(3, 6, 8, 61);
  Rng init(62);
  MicroNet net = MicroNet::random_init(ds.image_shape(), 3, init);
  TrainConfig tc;
  tc.epochs = 25;
  Rng tr(63);
  net.train(ds, tc, tr);
  return net;
}

}  // namespace

TEST_CASE("method names round-trip and reject unknowns") {
  for (Method m : {Method::Saliency, Method::IntegratedGradients,
                   Method::DeepLiftShap}) {
    CHECK(method_from_name(method_name(m)) == m);
  }
  CHECK_THROWS_AS(method_from_name("gradcam"), ConfigError);
  AttributionConfig cfg;
  cfg.ig_steps = 0;
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  cfg.ig_steps = 8;
  cfg.dls_baseline_count = 0;
  CHECK_THROWS_AS(cfg.check(), ConfigError);
}

TEST_CASE("linear model: saliency is |w|") {
  Rng rng(301);
  const Shape s{4, 3, 2};
  const auto model = make_linear(s, rng);
  const ImageTensor x = random_image(s, rng);
  const AttributionMap a = saliency(model, x, 1);
  const AttributionMap w = model.input_gradient(x, 1);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == doctest::Approx(std::abs(w[i])).epsilon(1e-12));
    CHECK(a[i] >= 0.0);
  }
}

TEST_CASE("linear model: IG and zero-baseline DeepLIFT equal x * w") {
  Rng rng(302);
  const Shape s{3, 3, 2};
  const auto model = make_linear(s, rng);
  const ImageTensor x = random_image(s, rng);
  const AttributionMap w = model.input_gradient(x, 2);

  AttributionConfig cfg;
  cfg.ig_steps = 4;  // exact for an affine map regardless of step count
  const AttributionMap ig = integrated_gradients(model, x, 2, cfg);
  const ImageTensor zero(s.width, s.height, s.channels, 0.0);
  const AttributionMap dl = deeplift(model, x, 2, zero);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(std::abs(ig[i] - x[i] * w[i]) < 1e-9);
    CHECK(std::abs(dl[i] - x[i] * w[i]) < 1e-9);
  }
}

TEST_CASE("IG satisfies completeness on a trained conv net") {
  const MicroNet net = trained_micronet();
  Rng rng(303);
  const ImageTensor x = random_image(net.input_shape(), rng);
  const ImageTensor baseline = random_image(net.input_shape(), rng);

  AttributionConfig cfg;
  cfg.method = Method::IntegratedGradients;
  cfg.ig_steps = 256;
  cfg.ig_baseline = baseline;
  const AttributionMap a = integrated_gradients(net, x, 1, cfg);
  double total = 0.0;
  for (double v : a.data()) total += v;
  const double delta = net.logits(x)[1] - net.logits(baseline)[1];
  CHECK(std::abs(total - delta) < 1e-3);

  // Refining the Riemann sum moves the total toward the exact delta.
  cfg.ig_steps = 4;
  const AttributionMap coarse = integrated_gradients(net, x, 1, cfg);
  double coarse_total = 0.0;
  for (double v : coarse.data()) coarse_total += v;
  CHECK(std::abs(total - delta) <= std::abs(coarse_total - delta) + 1e-12);
}

TEST_CASE("deeplift at the reference input is identically zero") {
  const MicroNet net = trained_micronet();
  Rng rng(304);
  const ImageTensor x = random_image(net.input_shape(), rng);
  const AttributionMap a = deeplift(net, x, 0, x);
  for (double v : a.data()) CHECK(v == 0.0);
}

TEST_CASE("deeplift rescale rule on a bare ReLU") {
  const ReluBackend model;
  ImageTensor x(1, 1, 1);
  x[0] = 2.0;
  ImageTensor zero(1, 1, 1, 0.0);
  // multiplier = (relu(2)-relu(0)) / (2-0) = 1; attribution = 1 * (2-0).
  CHECK(deeplift(model, x, 0, zero)[0] == doctest::Approx(2.0));

  ImageTensor neg(1, 1, 1);
  neg[0] = -4.0;
  // multiplier = (relu(2)-relu(-4)) / 6 = 1/3; attribution = (1/3) * 6.
  CHECK(deeplift(model, x, 0, neg)[0] == doctest::Approx(2.0));
  // Both sides inactive: everything is zero.
  ImageTensor neg2(1, 1, 1);
  neg2[0] = -1.0;
  CHECK(deeplift(model, neg2, 0, neg)[0] == doctest::Approx(0.0));
}

TEST_CASE("deeplift satisfies summation-to-delta on the conv net") {
  const MicroNet net = trained_micronet();
  Rng rng(305);
  const ImageTensor x = random_image(net.input_shape(), rng);
  const ImageTensor baseline = random_image(net.input_shape(), rng);
  for (int j = 0; j < net.num_classes(); ++j) {
    const AttributionMap a = deeplift(net, x, j, baseline);
    double total = 0.0;
    for (double v : a.data()) total += v;
    const double delta = net.logits(x)[j] - net.logits(baseline)[j];
    CHECK(std::abs(total - delta) < 1e-6);
  }
}

TEST_CASE("deeplift matches IG exactly on a linearized conv net") {
  MicroNet net = trained_micronet();
  net.set_activation(Activation::Identity);
  Rng rng(306);
  const ImageTensor x = random_image(net.input_shape(), rng);
  const ImageTensor baseline = random_image(net.input_shape(), rng);
  AttributionConfig cfg;
  cfg.ig_steps = 1;  // affine network: one midpoint sample is exact
  cfg.ig_baseline = baseline;
  const AttributionMap ig = integrated_gradients(net, x, 2, cfg);
  const AttributionMap dl = deeplift(net, x, 2, baseline);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(std::abs(ig[i] - dl[i]) < 1e-9);
  }
}

TEST_CASE("deeplift_shap averages and is order-invariant") {
  const MicroNet net = trained_micronet();
  Rng rng(307);
  const ImageTensor x = random_image(net.input_shape(), rng);
  const ImageTensor b1 = random_image(net.input_shape(), rng);
  const ImageTensor b2 = random_image(net.input_shape(), rng);

  AttributionConfig cfg;
  cfg.dls_baselines = {b1};
  const AttributionMap single = deeplift_shap(net, x, 0, cfg);
  const AttributionMap direct = deeplift(net, x, 0, b1);
  CHECK(single == direct);

  cfg.dls_baselines = {b1, b2};
  const AttributionMap pair = deeplift_shap(net, x, 0, cfg);
  const AttributionMap d2 = deeplift(net, x, 0, b2);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(pair[i] == doctest::Approx(0.5 * (direct[i] + d2[i])).epsilon(1e-12));
  }

  cfg.dls_baselines = {b2, b1};
  const AttributionMap swapped = deeplift_shap(net, x, 0, cfg);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(std::abs(pair[i] - swapped[i]) < 1e-12);
  }

  cfg.dls_baselines.clear();
  CHECK_THROWS_AS(deeplift_shap(net, x, 0, cfg), ConfigError);
}

TEST_CASE("resolve_dls_baselines draws deterministically") {
  Rng rng(308);
  std::vector<ImageTensor> pool;
  for (int i = 0; i < 5; ++i) pool.push_back(random_image(Shape{2, 2, 1}, rng));

  const auto a = resolve_dls_baselines(pool, 3, Rng(9));
  const auto b = resolve_dls_baselines(pool, 3, Rng(9));
  REQUIRE(a.size() == 3);
  CHECK(a == b);

  // Oversampling falls back to drawing with replacement.
  const auto big = resolve_dls_baselines(pool, 12, Rng(10));
  CHECK(big.size() == 12);

  CHECK_THROWS_AS(resolve_dls_baselines({}, 3, Rng(11)), DataError);
  CHECK_THROWS_AS(resolve_dls_baselines(pool, 0, Rng(12)), ConfigError);
}

TEST_CASE("compute_attribution dispatches on the configured method") {
  const MicroNet net = trained_micronet();
  Rng rng(309);
  const ImageTensor x = random_image(net.input_shape(), rng);

  AttributionConfig cfg;
  cfg.method = Method::Saliency;
  CHECK(compute_attribution(net, x, 0, cfg) == saliency(net, x, 0));

  cfg.method = Method::IntegratedGradients;
  CHECK(compute_attribution(net, x, 0, cfg) ==
        integrated_gradients(net, x, 0, cfg));

  cfg.method = Method::DeepLiftShap;
  cfg.dls_baselines = {random_image(net.input_shape(), rng)};
  CHECK(compute_attribution(net, x, 0, cfg) == deeplift_shap(net, x, 0, cfg));
}
