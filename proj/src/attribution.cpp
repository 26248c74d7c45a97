#include "xatk/attribution.hpp"

#include <cmath>

namespace xatk {

std::string method_name(Method m) {
  switch (m) {
    case Method::Saliency: return "saliency";
    case Method::IntegratedGradients: return "integrated_gradients";
    case Method::DeepLiftShap: return "deeplift_shap";
  }
  throw ConfigError("unknown method enum value");
}

Method method_from_name(const std::string& name) {
  if (name == "saliency") return Method::Saliency;
  if (name == "integrated_gradients") return Method::IntegratedGradients;
  if (name == "deeplift_shap") return Method::DeepLiftShap;
  throw ConfigError("unknown attribution method '" + name +
                    "' (expected saliency, integrated_gradients, or "
                    "deeplift_shap)");
}

void AttributionConfig::check() const {
  if (ig_steps < 1) {
    throw ConfigError("AttributionConfig: ig_steps must be >= 1");
  }
  if (dls_baseline_count < 1) {
    throw ConfigError("AttributionConfig: dls_baseline_count must be >= 1");
  }
}

AttributionMap saliency(const ModelBackend& model, const ImageTensor& x,
                        int class_index) {
  AttributionMap grad = model.input_gradient(x, class_index);
  for (auto& v : grad.data()) v = std::abs(v);
  return grad;
}

AttributionMap integrated_gradients(const ModelBackend& model,
                                    const ImageTensor& x, int class_index,
                                    const AttributionConfig& cfg) {
  cfg.check();
  const ImageTensor baseline =
      cfg.ig_baseline.value_or(ImageTensor(x.width(), x.height(),
                                           x.channels(), 0.0));
  require_same_shape(x, baseline, "integrated_gradients baseline");

  ImageTensor delta(x.shape(), x.data());
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] -= baseline[i];

  AttributionMap mean_grad(x.width(), x.height(), x.channels(), 0.0);
  ImageTensor point(x.shape(), baseline.data());
  for (int s = 0; s < cfg.ig_steps; ++s) {
    const double beta = (s + 0.5) / cfg.ig_steps;
    for (std::size_t i = 0; i < point.size(); ++i) {
      point[i] = baseline[i] + beta * delta[i];
    }
    const AttributionMap g = model.input_gradient(point, class_index);
    for (std::size_t i = 0; i < mean_grad.size(); ++i) mean_grad[i] += g[i];
  }

  for (std::size_t i = 0; i < mean_grad.size(); ++i) {
    mean_grad[i] = delta[i] * mean_grad[i] / cfg.ig_steps;
  }
  return mean_grad;
}

AttributionMap deeplift(const ModelBackend& model, const ImageTensor& x,
                        int class_index, const ImageTensor& baseline) {
  require_same_shape(x, baseline, "deeplift baseline");
  const LayerTrace tx = model.layer_trace(x);
  const LayerTrace tb = model.layer_trace(baseline);
  if (tx.layers.size() != tb.layers.size()) {
    throw DataError("deeplift: input and reference traces differ in depth");
  }
  if (class_index < 0 ||
      class_index >= static_cast<int>(tx.logits.size())) {
    throw ConfigError("deeplift: class index out of range");
  }

  // Multiplier vector, walked from the logits back to the input.
  std::vector<double> m(tx.logits.size(), 0.0);
  m[class_index] = 1.0;

  for (std::size_t li = tx.layers.size(); li-- > 0;) {
    const LayerRecord& lx = tx.layers[li];
    const LayerRecord& lb = tb.layers[li];
    if (lx.kind != lb.kind || lx.input.size() != lb.input.size()) {
      throw DataError("deeplift: trace layer '" + lx.name +
                      "' differs between input and reference");
    }
    switch (lx.kind) {
      case LayerRecord::Kind::Linear:
        m = lx.vjp(m);
        break;
      case LayerRecord::Kind::Relu:
        for (std::size_t i = 0; i < m.size(); ++i) {
          const double din = lx.input[i] - lb.input[i];
          double mult;
          if (std::abs(din) < 1e-9) {
            mult = lx.input[i] > 0.0 ? 1.0 : 0.0;  // local gradient fallback
          } else {
            mult = (lx.output[i] - lb.output[i]) / din;
          }
          m[i] *= mult;
        }
        break;
      default:
        throw DataError("deeplift: rescale rule not defined for layer '" +
                        lx.name + "'");
    }
  }

  if (m.size() != x.size()) {
    throw DataError("deeplift: trace does not reach the input layer");
  }
  AttributionMap out(x.shape(), std::move(m));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] *= x[i] - baseline[i];
  }
  return out;
}

AttributionMap deeplift_shap(const ModelBackend& model, const ImageTensor& x,
                             int class_index, const AttributionConfig& cfg) {
  if (cfg.dls_baselines.empty()) {
    throw ConfigError("deeplift_shap: empty baseline set");
  }
  AttributionMap mean(x.width(), x.height(), x.channels(), 0.0);
  for (const auto& baseline : cfg.dls_baselines) {
    const AttributionMap a = deeplift(model, x, class_index, baseline);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += a[i];
  }
  for (auto& v : mean.data()) v /= static_cast<double>(cfg.dls_baselines.size());
  return mean;
}

AttributionMap compute_attribution(const ModelBackend& model,
                                   const ImageTensor& x, int class_index,
                                   const AttributionConfig& cfg) {
  switch (cfg.method) {
    case Method::Saliency:
      return saliency(model, x, class_index);
    case Method::IntegratedGradients:
      return integrated_gradients(model, x, class_index, cfg);
    case Method::DeepLiftShap:
      return deeplift_shap(model, x, class_index, cfg);
  }
  throw ConfigError("unknown method enum value");
}

std::vector<ImageTensor> resolve_dls_baselines(
    const std::vector<ImageTensor>& pool, int count, Rng rng) {
  if (pool.empty()) {
    throw DataError("resolve_dls_baselines: empty pool");
  }
  if (count < 1) {
    throw ConfigError("resolve_dls_baselines: count must be >= 1");
  }
  std::vector<ImageTensor> out;
  out.reserve(count);
  if (static_cast<std::size_t>(count) <= pool.size()) {
    for (std::size_t idx :
         rng.sample_without_replacement(pool.size(), count)) {
      out.push_back(pool[idx]);
    }
  } else {
    for (int i = 0; i < count; ++i) {
      out.push_back(pool[rng.below(pool.size())]);
    }
  }
  return out;
}

}  // namespace xatk
