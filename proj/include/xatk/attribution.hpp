#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xatk/model.hpp"
#include "xatk/tensor.hpp"

namespace xatk {

enum class Method { Saliency, IntegratedGradients, DeepLiftShap };

std::string method_name(Method m);
Method method_from_name(const std::string& name);  // ConfigError on unknown

struct AttributionConfig {
  Method method = Method::Saliency;

  // Integrated gradients: midpoint Riemann step count and baseline
  // (all-zeros image when unset).
  int ig_steps = 32;
  std::optional<ImageTensor> ig_baseline;

  // DeepLIFT SHAP baselines. When empty, the caller is expected to
  // resolve `dls_baseline_count` images from a pool (see
  // resolve_dls_baselines); compute_attribution then fails on an empty
  // set.
  std::vector<ImageTensor> dls_baselines;
  int dls_baseline_count = 8;

  void check() const;
};

// |d logit_j / d x| elementwise; all entries >= 0.
AttributionMap saliency(const ModelBackend& model, const ImageTensor& x,
                        int class_index);

// (x - x0) * mean of gradients sampled at the midpoints of cfg.ig_steps
// equal sub-intervals of the straight path from x0 to x.
AttributionMap integrated_gradients(const ModelBackend& model,
                                    const ImageTensor& x, int class_index,
                                    const AttributionConfig& cfg);

// Rescale-rule DeepLIFT against a single reference input. Contributions
// pass through linear layers via their vector-Jacobian products; ReLU
// units use the finite-difference multiplier delta_out/delta_in, falling
// back to the local gradient when |delta_in| < 1e-9.
AttributionMap deeplift(const ModelBackend& model, const ImageTensor& x,
                        int class_index, const ImageTensor& baseline);

// Mean of deeplift() over cfg.dls_baselines.
AttributionMap deeplift_shap(const ModelBackend& model, const ImageTensor& x,
                             int class_index, const AttributionConfig& cfg);

// Dispatch on cfg.method.
AttributionMap compute_attribution(const ModelBackend& model,
                                   const ImageTensor& x, int class_index,
                                   const AttributionConfig& cfg);

// Draw cfg.dls_baseline_count images (with replacement when the pool is
// smaller, without otherwise) from the pool via the given stream.
std::vector<ImageTensor> resolve_dls_baselines(
    const std::vector<ImageTensor>& pool, int count, Rng rng);

}  // namespace xatk
