#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "xatk/attribution.hpp"
#include "xatk/data_io.hpp"
#include "xatk/metrics.hpp"
#include "xatk/model.hpp"
#include "xatk/tensor.hpp"

namespace xatk {

// Which class the attack image's explanation targets when extracting
// features. RunningUp is the default (the class the image was selected
// for); Original is kept selectable for empirical comparison.
enum class AttackTargetClass { RunningUp, Original };

struct AttackConfig {
  double alpha = 0.09;
  double topk_frac = 0.1;
  int candidates_per_image = 3;
  AttackTargetClass target_class = AttackTargetClass::RunningUp;
  AttributionConfig attribution;
  SsimConfig ssim;

  void check() const;
};

// Distinct injected coordinates, kept in ascending flat-index order.
struct InjectionIndexSet {
  std::vector<std::size_t> flat_indices;

  std::size_t size() const { return flat_indices.size(); }
  bool empty() const { return flat_indices.empty(); }
  bool contains(std::size_t flat) const;
};

struct AttackOutcome {
  ImageTensor corrupted;
  InjectionIndexSet indices;
  std::size_t attack_image_id = 0;  // pool index of the attack image
  int candidate_rank = 0;           // 0 = highest-confidence candidate
  double explanation_change_pct = 0.0;
  double ssim = 1.0;
  double confidence_change = 0.0;  // in [0,1]
  int original_class = 0;
  int running_up_class = 0;
  std::vector<std::string> flags;
};

// (y_star, y_r): predicted class and the class the model is mostly
// confused with. Ties break toward the lower class index.
std::pair<int, int> select_running_up(const ClassProbs& probs);

struct AttackImageSelection {
  std::vector<std::size_t> pool_indices;  // descending confidence
  std::vector<double> confidences;
  bool short_pool = false;  // fewer than n images existed
};

// The n pool images labeled y_r with the largest f_{y_r}, descending;
// confidence ties break toward the lower dataset index.
AttackImageSelection select_attack_images(const LabeledDataset& pool,
                                          const ModelBackend& model, int y_r,
                                          int n);

// Top-k positive attribution coordinates. k = max(1, floor(frac * P))
// over the P strictly positive entries (k = 0 when P = 0); value ties
// break toward the lower flat index.
InjectionIndexSet extract_topk(const AttributionMap& zbar, double topk_frac);

// Eq.-style alpha blend on the selected coordinates, clipped to [0,1];
// everything off-index is copied from x bit-for-bit.
ImageTensor inject(const ImageTensor& x, const ImageTensor& xbar,
                   const InjectionIndexSet& idx, double alpha);

// Matched-budget baseline: k uniformly random coordinates, noise image
// clip(x + eps) with eps ~ N(0,1), pushed through the same blend.
std::pair<ImageTensor, InjectionIndexSet> gaussian_baseline(
    const ImageTensor& x, std::size_t k, double alpha, Rng& rng);

// The full three-phase single-step pipeline for one original image:
// running-up selection, per-candidate feature extraction, injection, and
// the three metrics. Returns one outcome per candidate.
std::vector<AttackOutcome> run_attack(const ModelBackend& model,
                                      const ImageTensor& x,
                                      const LabeledDataset& pool,
                                      const AttackConfig& cfg);

}  // namespace xatk
