#include "xatk/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace xatk {

void AttackConfig::check() const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("AttackConfig: alpha must lie in (0,1), got " +
                      std::to_string(alpha));
  }
  if (!(topk_frac > 0.0 && topk_frac <= 1.0)) {
    throw ConfigError("AttackConfig: topk_frac must lie in (0,1], got " +
                      std::to_string(topk_frac));
  }
  if (candidates_per_image < 1) {
    throw ConfigError("AttackConfig: candidates_per_image must be >= 1");
  }
  attribution.check();
}

bool InjectionIndexSet::contains(std::size_t flat) const {
  return std::binary_search(flat_indices.begin(), flat_indices.end(), flat);
}

std::pair<int, int> select_running_up(const ClassProbs& probs) {
  if (probs.size() < 2) {
    throw DataError("select_running_up: no running-up class exists for J < 2");
  }
  int y_star = 0;
  for (int j = 1; j < static_cast<int>(probs.size()); ++j) {
    if (probs[j] > probs[y_star]) y_star = j;  // '>' keeps the lowest index on ties
  }
  int y_r = -1;
  for (int j = 0; j < static_cast<int>(probs.size()); ++j) {
    if (j == y_star) continue;
    if (y_r < 0 || probs[j] > probs[y_r]) y_r = j;
  }
  return {y_star, y_r};
}

AttackImageSelection select_attack_images(const LabeledDataset& pool,
                                          const ModelBackend& model, int y_r,
                                          int n) {
  if (n < 1) throw ConfigError("select_attack_images: n must be >= 1");
  const std::vector<std::size_t> members = pool.indices_of_class(y_r);
  if (members.empty()) {
    throw DataError("select_attack_images: empty class pool for class " +
                    std::to_string(y_r));
  }

  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(members.size());
  for (std::size_t idx : members) {
    scored.emplace_back(model.predict(pool.images[idx])[y_r], idx);
  }
  // Descending confidence; ties toward the lower dataset index.
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) {
                     if (a.first != b.first) return a.first > b.first;
                     return a.second < b.second;
                   });

  AttackImageSelection sel;
  sel.short_pool = scored.size() < static_cast<std::size_t>(n);
  const std::size_t take = std::min<std::size_t>(n, scored.size());
  for (std::size_t i = 0; i < take; ++i) {
    sel.pool_indices.push_back(scored[i].second);
    sel.confidences.push_back(scored[i].first);
  }
  return sel;
}

InjectionIndexSet extract_topk(const AttributionMap& zbar, double topk_frac) {
  if (!(topk_frac > 0.0 && topk_frac <= 1.0)) {
    throw ConfigError("extract_topk: topk_frac must lie in (0,1]");
  }
  std::vector<std::size_t> positive;
  for (std::size_t i = 0; i < zbar.size(); ++i) {
    if (zbar[i] > 0.0) positive.push_back(i);
  }
  InjectionIndexSet out;
  if (positive.empty()) return out;  // no positive features; caller decides

  const std::size_t k = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::floor(topk_frac * static_cast<double>(positive.size()))));

  // Largest values first; ties toward the lower flat index. Selecting
  // the k largest positives maximizes the attribution sum over all
  // size-k subsets by construction.
  std::partial_sort(positive.begin(), positive.begin() + k, positive.end(),
                    [&zbar](std::size_t a, std::size_t b) {
                      if (zbar[a] != zbar[b]) return zbar[a] > zbar[b];
                      return a < b;
                    });
  positive.resize(k);
  std::sort(positive.begin(), positive.end());
  out.flat_indices = std::move(positive);
  return out;
}

ImageTensor inject(const ImageTensor& x, const ImageTensor& xbar,
                   const InjectionIndexSet& idx, double alpha) {
  require_same_shape(x, xbar, "inject");
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("inject: alpha must lie in [0,1]");
  }
  ImageTensor out = x;
  for (std::size_t flat : idx.flat_indices) {
    if (flat >= x.size()) {
      throw ShapeError("inject: coordinate " + std::to_string(flat) +
                       " out of bounds for shape " + x.shape().str());
    }
    const double blended = (1.0 - alpha) * x[flat] + alpha * xbar[flat];
    out[flat] = std::clamp(blended, 0.0, 1.0);
  }
  return out;
}

std::pair<ImageTensor, InjectionIndexSet> gaussian_baseline(
    const ImageTensor& x, std::size_t k, double alpha, Rng& rng) {
  if (k > x.size()) {
    throw ConfigError("gaussian_baseline: k exceeds tensor size");
  }
  InjectionIndexSet idx;
  idx.flat_indices = rng.sample_without_replacement(x.size(), k);

  ImageTensor noise = x;
  for (std::size_t flat : idx.flat_indices) {
    noise[flat] = std::clamp(x[flat] + rng.gaussian(), 0.0, 1.0);
  }
  return {inject(x, noise, idx, alpha), idx};
}

std::vector<AttackOutcome> run_attack(const ModelBackend& model,
                                      const ImageTensor& x,
                                      const LabeledDataset& pool,
                                      const AttackConfig& cfg) {
  cfg.check();

  // Phase 1: running-up class and attack candidates, from the unmodified
  // prediction only (black-box contract).
  const ClassProbs p = model.predict(x);
  const auto [y_star, y_r] = select_running_up(p);
  const AttackImageSelection sel =
      select_attack_images(pool, model, y_r, cfg.candidates_per_image);

  const int extraction_class =
      cfg.target_class == AttackTargetClass::RunningUp ? y_r : y_star;

  // Original explanation, computed once at the predicted class.
  const AttributionMap z =
      compute_attribution(model, x, y_star, cfg.attribution);

  std::vector<AttackOutcome> outcomes;
  outcomes.reserve(sel.pool_indices.size());

  for (std::size_t rank = 0; rank < sel.pool_indices.size(); ++rank) {
    const ImageTensor& xbar = pool.images[sel.pool_indices[rank]];
    require_same_shape(x, xbar, "run_attack pool image");

    AttackOutcome outcome;
    outcome.attack_image_id = sel.pool_indices[rank];
    outcome.candidate_rank = static_cast<int>(rank);
    outcome.original_class = y_star;
    outcome.running_up_class = y_r;
    if (sel.short_pool) outcome.flags.push_back("short_pool");

    // Phase 2: the attack image's explanation at the class it was
    // selected for.
    const AttributionMap zbar =
        compute_attribution(model, xbar, extraction_class, cfg.attribution);
    outcome.indices = extract_topk(zbar, cfg.topk_frac);

    if (outcome.indices.empty()) {
      // Degenerate attribution map: report an identity outcome instead
      // of killing the sweep.
      outcome.corrupted = x;
      outcome.flags.push_back("no_positive_features");
      outcome.explanation_change_pct = 0.0;
      outcome.ssim = 1.0;
      outcome.confidence_change = 0.0;
      outcomes.push_back(std::move(outcome));
      continue;
    }

    // Phase 3: single-step injection, then the three measurements.
    outcome.corrupted = inject(x, xbar, outcome.indices, cfg.alpha);

    const AttributionMap zhat =
        compute_attribution(model, outcome.corrupted, y_star,
                            cfg.attribution);
    outcome.explanation_change_pct = explanation_change_pct(z, zhat);
    outcome.ssim = ssim(x, outcome.corrupted, cfg.ssim);
    outcome.confidence_change =
        prediction_change(p, model.predict(outcome.corrupted), y_star);
    outcomes.push_back(std::move(outcome));
  }
  return outcomes;
}

}  // namespace xatk
