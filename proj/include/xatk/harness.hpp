#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xatk/attack.hpp"
#include "xatk/data_io.hpp"
#include "xatk/model.hpp"

namespace xatk {

constexpr int kCsvSchemaVersion = 1;

// Grid definition for the experiment engine. Defaults mirror the
// reference sweep design.
struct SweepSpec {
  std::vector<Method> methods = {Method::Saliency, Method::IntegratedGradients,
                                 Method::DeepLiftShap};
  std::vector<double> alphas = {0.03, 0.06, 0.09, 0.12, 0.15};
  std::vector<double> topks = {0.01, 0.05, 0.1, 0.15, 0.2,
                               0.3,  0.4,  0.5, 0.6,  0.8};
  int candidates = 3;
  // Attacked-image count; 0 means one random image per class.
  int images = 0;
  bool include_baseline = true;
  std::uint64_t master_seed = 0;
  int workers = 1;
  int ig_steps = 32;
  int dls_baseline_count = 8;

  void check() const;
};

struct ResultRow {
  std::string method;
  double alpha = 0.0;
  double topk = 0.0;
  std::uint64_t image_id = 0;
  int candidate_rank = 0;
  std::string variant;  // "attack" or "baseline"
  double expl_change_pct = 0.0;
  double ssim = 1.0;
  double conf_change_pp = 0.0;  // percentage points
  int running_up_class = 0;
  std::string flags;  // ';'-separated
};

// Deterministic pick of attacked images: one random index per class
// (or `count` total when count > 0), drawn from the attack pool.
std::vector<std::size_t> choose_attack_targets(const LabeledDataset& pool,
                                               int count, Rng rng);

// Full grid sweep. `pool` supplies attack candidates and DeepLIFT SHAP
// baselines; `targets` are indices into `attack_pool` naming the images
// under attack. Per-cell failures become flagged rows, never aborts.
std::vector<ResultRow> run_sweep(const ModelBackend& model,
                                 const LabeledDataset& pool,
                                 const LabeledDataset& attack_pool,
                                 const std::vector<std::size_t>& targets,
                                 const SweepSpec& spec);

void write_result_csv(const std::string& path,
                      const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_result_csv(const std::string& path);

// Aggregated report: per (method, alpha, topk, variant) the mean +/- std
// of the explanation change, mean confidence change, and mean SSIM,
// written as a Markdown table.
void write_report_md(const std::string& path,
                     const std::vector<ResultRow>& rows);

// Running-up-class comparison: per cell, the explanation change obtained
// with the running-up class versus the mean over every other class.
struct CompareRow {
  std::string method;
  double alpha = 0.0;
  double topk = 0.0;
  std::uint64_t image_id = 0;
  int running_up_class = 0;
  double runup_expl_change_pct = 0.0;
  double other_mean_expl_change_pct = 0.0;
  std::string flags;
};

std::vector<CompareRow> run_compare_classes(
    const ModelBackend& model, const LabeledDataset& pool,
    const LabeledDataset& attack_pool,
    const std::vector<std::size_t>& targets, const SweepSpec& spec);

void write_compare_csv(const std::string& path,
                       const std::vector<CompareRow>& rows);

// Confidence-rank ablation: top-confidence candidates versus a low-rank
// window of the running-up class ordering.
struct RankRow {
  std::string method;
  double alpha = 0.0;
  double topk = 0.0;
  std::uint64_t image_id = 0;
  double top_expl_change_pct = 0.0;
  double low_expl_change_pct = 0.0;
  std::string flags;
};

std::vector<RankRow> run_confidence_rank(
    const ModelBackend& model, const LabeledDataset& pool,
    const LabeledDataset& attack_pool,
    const std::vector<std::size_t>& targets, const SweepSpec& spec,
    int low_rank_first, int low_rank_last);  // 1-based, inclusive

void write_rank_csv(const std::string& path, const std::vector<RankRow>& rows);

// Shortest round-trip decimal representation (CSV float format).
std::string format_double(double v);

}  // namespace xatk
