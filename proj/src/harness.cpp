#include "xatk/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>
#include <tuple>

#include "xatk/binio.hpp"
#include "xatk/metrics.hpp"

namespace xatk {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw FormatError(FormatError::Kind::BadValue,
                      "csv: bad numeric field '" + s + "'");
  }
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  BinaryWriter w(path);
  w.write_bytes(content.data(), content.size());
  w.commit();
}

std::string join_flags(const std::vector<std::string>& flags) {
  std::string out;
  for (const auto& f : flags) {
    if (!out.empty()) out += ';';
    out += f;
  }
  return out;
}

constexpr const char* kCsvHeader =
    "schema_version,method,alpha,topk,image_id,candidate_rank,variant,"
    "expl_change_pct,ssim,conf_change_pp,running_up_class,flags";

// Run `fn(task_index)` for every task, over `workers` threads. Each task
// owns its output slot, so scheduling cannot affect results.
void parallel_tasks(std::size_t count, int workers,
                    const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < count;
         i = next.fetch_add(1)) {
      fn(i);
    }
  };
  std::vector<std::thread> threads;
  const int n = std::min<int>(workers, static_cast<int>(count));
  threads.reserve(n);
  for (int t = 0; t < n; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
}

}  // namespace

void SweepSpec::check() const {
  if (methods.empty() || alphas.empty() || topks.empty()) {
    throw ConfigError("sweep: methods, alphas, and topks must be nonempty");
  }
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) {
      throw ConfigError("sweep: alpha values must lie in (0,1)");
    }
  }
  for (double k : topks) {
    if (!(k > 0.0 && k <= 1.0)) {
      throw ConfigError("sweep: topk values must lie in (0,1]");
    }
  }
  if (candidates < 1) throw ConfigError("sweep: candidates must be >= 1");
  if (ig_steps < 1) throw ConfigError("sweep: ig_steps must be >= 1");
}

std::vector<std::size_t> choose_attack_targets(const LabeledDataset& pool,
                                               int count, Rng rng) {
  if (pool.images.empty()) throw DataError("choose_attack_targets: empty pool");
  std::vector<std::size_t> targets;
  if (count <= 0) {
    // One random image per class.
    for (int j = 0; j < pool.class_count; ++j) {
      const auto members = pool.indices_of_class(j);
      if (members.empty()) continue;
      targets.push_back(members[rng.below(members.size())]);
    }
  } else {
    if (static_cast<std::size_t>(count) > pool.size()) {
      throw DataError("choose_attack_targets: count exceeds pool size");
    }
    targets = rng.sample_without_replacement(pool.size(), count);
  }
  return targets;
}

namespace {

// Shared per-sweep inputs for one (image, method) task.
struct SweepContext {
  const ModelBackend* model;
  const LabeledDataset* pool;
  const LabeledDataset* attack_pool;
  const SweepSpec* spec;
  std::vector<ImageTensor> dls_baselines;
  Rng master{0};
};

AttributionConfig make_attr_config(const SweepContext& ctx, Method method) {
  AttributionConfig cfg;
  cfg.method = method;
  cfg.ig_steps = ctx.spec->ig_steps;
  cfg.dls_baseline_count = ctx.spec->dls_baseline_count;
  if (method == Method::DeepLiftShap) cfg.dls_baselines = ctx.dls_baselines;
  return cfg;
}

ResultRow error_row(Method method, double alpha, double topk,
                    std::size_t image_id, int rank, const char* variant,
                    const std::string& what) {
  ResultRow row;
  row.method = method_name(method);
  row.alpha = alpha;
  row.topk = topk;
  row.image_id = image_id;
  row.candidate_rank = rank;
  row.variant = variant;
  row.flags = "cell_error:" + what;
  return row;
}

// All rows for one attacked image under one method, in
// (alpha, topk, candidate, variant) order.
std::vector<ResultRow> sweep_task(const SweepContext& ctx,
                                  std::size_t image_pos, std::size_t image_id,
                                  std::size_t method_idx) {
  const SweepSpec& spec = *ctx.spec;
  const Method method = spec.methods[method_idx];
  const ModelBackend& model = *ctx.model;
  const ImageTensor& x = ctx.attack_pool->images[image_id];
  const AttributionConfig attr = make_attr_config(ctx, method);

  std::vector<ResultRow> rows;
  const std::size_t variants = spec.include_baseline ? 2 : 1;
  rows.reserve(spec.alphas.size() * spec.topks.size() * spec.candidates *
               variants);

  ClassProbs p;
  int y_star = 0, y_r = 0;
  AttackImageSelection sel;
  AttributionMap z;
  std::vector<AttributionMap> zbars;
  try {
    p = model.predict(x);
    std::tie(y_star, y_r) = select_running_up(p);
    sel = select_attack_images(*ctx.pool, model, y_r, spec.candidates);
    z = compute_attribution(model, x, y_star, attr);
    for (std::size_t idx : sel.pool_indices) {
      zbars.push_back(
          compute_attribution(model, ctx.pool->images[idx], y_r, attr));
    }
  } catch (const Error& e) {
    for (std::size_t ai = 0; ai < spec.alphas.size(); ++ai) {
      for (std::size_t ti = 0; ti < spec.topks.size(); ++ti) {
        for (int r = 0; r < spec.candidates; ++r) {
          rows.push_back(error_row(method, spec.alphas[ai], spec.topks[ti],
                                   image_id, r, "attack", e.what()));
          if (spec.include_baseline) {
            rows.push_back(error_row(method, spec.alphas[ai], spec.topks[ti],
                                     image_id, r, "baseline", e.what()));
          }
        }
      }
    }
    return rows;
  }

  const Rng task_rng = ctx.master.stream("cell").stream(
      static_cast<std::uint64_t>(image_pos), method_idx);

  for (std::size_t ai = 0; ai < spec.alphas.size(); ++ai) {
    const double alpha = spec.alphas[ai];
    for (std::size_t ti = 0; ti < spec.topks.size(); ++ti) {
      const double topk = spec.topks[ti];
      for (int rank = 0;
           rank < static_cast<int>(std::max<std::size_t>(
                      sel.pool_indices.size(), spec.candidates));
           ++rank) {
        if (rank >= static_cast<int>(sel.pool_indices.size())) {
          ResultRow row = error_row(method, alpha, topk, image_id, rank,
                                    "attack", "short_pool");
          row.flags = "short_pool";
          row.running_up_class = y_r;
          rows.push_back(row);
          if (spec.include_baseline) {
            row.variant = "baseline";
            rows.push_back(row);
          }
          continue;
        }

        ResultRow row;
        row.method = method_name(method);
        row.alpha = alpha;
        row.topk = topk;
        row.image_id = image_id;
        row.candidate_rank = rank;
        row.variant = "attack";
        row.running_up_class = y_r;

        std::size_t budget = 0;
        try {
          const ImageTensor& xbar = ctx.pool->images[sel.pool_indices[rank]];
          const InjectionIndexSet idx = extract_topk(zbars[rank], topk);
          budget = idx.size();
          std::vector<std::string> flags;
          if (sel.short_pool) flags.push_back("short_pool");
          if (idx.empty()) {
            flags.push_back("no_positive_features");
            row.expl_change_pct = 0.0;
            row.ssim = 1.0;
            row.conf_change_pp = 0.0;
          } else {
            const ImageTensor corrupted = inject(x, xbar, idx, alpha);
            const AttributionMap zhat =
                compute_attribution(model, corrupted, y_star, attr);
            row.expl_change_pct = explanation_change_pct(z, zhat);
            row.ssim = ssim(x, corrupted);
            row.conf_change_pp =
                100.0 * prediction_change(p, model.predict(corrupted), y_star);
          }
          row.flags = join_flags(flags);
        } catch (const Error& e) {
          row = error_row(method, alpha, topk, image_id, rank, "attack",
                          e.what());
          row.running_up_class = y_r;
        }
        rows.push_back(row);

        if (!spec.include_baseline) continue;

        ResultRow brow = row;
        brow.variant = "baseline";
        brow.flags.clear();
        try {
          Rng cell_rng = task_rng.stream(ai, ti, static_cast<std::uint64_t>(rank));
          if (budget == 0) {
            brow.expl_change_pct = 0.0;
            brow.ssim = 1.0;
            brow.conf_change_pp = 0.0;
            brow.flags = "no_positive_features";
          } else {
            const auto [bcor, bidx] =
                gaussian_baseline(x, budget, alpha, cell_rng);
            const AttributionMap bzhat =
                compute_attribution(model, bcor, y_star, attr);
            brow.expl_change_pct = explanation_change_pct(z, bzhat);
            brow.ssim = ssim(x, bcor);
            brow.conf_change_pp =
                100.0 * prediction_change(p, model.predict(bcor), y_star);
          }
        } catch (const Error& e) {
          brow = error_row(method, alpha, topk, image_id, rank, "baseline",
                           e.what());
          brow.running_up_class = y_r;
        }
        rows.push_back(brow);
      }
    }
  }
  return rows;
}

}  // namespace

std::vector<ResultRow> run_sweep(const ModelBackend& model,
                                 const LabeledDataset& pool,
                                 const LabeledDataset& attack_pool,
                                 const std::vector<std::size_t>& targets,
                                 const SweepSpec& spec) {
  spec.check();
  if (targets.empty()) throw DataError("run_sweep: no attack targets");

  SweepContext ctx;
  ctx.model = &model;
  ctx.pool = &pool;
  ctx.attack_pool = &attack_pool;
  ctx.spec = &spec;
  ctx.master = Rng(spec.master_seed);
  ctx.dls_baselines = resolve_dls_baselines(pool.images,
                                            spec.dls_baseline_count,
                                            ctx.master.stream("dls-baselines"));

  // One task per (method, image); slots keep the canonical order
  // regardless of scheduling.
  struct Task {
    std::size_t method_idx, image_pos;
  };
  std::vector<Task> tasks;
  for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
    for (std::size_t pi = 0; pi < targets.size(); ++pi) {
      tasks.push_back({mi, pi});
    }
  }
  std::vector<std::vector<ResultRow>> slots(tasks.size());
  parallel_tasks(tasks.size(), spec.workers, [&](std::size_t i) {
    slots[i] = sweep_task(ctx, tasks[i].image_pos, targets[tasks[i].image_pos],
                          tasks[i].method_idx);
  });

  // Merge into (method, alpha, topk, image, candidate, variant) order.
  const std::size_t variants = spec.include_baseline ? 2 : 1;
  const std::size_t per_cell = spec.candidates * variants;
  std::vector<ResultRow> rows;
  rows.reserve(tasks.size() * spec.alphas.size() * spec.topks.size() *
               per_cell);
  for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
    for (std::size_t ai = 0; ai < spec.alphas.size(); ++ai) {
      for (std::size_t ti = 0; ti < spec.topks.size(); ++ti) {
        for (std::size_t pi = 0; pi < targets.size(); ++pi) {
          const auto& task_rows = slots[mi * targets.size() + pi];
          const std::size_t base =
              (ai * spec.topks.size() + ti) * per_cell;
          for (std::size_t k = 0; k < per_cell; ++k) {
            rows.push_back(task_rows[base + k]);
          }
        }
      }
    }
  }
  return rows;
}

void write_result_csv(const std::string& path,
                      const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  os << kCsvHeader << "\n";
  for (const auto& r : rows) {
    os << kCsvSchemaVersion << ',' << r.method << ','
       << format_double(r.alpha) << ',' << format_double(r.topk) << ','
       << r.image_id << ',' << r.candidate_rank << ',' << r.variant << ','
       << format_double(r.expl_change_pct) << ',' << format_double(r.ssim)
       << ',' << format_double(r.conf_change_pp) << ',' << r.running_up_class
       << ',' << r.flags << "\n";
  }
  write_text_atomic(path, os.str());
}

std::vector<ResultRow> read_result_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError(FormatError::Kind::Io, "cannot open: " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError(FormatError::Kind::BadValue, path + ": empty file");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    const auto header = split_csv_line(line);
    const auto expected = split_csv_line(kCsvHeader);
    if (header != expected) {
      for (std::size_t i = 0; i < std::max(header.size(), expected.size());
           ++i) {
        const std::string got = i < header.size() ? header[i] : "<missing>";
        const std::string want =
            i < expected.size() ? expected[i] : "<extra>";
        if (got != want) {
          throw FormatError(FormatError::Kind::BadValue,
                            path + ": unexpected csv column '" + got +
                                "' (expected '" + want + "')");
        }
      }
    }
  }

  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 12) {
      throw FormatError(FormatError::Kind::BadValue,
                        path + ": row with " + std::to_string(f.size()) +
                            " fields, expected 12");
    }
    if (parse_double(f[0]) != kCsvSchemaVersion) {
      throw FormatError(FormatError::Kind::BadVersion,
                        path + ": unknown csv schema version " + f[0]);
    }
    ResultRow r;
    r.method = f[1];
    r.alpha = parse_double(f[2]);
    r.topk = parse_double(f[3]);
    r.image_id = static_cast<std::uint64_t>(parse_double(f[4]));
    r.candidate_rank = static_cast<int>(parse_double(f[5]));
    r.variant = f[6];
    r.expl_change_pct = parse_double(f[7]);
    r.ssim = parse_double(f[8]);
    r.conf_change_pp = parse_double(f[9]);
    r.running_up_class = static_cast<int>(parse_double(f[10]));
    r.flags = f[11];
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_report_md(const std::string& path,
                     const std::vector<ResultRow>& rows) {
  struct Stats {
    std::vector<double> expl, conf, ssim;
  };
  // Group key keeps attack/baseline rows adjacent per grid cell.
  std::map<std::tuple<std::string, double, double, std::string>, Stats> groups;
  for (const auto& r : rows) {
    if (r.flags.find("cell_error") != std::string::npos) continue;
    auto& g = groups[{r.method, r.alpha, r.topk, r.variant}];
    g.expl.push_back(r.expl_change_pct);
    g.conf.push_back(r.conf_change_pp);
    g.ssim.push_back(r.ssim);
  }

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto pop_std = [&mean](const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
  };

  std::ostringstream os;
  os << "| method | alpha | top-k | variant | expl change % (mean ± std) | "
        "conf change (pp, mean) | ssim (mean) | n |\n";
  os << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& [key, g] : groups) {
    const auto& [method, alpha, topk, variant] = key;
    os << "| " << method << " | " << format_double(alpha) << " | "
       << format_double(topk) << " | " << variant << " | "
       << format_double(mean(g.expl)) << " ± " << format_double(pop_std(g.expl))
       << " | " << format_double(mean(g.conf)) << " | "
       << format_double(mean(g.ssim)) << " | " << g.expl.size() << " |\n";
  }
  write_text_atomic(path, os.str());
}

std::vector<CompareRow> run_compare_classes(
    const ModelBackend& model, const LabeledDataset& pool,
    const LabeledDataset& attack_pool,
    const std::vector<std::size_t>& targets, const SweepSpec& spec) {
  spec.check();
  if (model.num_classes() < 3) {
    throw DataError(
        "compare-classes: needs J >= 3 (no non-running-up classes exist "
        "otherwise)");
  }

  SweepContext ctx;
  ctx.model = &model;
  ctx.pool = &pool;
  ctx.attack_pool = &attack_pool;
  ctx.spec = &spec;
  ctx.master = Rng(spec.master_seed);
  ctx.dls_baselines = resolve_dls_baselines(pool.images,
                                            spec.dls_baseline_count,
                                            ctx.master.stream("dls-baselines"));

  struct Task {
    std::size_t method_idx, image_pos;
  };
  std::vector<Task> tasks;
  for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
    for (std::size_t pi = 0; pi < targets.size(); ++pi) {
      tasks.push_back({mi, pi});
    }
  }
  std::vector<std::vector<CompareRow>> slots(tasks.size());

  parallel_tasks(tasks.size(), spec.workers, [&](std::size_t task_i) {
    const Method method = spec.methods[tasks[task_i].method_idx];
    const std::size_t image_id = targets[tasks[task_i].image_pos];
    const ImageTensor& x = attack_pool.images[image_id];
    const AttributionConfig attr = make_attr_config(ctx, method);
    std::vector<CompareRow>& rows = slots[task_i];

    const ClassProbs p = model.predict(x);
    const auto [y_star, y_r] = select_running_up(p);
    const AttributionMap z = compute_attribution(model, x, y_star, attr);

    // One attack image per class (its top-confidence member), explained
    // at that class.
    const int J = model.num_classes();
    std::vector<int> classes;
    std::vector<const ImageTensor*> xbars;
    std::vector<AttributionMap> zbars;
    for (int c = 0; c < J; ++c) {
      if (c == y_star) continue;
      const AttackImageSelection sel =
          select_attack_images(pool, model, c, 1);
      classes.push_back(c);
      xbars.push_back(&pool.images[sel.pool_indices[0]]);
      zbars.push_back(compute_attribution(model, *xbars.back(), c, attr));
    }

    for (double alpha : spec.alphas) {
      for (double topk : spec.topks) {
        CompareRow row;
        row.method = method_name(method);
        row.alpha = alpha;
        row.topk = topk;
        row.image_id = image_id;
        row.running_up_class = y_r;

        double other_sum = 0.0;
        std::size_t other_n = 0;
        std::vector<std::string> flags;
        for (std::size_t i = 0; i < classes.size(); ++i) {
          const InjectionIndexSet idx = extract_topk(zbars[i], topk);
          double change = 0.0;
          if (idx.empty()) {
            flags.push_back("no_positive_features");
          } else {
            const ImageTensor corrupted = inject(x, *xbars[i], idx, alpha);
            const AttributionMap zhat =
                compute_attribution(model, corrupted, y_star, attr);
            change = explanation_change_pct(z, zhat);
          }
          if (classes[i] == y_r) {
            row.runup_expl_change_pct = change;
          } else {
            other_sum += change;
            ++other_n;
          }
        }
        row.other_mean_expl_change_pct =
            other_n > 0 ? other_sum / static_cast<double>(other_n) : 0.0;
        row.flags = join_flags(flags);
        rows.push_back(std::move(row));
      }
    }
  });

  std::vector<CompareRow> rows;
  for (auto& s : slots) {
    rows.insert(rows.end(), s.begin(), s.end());
  }
  return rows;
}

void write_compare_csv(const std::string& path,
                       const std::vector<CompareRow>& rows) {
  std::ostringstream os;
  os << "schema_version,method,alpha,topk,image_id,running_up_class,"
        "runup_expl_change_pct,other_mean_expl_change_pct,flags\n";
  for (const auto& r : rows) {
    os << kCsvSchemaVersion << ',' << r.method << ','
       << format_double(r.alpha) << ',' << format_double(r.topk) << ','
       << r.image_id << ',' << r.running_up_class << ','
       << format_double(r.runup_expl_change_pct) << ','
       << format_double(r.other_mean_expl_change_pct) << ',' << r.flags
       << "\n";
  }
  write_text_atomic(path, os.str());
}

std::vector<RankRow> run_confidence_rank(
    const ModelBackend& model, const LabeledDataset& pool,
    const LabeledDataset& attack_pool,
    const std::vector<std::size_t>& targets, const SweepSpec& spec,
    int low_rank_first, int low_rank_last) {
  spec.check();
  if (low_rank_first < 1 || low_rank_last < low_rank_first) {
    throw ConfigError("confidence-rank: invalid low-rank window");
  }

  SweepContext ctx;
  ctx.model = &model;
  ctx.pool = &pool;
  ctx.attack_pool = &attack_pool;
  ctx.spec = &spec;
  ctx.master = Rng(spec.master_seed);
  ctx.dls_baselines = resolve_dls_baselines(pool.images,
                                            spec.dls_baseline_count,
                                            ctx.master.stream("dls-baselines"));

  struct Task {
    std::size_t method_idx, image_pos;
  };
  std::vector<Task> tasks;
  for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
    for (std::size_t pi = 0; pi < targets.size(); ++pi) {
      tasks.push_back({mi, pi});
    }
  }
  std::vector<std::vector<RankRow>> slots(tasks.size());

  parallel_tasks(tasks.size(), spec.workers, [&](std::size_t task_i) {
    const Method method = spec.methods[tasks[task_i].method_idx];
    const std::size_t image_id = targets[tasks[task_i].image_pos];
    const ImageTensor& x = attack_pool.images[image_id];
    const AttributionConfig attr = make_attr_config(ctx, method);
    std::vector<RankRow>& rows = slots[task_i];

    const ClassProbs p = model.predict(x);
    const auto [y_star, y_r] = select_running_up(p);
    const AttributionMap z = compute_attribution(model, x, y_star, attr);

    // Full confidence ordering of the running-up class, deep enough for
    // the low-rank window.
    const AttackImageSelection ordering =
        select_attack_images(pool, model, y_r, low_rank_last);
    const std::size_t available = ordering.pool_indices.size();
    const bool short_pool =
        available < static_cast<std::size_t>(low_rank_last);

    auto arm_indices = [&](int first, int last) {
      std::vector<std::size_t> out;
      const int lo =
          std::min<int>(first - 1, static_cast<int>(available) - 1);
      const int hi = std::min<int>(last - 1, static_cast<int>(available) - 1);
      for (int i = std::max(lo, 0); i <= hi; ++i) {
        out.push_back(ordering.pool_indices[i]);
      }
      return out;
    };
    const std::vector<std::size_t> top_arm = arm_indices(1, spec.candidates);
    const std::vector<std::size_t> low_arm =
        arm_indices(low_rank_first, low_rank_last);

    auto arm_attributions = [&](const std::vector<std::size_t>& arm) {
      std::vector<AttributionMap> zs;
      for (std::size_t idx : arm) {
        zs.push_back(
            compute_attribution(model, pool.images[idx], y_r, attr));
      }
      return zs;
    };
    const auto top_zbars = arm_attributions(top_arm);
    const auto low_zbars = arm_attributions(low_arm);

    auto arm_mean_change = [&](const std::vector<std::size_t>& arm,
                               const std::vector<AttributionMap>& zbars,
                               double alpha, double topk) {
      double sum = 0.0;
      for (std::size_t i = 0; i < arm.size(); ++i) {
        const InjectionIndexSet idx = extract_topk(zbars[i], topk);
        if (idx.empty()) continue;
        const ImageTensor corrupted =
            inject(x, pool.images[arm[i]], idx, alpha);
        const AttributionMap zhat =
            compute_attribution(model, corrupted, y_star, attr);
        sum += explanation_change_pct(z, zhat);
      }
      return arm.empty() ? 0.0 : sum / static_cast<double>(arm.size());
    };

    for (double alpha : spec.alphas) {
      for (double topk : spec.topks) {
        RankRow row;
        row.method = method_name(method);
        row.alpha = alpha;
        row.topk = topk;
        row.image_id = image_id;
        row.top_expl_change_pct =
            arm_mean_change(top_arm, top_zbars, alpha, topk);
        row.low_expl_change_pct =
            arm_mean_change(low_arm, low_zbars, alpha, topk);
        if (short_pool) row.flags = "short_pool";
        rows.push_back(std::move(row));
      }
    }
  });

  std::vector<RankRow> rows;
  for (auto& s : slots) {
    rows.insert(rows.end(), s.begin(), s.end());
  }
  return rows;
}

void write_rank_csv(const std::string& path,
                    const std::vector<RankRow>& rows) {
  std::ostringstream os;
  os << "schema_version,method,alpha,topk,image_id,top_expl_change_pct,"
        "low_expl_change_pct,flags\n";
  for (const auto& r : rows) {
    os << kCsvSchemaVersion << ',' << r.method << ','
       << format_double(r.alpha) << ',' << format_double(r.topk) << ','
       << r.image_id << ',' << format_double(r.top_expl_change_pct) << ','
       << format_double(r.low_expl_change_pct) << ',' << r.flags << "\n";
  }
  write_text_atomic(path, os.str());
}

}  // namespace xatk
