// Command-line surface: dataset generation, training, single attacks,
// parameter sweeps, and report aggregation.
//
// Exit codes: 0 success, 1 usage error, 2 data/model error, 3 internal
// invariant violation.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xatk/attack.hpp"
#include "xatk/attribution.hpp"
#include "xatk/data_io.hpp"
#include "xatk/harness.hpp"
#include "xatk/metrics.hpp"
#include "xatk/micronet.hpp"

namespace {

using nlohmann::json;

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  return out;
}

std::vector<xatk::Method> parse_method_list(const std::string& csv) {
  std::vector<xatk::Method> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(xatk::method_from_name(tok));
  }
  return out;
}

// Merge a JSON config file into argv: every top-level key becomes
// "--key value" unless the flag already appears on the command line
// (flags win on conflict). Array values are joined with commas.
std::vector<std::string> merge_config_args(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    }
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) {
    throw xatk::ConfigError("cannot open config file: " + config_path);
  }
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw xatk::ConfigError("bad JSON in " + config_path + ": " + e.what());
  }
  if (!cfg.is_object()) {
    throw xatk::ConfigError("config must be a JSON object");
  }

  auto has_flag = [&args](const std::string& flag) {
    for (const auto& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };

  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    const std::string flag = "--" + it.key();
    if (has_flag(flag)) continue;
    std::string value;
    if (it.value().is_array()) {
      for (const auto& v : it.value()) {
        if (!value.empty()) value += ',';
        value += v.is_string() ? v.get<std::string>() : v.dump();
      }
    } else if (it.value().is_string()) {
      value = it.value().get<std::string>();
    } else {
      value = it.value().dump();
    }
    args.push_back(flag);
    args.push_back(value);
  }
  return args;
}

struct CommonGrid {
  std::string methods = "saliency,integrated_gradients,deeplift_shap";
  std::string alphas = "0.03,0.06,0.09,0.12,0.15";
  std::string topks = "0.01,0.05,0.1,0.15,0.2,0.3,0.4,0.5,0.6,0.8";
  int candidates = 3;
  int images = 0;
  std::uint64_t seed = 0;
  int workers = 1;
  int ig_steps = 32;
  int dls_baselines = 8;
  bool no_baseline = false;

  xatk::SweepSpec to_spec() const {
    xatk::SweepSpec spec;
    spec.methods = parse_method_list(methods);
    spec.alphas = parse_double_list(alphas);
    spec.topks = parse_double_list(topks);
    spec.candidates = candidates;
    spec.images = images;
    spec.include_baseline = !no_baseline;
    spec.master_seed = seed;
    spec.workers = workers;
    spec.ig_steps = ig_steps;
    spec.dls_baseline_count = dls_baselines;
    return spec;
  }
};

void add_grid_options(CLI::App* sub, CommonGrid& grid) {
  sub->add_option("--methods", grid.methods,
                  "Comma-separated attribution methods");
  sub->add_option("--alphas", grid.alphas, "Comma-separated alpha values");
  sub->add_option("--topks", grid.topks, "Comma-separated top-k fractions");
  sub->add_option("--candidates", grid.candidates,
                  "Attack candidates per image");
  sub->add_option("--images", grid.images,
                  "Attacked image count (0 = one random image per class)");
  sub->add_option("--seed", grid.seed, "Master seed");
  sub->add_option("--workers", grid.workers, "Worker thread count");
  sub->add_option("--ig-steps", grid.ig_steps,
                  "Integrated-gradients step count");
  sub->add_option("--dls-baselines", grid.dls_baselines,
                  "DeepLIFT SHAP baseline count");
  sub->add_flag("--no-baseline", grid.no_baseline,
                "Skip the Gaussian baseline variant");
}

int run(int argc, char** argv) {
  CLI::App app{"xatk: one-step black-box attack on post-hoc explanations"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON config file; command-line flags win on conflict");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate the toy dataset");
  std::string gen_out;
  int gen_classes = 10, gen_per_class = 40, gen_side = 16;
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "Output dataset path")->required();
  gen->add_option("--classes", gen_classes, "Class count");
  gen->add_option("--per-class", gen_per_class, "Images per class");
  gen->add_option("--side", gen_side, "Image side length");
  gen->add_option("--seed", gen_seed, "Generator seed");

  // train
  auto* train = app.add_subcommand("train", "Train a MicroNet classifier");
  std::string train_data, train_out;
  int train_epochs = 150, train_batch = 16;
  double train_lr = 0.05;
  std::uint64_t train_seed = 0;
  train->add_option("--data", train_data, "Training dataset")->required();
  train->add_option("--out", train_out, "Output weights path")->required();
  train->add_option("--epochs", train_epochs, "Epochs");
  train->add_option("--lr", train_lr, "Learning rate");
  train->add_option("--batch", train_batch, "Batch size");
  train->add_option("--seed", train_seed, "Init/shuffle seed");

  // attack (single)
  auto* atk = app.add_subcommand("attack", "Attack a single image");
  std::string atk_model, atk_data, atk_image, atk_method = "saliency";
  std::string atk_out_prefix = "attack";
  int atk_image_index = -1;
  double atk_alpha = 0.09, atk_topk = 0.1;
  std::uint64_t atk_seed = 0;
  atk->add_option("--model", atk_model, "Weights file")->required();
  atk->add_option("--data", atk_data, "Candidate pool dataset")->required();
  atk->add_option("--image", atk_image, "Original image (P6 PPM)");
  atk->add_option("--image-index", atk_image_index,
                  "Original image as a pool index (alternative to --image)");
  atk->add_option("--method", atk_method, "Attribution method");
  atk->add_option("--alpha", atk_alpha, "Blend weight in (0,1)");
  atk->add_option("--topk", atk_topk, "Top-k fraction in (0,1]");
  atk->add_option("--seed", atk_seed, "Seed (DeepLIFT SHAP baselines)");
  atk->add_option("--out", atk_out_prefix, "Output file prefix");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Full parameter-grid sweep");
  std::string sweep_model, sweep_data, sweep_attack_data, sweep_out;
  CommonGrid sweep_grid;
  sweep->add_option("--model", sweep_model, "Weights file")->required();
  sweep->add_option("--data", sweep_data, "Candidate pool dataset")->required();
  sweep->add_option("--attack-data", sweep_attack_data,
                    "Dataset supplying attacked images (default: --data)");
  sweep->add_option("--out", sweep_out, "Output CSV path")->required();
  add_grid_options(sweep, sweep_grid);

  // report
  auto* report = app.add_subcommand("report", "Aggregate a sweep CSV");
  std::string report_in, report_out;
  report->add_option("--in", report_in, "Input CSV")->required();
  report->add_option("--out", report_out, "Output Markdown path")->required();

  // compare-classes
  auto* cmp = app.add_subcommand(
      "compare-classes", "Running-up class vs every other class");
  std::string cmp_model, cmp_data, cmp_attack_data, cmp_out;
  CommonGrid cmp_grid;
  cmp->add_option("--model", cmp_model, "Weights file")->required();
  cmp->add_option("--data", cmp_data, "Candidate pool dataset")->required();
  cmp->add_option("--attack-data", cmp_attack_data,
                  "Dataset supplying attacked images (default: --data)");
  cmp->add_option("--out", cmp_out, "Output CSV path")->required();
  add_grid_options(cmp, cmp_grid);

  // confidence-rank
  auto* rank = app.add_subcommand(
      "confidence-rank", "Top-confidence vs low-rank attack images");
  std::string rank_model, rank_data, rank_attack_data, rank_out;
  CommonGrid rank_grid;
  int rank_low_first = 0, rank_low_last = 0;
  rank->add_option("--model", rank_model, "Weights file")->required();
  rank->add_option("--data", rank_data, "Candidate pool dataset")->required();
  rank->add_option("--attack-data", rank_attack_data,
                   "Dataset supplying attacked images (default: --data)");
  rank->add_option("--out", rank_out, "Output CSV path")->required();
  rank->add_option("--low-first", rank_low_first,
                   "Low-rank window start (1-based)")
      ->required();
  rank->add_option("--low-last", rank_low_last,
                   "Low-rank window end (1-based, inclusive)")
      ->required();
  add_grid_options(rank, rank_grid);

  // Let --config (an app-level flag) appear after the subcommand name.
  for (CLI::App* sub : {gen, train, atk, sweep, report, cmp, rank}) {
    sub->fallthrough();
  }

  std::vector<std::string> args;
  try {
    args = merge_config_args(argc, argv);
  } catch (const xatk::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::reverse(args.begin(), args.end());  // CLI11 wants reversed args
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (gen->parsed()) {
    const xatk::LabeledDataset ds =
        xatk::generate_toy_dataset(gen_classes, gen_per_class, gen_side,
                                   gen_seed);
    xatk::dataset_save(gen_out, ds);
    std::cout << "wrote " << ds.size() << " images (" << gen_classes
              << " classes, " << gen_side << "x" << gen_side << "x3) to "
              << gen_out << "\n";
    return 0;
  }

  if (train->parsed()) {
    const xatk::LabeledDataset ds = xatk::dataset_load(train_data);
    xatk::Rng rng(train_seed);
    xatk::MicroNet net = xatk::MicroNet::random_init(
        ds.image_shape(), ds.class_count, rng);
    xatk::TrainConfig cfg;
    cfg.epochs = train_epochs;
    cfg.learning_rate = train_lr;
    cfg.batch_size = train_batch;
    const auto log = net.train(ds, cfg, rng);
    net.save_weights(train_out);
    std::cout << "final epoch " << log.back().epoch
              << ": loss=" << log.back().mean_loss
              << " accuracy=" << log.back().accuracy << "\n";
    std::cout << "wrote weights to " << train_out << "\n";
    return 0;
  }

  if (atk->parsed()) {
    const xatk::MicroNet net = xatk::MicroNet::load_weights(atk_model);
    const xatk::LabeledDataset pool = xatk::dataset_load(atk_data);
    xatk::ImageTensor x;
    if (!atk_image.empty()) {
      x = xatk::ppm_read(atk_image);
    } else if (atk_image_index >= 0) {
      if (static_cast<std::size_t>(atk_image_index) >= pool.size()) {
        throw xatk::DataError("image index out of range");
      }
      x = pool.images[atk_image_index];
    } else {
      std::cerr << "error: one of --image / --image-index is required\n";
      return 1;
    }

    xatk::AttackConfig cfg;
    cfg.alpha = atk_alpha;
    cfg.topk_frac = atk_topk;
    cfg.candidates_per_image = 1;
    cfg.attribution.method = xatk::method_from_name(atk_method);
    if (cfg.attribution.method == xatk::Method::DeepLiftShap) {
      cfg.attribution.dls_baselines = xatk::resolve_dls_baselines(
          pool.images, cfg.attribution.dls_baseline_count,
          xatk::Rng(atk_seed).stream("dls-baselines"));
    }

    const auto outcomes = xatk::run_attack(net, x, pool, cfg);
    const xatk::AttackOutcome& o = outcomes.front();

    xatk::ppm_write(atk_out_prefix + ".corrupted.ppm", o.corrupted);
    const xatk::AttributionMap z = xatk::compute_attribution(
        net, x, o.original_class, cfg.attribution);
    const xatk::AttributionMap zhat = xatk::compute_attribution(
        net, o.corrupted, o.original_class, cfg.attribution);
    xatk::tensors_save(atk_out_prefix + ".attributions.xatkt", {z, zhat});

    std::cout << "method=" << atk_method << " alpha=" << atk_alpha
              << " topk=" << atk_topk << " y_star=" << o.original_class
              << " y_r=" << o.running_up_class << " injected="
              << o.indices.size()
              << " expl_change_pct=" << xatk::format_double(o.explanation_change_pct)
              << " ssim=" << xatk::format_double(o.ssim) << " conf_change_pp="
              << xatk::format_double(100.0 * o.confidence_change) << "\n";
    return 0;
  }

  if (sweep->parsed()) {
    const xatk::MicroNet net = xatk::MicroNet::load_weights(sweep_model);
    const xatk::LabeledDataset pool = xatk::dataset_load(sweep_data);
    const xatk::LabeledDataset attack_pool =
        sweep_attack_data.empty() ? pool
                                  : xatk::dataset_load(sweep_attack_data);
    const xatk::SweepSpec spec = sweep_grid.to_spec();
    const auto targets = xatk::choose_attack_targets(
        attack_pool, spec.images, xatk::Rng(spec.master_seed).stream("targets"));
    const auto rows = xatk::run_sweep(net, pool, attack_pool, targets, spec);
    xatk::write_result_csv(sweep_out, rows);
    std::cout << "wrote " << rows.size() << " rows to " << sweep_out << "\n";
    return 0;
  }

  if (report->parsed()) {
    const auto rows = xatk::read_result_csv(report_in);
    xatk::write_report_md(report_out, rows);
    std::cout << "wrote report to " << report_out << "\n";
    return 0;
  }

  if (cmp->parsed()) {
    const xatk::MicroNet net = xatk::MicroNet::load_weights(cmp_model);
    const xatk::LabeledDataset pool = xatk::dataset_load(cmp_data);
    const xatk::LabeledDataset attack_pool =
        cmp_attack_data.empty() ? pool : xatk::dataset_load(cmp_attack_data);
    const xatk::SweepSpec spec = cmp_grid.to_spec();
    const auto targets = xatk::choose_attack_targets(
        attack_pool, spec.images, xatk::Rng(spec.master_seed).stream("targets"));
    const auto rows =
        xatk::run_compare_classes(net, pool, attack_pool, targets, spec);
    xatk::write_compare_csv(cmp_out, rows);
    std::cout << "wrote " << rows.size() << " rows to " << cmp_out << "\n";
    return 0;
  }

  if (rank->parsed()) {
    const xatk::MicroNet net = xatk::MicroNet::load_weights(rank_model);
    const xatk::LabeledDataset pool = xatk::dataset_load(rank_data);
    const xatk::LabeledDataset attack_pool =
        rank_attack_data.empty() ? pool : xatk::dataset_load(rank_attack_data);
    const xatk::SweepSpec spec = rank_grid.to_spec();
    const auto targets = xatk::choose_attack_targets(
        attack_pool, spec.images, xatk::Rng(spec.master_seed).stream("targets"));
    const auto rows = xatk::run_confidence_rank(
        net, pool, attack_pool, targets, spec, rank_low_first, rank_low_last);
    xatk::write_rank_csv(rank_out, rows);
    std::cout << "wrote " << rows.size() << " rows to " << rank_out << "\n";
    return 0;
  }

  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const xatk::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const xatk::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const xatk::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const xatk::Error& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
