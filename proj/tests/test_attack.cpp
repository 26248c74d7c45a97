#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "test_support.hpp"
#include "xatk/attack.hpp"
#include "xatk/data_io.hpp"
#include "xatk/micronet.hpp"

using namespace xatk;
using xatk::test::random_image;

TEST_CASE("attack config validation") {
  AttackConfig cfg;
  CHECK_NOTHROW(cfg.check());
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  cfg.alpha = 1.0;
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  cfg = AttackConfig{};
  cfg.topk_frac = 0.0;
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  cfg.topk_frac = 1.0;
  CHECK_NOTHROW(cfg.check());
  cfg.candidates_per_image = 0;
  CHECK_THROWS_AS(cfg.check(), ConfigError);
}

TEST_CASE("select_running_up picks the strongest rival") {
  CHECK(select_running_up({0.6, 0.3, 0.1}) == std::pair<int, int>{0, 1});
  CHECK(select_running_up({0.1, 0.2, 0.7}) == std::pair<int, int>{2, 1});
  // Tie among rivals breaks toward the lower class index.
  CHECK(select_running_up({0.5, 0.25, 0.25}) == std::pair<int, int>{0, 1});
  // Tie for the top also breaks toward the lower index.
  CHECK(select_running_up({0.4, 0.4, 0.2}) == std::pair<int, int>{0, 1});
  CHECK_THROWS_AS(select_running_up({1.0}), DataError);
}

TEST_CASE("select_attack_images ranks by target-class confidence") {
  // Two-class linear model on a single pixel: logit_1 grows with x, so
  // f_1 ranks pool images by brightness.
  test::LinearBackend model(Shape{1, 1, 1}, {{-1.0}, {1.0}}, {0.0, 0.0});

  LabeledDataset pool;
  pool.class_count = 2;
  const double vals[5] = {0.2, 0.9, 0.5, 0.9, 0.1};
  const int labels[5] = {1, 1, 1, 1, 0};
  for (int i = 0; i < 5; ++i) {
    pool.images.emplace_back(1, 1, 1, vals[i]);
    pool.labels.push_back(labels[i]);
  }

  const auto sel = select_attack_images(pool, model, 1, 3);
  // Ties (indices 1 and 3, both 0.9) break toward the lower pool index.
  CHECK(sel.pool_indices == std::vector<std::size_t>{1, 3, 2});
  CHECK_FALSE(sel.short_pool);
  CHECK(std::is_sorted(sel.confidences.rbegin(), sel.confidences.rend()));

  const auto all = select_attack_images(pool, model, 1, 10);
  CHECK(all.pool_indices == std::vector<std::size_t>{1, 3, 2, 0});
  CHECK(all.short_pool);

  CHECK_THROWS_AS(select_attack_images(pool, model, 0, 0), ConfigError);
  LabeledDataset no_zero = pool;
  no_zero.images.pop_back();
  no_zero.labels.pop_back();
  CHECK_THROWS_AS(select_attack_images(no_zero, model, 0, 1), DataError);
}

TEST_CASE("extract_topk matches exhaustive enumeration") {
  Rng rng(501);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(16));
    AttributionMap z(n, 1, 1);
    for (auto& v : z.data()) {
      v = rng.gaussian();
      if (rng.uniform() < 0.3) v = 0.0;  // force ties at zero
      if (rng.uniform() < 0.2) v = 0.5;  // force positive ties
    }
    const double frac = 0.05 + 0.95 * rng.uniform();
    const auto got = extract_topk(z, frac);

    // Oracle: sort positive entries by (value desc, index asc), take
    // max(1, floor(frac * P)) of them.
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (z[i] > 0.0) pos.push_back(i);
    }
    std::stable_sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) {
      return z[a] > z[b];
    });
    std::size_t k = 0;
    if (!pos.empty()) {
      k = std::max<std::size_t>(
          1, static_cast<std::size_t>(frac * static_cast<double>(pos.size())));
      k = std::min(k, pos.size());
    }
    std::vector<std::size_t> expect(pos.begin(), pos.begin() + k);
    std::sort(expect.begin(), expect.end());
    CHECK(got.flat_indices == expect);
    CHECK(std::is_sorted(got.flat_indices.begin(), got.flat_indices.end()));
  }
}

TEST_CASE("extract_topk budgets nest and an all-negative map is empty") {
  AttributionMap z(10, 1, 1);
  Rng rng(502);
  for (auto& v : z.data()) v = rng.gaussian();
  const auto small = extract_topk(z, 0.2);
  const auto large = extract_topk(z, 0.8);
  for (std::size_t i : small.flat_indices) CHECK(large.contains(i));

  AttributionMap neg(4, 1, 1, -1.0);
  CHECK(extract_topk(neg, 0.5).empty());
  CHECK_THROWS_AS(extract_topk(z, 0.0), ConfigError);
  CHECK_THROWS_AS(extract_topk(z, 1.5), ConfigError);
}

TEST_CASE("inject blends only on-index coordinates and clips") {
  ImageTensor x(3, 1, 1);
  x[0] = 0.5;
  x[1] = 0.5;
  x[2] = 0.25;
  ImageTensor xbar(3, 1, 1);
  xbar[0] = 1.0;
  xbar[1] = 1.0;
  xbar[2] = 1.0;
  InjectionIndexSet idx;
  idx.flat_indices = {0};

  // (1-0.1)*0.5 + 0.1*1.0 = 0.55 on the selected coordinate only.
  const ImageTensor out = inject(x, xbar, idx, 0.1);
  CHECK(out[0] == doctest::Approx(0.55).epsilon(1e-15));
  CHECK(out[1] == 0.5);
  CHECK(out[2] == 0.25);

  // alpha = 0 is a bit-for-bit copy even on-index.
  CHECK(inject(x, xbar, idx, 0.0) == x);
  // alpha = 1 replaces the coordinate outright.
  CHECK(inject(x, xbar, idx, 1.0)[0] == 1.0);

  // The blend clips into [0,1] when the attack value is extreme.
  ImageTensor wild(3, 1, 1, 0.0);
  wild[0] = -5.0;
  const ImageTensor clipped = inject(x, wild, idx, 0.5);
  CHECK(clipped[0] == 0.0);

  InjectionIndexSet oob;
  oob.flat_indices = {3};
  CHECK_THROWS_AS(inject(x, xbar, oob, 0.5), ShapeError);
  ImageTensor other(4, 1, 1, 0.5);
  CHECK_THROWS_AS(inject(x, other, idx, 0.5), ShapeError);
  CHECK_THROWS_AS(inject(x, xbar, idx, -0.1), ConfigError);
  CHECK_THROWS_AS(inject(x, xbar, idx, 1.1), ConfigError);
}

TEST_CASE("gaussian baseline perturbs exactly k coordinates") {
  Rng rng(503);
  const ImageTensor x = random_image(Shape{6, 6, 3}, rng);

  Rng noise(504);
  const auto [pert, idx] = gaussian_baseline(x, 12, 0.2, noise);
  CHECK(idx.size() == 12);
  CHECK(std::is_sorted(idx.flat_indices.begin(), idx.flat_indices.end()));
  CHECK(std::adjacent_find(idx.flat_indices.begin(), idx.flat_indices.end()) ==
        idx.flat_indices.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (idx.contains(i)) {
      CHECK(pert[i] >= 0.0);
      CHECK(pert[i] <= 1.0);
    } else {
      CHECK(pert[i] == x[i]);
    }
  }

  Rng noise2(504);
  const auto [pert2, idx2] = gaussian_baseline(x, 12, 0.2, noise2);
  CHECK(pert2 == pert);
  CHECK(idx2.flat_indices == idx.flat_indices);

  Rng noise3(505);
  const auto [same, idx3] = gaussian_baseline(x, 0, 0.2, noise3);
  CHECK(same == x);
  CHECK(idx3.empty());
  Rng noise4(506);
  const auto [unchanged, idx4] = gaussian_baseline(x, 5, 0.0, noise4);
  CHECK(unchanged == x);
  CHECK(idx4.size() == 5);

  Rng noise5(507);
  CHECK_THROWS_AS(gaussian_baseline(x, x.size() + 1, 0.2, noise5), ConfigError);
}

TEST_CASE("run_attack produces coherent outcomes end to end") {
  auto ds = generate_toy_dataset(4, 8, 10, 71);
  Rng init(72);
  MicroNet net = MicroNet::random_init(ds.image_shape(), 4, init);
  TrainConfig tc;
  tc.epochs = 40;
  Rng tr(73);
  net.train(ds, tc, tr);

  AttackConfig cfg;
  cfg.alpha = 0.12;
  cfg.topk_frac = 0.2;
  cfg.candidates_per_image = 2;

  const ImageTensor& x = ds.images[0];
  const auto outcomes = run_attack(net, x, ds, cfg);
  REQUIRE(outcomes.size() == 2);

  const auto [y_star, y_r] = select_running_up(net.predict(x));
  for (std::size_t c = 0; c < outcomes.size(); ++c) {
    const AttackOutcome& o = outcomes[c];
    CHECK(o.original_class == y_star);
    CHECK(o.running_up_class == y_r);
    CHECK(o.candidate_rank == static_cast<int>(c));
    CHECK(ds.labels[o.attack_image_id] == y_r);
    CHECK(o.corrupted.shape() == x.shape());
    CHECK(o.ssim <= 1.0 + 1e-12);
    CHECK(o.confidence_change >= 0.0);
    CHECK(o.confidence_change <= 1.0);
    CHECK(o.explanation_change_pct >= 0.0);
    // Off-index coordinates are untouched.
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!o.indices.contains(i)) CHECK(o.corrupted[i] == x[i]);
    }
  }
  // Candidates are ranked by attack-image confidence, so the two
  // outcomes used different attack images.
  CHECK(outcomes[0].attack_image_id != outcomes[1].attack_image_id);

  // Deterministic: same inputs, same outcomes.
  const auto again = run_attack(net, x, ds, cfg);
  REQUIRE(again.size() == outcomes.size());
  for (std::size_t c = 0; c < again.size(); ++c) {
    CHECK(again[c].corrupted == outcomes[c].corrupted);
    CHECK(again[c].explanation_change_pct ==
          outcomes[c].explanation_change_pct);
  }
}
