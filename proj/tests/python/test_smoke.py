"""Smoke tests for the Python bindings."""

import numpy as np
import pytest

import xatk


@pytest.fixture(scope="module")
def trained():
    ds = xatk.generate_toy_dataset(classes=3, per_class=6, side=8, seed=11)
    net = xatk.MicroNet.random_init(
        width=8, height=8, channels=3, classes=3, seed=12
    )
    net.train(ds, epochs=40, seed=13)
    return ds, net


def test_dataset_shapes_and_roundtrip(tmp_path):
    ds = xatk.generate_toy_dataset(classes=4, per_class=5, side=10, seed=1)
    assert len(ds) == 20
    img = ds.image(0)
    assert img.shape == (10, 10, 3)
    assert img.dtype == np.float64
    assert img.min() >= 0.0 and img.max() <= 1.0

    path = str(tmp_path / "ds.xatkd")
    xatk.dataset_save(path, ds)
    back = xatk.dataset_load(path)
    assert len(back) == len(ds)
    np.testing.assert_array_equal(back.image(3), ds.image(3))
    assert back.labels == ds.labels


def test_ppm_roundtrip(tmp_path):
    rng = np.random.default_rng(7)
    img = rng.integers(0, 256, size=(6, 9, 3)).astype(np.float64) / 255.0
    path = str(tmp_path / "img.ppm")
    xatk.ppm_write(path, img)
    back = xatk.ppm_read(path)
    np.testing.assert_array_equal(back, img)


def test_micronet_train_and_golden_logits(trained):
    ds, net = trained
    logits = net.logits(ds.image(0))
    golden = [
        0.082440370749530006,
        0.10371117046299633,
        0.011187740042467746,
    ]
    np.testing.assert_allclose(logits, golden, rtol=1e-9)
    probs = net.predict(ds.image(0))
    assert abs(sum(probs) - 1.0) < 1e-9


def test_weights_roundtrip(tmp_path, trained):
    ds, net = trained
    path = str(tmp_path / "model.xatkw")
    net.save_weights(path)
    loaded = xatk.MicroNet.load_weights(path)
    np.testing.assert_array_equal(loaded.logits(ds.image(1)), net.logits(ds.image(1)))


def test_attribution_and_metrics(trained):
    ds, net = trained
    x = ds.image(0)
    sal = xatk.compute_attribution(net, x, 0, method="saliency")
    assert sal.shape == x.shape
    assert (sal >= 0.0).all()

    grad = net.input_gradient(x, 0)
    np.testing.assert_allclose(sal, np.abs(grad), rtol=1e-12)

    ig = xatk.compute_attribution(net, x, 0, method="integrated_gradients")
    assert np.isfinite(ig).all()

    dls = xatk.compute_attribution(
        net, x, 0, method="deeplift_shap", dls_baselines=[ds.image(1)]
    )
    assert np.isfinite(dls).all()

    assert xatk.ssim(x, x) == 1.0
    assert xatk.explanation_change_pct(sal, sal) == 0.0
    with pytest.raises(ValueError):
        xatk.explanation_change_pct(np.zeros_like(sal), sal)
    with pytest.raises(ValueError):
        xatk.compute_attribution(net, x, 0, method="gradcam")


def test_run_attack(trained):
    ds, net = trained
    x = ds.image(0)
    outcomes = xatk.run_attack(net, x, ds, alpha=0.09, topk=0.2, candidates=2)
    assert len(outcomes) == 2
    o = outcomes[0]
    assert o.corrupted.shape == x.shape
    assert 0.0 <= o.confidence_change <= 1.0
    assert o.ssim <= 1.0
    y_star, y_r = xatk.select_running_up(net.predict(x))
    assert o.original_class == y_star
    assert o.running_up_class == y_r
    off = np.ones(x.size, dtype=bool)
    off[list(o.indices)] = False
    np.testing.assert_array_equal(
        o.corrupted.reshape(-1)[off], x.reshape(-1)[off]
    )


def test_run_sweep_and_csv(tmp_path, trained):
    ds, net = trained
    targets = xatk.choose_attack_targets(ds, 2, seed=5)
    rows = xatk.run_sweep(
        net,
        ds,
        ds,
        targets,
        methods=["saliency", "integrated_gradients"],
        alphas=[0.09],
        topks=[0.2],
        candidates=2,
        seed=5,
    )
    assert len(rows) == 16
    assert {r.variant for r in rows} == {"attack", "baseline"}

    path = str(tmp_path / "rows.csv")
    xatk.write_result_csv(path, rows)
    back = xatk.read_result_csv(path)
    assert len(back) == len(rows)
    assert back[0].method == rows[0].method
    assert back[0].expl_change_pct == rows[0].expl_change_pct


def test_rng_determinism():
    a = xatk.Rng(42).stream("x")
    b = xatk.Rng(42).stream("x")
    assert [a.uniform() for _ in range(5)] == [b.uniform() for _ in range(5)]
    assert xatk.Rng(1).below(10) < 10
