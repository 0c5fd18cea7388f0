"""Smoke tests for the python bindings: exercise each exposed operation once
and check the invariants that don't need training time."""

import json

import numpy as np
import pytest

import dehazekit as dhz


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "set"
    dhz.generate_dataset(str(out), count=4, image_size=32, seed=9)
    return dhz.Dataset.load(str(out))


@pytest.fixture(scope="module")
def model():
    return dhz.Model.build(embed_dim=8, num_blocks=2, num_heads=2, patch_size=4,
                           window_size=4, seed=3)


def test_metrics_basics():
    a = dhz.synth_clean_image(32, seed=1)
    assert a.shape == (32, 32, 3)
    assert a.min() >= 0.0 and a.max() <= 1.0
    assert dhz.psnr(a, a) == 100.0
    assert dhz.ssim(a, a) == pytest.approx(1.0)
    b = np.clip(a + 0.05, 0.0, 1.0)
    assert dhz.psnr(a, b) < 100.0
    assert dhz.ssim(a, b) < 1.0


def test_haze_roundtrip():
    clean = dhz.synth_clean_image(32, seed=2)
    depth = dhz.synth_depth("radial", 32, 32, seed=2, scale=0.65)
    assert depth.shape == (32, 32)
    t = dhz.transmission(depth, beta=1.5)
    assert np.all(t > 0.0) and np.all(t <= 1.0)
    hazy = dhz.apply_haze(clean, depth, beta=1.5)
    assert np.array_equal(dhz.apply_haze(clean, depth, beta=0.0), clean)
    back = dhz.invert_haze(hazy, depth, beta=1.5)
    assert np.max(np.abs(back - clean)) < 1e-9


def test_dataset(dataset):
    assert len(dataset) == 4
    hazy, clean = dataset.hazy(0), dataset.clean(0)
    assert hazy.shape == clean.shape == (32, 32, 3)
    manifest = json.loads(dataset.manifest_json())
    assert len(manifest["pairs"]) == 4
    assert len(dataset.hash()) == 16


def test_model_forward_and_adapters(model):
    x = dhz.synth_clean_image(32, seed=4)
    y = model.forward(x)
    assert y.shape == x.shape
    assert y.min() >= 0.0 and y.max() <= 1.0

    g = model.input_gradient(x, np.zeros_like(x))
    assert g.shape == x.shape and np.any(g != 0.0)

    sb = dhz.Model.build(embed_dim=8, num_blocks=2, num_heads=2, patch_size=4,
                         window_size=4, seed=3)
    sb.apply_adapter("sb")
    assert sb.adapter() == "sb"
    assert np.array_equal(sb.forward(x), y)  # identity at init
    assert sb.trainable_scalars() < sb.total_scalars()
    assert any(r["group"] == "adapter-scale" for r in sb.registry())


def test_checkpoint_roundtrip(model, tmp_path):
    path = tmp_path / "model.json"
    model.save(str(path))
    back = dhz.Model.load(str(path))
    assert back.param_checksum() == model.param_checksum()
    x = dhz.synth_clean_image(32, seed=5)
    assert np.array_equal(back.forward(x), model.forward(x))


def test_attacks_never_help(model, dataset):
    x, y = dataset.hazy(1), dataset.clean(1)
    clean_obj = float(np.abs(model.forward(x) - y).sum())

    r = dhz.linf_attack(model, x, y, epsilon=4 / 255, steps=4, seed=11)
    assert r["linf_norm"] <= 4 / 255 + 1e-15
    assert r["objective"] >= clean_obj
    assert r["adversarial"].shape == x.shape
    assert len(r["trace"]) == 5
    assert r["trace"] == sorted(r["trace"])

    r0 = dhz.l0_attack(model, x, y, pixels=1, pop_size=8, iterations=4, seed=12)
    assert r0["pixel_count"] <= 1
    assert len(r0["pixels"]) <= 1
    assert r0["objective"] >= clean_obj

    noisy = dhz.gaussian_baseline(x, sigma=0.01, seed=13)
    assert noisy.shape == x.shape
    assert noisy.min() >= 0.0 and noisy.max() <= 1.0


def test_finetune_and_evaluate(model, dataset, tmp_path):
    tuned, log = dhz.finetune(model, dataset, method="sb", defense="at", epochs=1,
                              patch_size=16, samples_per_epoch=8, batch_size=4,
                              learning_rate=1e-3, attack_steps=2, seed=21)
    assert tuned.adapter() == "sb"
    assert len(log) == 1 and log[0]["base_loss"] > 0.0
    # frozen parameters stay bitwise identical
    ref = dhz.Model.build(embed_dim=8, num_blocks=2, num_heads=2, patch_size=4,
                          window_size=4, seed=3)
    ref.apply_adapter("sb")
    assert tuned.param_checksum(frozen_only=True) == ref.param_checksum(frozen_only=True)

    report = tmp_path / "report.json"
    table = dhz.evaluate(tuned, dataset, str(report), model_id="tuned", method="sb",
                         defense="at", epsilons=[1 / 255], pixel_counts=[1], max_images=2)
    data = json.loads(report.read_text())
    assert data["format"] == "dehazekit-report-v1"
    kinds = {row["condition"]["kind"] for row in data["rows"]}
    assert {"clean", "gaussian", "linf", "l0"} <= kinds
    assert "PSNR" in table and dhz.render_table(str(report)) == table
