import json

import numpy as np
import pytest

from gkan.cli import gradcheck_instance
from gkan.graph import generate_synthetic, normalize_adjacency
from gkan.models import ModelConfig, build_model
from gkan.training import (
    CSV_COLUMNS,
    GRID_UPDATE_PRESET,
    SGD,
    Adam,
    TrainConfig,
    grad_check,
    read_csv,
    relative_error,
    train,
)

SPLINE = {"GCN": None, "GKAN1": (3, 1), "GKAN2": (3, 1)}
ARCHS = ("GCN", "GKAN1", "GKAN2")


def model_for(graph, arch, h=16, seed=0, **kw):
    return build_model(ModelConfig(arch, graph.num_features, h, graph.num_classes, spline=SPLINE[arch], seed=seed, **kw))


# --- optimizers ---------------------------------------------------------------


def test_adam_first_step():
    p = {"w": np.array([0.0])}
    Adam(lr=0.1).step(p, {"w": np.array([1.0])})
    expected = -0.1 * (1 / (1 - 0.9)) * (1 - 0.9) / (np.sqrt((1 / (1 - 0.999)) * (1 - 0.999)) + 1e-8)
    assert p["w"][0] == pytest.approx(expected, rel=1e-12)
    assert p["w"][0] == pytest.approx(-0.1, abs=1e-8)


def test_adam_matches_reference_equations():
    rng = np.random.default_rng(0)
    grads = rng.normal(size=(5, 3))
    p = {"w": np.zeros(3)}
    opt = Adam(lr=0.05, beta1=0.8, beta2=0.99, eps=1e-6)
    w, m, v = np.zeros(3), np.zeros(3), np.zeros(3)
    for t, g in enumerate(grads, start=1):
        opt.step(p, {"w": g})
        m = 0.8 * m + 0.2 * g
        v = 0.99 * v + 0.01 * g * g
        w = w - 0.05 * (m / (1 - 0.8**t)) / (np.sqrt(v / (1 - 0.99**t)) + 1e-6)
    np.testing.assert_allclose(p["w"], w, rtol=1e-13)


def test_weight_decay_only_on_named_arrays():
    p = {"W": np.ones(2), "b": np.ones(2)}
    SGD(lr=0.5, weight_decay=0.1, decay_names={"W"}).step(p, {"W": np.zeros(2), "b": np.zeros(2)})
    np.testing.assert_allclose(p["W"], 1 - 0.5 * 0.1)
    np.testing.assert_array_equal(p["b"], 1.0)


def test_adam_reset_restarts_moments():
    p = {"w": np.zeros(1)}
    opt = Adam(lr=0.1)
    opt.step(p, {"w": np.ones(1)})
    opt.reset("w")
    assert "w" not in opt.m


@pytest.mark.parametrize(
    "kw", [dict(optimizer="rmsprop"), dict(epochs=0), dict(learning_rate=0.0), dict(weight_decay=-1.0), dict(record_every=0)]
)
def test_train_config_validation(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)


# --- training runs ------------------------------------------------------------


@pytest.mark.parametrize("arch", ARCHS)
def test_training_is_deterministic(arch):
    g = generate_synthetic(60, 3, 0.2, 0.02, 5, 1.0, seed=1)
    adj = normalize_adjacency(g)
    cfg = TrainConfig(epochs=15, seed=3, record_time=False)
    a = model_for(g, arch, seed=2, dropout=0.3)
    b = model_for(g, arch, seed=2, dropout=0.3)
    ra, rb = train(a, g, adj, cfg), train(b, g, adj, cfg)
    for col in CSV_COLUMNS:
        assert getattr(ra, col) == getattr(rb, col)
    for name, arr in a.parameters().items():
        assert arr.tobytes() == b.parameters()[name].tobytes()


@pytest.mark.parametrize("arch", ARCHS)
def test_overfits_small_graph(arch):
    g = generate_synthetic(20, 2, 0.3, 0.05, 4, 0.0, seed=0)
    r = train(model_for(g, arch), g, normalize_adjacency(g), TrainConfig(epochs=500))
    assert max(r.train_acc) == 1.0


@pytest.mark.parametrize("arch", ARCHS)
def test_chance_level_without_signal(arch):
    g = generate_synthetic(1500, 3, 0.01, 0.01, 8, 0.0, seed=0)
    r = train(model_for(g, arch), g, normalize_adjacency(g), TrainConfig(epochs=200))
    assert abs(r.final_test_acc - 1 / 3) <= 0.1


def test_record_fields_and_series():
    g = generate_synthetic(60, 3, 0.2, 0.02, 5, 1.0, seed=1)
    r = train(model_for(g, "GKAN2"), g, normalize_adjacency(g), TrainConfig(epochs=10, record_every=3))
    assert r.epoch == [3, 6, 9, 10]
    for col in CSV_COLUMNS:
        assert len(getattr(r, col)) == 4
    assert r.final_test_acc == r.test_acc[-1]
    assert 1 <= r.best_val_epoch <= 10
    assert r.best_val_acc >= max(r.val_acc)
    assert np.all(np.isfinite(r.train_loss))
    assert not r.diverged and r.num_parameters == model_for(g, "GKAN2").num_parameters
    assert all(b >= a for a, b in zip(r.wall_s, r.wall_s[1:]))


def test_divergence_is_recorded():
    g = generate_synthetic(30, 3, 0.2, 0.02, 5, 1.0, seed=1)
    g.features[4, 2] = np.nan
    r = train(model_for(g, "GCN"), g, normalize_adjacency(g), TrainConfig(epochs=20))
    assert r.diverged and r.diverged_epoch == 1
    assert r.epoch == []


def test_train_rejects_empty_masks():
    g = generate_synthetic(30, 3, 0.2, 0.02, 5, 1.0, seed=1)
    g.val_mask[:] = False
    with pytest.raises(ValueError):
        train(model_for(g, "GCN"), g, normalize_adjacency(g), TrainConfig(epochs=2))


def test_grid_updates_fire_and_keep_training_sane():
    g = generate_synthetic(120, 3, 0.1, 0.01, 6, 1.0, seed=2)
    adj = normalize_adjacency(g)
    model = model_for(g, "GKAN1")
    before = [layer.grid for layer in model.layers]
    r = train(model, g, adj, TrainConfig(epochs=60, grid_update_epochs=GRID_UPDATE_PRESET))
    assert not r.diverged
    assert all(a is not b for a, b in zip(before, (layer.grid for layer in model.layers)))
    assert model.num_parameters == r.num_parameters
    assert r.final_test_acc > 0.8


def test_grid_updates_ignored_for_gcn():
    g = generate_synthetic(60, 3, 0.2, 0.02, 5, 1.0, seed=1)
    adj = normalize_adjacency(g)
    a = train(model_for(g, "GCN"), g, adj, TrainConfig(epochs=5, grid_update_epochs=(2,), record_time=False))
    b = train(model_for(g, "GCN"), g, adj, TrainConfig(epochs=5, record_time=False))
    assert a.test_loss == b.test_loss


def test_csv_and_manifest(tmp_path):
    g = generate_synthetic(60, 3, 0.2, 0.02, 5, 1.0, seed=1)
    r = train(model_for(g, "GKAN2"), g, normalize_adjacency(g), TrainConfig(epochs=4, seed=9, record_time=False))
    r.write_csv(tmp_path / "run.csv")
    lines = (tmp_path / "run.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 5
    back = read_csv(tmp_path / "run.csv")
    assert back["epoch"] == [1, 2, 3, 4]
    assert back["test_acc"] == r.test_acc  # floats survive exactly
    assert back["wall_s"] == [0.0] * 4

    r.write_manifest(tmp_path / "run.json", extra={"dataset": "synthetic"})
    manifest = json.loads((tmp_path / "run.json").read_text())
    assert manifest["seed"] == 9
    assert manifest["final_test_acc"] == r.final_test_acc
    assert len(manifest["config_hash"]) == 16
    r.write_manifest(tmp_path / "again.json", extra={"dataset": "synthetic"})
    assert (tmp_path / "again.json").read_text() == (tmp_path / "run.json").read_text()


# --- gradient checker ---------------------------------------------------------


def test_relative_error_floor():
    np.testing.assert_allclose(relative_error([1.0, 1e-9], [1.1, 2e-9]), [0.1 / 1.1, 1e-9 / 1e-5])


@pytest.mark.parametrize(
    "arch, spline, h, tol",
    [("GKAN2", (3, 1), 4, 1e-4), ("GCN", None, 4, 1e-5), ("GKAN1", (7, 3), 3, 1e-4)],
)
def test_grad_check_examples(arch, spline, h, tol):
    g = gradcheck_instance(0)
    report = grad_check(ModelConfig(arch, g.num_features, h, g.num_classes, spline=spline), g, tol)
    assert report.passed, report.lines()
    assert report.max_error < tol
    assert set(report.errors) == set(build_model(ModelConfig(arch, 4, h, 2, spline=spline)).parameters())


def test_grad_check_degree_zero_reports_zero_spline_gradient():
    g = gradcheck_instance(0)
    report = grad_check(ModelConfig("GKAN2", 4, 4, 2, spline=(4, 0)), g, 1e-4)
    assert report.passed
    assert report.spline_input_grad_max == 0.0


def test_grad_check_refuses_large_graphs():
    g = generate_synthetic(40, 2, 0.2, 0.02, 4, 1.0, seed=0)
    with pytest.raises(ValueError):
        grad_check(ModelConfig("GCN", 4, 4, 2), g, 1e-5)
