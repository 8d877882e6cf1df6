import csv
import json

import numpy as np
import pytest

import polar


def tiny(out_dir, **extra):
    cfg = polar.config(
        grid={"n": [50], "p": [0.75], "c": [0.0, 10.0]},
        replications=1,
        polar={"T": 2, "q_rollouts": 4, "m": [8]},
        policy={"budgets": [4]},
        m_noise=8,
        eval={"rollouts": 50, "every_iteration": True},
        oracle={"n_branch": 2, "grid_per_dim": 3},
        baselines=["dtr_q"],
        out_dir=str(out_dir),
    )
    cfg.update(extra)
    return cfg


def test_simenv_values():
    assert np.allclose(polar.simenv.mean_next(1, 0, np.zeros(2)), [0.4, 0.4])
    assert np.allclose(polar.simenv.mean_next(3, 1, np.ones(2)), [0.6, 0.6])
    assert polar.simenv.terminal_reward(np.zeros(2), 0, np.zeros(2)) == pytest.approx(6.194)
    assert polar.simenv.terminal_reward(np.zeros(2), 1, np.zeros(2)) == pytest.approx(17.594)
    assert polar.simenv.weight(1, 0).shape == (2, 3)


def test_dp_value_runs():
    a, v, q = polar.simenv.dp_value(np.array([0.3, 0.7]), n_branch=4, seed=1)
    assert a in (0, 1)
    assert v == pytest.approx(max(q))


def test_dataset_shapes():
    d = polar.simenv.generate_dataset(20, 0.75, 3, grid_per_dim=3, n_branch=2)
    assert d["states"].shape == (20, 4, 2)
    assert d["actions"].shape == (20, 3)
    assert set(np.unique(d["behavior_probs"])) <= {0.25, 0.75}
    assert np.all(d["rewards"][:, :2] == 0.0)


def test_gp_matches_numpy():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(12, 2))
    Y = rng.normal(size=(1, 12))
    ls = np.array([0.5, 0.8])
    Xq = rng.uniform(size=(5, 2))

    def k(a, b):
        d = (a[:, None, :] - b[None, :, :]) / ls
        return 1.3 * np.exp(-0.5 * (d**2).sum(-1))

    A = k(X, X) + 0.2**2 * np.eye(12)
    kq = k(X, Xq)
    mean_ref = (Y @ np.linalg.solve(A, kq)).T
    var_ref = 1.3 - np.einsum("ij,ij->j", kq, np.linalg.solve(A, kq))
    mean, var, _ = polar.gp.posterior(X, Y, ls, 1.3, 0.2, Xq)
    assert np.allclose(mean, mean_ref, atol=1e-10)
    assert np.allclose(var, var_ref, atol=1e-10)


def test_basis_partition_of_unity():
    pts = np.random.default_rng(1).uniform(size=(100, 2))
    F = polar.basis.tensor_eval([(0.0, 1.0), (0.0, 1.0)], 4, 3, pts)
    assert F.shape == (100, 16)
    assert np.allclose(F.sum(axis=1), 1.0, atol=1e-12)


def test_config_presets_and_errors():
    fig1 = json.loads(polar.preset_config("fig1"))
    assert fig1["grid"]["c"] == [0.0, 5.0, 10.0, 50.0, 100.0]
    with pytest.raises(ValueError):
        polar.config(bogus=1)
    with pytest.raises(polar.ConfigError):
        polar.preset_config("nope")


def test_experiment_csv(tmp_path):
    s = polar.run_experiment(tiny(tmp_path))
    assert s["cells_run"] == 1
    with open(tmp_path / "results.csv") as f:
        rows = list(csv.DictReader(f))
    assert ",".join(rows[0].keys()) == polar.CSV_HEADER
    polar_rows = [r for r in rows if r["method"] == "polar"]
    assert len(polar_rows) == 2 * 3
    assert [r["iteration"] for r in polar_rows[:3]] == ["0", "1", "2"]
    assert rows[-1]["method"] == "dtr_q" and rows[-1]["c"] == ""


def test_run_cell_is_deterministic(tmp_path):
    cfg = tiny(tmp_path)
    a = polar.run_cell(cfg, 50, 0.75, 0)
    b = polar.run_cell(cfg, 50, 0.75, 0)
    assert [polar.format_row(r) for r in a] == [polar.format_row(r) for r in b]
