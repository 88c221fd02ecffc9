import numpy as np
import pytest

from evodev.baselines import (Mlp, as_instances, csv_task_model, final_accuracy, make_task_pair,
                              run_sequential, run_sequential_csv, task_a_drop, train_static)
from evodev.conditioning import CsvConfig

XY = np.array([[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]])
AND = np.array([[-1.0], [-1.0], [-1.0], [1.0]])
XOR = np.array([[-1.0], [1.0], [1.0], [-1.0]])


def test_zero_steps_leave_weights_unchanged():
    mlp = Mlp([2, 3, 1], seed=1)
    before = [w.copy() for w in mlp.weights]
    curve = train_static(mlp, XY, AND, steps=0, gamma=0.1)
    assert len(curve) == 1
    assert all(np.array_equal(a, b) for a, b in zip(before, mlp.weights))


def test_and_is_learned():
    mlp = Mlp([2, 4, 1], seed=0)
    curve = train_static(mlp, XY, AND, steps=10_000, gamma=0.1)
    assert curve[-1] < 1e-2


def test_xor_without_hidden_layer_plateaus():
    mlp = Mlp([2, 1], seed=0)
    curve = train_static(mlp, XY, XOR, steps=5_000, gamma=0.1)
    assert curve[-1] > 0.9


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(2)
    mlp = Mlp([3, 4, 2], seed=3)
    x, t = rng.normal(size=(5, 3)), rng.normal(size=(5, 2))
    gw, gb = mlp.gradients(x, t)
    h = 1e-6
    for params, grads in ((mlp.weights, gw), (mlp.biases, gb)):
        for p, g in zip(params, grads):
            fd = np.zeros_like(p)
            for idx in np.ndindex(p.shape):
                v = p[idx]
                p[idx] = v + h
                plus = mlp.cost(x, t)
                p[idx] = v - h
                minus = mlp.cost(x, t)
                p[idx] = v
                fd[idx] = (plus - minus) / (2 * h)
            assert np.allclose(g, fd, rtol=1e-6, atol=1e-8)


def test_divergence_raises():
    mlp = Mlp([2, 1], seed=0)
    mlp.weights[0][:] = np.nan
    with pytest.raises(FloatingPointError):
        train_static(mlp, XY, AND, steps=3, gamma=0.1)


def test_task_pair_shapes_and_context():
    pair = make_task_pair(0)
    assert pair.xa.shape == (16, 6) and pair.ta.shape == (16, 1)
    assert np.all(pair.xa[:, :2] == [1, -1]) and np.all(pair.xb[:, :2] == [-1, 1])
    assert np.array_equal(pair.xa[:, 2:], pair.xb[:, 2:])
    assert not np.array_equal(pair.ta, pair.tb)
    with pytest.raises(ValueError):
        make_task_pair(0, kind="nope")


def test_identical_tasks_cause_no_drop():
    pair = make_task_pair(1, identical=True)
    tl = run_sequential(Mlp([6, 16, 16, 1], seed=1), pair, steps=3000)
    assert task_a_drop(tl) < 5.0


def test_sequential_training_forgets_task_a():
    pair = make_task_pair(0)
    tl = run_sequential(Mlp([6, 16, 16, 1], seed=0), pair, steps=5000)
    assert final_accuracy(tl, "B") == 1.0
    assert task_a_drop(tl) >= 30.0


def test_csv_keeps_task_a_responses():
    pair = make_task_pair(0)
    a = as_instances(pair.xa, pair.ta, pair.names) * 3
    b = as_instances(pair.xb, pair.tb, pair.names) * 3
    tl = run_sequential_csv(csv_task_model(pair, CsvConfig(depth=5)), a, b)
    assert tl[-1]["determined"] > 0 and tl[-1]["preserved"] == 1.0


def test_csv_empty_task_b_and_interleaving():
    pair = make_task_pair(2)
    a = as_instances(pair.xa, pair.ta, pair.names)
    tl = run_sequential_csv(csv_task_model(pair), a, [])
    assert tl[-1]["preserved"] == 1.0
    b = as_instances(pair.xb, pair.tb, pair.names)
    tl = run_sequential_csv(csv_task_model(pair), a, b, interleave=True, seed=3)
    assert tl[-1]["phase"] == "AB" and tl[-1]["preserved"] == 1.0
