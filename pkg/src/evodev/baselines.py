"""Static tanh MLP trained by full-batch gradient descent, and sequential-task protocols.

Used to show destructive adaptation: a fixed network trained on task A and
then on task B loses A, while training on A and B together does not.  The same
protocol run through the CSV learner keeps its archived A responses.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .conditioning import CsvConfig, CsvModel, ReplayArchive


class Mlp:
    def __init__(self, sizes: Sequence[int], seed: int = 0, scale: float = 1.0):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        rng = np.random.default_rng(seed)
        self.sizes = tuple(sizes)
        self.weights = [rng.normal(0.0, scale / math.sqrt(a), size=(a, b))
                        for a, b in zip(sizes[:-1], sizes[1:])]
        self.biases = [np.zeros(b) for b in sizes[1:]]

    def forward(self, x: np.ndarray) -> list[np.ndarray]:
        acts = [np.asarray(x, dtype=np.float64)]
        for w, b in zip(self.weights, self.biases):
            acts.append(np.tanh(acts[-1] @ w + b))
        return acts

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[-1]

    def cost(self, x: np.ndarray, t: np.ndarray) -> float:
        return float(((self.predict(x) - t) ** 2).sum(axis=1).mean())

    def gradients(self, x: np.ndarray, t: np.ndarray):
        acts = self.forward(x)
        m = x.shape[0]
        delta = 2.0 * (acts[-1] - t) * (1.0 - acts[-1] ** 2) / m
        gw, gb = [], []
        for layer in range(len(self.weights) - 1, -1, -1):
            gw.append(acts[layer].T @ delta)
            gb.append(delta.sum(axis=0))
            if layer:
                delta = (delta @ self.weights[layer].T) * (1.0 - acts[layer] ** 2)
        return gw[::-1], gb[::-1]

    def step(self, x: np.ndarray, t: np.ndarray, gamma: float) -> None:
        gw, gb = self.gradients(x, t)
        for w, g in zip(self.weights, gw):
            w -= gamma * g
        for b, g in zip(self.biases, gb):
            b -= gamma * g

    def accuracy(self, x: np.ndarray, t: np.ndarray) -> float:
        return float(np.mean(np.sign(self.predict(x)) == np.sign(t)))


def train_static(mlp: Mlp, x: np.ndarray, t: np.ndarray, steps: int, gamma: float) -> list[float]:
    """Plain full-batch descent; returns the cost before each step and after the last."""
    curve = []
    for s in range(steps):
        c = mlp.cost(x, t)
        if not math.isfinite(c):
            raise FloatingPointError(f"static training diverged at step {s}")
        curve.append(c)
        mlp.step(x, t, gamma)
    curve.append(mlp.cost(x, t))
    return curve


# ------------------------------------------------------------------- task pairs

@dataclass
class TaskPair:
    xa: np.ndarray
    ta: np.ndarray
    xb: np.ndarray
    tb: np.ndarray
    names: list = field(default_factory=list)

    @property
    def n_inputs(self) -> int:
        return self.xa.shape[1]


def make_task_pair(seed: int, n_bits: int = 4, kind: str = "parity",
                   identical: bool = False) -> TaskPair:
    """Two n-bit functions; input 0 flags task A, input 1 flags task B.

    ``kind="parity"`` draws two different signed parities over (n_bits - 1)
    of the bits, which a static net cannot hold at once without using the
    context inputs.  ``kind="random"`` draws two random truth tables that
    disagree on at least half the rows.
    """
    if n_bits < 2:
        raise ValueError("need at least 2 bits")
    rng = np.random.default_rng(seed)
    rows = np.array(list(itertools.product([-1.0, 1.0], repeat=n_bits)))
    if kind == "parity":
        subsets = list(itertools.combinations(range(n_bits), n_bits - 1))
        ia, ib = rng.choice(len(subsets), size=2, replace=False)
        sa, sb = rng.choice([-1.0, 1.0], size=2)
        fa = sa * rows[:, list(subsets[ia])].prod(axis=1)
        fb = sb * rows[:, list(subsets[ib])].prod(axis=1)
    elif kind == "random":
        fa = rng.choice([-1.0, 1.0], size=len(rows))
        fb = rng.choice([-1.0, 1.0], size=len(rows))
        while np.mean(fa != fb) < 0.5:
            fb = rng.choice([-1.0, 1.0], size=len(rows))
    else:
        raise ValueError(f"unknown task kind {kind!r}")
    if identical:
        fb = fa.copy()
    ctx_a = np.tile([1.0, -1.0], (len(rows), 1))
    xa = np.hstack([ctx_a, rows])
    xb = np.hstack([-ctx_a, rows])
    names = ["ctxA", "ctxB"] + [f"x{i}" for i in range(n_bits)]
    return TaskPair(xa, fa[:, None], xb, fb[:, None], names)


def _timeline_points(mlp: Mlp, pair: TaskPair, phase: str, step: int) -> list[dict]:
    return [{"phase": phase, "step": step, "task": "A", "accuracy": mlp.accuracy(pair.xa, pair.ta)},
            {"phase": phase, "step": step, "task": "B", "accuracy": mlp.accuracy(pair.xb, pair.tb)}]


def run_sequential(mlp: Mlp, pair: TaskPair, steps: int = 20_000, gamma: float = 0.1,
                   joint: bool = False, eval_every: int = 500) -> list[dict]:
    """Phase A on task A, then phase B on task B (or on A and B together when ``joint``)."""
    timeline = []
    x2 = np.vstack([pair.xa, pair.xb]) if joint else pair.xb
    t2 = np.vstack([pair.ta, pair.tb]) if joint else pair.tb
    for phase, x, t in (("A", pair.xa, pair.ta), ("AB" if joint else "B", x2, t2)):
        for s in range(steps):
            if s % eval_every == 0:
                timeline.extend(_timeline_points(mlp, pair, phase, s))
            mlp.step(x, t, gamma)
        timeline.extend(_timeline_points(mlp, pair, phase, steps))
    return timeline


def task_a_drop(timeline: list[dict]) -> float:
    """Peak task-A accuracy in phase A minus final task-A accuracy, in percentage points."""
    acc = [p for p in timeline if p["task"] == "A"]
    peak = max(p["accuracy"] for p in acc if p["phase"] == "A")
    return 100.0 * (peak - acc[-1]["accuracy"])


def final_accuracy(timeline: list[dict], task: str) -> float:
    return [p for p in timeline if p["task"] == task][-1]["accuracy"]


# ----------------------------------------------------------------- CSV protocol

def as_instances(x: np.ndarray, t: np.ndarray, names: Sequence[str], target: str = "Y") -> list[dict]:
    out = []
    for row, tv in zip(x, t):
        d = {n: int(v) for n, v in zip(names, row)}
        d[target] = int(tv[0])
        out.append(d)
    return out


def _responses(model: CsvModel, archive: ReplayArchive, rows: Sequence[int]) -> dict:
    idx = np.asarray(rows, dtype=int)
    return {cid: archive.states(c.xp, c.xn, c.y)[idx] for cid, c in model.csvs.items()}


def run_sequential_csv(model: CsvModel, stream_a: Sequence[dict], stream_b: Sequence[dict],
                       interleave: bool = False, seed: int = 0) -> list[dict]:
    """Feed A then B (or a shuffled mix) and track how A's archived responses hold up.

    ``preserved`` is the fraction of (CSV, A instance) pairs that had a
    determined state after phase A and still have the same state now.
    """
    archive = ReplayArchive(model)
    a_rows: list[int] = []
    timeline = []
    if interleave:
        rng = np.random.default_rng(seed)
        tagged = [("A", s) for s in stream_a] + [("B", s) for s in stream_b]
        order = rng.permutation(len(tagged))
        phases = [("AB", [tagged[i] for i in order])]
    else:
        phases = [("A", [("A", s) for s in stream_a]), ("B", [("B", s) for s in stream_b])]
    reference = None
    for phase, items in phases:
        for task, inst in items:
            model.observe(inst)
            if task == "A":
                a_rows.append(len(archive.rows))
            archive.add(model.last_snapshot, model.step - 1)
        now = _responses(model, archive, a_rows) if a_rows else {}
        if reference is None:
            reference = now
        kept = total = 0
        for cid, ref in reference.items():
            det = ref != 0
            total += int(det.sum())
            kept += int((now[cid][det] == ref[det]).sum())
        acc = _prediction_accuracy(model, stream_a)
        timeline.append({"phase": phase, "task": "A", "step": model.step,
                         "preserved": kept / total if total else 1.0,
                         "determined": total, "prediction_acc_a": acc,
                         "prediction_acc_b": _prediction_accuracy(model, stream_b)})
    return timeline


def _prediction_accuracy(model: CsvModel, stream: Sequence[dict]) -> float:
    if not stream:
        return 1.0
    hits = 0
    for inst in stream:
        pred = model.predict({k: inst[k] for k in model.inputs})
        hits += all(pred[t] == inst[t] for t in model.targets)
    return hits / len(stream)


def csv_task_model(pair: TaskPair, config: CsvConfig | None = None) -> CsvModel:
    return CsvModel(pair.names, ["Y"], config)
