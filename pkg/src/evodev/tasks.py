"""Task generators: signed XOR, random boolean tables, conjunctions and fuzz streams."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .graph import MODULATORY, STANDARD, Network, Sample, make_dataset


def gen_signed_xor(invert: bool = False) -> list[Sample]:
    """XOR over {-1, +1} inputs, False as -1.  ``invert`` swaps the target signs."""
    rows = list(itertools.product([-1.0, 1.0], repeat=2))
    sign = -1.0 if invert else 1.0
    return make_dataset(rows, [(sign * (1.0 if a != b else -1.0),) for a, b in rows])


@dataclass
class TruthTable:
    """Brute-force oracle: the full table of a boolean function over n sign-encoded inputs."""
    names: list
    rows: np.ndarray      # (2^n, n) in {-1, +1}
    values: np.ndarray    # (2^n,) in {-1, +1}

    @property
    def n(self) -> int:
        return self.rows.shape[1]

    def __call__(self, bits) -> int:
        idx = 0
        for b in bits:
            idx = 2 * idx + (1 if b > 0 else 0)
        return int(self.values[idx])

    def dataset(self) -> list[Sample]:
        return make_dataset(self.rows, self.values[:, None])

    def stream(self, passes: int = 1, rng: np.random.Generator | None = None,
               target: str = "Y") -> list[dict]:
        """Ternary instances, ``passes`` sweeps over the table (each shuffled if ``rng``)."""
        out = []
        for _ in range(passes):
            order = rng.permutation(len(self.rows)) if rng is not None else range(len(self.rows))
            for i in order:
                d = {n: int(v) for n, v in zip(self.names, self.rows[i])}
                d[target] = int(self.values[i])
                out.append(d)
        return out


def _rows(n: int) -> np.ndarray:
    return np.array(list(itertools.product([-1, 1], repeat=n)), dtype=np.int64)


def _check_n(n: int, lo: int, hi: int) -> None:
    if not lo <= n <= hi:
        raise ValueError(f"n must be in [{lo}, {hi}], got {n}")


def gen_random_boolean(n: int, seed: int, passes: int = 1):
    """Random function of n inputs as (D1 dataset, D2 instance stream, truth-table oracle)."""
    _check_n(n, 2, 8)
    rng = np.random.default_rng(seed)
    rows = _rows(n)
    table = TruthTable([f"X{i}" for i in range(n)], rows, rng.choice([-1, 1], size=len(rows)))
    return table.dataset(), table.stream(passes, rng), table


def conjunction_table(literals) -> TruthTable:
    """Table of AND over literals: +1 means Xi must be active, -1 inactive, 0 don't care."""
    lits = np.asarray(literals, dtype=np.int64)
    rows = _rows(len(lits))
    care = lits != 0
    values = np.where((rows[:, care] == lits[care]).all(axis=1), 1, -1)
    return TruthTable([f"X{i}" for i in range(len(lits))], rows, values)


def gen_conjunction(n: int, seed: int, passes: int = 3):
    """Random conjunction-expressible concept; returns (literals, stream, oracle)."""
    _check_n(n, 1, 8)
    rng = np.random.default_rng(seed)
    lits = rng.choice([1, -1, 0], size=n)
    if not lits.any():
        lits[rng.integers(n)] = rng.choice([1, -1])
    table = conjunction_table(lits)
    return lits, table.stream(passes, rng), table


def gen_fuzz_stream(rng: np.random.Generator, steps: int = 40, max_inputs: int = 8,
                    resample: float = 0.1, noisy_fraction: float = 0.3, noise: float = 0.2):
    """Observation stream for replay fuzzing.

    Targets follow random conjunctions of the inputs.  After the first step each
    input is re-drawn with probability ``resample`` (possibly to unobserved), and
    a ``noisy_fraction`` of streams flip labels at rate ``noise``.
    Returns (input names, target names, stream).
    """
    n = int(rng.integers(2, max_inputs + 1))
    names = [f"X{i}" for i in range(n)]
    targets = [f"Y{j}" for j in range(int(rng.integers(1, 3)))]
    lits = [rng.choice([1, -1, 0], size=n) for _ in targets]
    noisy = rng.random() < noisy_fraction
    x = rng.choice([-1, 1], size=n)
    out = []
    for s in range(steps):
        if s:
            flip = rng.random(n) < resample
            x = np.where(flip, rng.choice([-1, 1, 1, -1, 0], size=n), x)
        d = {k: int(v) for k, v in zip(names, x)}
        for t, lit in zip(targets, lits):
            y = 1 if all(li == 0 or li == v for li, v in zip(lit, x)) else -1
            if noisy and rng.random() < noise:
                y = int(rng.choice([-1, 0, 1]))
            d[t] = y
        out.append(d)
    return names, targets, out


def random_network(rng: np.random.Generator, n_inputs: int = 3, n_outputs: int = 2,
                   n_hidden: int = 4, n_modulatory: int = 1, p_edge: float = 0.5,
                   k: float = 1.0, scale: float = 1.0) -> Network:
    """Random acyclic network with weights and biases drawn from N(0, scale^2).

    Hidden nodes are created in a random order and may only feed later nodes,
    so the result is acyclic by construction.  Every modulatory node gets at
    least one edge on each term.
    """
    net = Network(n_inputs, n_outputs, k=k)
    kinds = [MODULATORY] * n_modulatory + [STANDARD] * (n_hidden - n_modulatory)
    rng.shuffle(kinds)
    hidden = []
    for kind in kinds:
        nid = net.add_node(kind, bias=float(rng.normal(0, scale)) if kind == STANDARD else 0.0,
                           term1_bias=float(rng.normal(0, scale)) if kind == MODULATORY else 0.0)
        hidden.append(nid)
    for o in net.outputs:
        net.nodes[o].bias = float(rng.normal(0, scale))
    order = list(net.inputs) + hidden + list(net.outputs)
    for j, tgt in enumerate(order):
        if tgt in net.inputs:
            continue
        terms = (0, 1) if net.nodes[tgt].kind == MODULATORY else (0,)
        sources = [s for s in order[:j] if s not in net.outputs]
        for term in terms:
            picked = [s for s in sources if rng.random() < p_edge]
            if not picked:
                picked = [sources[int(rng.integers(len(sources)))]]
            for s in picked:
                net.add_edge(s, tgt, float(rng.normal(0, scale)), term=term)
    return net
