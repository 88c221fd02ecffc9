"""Cost landscape scans over one or two parameters of a network."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import graph as g
from .growth import edge_node_conversion
from .tasks import gen_signed_xor


@dataclass
class LandscapeGrid:
    params: tuple            # one or two parameter keys
    axes: tuple              # one value array per parameter
    costs: np.ndarray        # shape (len(axes[0]),) or (len(axes[0]), len(axes[1]))

    def write_csv(self, path) -> None:
        """One row per grid point, header ``param1,param2,cost``; param2 is blank for 1-D."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["param1", "param2", "cost"])
            if len(self.axes) == 1:
                for a, c in zip(self.axes[0], self.costs):
                    w.writerow([repr(float(a)), "", repr(float(c))])
            else:
                for i, a in enumerate(self.axes[0]):
                    for j, b in enumerate(self.axes[1]):
                        w.writerow([repr(float(a)), repr(float(b)), repr(float(self.costs[i, j]))])

    def index_of(self, axis: int, value: float) -> int:
        return int(np.argmin(np.abs(self.axes[axis] - value)))


def parse_param(spec) -> g.ParamKey:
    """Accept ("w", 3) or "w:3"."""
    if isinstance(spec, str):
        kind, _, ident = spec.partition(":")
        try:
            return (kind, int(ident))
        except ValueError:
            raise g.GraphError(f"bad parameter id {spec!r}") from None
    kind, ident = spec
    return (str(kind), int(ident))


def scan_landscape(network: g.Network, dataset: Sequence[g.Sample], params: Sequence,
                   ranges: Sequence[tuple[float, float]] = ((-2.0, 2.0), (-2.0, 2.0)),
                   steps: int | Sequence[int] = 81) -> LandscapeGrid:
    """Mean cost on a grid over one or two parameters, all others frozen.

    The network is restored afterwards, including its version counter, so
    outstanding traces stay valid.
    """
    keys = tuple(parse_param(p) for p in params)
    if not 1 <= len(keys) <= 2:
        raise ValueError("scan one or two parameters")
    saved = [network.get_param(k) for k in keys]   # raises on unknown ids
    version = network.version
    counts = [steps] * len(keys) if isinstance(steps, int) else list(steps)
    if any(c < 1 for c in counts):
        raise ValueError("steps must be positive")
    axes = tuple(np.linspace(lo, hi, c) for (lo, hi), c in zip(ranges, counts))
    x, t = g.dataset_arrays(dataset)
    costs = np.empty([len(a) for a in axes])
    try:
        for idx in np.ndindex(*costs.shape):
            for key, ax, i in zip(keys, axes, idx):
                network.set_param(key, ax[i])
            y = g.forward_batch(network, x).outputs(network)
            costs[idx] = float(((y - t) ** 2).sum(axis=1).mean())
    finally:
        for key, v in zip(keys, saved):
            network.set_param(key, v)
        network.version = version
    if not np.all(np.isfinite(costs)):
        raise FloatingPointError("non-finite cost in landscape")
    return LandscapeGrid(keys, axes, costs)


def xor_stall_networks(k: float = 1.0, invert: bool = True):
    """The XOR network stalled on a zero-weight edge x1 -> y, before and after converting it.

    Returns (dataset, pre, pre_key, post, post_keys) where post_keys are the
    converted node's out-edge weight and its new term-1 edge from x0.
    """
    data = gen_signed_xor(invert=invert)
    pre = g.Network(2, 1, k=k)
    x0, x1 = pre.inputs
    y = pre.outputs[0]
    e = pre.add_edge(x1, y, 0.0)
    post = pre.copy()
    node = edge_node_conversion(post, e)
    out_edge = post.out_edges(node)[0].id
    reg = post.add_edge(x0, node, 0.0, term=1)
    return data, pre, ("w", e), post, (("w", out_edge), ("w", reg))


def is_local_minimum(grid: LandscapeGrid, at: float = 0.0) -> bool:
    i = grid.index_of(0, at)
    c = grid.costs[i]
    nbrs = [grid.costs[j] for j in (i - 1, i + 1) if 0 <= j < len(grid.costs)]
    return bool(nbrs) and all(n >= c for n in nbrs)


def saddle_directions(grid: LandscapeGrid, at=(0.0, 0.0)) -> dict:
    """Cost change to each of the 8 grid neighbours of ``at``."""
    i, j = grid.index_of(0, at[0]), grid.index_of(1, at[1])
    c = grid.costs[i, j]
    out = {}
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if (di or dj) and 0 <= i + di < grid.costs.shape[0] and 0 <= j + dj < grid.costs.shape[1]:
                out[(di, dj)] = float(grid.costs[i + di, j + dj] - c)
    return out


def is_saddle(grid: LandscapeGrid, at=(0.0, 0.0), drop: float = 1e-6) -> bool:
    d = saddle_directions(grid, at).values()
    return any(v < -drop for v in d) and any(v > 0 for v in d) and all(math.isfinite(v) for v in d)
