"""Mutable DAG of standard and modulatory nodes with batched forward/backward.

Every quantity is carried as an array over samples, so a single call produces
per-sample states, deltas and parameter gradients.  ``forward``/``backward``
are the one-sample entry points; ``forward_batch``/``batch_gradients`` do the
same over a whole dataset.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

INPUT, OUTPUT, STANDARD, MODULATORY = "input", "output", "standard", "modulatory"
NODE_KINDS = (INPUT, OUTPUT, STANDARD, MODULATORY)
ACTIVATIONS = ("tanh", "identity")

# Parameter keys: ("w", edge_id), ("b", node_id), ("b1", modulatory_node_id).
ParamKey = tuple


class GraphError(ValueError):
    pass


class CycleError(GraphError):
    pass


class StaleTraceError(GraphError):
    pass


def param_name(key: ParamKey) -> str:
    return f"{key[0]}:{key[1]}"


def sigma1(x, k: float):
    """Regulatory transfer 4/(1+exp(-kx)) - 1, range (-1, 3), value 1 at 0.

    Written as 1 + 2 tanh(kx/2), which is the same function without overflow.
    """
    return 1.0 + 2.0 * np.tanh(0.5 * k * x)


def sigma1_prime(x, k: float):
    th = np.tanh(0.5 * k * x)
    return k * (1.0 - th * th)


@dataclass
class Node:
    id: int
    kind: str
    activation: str = "tanh"
    bias: float = 0.0
    # modulatory only; term 0 bias is pinned to 0
    term_biases: list = field(default_factory=lambda: [0.0, 0.0])


@dataclass
class Edge:
    id: int
    source: int
    target: int
    weight: float = 0.0
    term: int = 0


@dataclass
class Sample:
    inputs: tuple
    targets: tuple


Dataset = list  # list[Sample]


def dataset_arrays(dataset: Sequence[Sample]) -> tuple[np.ndarray, np.ndarray]:
    if len(dataset) == 0:
        raise GraphError("empty dataset")
    x = np.array([s.inputs for s in dataset], dtype=np.float64)
    t = np.array([s.targets for s in dataset], dtype=np.float64)
    return x.reshape(len(dataset), -1), t.reshape(len(dataset), -1)


class Network:
    """Directed acyclic computation graph.

    Node and edge ids come from separate counters and are never reused.
    ``version`` bumps on every structural or parameter change so traces can
    detect that they are stale.
    """

    def __init__(self, n_inputs: int = 0, n_outputs: int = 0, k: float = 1.0,
                 activation: str = "tanh"):
        self.k = float(k)
        self.nodes: dict[int, Node] = {}
        self.edges: dict[int, Edge] = {}
        self.inputs: list[int] = []
        self.outputs: list[int] = []
        self.version = 0
        self._next_node = 0
        self._next_edge = 0
        self._order: list[int] | None = None
        for _ in range(n_inputs):
            self.inputs.append(self.add_node(INPUT))
        for _ in range(n_outputs):
            self.outputs.append(self.add_node(OUTPUT, activation=activation))

    # ---------------------------------------------------------------- structure

    def _touch(self, structural: bool = True) -> None:
        self.version += 1
        if structural:
            self._order = None

    def add_node(self, kind: str, activation: str = "tanh", bias: float = 0.0,
                 term1_bias: float = 0.0) -> int:
        if kind not in NODE_KINDS:
            raise GraphError(f"unknown node kind {kind!r}")
        if activation not in ACTIVATIONS:
            raise GraphError(f"unknown activation {activation!r}")
        nid = self._next_node
        self._next_node += 1
        if kind == INPUT:
            node = Node(nid, kind, activation="identity", bias=0.0)
        elif kind == MODULATORY:
            node = Node(nid, kind, activation="identity", bias=0.0,
                        term_biases=[0.0, float(term1_bias)])
        else:
            node = Node(nid, kind, activation=activation, bias=float(bias))
        self.nodes[nid] = node
        self._touch()
        return nid

    def reaches(self, start: int, goal: int) -> bool:
        """True if ``goal`` is reachable from ``start`` along edges."""
        if start == goal:
            return True
        out = self._out_adjacency()
        stack, seen = [start], {start}
        while stack:
            n = stack.pop()
            for m in out.get(n, ()):
                if m == goal:
                    return True
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        return False

    def _out_adjacency(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for e in self.edges.values():
            out.setdefault(e.source, []).append(e.target)
        return out

    def add_edge(self, source: int, target: int, weight: float = 0.0, term: int = 0) -> int:
        if source not in self.nodes or target not in self.nodes:
            raise GraphError(f"dangling endpoint {source}->{target}")
        tnode = self.nodes[target]
        if tnode.kind == INPUT:
            raise GraphError("input nodes take no in-edges")
        if term not in (0, 1):
            raise GraphError(f"bad term {term}")
        if term == 1 and tnode.kind != MODULATORY:
            raise GraphError("term 1 exists only on modulatory nodes")
        if source == target or self.reaches(target, source):
            raise CycleError(f"edge {source}->{target} would create a cycle")
        eid = self._next_edge
        self._next_edge += 1
        self.edges[eid] = Edge(eid, source, target, float(weight), term)
        self._touch()
        return eid

    def remove_edge(self, eid: int) -> Edge:
        if eid not in self.edges:
            raise GraphError(f"no edge {eid}")
        e = self.edges.pop(eid)
        self._touch()
        return e

    def replace_edge_with_path(self, eid: int, kind: str = MODULATORY,
                               w_in: float = 1.0, w_out: float | None = None,
                               term1_bias: float = 0.0) -> tuple[int, int, int]:
        """Swap edge i->j for i->k->j through a fresh node k.

        Returns (k, edge i->k, edge k->j).  ``w_out`` defaults to the old weight.
        """
        if eid not in self.edges:
            raise GraphError(f"no edge {eid}")
        old = self.edges[eid]
        if w_out is None:
            w_out = old.weight
        self.remove_edge(eid)
        k = self.add_node(kind, term1_bias=term1_bias)
        e_in = self.add_edge(old.source, k, w_in, term=0)
        e_out = self.add_edge(k, old.target, w_out, term=old.term)
        return k, e_in, e_out

    def in_edges(self, nid: int, term: int | None = None) -> list[Edge]:
        return [e for e in sorted(self.edges.values(), key=lambda e: e.id)
                if e.target == nid and (term is None or e.term == term)]

    def out_edges(self, nid: int) -> list[Edge]:
        return [e for e in sorted(self.edges.values(), key=lambda e: e.id) if e.source == nid]

    def topological_order(self) -> list[int]:
        if self._order is None:
            indeg = {n: 0 for n in self.nodes}
            out = self._out_adjacency()
            for e in self.edges.values():
                indeg[e.target] += 1
            ready = sorted(n for n, d in indeg.items() if d == 0)
            order = []
            while ready:
                n = ready.pop(0)
                order.append(n)
                for m in sorted(out.get(n, ())):
                    indeg[m] -= 1
                    if indeg[m] == 0:
                        ready.append(m)
                ready.sort()
            if len(order) != len(self.nodes):
                raise CycleError("network contains a cycle")
            self._order = order
        return self._order

    def check_acyclic(self) -> None:
        self._order = None
        self.topological_order()

    def copy(self) -> "Network":
        return from_dict(to_dict(self))

    # --------------------------------------------------------------- parameters

    def parameter_keys(self) -> list[ParamKey]:
        keys: list[ParamKey] = [("w", eid) for eid in sorted(self.edges)]
        for nid in sorted(self.nodes):
            kind = self.nodes[nid].kind
            if kind in (OUTPUT, STANDARD):
                keys.append(("b", nid))
            elif kind == MODULATORY:
                keys.append(("b1", nid))
        return keys

    def get_param(self, key: ParamKey) -> float:
        kind, ident = key
        try:
            if kind == "w":
                return self.edges[ident].weight
            node = self.nodes[ident]
        except KeyError:
            raise GraphError(f"unknown parameter {param_name(key)}") from None
        if kind == "b" and node.kind in (OUTPUT, STANDARD):
            return node.bias
        if kind == "b1" and node.kind == MODULATORY:
            return node.term_biases[1]
        raise GraphError(f"unknown parameter {param_name(key)}")

    def set_param(self, key: ParamKey, value: float) -> None:
        self.get_param(key)
        kind, ident = key
        if kind == "w":
            self.edges[ident].weight = float(value)
        elif kind == "b":
            self.nodes[ident].bias = float(value)
        else:
            self.nodes[ident].term_biases[1] = float(value)
        self._touch(structural=False)

    def parameter_vector(self) -> np.ndarray:
        return np.array([self.get_param(k) for k in self.parameter_keys()])

    def node_terms(self) -> list[tuple[int, int]]:
        """(node, term) pairs that have an activation input."""
        out = []
        for nid in sorted(self.nodes):
            kind = self.nodes[nid].kind
            if kind in (OUTPUT, STANDARD):
                out.append((nid, 0))
            elif kind == MODULATORY:
                out.extend([(nid, 0), (nid, 1)])
        return out

    def hidden_nodes(self) -> list[int]:
        return [n for n in sorted(self.nodes) if self.nodes[n].kind in (STANDARD, MODULATORY)]


# ------------------------------------------------------------------- evaluation

@dataclass
class ForwardTrace:
    """States a[node] and activation inputs z[(node, term)], arrays over samples."""
    a: dict
    z: dict
    version: int
    network_id: int

    def outputs(self, network: Network) -> np.ndarray:
        return np.stack([self.a[o] for o in network.outputs], axis=1)


@dataclass
class GradientTrace:
    """Per-sample costs, parameter gradient rows and node-term deltas."""
    costs: np.ndarray               # (M,)
    keys: list                      # parameter keys, column order of ``rows``
    rows: np.ndarray                # (M, P)
    deltas: dict                    # (node, term) -> (M,)

    @property
    def mean(self) -> np.ndarray:
        return self.rows.mean(axis=0)

    def column(self, key: ParamKey) -> np.ndarray:
        return self.rows[:, self.keys.index(key)]


def forward_batch(network: Network, x: np.ndarray) -> ForwardTrace:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != len(network.inputs):
        raise GraphError(f"expected {len(network.inputs)} inputs, got {x.shape[1]}")
    order = network.topological_order()
    incoming: dict[int, list[Edge]] = {}
    for e in sorted(network.edges.values(), key=lambda e: e.id):
        incoming.setdefault(e.target, []).append(e)
    a: dict[int, np.ndarray] = {}
    z: dict[tuple, np.ndarray] = {}
    col = {nid: i for i, nid in enumerate(network.inputs)}
    m = x.shape[0]
    for nid in order:
        node = network.nodes[nid]
        if node.kind == INPUT:
            a[nid] = x[:, col[nid]].copy()
            continue
        if node.kind == MODULATORY:
            z0 = np.zeros(m)
            z1 = np.full(m, node.term_biases[1])
            for e in incoming.get(nid, ()):
                if e.term == 0:
                    z0 = z0 + e.weight * a[e.source]
                else:
                    z1 = z1 + e.weight * a[e.source]
            z[(nid, 0)] = z0
            z[(nid, 1)] = z1
            a[nid] = z0 * sigma1(z1, network.k)
        else:
            zz = np.full(m, node.bias)
            for e in incoming.get(nid, ()):
                zz = zz + e.weight * a[e.source]
            z[(nid, 0)] = zz
            a[nid] = np.tanh(zz) if node.activation == "tanh" else zz
    return ForwardTrace(a, z, network.version, id(network))


def forward(network: Network, sample: Sample) -> ForwardTrace:
    if len(sample.inputs) != len(network.inputs):
        raise GraphError("sample arity does not match network inputs")
    return forward_batch(network, np.asarray(sample.inputs, dtype=np.float64)[None, :])


def backward_batch(network: Network, trace: ForwardTrace, t: np.ndarray) -> GradientTrace:
    if trace.version != network.version or trace.network_id != id(network):
        raise StaleTraceError("forward trace is stale: network changed since forward")
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 1:
        t = t[None, :]
    if t.shape[1] != len(network.outputs):
        raise GraphError(f"expected {len(network.outputs)} targets, got {t.shape[1]}")
    m = t.shape[0]
    da: dict[int, np.ndarray] = {nid: np.zeros(m) for nid in network.nodes}
    costs = np.zeros(m)
    for j, o in enumerate(network.outputs):
        err = trace.a[o] - t[:, j]
        costs += err * err
        da[o] = da[o] + 2.0 * err
    incoming: dict[int, list[Edge]] = {}
    for e in network.edges.values():
        incoming.setdefault(e.target, []).append(e)
    deltas: dict[tuple, np.ndarray] = {}
    grads: dict[ParamKey, np.ndarray] = {}
    k = network.k
    for nid in reversed(network.topological_order()):
        node = network.nodes[nid]
        if node.kind == INPUT:
            continue
        if node.kind == MODULATORY:
            z0, z1 = trace.z[(nid, 0)], trace.z[(nid, 1)]
            deltas[(nid, 0)] = da[nid] * sigma1(z1, k)
            deltas[(nid, 1)] = da[nid] * z0 * sigma1_prime(z1, k)
            grads[("b1", nid)] = deltas[(nid, 1)]
        else:
            if node.activation == "tanh":
                deltas[(nid, 0)] = da[nid] * (1.0 - trace.a[nid] ** 2)
            else:
                deltas[(nid, 0)] = da[nid].copy()
            grads[("b", nid)] = deltas[(nid, 0)]
        for e in incoming.get(nid, ()):
            d = deltas[(nid, e.term)]
            grads[("w", e.id)] = d * trace.a[e.source]
            da[e.source] = da[e.source] + d * e.weight
    keys = network.parameter_keys()
    rows = np.stack([grads[key] for key in keys], axis=1) if keys else np.zeros((m, 0))
    return GradientTrace(costs, keys, rows, deltas)


def backward(network: Network, trace: ForwardTrace, sample: Sample) -> GradientTrace:
    return backward_batch(network, trace, np.asarray(sample.targets, dtype=np.float64)[None, :])


def batch_gradients(network: Network, dataset: Sequence[Sample]) -> GradientTrace:
    x, t = dataset_arrays(dataset)
    return backward_batch(network, forward_batch(network, x), t)


def cost(network: Network, dataset: Sequence[Sample]) -> tuple[float, np.ndarray]:
    x, t = dataset_arrays(dataset)
    y = forward_batch(network, x).outputs(network)
    per = ((y - t) ** 2).sum(axis=1)
    return float(per.mean()), per


def outputs(network: Network, dataset_or_x) -> np.ndarray:
    if isinstance(dataset_or_x, np.ndarray):
        x = dataset_or_x
    else:
        x, _ = dataset_arrays(dataset_or_x)
    return forward_batch(network, x).outputs(network)


def apply_update(network: Network, mean_gradient, gamma: float,
                 keys: Sequence[ParamKey] | None = None) -> None:
    """Gradient step on every learnable parameter; term-0 biases are not parameters."""
    keys = list(keys) if keys is not None else network.parameter_keys()
    g = np.asarray(mean_gradient, dtype=np.float64)
    if g.shape != (len(keys),) or len(keys) != len(network.parameter_keys()):
        raise GraphError(f"gradient has shape {g.shape}, network has {len(network.parameter_keys())} parameters")
    for key, gi in zip(keys, g):
        if gi != 0.0:
            kind, ident = key
            if kind == "w":
                network.edges[ident].weight -= gamma * gi
            elif kind == "b":
                network.nodes[ident].bias -= gamma * gi
            else:
                network.nodes[ident].term_biases[1] -= gamma * gi
    network._touch(structural=False)


# ---------------------------------------------------------------- serialization

_TOP_KEYS = {"K", "inputs", "outputs", "nodes", "edges"}
_NODE_KEYS = {"id", "kind", "activation", "bias", "term_biases"}
_EDGE_KEYS = {"id", "source", "target", "term", "weight"}


def to_dict(network: Network) -> dict:
    nodes = []
    for nid in sorted(network.nodes):
        n = network.nodes[nid]
        rec = {"id": nid, "kind": n.kind, "activation": n.activation}
        if n.kind == MODULATORY:
            rec["term_biases"] = list(n.term_biases)
        elif n.kind != INPUT:
            rec["bias"] = n.bias
        nodes.append(rec)
    edges = [{"id": e.id, "source": e.source, "target": e.target, "term": e.term,
              "weight": e.weight} for e in sorted(network.edges.values(), key=lambda e: e.id)]
    return {"K": network.k, "inputs": list(network.inputs), "outputs": list(network.outputs),
            "nodes": nodes, "edges": edges}


def serialize(network: Network) -> str:
    return json.dumps(to_dict(network), indent=1)


def _reject_unknown(rec: dict, allowed: set, what: str) -> None:
    if not isinstance(rec, dict):
        raise GraphError(f"{what} must be an object")
    extra = set(rec) - allowed
    if extra:
        raise GraphError(f"unknown {what} fields: {sorted(extra)}")


def from_dict(doc: dict) -> Network:
    _reject_unknown(doc, _TOP_KEYS, "network")
    missing = _TOP_KEYS - set(doc)
    if missing:
        raise GraphError(f"missing network fields: {sorted(missing)}")
    net = Network(k=float(doc["K"]))
    for rec in doc["nodes"]:
        _reject_unknown(rec, _NODE_KEYS, "node")
        kind = rec.get("kind")
        if kind not in NODE_KINDS:
            raise GraphError(f"unknown node kind {kind!r}")
        nid = int(rec["id"])
        if nid in net.nodes:
            raise GraphError(f"duplicate node id {nid}")
        act = rec.get("activation", "tanh" if kind in (OUTPUT, STANDARD) else "identity")
        if act not in ACTIVATIONS:
            raise GraphError(f"unknown activation {act!r}")
        if kind == MODULATORY:
            tb = rec.get("term_biases", [0.0, 0.0])
            if len(tb) != 2 or float(tb[0]) != 0.0:
                raise GraphError("modulatory term 0 bias must be 0")
            node = Node(nid, kind, act, 0.0, [0.0, float(tb[1])])
        else:
            node = Node(nid, kind, act, float(rec.get("bias", 0.0)))
        net.nodes[nid] = node
    for rec in doc["edges"]:
        _reject_unknown(rec, _EDGE_KEYS, "edge")
        eid = int(rec["id"])
        if eid in net.edges:
            raise GraphError(f"duplicate edge id {eid}")
        s, t = int(rec["source"]), int(rec["target"])
        if s not in net.nodes or t not in net.nodes:
            raise GraphError(f"edge {eid} references missing node")
        term = int(rec.get("term", 0))
        if net.nodes[t].kind == INPUT or (term == 1 and net.nodes[t].kind != MODULATORY) \
                or term not in (0, 1) or s == t:
            raise GraphError(f"invalid edge {eid}")
        net.edges[eid] = Edge(eid, s, t, float(rec["weight"]), term)
    net.inputs = [int(i) for i in doc["inputs"]]
    net.outputs = [int(o) for o in doc["outputs"]]
    for i in net.inputs:
        if net.nodes.get(i) is None or net.nodes[i].kind != INPUT:
            raise GraphError(f"input {i} is not an input node")
    for o in net.outputs:
        if net.nodes.get(o) is None or net.nodes[o].kind != OUTPUT:
            raise GraphError(f"output {o} is not an output node")
    if set(net.inputs) & set(net.outputs):
        raise GraphError("inputs and outputs overlap")
    net._next_node = max(net.nodes, default=-1) + 1
    net._next_edge = max(net.edges, default=-1) + 1
    net.check_acyclic()
    return net


def deserialize(text: str) -> Network:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphError(f"malformed network document: {exc}") from None
    return from_dict(doc)


def structurally_equal(a: Network, b: Network) -> bool:
    return to_dict(a) == to_dict(b)


def make_dataset(xs: Iterable, ts: Iterable) -> list[Sample]:
    return [Sample(tuple(float(v) for v in x), tuple(float(v) for v in t)) for x, t in zip(xs, ts)]
