"""Growth of a network by neutral edge generation and edge-node conversion.

Adaptive potentials (APs) are computed from the per-sample gradient rows of a
full batch: the immediate AP is the mean gradient, the total AP the sum of
absolute per-sample gradients.  A parameter whose immediate AP is ~0 while its
total AP is not is caught in a statistical trade-off; growth turns that latent
potential into a usable gradient.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from . import graph as g
from .graph import MODULATORY, Network, Sample

log = logging.getLogger(__name__)

EDGE_GENERATED = "edge_generated"
ENC_PERFORMED = "enc_performed"
SADDLE_NUDGE = "saddle_nudge"


class GrowthError(ValueError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, step: int, value: float):
        super().__init__(f"non-finite cost {value} at step {step}")
        self.step = step


@dataclass
class GrowthConfig:
    gamma: float = 0.05
    k: float = 1.0
    imm_mode: str = "ratio"        # "ratio": vs mean |per-sample AP|; "rms": vs RMS history
    imm_rel: float = 1e-2
    imm_floor: float = 1e-8
    eps_total: float = 1e-6
    patience: int = 5
    check_interval: int = 25
    goal: float = 1e-3
    max_nodes: int = 64
    max_steps: int = 200_000
    max_enc_per_scan: int = 1      # 0 = no limit; else largest total AP first
    nudge: float = 0.05            # output-neutral kick for term-1 edges of zero-output nodes
    prefer_generation: bool = True  # defer ENC on a term that can still gain a productive edge
    productive_rel: float = 0.5     # |mean| / mean|.| a candidate edge needs to count as productive
    seed: int = 0

    def __post_init__(self):
        for name in ("gamma", "imm_rel", "imm_floor", "eps_total", "check_interval", "goal"):
            if not getattr(self, name) > 0:
                raise GrowthError(f"{name} must be > 0")
        if self.imm_mode not in ("ratio", "rms"):
            raise GrowthError(f"unknown imm_mode {self.imm_mode!r}")
        if self.patience < 1:
            raise GrowthError("patience must be >= 1")


# ------------------------------------------------------------- adaptive potentials

@dataclass
class ApEntry:
    immediate: float
    total: float
    imm_exhausted: bool
    total_exhausted: bool


@dataclass
class ApReport:
    """APs for parameters (("w", e), ("b", n), ("b1", n)) and node terms (("z", n, t))."""
    entries: dict
    # (node, term) -> eligible for a new in-edge at this check
    node_ready: dict = field(default_factory=dict)
    # (node, term) -> sorted in-edge ids at this check
    in_edges: dict = field(default_factory=dict)

    def edge_stalled(self, eid: int) -> bool:
        e = self.entries.get(("w", eid))
        return e is not None and e.imm_exhausted and not e.total_exhausted

    def all_total_exhausted(self) -> bool:
        return all(e.total_exhausted for e in self.entries.values())

    def stationary(self) -> bool:
        return all(e.imm_exhausted for e in self.entries.values())


def compute_ap(gradient_rows, keys: Sequence | None = None, eps_imm=1e-8,
               eps_total: float = 1e-6) -> ApReport:
    """Immediate/total APs of each column of an (M, P) matrix of per-sample gradients.

    ``eps_imm`` is a scalar or a per-key mapping.
    """
    rows = np.asarray(gradient_rows, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[:, None]
    if rows.shape[0] == 0:
        raise GrowthError("no gradient rows")
    keys = list(keys) if keys is not None else list(range(rows.shape[1]))
    imm = rows.mean(axis=0)
    tot = np.abs(rows).sum(axis=0)
    entries = {}
    for i, key in enumerate(keys):
        thr = eps_imm[key] if isinstance(eps_imm, dict) else eps_imm
        entries[key] = ApEntry(float(imm[i]), float(tot[i]),
                               bool(abs(imm[i]) < thr), bool(tot[i] < eps_total))
    return ApReport(entries)


class ApTracker:
    """Running RMS of each entry's immediate AP, for scale-relative exhaustion."""

    def __init__(self, config: GrowthConfig):
        self.config = config
        self._sumsq: dict = {}
        self._count: dict = {}

    def thresholds(self, immediates: dict, totals: dict, m: int) -> dict:
        out = {}
        if self.config.imm_mode == "ratio":
            for key, tot in totals.items():
                out[key] = max(self.config.imm_rel * tot / m, self.config.imm_floor)
            return out
        for key, v in immediates.items():
            self._sumsq[key] = self._sumsq.get(key, 0.0) + v * v
            self._count[key] = self._count.get(key, 0) + 1
            rms = math.sqrt(self._sumsq[key] / self._count[key])
            out[key] = max(self.config.imm_rel * rms, self.config.imm_floor)
        return out

    def report(self, network: Network, trace: g.GradientTrace) -> ApReport:
        term_keys = network.node_terms()
        cols = [trace.rows] + [trace.deltas[nt][:, None] for nt in term_keys]
        rows = np.concatenate(cols, axis=1)
        keys = list(trace.keys) + [("z", n, t) for n, t in term_keys]
        imm = dict(zip(keys, rows.mean(axis=0).tolist()))
        tot = dict(zip(keys, np.abs(rows).sum(axis=0).tolist()))
        rep = compute_ap(rows, keys, self.thresholds(imm, tot, rows.shape[0]), self.config.eps_total)
        for n, t in term_keys:
            z = rep.entries[("z", n, t)]
            ins = network.in_edges(n, t)
            rep.in_edges[(n, t)] = tuple(e.id for e in ins)
            rep.node_ready[(n, t)] = (z.imm_exhausted and not z.total_exhausted
                                      and all(rep.entries[("w", e.id)].imm_exhausted for e in ins))
        return rep


def detect_growth_sites(ap_history: Sequence[ApReport], network: Network,
                        patience: int = 5) -> tuple[list, list]:
    """(node terms needing an in-edge, edges needing ENC), each sustained for ``patience`` checks.

    A node term only counts if its in-edge set is unchanged across the window.
    """
    if len(ap_history) < patience:
        return [], []
    window = ap_history[-patience:]
    nodes = []
    for n, t in network.node_terms():
        current = tuple(e.id for e in network.in_edges(n, t))
        if all(r.node_ready.get((n, t)) and r.in_edges.get((n, t)) == current for r in window):
            nodes.append((n, t))
    edges = [eid for eid in sorted(network.edges) if all(r.edge_stalled(eid) for r in window)]
    return nodes, edges


# ------------------------------------------------------------ generative processes

def candidate_sources(network: Network, target: int, term: int,
                      include_existing: bool = False) -> list[int]:
    existing = {e.source for e in network.in_edges(target, term)}
    out = []
    for nid in list(network.inputs) + network.hidden_nodes():
        if nid == target or (nid in existing and not include_existing):
            continue
        if network.reaches(target, nid):
            continue
        out.append(nid)
    return sorted(out)


def source_scores(network: Network, target: int, term: int, states: dict,
                  delta: np.ndarray) -> dict:
    """|sum_m a_i^m * dC^m/dz^m| for every legal source i."""
    return {i: float(abs(np.dot(states[i], delta)))
            for i in candidate_sources(network, target, term)}


def select_edge_source(network: Network, target: int, term: int, states: dict,
                       delta: np.ndarray, rng: np.random.Generator) -> tuple[int, float]:
    scores = source_scores(network, target, term, states, delta)
    if not scores:
        raise GrowthError(f"no candidate source for node {target} term {term}")
    return pick_max(scores, rng)


def pick_max(scores: dict, rng: np.random.Generator) -> tuple:
    best = max(scores.values())
    tol = 1e-12 * max(1.0, best)
    tied = sorted(i for i, s in scores.items() if s >= best - tol)
    choice = tied[int(rng.integers(len(tied)))] if len(tied) > 1 else tied[0]
    return choice, scores[choice]


def generate_edge(network: Network, target: int, term: int, source: int) -> int:
    if any(e.source == source for e in network.in_edges(target, term)):
        raise GrowthError(f"edge {source}->{target}[{term}] already exists")
    return network.add_edge(source, target, 0.0, term)


def edge_node_conversion(network: Network, eid: int) -> int:
    """Replace edge i->j with a modulatory node k: i->k[term 0] (w=1), k->j (w=w_ij)."""
    if eid not in network.edges:
        raise GrowthError(f"no edge {eid}")
    k, _, _ = network.replace_edge_with_path(eid, MODULATORY, w_in=1.0, term1_bias=0.0)
    return k


def neutrality_residual(before: np.ndarray, network: Network, x: np.ndarray) -> float:
    return float(np.max(np.abs(g.outputs(network, x) - before))) if before.size else 0.0


# ------------------------------------------------------------------ training loop

@dataclass
class GrowthEvent:
    step: int
    kind: str
    ids: dict
    source: int | None = None
    score: float | None = None
    residual: float = 0.0

    def record(self) -> dict:
        rec = {"type": "event"}
        rec.update(asdict(self))
        return rec


@dataclass
class TrainingLog:
    costs: list = field(default_factory=list)
    events: list = field(default_factory=list)
    final_report: ApReport | None = None
    reason: str = ""
    steps: int = 0

    @property
    def enc_count(self) -> int:
        return sum(e.kind == ENC_PERFORMED for e in self.events)

    @property
    def final_cost(self) -> float:
        return self.costs[-1] if self.costs else float("nan")

    def records(self):
        """JSON-lines records: one per step, events interleaved after the step they follow."""
        by_step: dict = {}
        for ev in self.events:
            by_step.setdefault(ev.step, []).append(ev)
        for i, c in enumerate(self.costs):
            yield {"type": "step", "step": i, "cost": c}
            for ev in by_step.get(i, ()):
                yield ev.record()
        yield {"type": "halt", "step": self.steps, "reason": self.reason,
               "final_cost": self.final_cost, "enc_count": self.enc_count}


def _grow(network: Network, trace: g.GradientTrace, fwd: g.ForwardTrace, x: np.ndarray,
          t: np.ndarray, sites: tuple, step: int, config: GrowthConfig,
          rng: np.random.Generator) -> tuple[list, bool]:
    """One growth scan. Returns (events, hit_node_cap)."""
    node_sites, edge_sites = sites
    events: list[GrowthEvent] = []
    touched = set()
    fresh = []
    # A term that can gain an edge with live immediate AP grows that edge
    # first; converting its in-edges waits until that option is used up.
    productive = {(n, term) for n, term in node_sites if config.prefer_generation
                  and _has_productive_source(network, n, term, fwd.a, trace.deltas[(n, term)], config)}
    edge_sites = [e for e in edge_sites
                  if (network.edges[e].target, network.edges[e].term) not in productive]
    if config.max_enc_per_scan and len(edge_sites) > config.max_enc_per_scan:
        totals = np.abs(trace.rows).sum(axis=0)
        edge_sites = sorted(edge_sites, key=lambda e: -totals[trace.keys.index(("w", e))])
        edge_sites = sorted(edge_sites[:config.max_enc_per_scan])
    for eid in edge_sites:
        if len(network.nodes) >= config.max_nodes:
            return events, True
        edge = network.edges[eid]
        transferred = trace.column(("w", eid)).copy()
        before = g.outputs(network, x)
        k = edge_node_conversion(network, eid)
        res = neutrality_residual(before, network, x)
        touched.add((edge.target, edge.term))
        fresh.append((k, transferred))
        events.append(GrowthEvent(step, ENC_PERFORMED,
                                  {"edge": eid, "node": k, "source": edge.source,
                                   "target": edge.target}, residual=res))
    if events:
        fwd = g.forward_batch(network, x)
        trace = g.backward_batch(network, fwd, t)

    for n, term in node_sites:
        if (n, term) in touched or n not in network.nodes:
            continue
        try:
            src, score = select_edge_source(network, n, term, fwd.a, trace.deltas[(n, term)], rng)
        except GrowthError:
            continue
        before = g.outputs(network, x)
        eid = generate_edge(network, n, term, src)
        events.append(GrowthEvent(step, EDGE_GENERATED, {"edge": eid, "target": n, "term": term},
                                  src, score, neutrality_residual(before, network, x)))

    # Fresh regulatory terms: the converted edge's per-sample gradients are
    # proportional to the new term-1 deltas, and stay informative when w_ij = 0.
    for k, transferred in fresh:
        try:
            src, score = select_edge_source(network, k, 1, fwd.a, transferred, rng)
        except GrowthError:
            continue
        before = g.outputs(network, x)
        eid = generate_edge(network, k, 1, src)
        events.append(GrowthEvent(step, EDGE_GENERATED, {"edge": eid, "target": k, "term": 1},
                                  src, score, neutrality_residual(before, network, x)))
        if config.nudge and all(e.weight == 0.0 for e in network.out_edges(k)):
            sign = 1.0 if rng.random() < 0.5 else -1.0
            network.edges[eid].weight = sign * config.nudge
            network._touch(structural=False)
            events.append(GrowthEvent(step, SADDLE_NUDGE, {"edge": eid, "node": k},
                                      residual=neutrality_residual(before, network, x)))
    return events, False


def _has_productive_source(network: Network, target: int, term: int, states: dict,
                           delta: np.ndarray, config: GrowthConfig) -> bool:
    """Would some new in-edge start with an immediate AP that is not exhausted?"""
    for i in candidate_sources(network, target, term):
        prod = states[i] * delta
        if abs(prod.mean()) >= max(config.productive_rel * np.abs(prod).mean(), config.imm_floor):
            return True
    return False


def _growth_pending(network: Network, report: ApReport) -> bool:
    if any(report.edge_stalled(eid) for eid in network.edges):
        return True
    return any(ready and candidate_sources(network, n, t)
               for (n, t), ready in report.node_ready.items())


def train_d1(network: Network, dataset: Sequence[Sample], config: GrowthConfig | None = None,
             on_event=None) -> TrainingLog:
    config = config or GrowthConfig()
    rng = np.random.default_rng(config.seed)
    x, t = g.dataset_arrays(dataset)
    tracker = ApTracker(config)
    history: list[ApReport] = []
    tlog = TrainingLog()
    for step in range(config.max_steps):
        with np.errstate(over="ignore", invalid="ignore"):
            fwd = g.forward_batch(network, x)
            trace = g.backward_batch(network, fwd, t)
        c = float(trace.costs.mean())
        if not math.isfinite(c):
            tlog.reason = "diverged"
            tlog.steps = step
            raise DivergenceError(step, c)
        tlog.costs.append(c)
        tlog.steps = step + 1
        if c < config.goal:
            tlog.reason = "converged"
            break
        if step % config.check_interval == 0:
            report = tracker.report(network, trace)
            history.append(report)
            tlog.final_report = report
            if report.all_total_exhausted():
                tlog.reason = "exhausted"
                break
            sites = detect_growth_sites(history, network, config.patience)
            events, capped = _grow(network, trace, fwd, x, t, sites, step, config, rng)
            for ev in events:
                if on_event:
                    on_event(ev)
                log.debug("step %d %s %s", step, ev.kind, ev.ids)
            tlog.events.extend(events)
            if capped:
                tlog.reason = "max_nodes"
                break
            if events:
                trace = g.batch_gradients(network, dataset)
            elif (len(history) >= config.patience
                  and all(r.stationary() for r in history[-config.patience:])
                  and not _growth_pending(network, report)):
                tlog.reason = "stalled"
                break
        g.apply_update(network, trace.mean, config.gamma, trace.keys)
    else:
        tlog.reason = "max_steps"
    if tlog.final_report is None:
        tlog.final_report = tracker.report(network, g.batch_gradients(network, dataset))
    return tlog


# ------------------------------------------------------------- termination check

MAX_CANDIDATES = 14


@dataclass
class CovarianceReport:
    edge: int
    candidates: list
    max_abs_cov: float
    witness: tuple
    satisfied: bool
    tolerance: float


def subset_covariances(states: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Population covariance of prod(states[A]) with grad for every subset mask A.

    ``states`` is (n, M); entry ``mask`` of the result uses rows whose bits are set.
    """
    n, m = states.shape
    prods = np.ones((1 << n, m))
    for mask in range(1, 1 << n):
        low = mask & -mask
        prods[mask] = prods[mask ^ low] * states[low.bit_length() - 1]
    gc = grad - grad.mean()
    return (prods - prods.mean(axis=1, keepdims=True)) @ gc / m


def covariance_termination_check(network: Network, dataset: Sequence[Sample], eid: int,
                                 candidates: Sequence[int] | None = None,
                                 tolerance: float = 1e-6) -> CovarianceReport:
    if eid not in network.edges:
        raise GrowthError(f"no edge {eid}")
    edge = network.edges[eid]
    if candidates is None:
        candidates = candidate_sources(network, edge.target, edge.term, include_existing=True)
    candidates = list(candidates)
    if len(candidates) > MAX_CANDIDATES:
        raise GrowthError(f"candidate set of {len(candidates)} exceeds {MAX_CANDIDATES}")
    x, t = g.dataset_arrays(dataset)
    fwd = g.forward_batch(network, x)
    trace = g.backward_batch(network, fwd, t)
    grad = trace.column(("w", eid))
    states = np.array([fwd.a[c] for c in candidates]).reshape(len(candidates), len(grad))
    cov = np.abs(subset_covariances(states, grad))
    best = int(np.argmax(cov))
    witness = tuple(c for i, c in enumerate(candidates) if best >> i & 1)
    return CovarianceReport(eid, candidates, float(cov[best]), witness,
                            bool(cov[best] < tolerance), tolerance)


def brute_covariance(states: dict, grad: np.ndarray, subset: Sequence[int]) -> float:
    """Independent single-subset covariance, for cross-checking."""
    p = np.ones_like(grad)
    for i in subset:
        p = p * states[i]
    return float(np.mean(p * grad) - np.mean(p) * np.mean(grad))


def all_subsets(items: Sequence) -> list[tuple]:
    return [c for r in range(len(items) + 1) for c in combinations(items, r)]
