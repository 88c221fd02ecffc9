"""Conditioning state variables: ternary rule learning by variation and selection.

A CSV relates a conjunction of positive sources and a set of negative sources
(suppressors) to one or more target SVs.  New CSVs start over-specific (every
active input is a positive source) and are pruned by later observations; a
connection is only ever removed, never re-added, which is what keeps past
responses fixed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

ACTIVE, INACTIVE, UNOBSERVED = 1, -1, 0
STATES = (ACTIVE, INACTIVE, UNOBSERVED)
ROLES = ("input", "target", "csv")


class CsvError(ValueError):
    pass


@dataclass
class Csv:
    id: str
    xp: set
    xn: set
    y: list
    negatives_formed: bool = False
    created: int = 0

    def satisfied(self, inst: Mapping) -> bool:
        return (all(inst.get(s, 0) == ACTIVE for s in self.xp)
                and not any(inst.get(s, 0) == ACTIVE for s in self.xn))

    def target_state(self, inst: Mapping) -> int:
        vals = [inst.get(t, 0) for t in self.y]
        if all(v == ACTIVE for v in vals):
            return ACTIVE
        if all(v == INACTIVE for v in vals):
            return INACTIVE
        return UNOBSERVED


def csv_state(csv: Csv, instance: Mapping, strict: bool = False) -> int:
    """Active/inactive when the sources are satisfied and the targets agree, else unobserved."""
    if strict:
        missing = [s for s in (*csv.xp, *csv.xn, *csv.y) if s not in instance]
        if missing:
            raise CsvError(f"instance lacks {sorted(missing)}")
    if not csv.satisfied(instance):
        return UNOBSERVED
    return csv.target_state(instance)


@dataclass
class CsvConfig:
    depth: int = 1                 # upstream levels above the base CSVs
    refine: str = "remove"         # or "archive": refined sources seed an upstream CSV
    closed_world: bool = True
    hierarchical: bool = True      # upstream CSVs gate their downstream CSV in predict

    def __post_init__(self):
        if self.depth < 0:
            raise CsvError("depth must be >= 0")
        if self.refine not in ("remove", "archive"):
            raise CsvError(f"unknown refine mode {self.refine!r}")


class CsvModel:
    def __init__(self, inputs: Sequence[str] = (), targets: Sequence[str] = (),
                 config: CsvConfig | None = None):
        self.config = config or CsvConfig()
        self.roles: dict[str, str] = {}
        self.inputs: list[str] = []
        self.targets: list[str] = []
        self.csvs: dict[str, Csv] = {}
        self.level: dict[str, int] = {}
        self.events: list[dict] = []
        self.step = 0
        self._next = 0
        for s in inputs:
            self.add_sv(s, "input")
        for s in targets:
            self.add_sv(s, "target")

    def add_sv(self, sv: str, role: str) -> None:
        if role not in ("input", "target"):
            raise CsvError(f"role {role!r} cannot be declared directly")
        if sv in self.roles:
            raise CsvError(f"duplicate SV {sv!r}")
        self.roles[sv] = role
        (self.inputs if role == "input" else self.targets).append(sv)

    # ----------------------------------------------------------------- queries

    def upstream_of(self, cid: str) -> list[Csv]:
        return [c for c in self.csvs.values() if cid in c.y]

    def at_level(self, level: int) -> list[Csv]:
        return [self.csvs[c] for c in self.csvs if self.level[c] == level]

    def _new_csv(self, xp, y, level: int, xn=(), negatives_formed=False) -> Csv:
        cid = f"C{self._next}"
        self._next += 1
        c = Csv(cid, set(xp), set(xn), list(y), negatives_formed, self.step)
        self.csvs[cid] = c
        self.level[cid] = level
        self.roles[cid] = "csv"
        return c

    def _log(self, kind: str, csv: Csv, **extra) -> None:
        rec = {"step": self.step, "kind": kind, "csv": csv.id}
        rec.update({k: sorted(v) if isinstance(v, set) else v for k, v in extra.items()})
        self.events.append(rec)

    # ---------------------------------------------------------------- learning

    def observe(self, instance: Mapping[str, int]) -> list[dict]:
        """Process one observation; returns the events it produced.

        ``instance`` maps every input and target SV to 1/-1/0.  The mapping is
        extended in place-free fashion with the CSV states this step, which is
        what upstream CSVs see as their targets.
        """
        for sv in (*self.inputs, *self.targets):
            if sv not in instance:
                raise CsvError(f"instance lacks SV {sv!r}")
            if instance[sv] not in STATES:
                raise CsvError(f"bad state {instance[sv]!r} for {sv!r}")
        start = len(self.events)
        inst = dict(instance)
        active_inputs = {s for s in self.inputs if inst[s] == ACTIVE}
        for level in range(self.config.depth + 1):
            level_targets = self.targets if level == 0 else [c.id for c in self.at_level(level - 1)]
            for c in self.at_level(level):
                self._update(c, inst, active_inputs)
            unexplained = []
            for t in level_targets:
                if inst.get(t, 0) != ACTIVE:
                    continue
                if not any(csv_state(c, inst) == ACTIVE for c in self.upstream_of(t)):
                    unexplained.append(t)
            if unexplained:
                c = self._new_csv(active_inputs, unexplained, level)
                self._log("formed", c, xp=c.xp, y=c.y)
            for c in self.at_level(level):
                inst[c.id] = csv_state(c, inst)
        self.step += 1
        self.last_snapshot = inst
        return self.events[start:]

    def _update(self, c: Csv, inst: dict, active_inputs: set) -> None:
        tstate = c.target_state(inst)
        # (a) refinement on active targets with at least one active positive source
        if tstate == ACTIVE and any(inst.get(s, 0) == ACTIVE for s in c.xp):
            drop_p = {s for s in c.xp if inst.get(s, 0) != ACTIVE}
            drop_n = {s for s in c.xn if inst.get(s, 0) == ACTIVE}
            if drop_p or drop_n:
                c.xp -= drop_p
                c.xn -= drop_n
                self._log("refined", c, removed_xp=drop_p, removed_xn=drop_n)
                self._dispose(c, drop_p, drop_n)
            return
        if tstate != INACTIVE:
            return
        # (b) negative formation, once, at the first satisfied-but-inactive observation
        if not c.negatives_formed and c.satisfied(inst):
            c.xn = active_inputs - c.xp
            c.negatives_formed = True
            self._log("negatives_formed", c, xn=c.xn)
            return
        # (c) symmetric negative refinement
        if c.xn and all(inst.get(s, 0) == ACTIVE for s in c.xp) \
                and any(inst.get(s, 0) == ACTIVE for s in c.xn):
            drop_n = {s for s in c.xn if inst.get(s, 0) != ACTIVE}
            if drop_n:
                c.xn -= drop_n
                self._log("refined", c, removed_xp=set(), removed_xn=drop_n)
                self._dispose(c, set(), drop_n)

    def _dispose(self, c: Csv, drop_p: set, drop_n: set) -> None:
        if self.config.refine != "archive":
            return
        level = self.level[c.id] + 1
        if level > self.config.depth or not (drop_p or drop_n):
            return
        up = self._new_csv(drop_p, [c.id], level, xn=drop_n, negatives_formed=bool(drop_n))
        self._log("archived", up, xp=up.xp, xn=up.xn, y=up.y)

    # -------------------------------------------------------------- prediction

    def fires(self, cid: str, inputs: Mapping[str, int]) -> bool:
        c = self.csvs[cid]
        if not c.satisfied(inputs):
            return False
        if not self.config.hierarchical:
            return True
        ups = self.upstream_of(cid)
        return not ups or any(self.fires(u.id, inputs) for u in ups)

    def predict(self, inputs: Mapping[str, int]) -> dict:
        out = {}
        for t in self.targets:
            hit = any(self.fires(c.id, inputs) for c in self.upstream_of(t))
            out[t] = ACTIVE if hit else (INACTIVE if self.config.closed_world else UNOBSERVED)
        return out

    def structure(self) -> dict:
        return {cid: (frozenset(c.xp), frozenset(c.xn), tuple(c.y), c.negatives_formed)
                for cid, c in self.csvs.items()}

    # ----------------------------------------------------------- serialization

    def to_dict(self) -> dict:
        svs = [{"id": s, "role": self.roles[s]} for s in (*self.inputs, *self.targets)]
        svs += [{"id": c, "role": "csv"} for c in self.csvs]
        csvs = [{"id": c.id, "xp": sorted(c.xp), "xn": sorted(c.xn), "y": list(c.y),
                 "negatives_formed": c.negatives_formed, "created": c.created}
                for c in self.csvs.values()]
        cfg = {"depth": self.config.depth, "refine": self.config.refine,
               "closed_world": self.config.closed_world, "hierarchical": self.config.hierarchical}
        return {"svs": svs, "csvs": csvs, "config": cfg, "step": self.step, "events": self.events}


def model_export(model: CsvModel) -> str:
    return json.dumps(model.to_dict(), indent=1)


def model_from_dict(doc: Mapping) -> CsvModel:
    if not isinstance(doc, Mapping) or "svs" not in doc or "csvs" not in doc:
        raise CsvError("model document needs 'svs' and 'csvs'")
    extra = set(doc) - {"svs", "csvs", "config", "step", "events"}
    if extra:
        raise CsvError(f"unknown model fields {sorted(extra)}")
    try:
        model = CsvModel(config=CsvConfig(**doc.get("config", {})))
    except TypeError as exc:
        raise CsvError(f"bad config: {exc}") from None
    csv_ids = []
    for rec in doc["svs"]:
        role = rec.get("role")
        if role not in ROLES:
            raise CsvError(f"unknown role {role!r}")
        if role == "csv":
            csv_ids.append(rec["id"])
        else:
            model.add_sv(rec["id"], role)
    declared = set(csv_ids)
    for rec in doc["csvs"]:
        cid = rec["id"]
        if cid not in declared or cid in model.csvs:
            raise CsvError(f"CSV {cid!r} undeclared or duplicated")
        xp, xn, y = set(rec["xp"]), set(rec["xn"]), list(rec["y"])
        if xp & xn:
            raise CsvError(f"{cid}: positive and negative sources overlap")
        if not y:
            raise CsvError(f"{cid}: empty target set")
        for s in xp | xn:
            if model.roles.get(s) != "input":
                raise CsvError(f"{cid}: source {s!r} is not an input SV")
        c = Csv(cid, xp, xn, y, bool(rec["negatives_formed"]), int(rec.get("created", 0)))
        model.csvs[cid] = c
        model.roles[cid] = "csv"
    for c in model.csvs.values():
        for t in c.y:
            if t not in model.roles or model.roles[t] == "input" or t == c.id:
                raise CsvError(f"{c.id}: bad target {t!r}")
    for cid in model.csvs:
        model.level[cid] = _level(model, cid, set())
    model.step = int(doc.get("step", 0))
    model.events = list(doc.get("events", []))
    nums = [int(c[1:]) for c in model.csvs if c[1:].isdigit()]
    model._next = max(nums, default=-1) + 1
    return model


def _level(model: CsvModel, cid: str, seen: set) -> int:
    if cid in seen:
        raise CsvError("CSV target graph has a cycle")
    seen = seen | {cid}
    c = model.csvs[cid]
    lv = [0 if model.roles[t] == "target" else _level(model, t, seen) + 1 for t in c.y]
    if len(set(lv)) != 1:
        raise CsvError(f"{cid}: targets span levels")
    return lv[0]


def model_import(text: str) -> CsvModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CsvError(f"malformed model document: {exc}") from None
    return model_from_dict(doc)


# --------------------------------------------------------------- replay checking

@dataclass
class ReplayReport:
    checks: int = 0          # CSV structure changes re-evaluated on the archive
    pairs: int = 0           # archived (CSV, instance) states compared
    violations: list = field(default_factory=list)       # determined response altered
    exempt: list = field(default_factory=list)           # across a negative-formation event
    generalized: list = field(default_factory=list)      # unobserved -> determined

    @property
    def ok(self) -> bool:
        return not self.violations

    def merge(self, other: "ReplayReport") -> None:
        self.checks += other.checks
        self.pairs += other.pairs
        self.violations += other.violations
        self.exempt += other.exempt
        self.generalized += other.generalized


class ReplayArchive:
    """Every past instance (with CSV states at the time), for verification only."""

    def __init__(self, model: CsvModel, capacity: int | None = None):
        self.model = model
        self.capacity = capacity
        self.columns: dict[str, int] = {}
        self.rows: list[np.ndarray] = []
        self.steps: list[int] = []
        self._mat: np.ndarray | None = None

    def _col(self, sv: str) -> int:
        if sv not in self.columns:
            self.columns[sv] = len(self.columns)
            self._mat = None
        return self.columns[sv]

    def add(self, snapshot: Mapping[str, int], step: int) -> None:
        if self.capacity is not None and len(self.rows) >= self.capacity:
            return
        for sv in snapshot:
            self._col(sv)
        row = np.zeros(len(self.columns), dtype=np.int8)
        for sv, v in snapshot.items():
            row[self.columns[sv]] = v
        self.rows.append(row)
        self.steps.append(step)
        self._mat = None

    def matrix(self) -> np.ndarray:
        if self._mat is None:
            n = len(self.columns)
            mat = np.zeros((len(self.rows), n), dtype=np.int8)
            for i, r in enumerate(self.rows):
                mat[i, :len(r)] = r
            self._mat = mat
        return self._mat

    def states(self, xp, xn, y) -> np.ndarray:
        mat = self.matrix()
        m = mat.shape[0]
        def cols(names):
            return [self.columns[s] for s in names if s in self.columns]
        sat = np.ones(m, dtype=bool)
        if any(s not in self.columns for s in xp):
            sat[:] = False
        else:
            sat &= (mat[:, cols(xp)] == ACTIVE).all(axis=1)
        sat &= ~(mat[:, cols(xn)] == ACTIVE).any(axis=1)
        tv = np.stack([mat[:, self.columns[t]] if t in self.columns else np.zeros(m, np.int8)
                       for t in y], axis=1)
        out = np.where((tv == ACTIVE).all(axis=1), ACTIVE,
                       np.where((tv == INACTIVE).all(axis=1), INACTIVE, UNOBSERVED))
        return np.where(sat, out, UNOBSERVED).astype(np.int8)


def replay_observe(model: CsvModel, archive: ReplayArchive,
                   instance: Mapping[str, int]) -> tuple[list, ReplayReport]:
    """observe() wrapped with before/after evaluation of every CSV on the archive."""
    before = {cid: (set(c.xp), set(c.xn), list(c.y), c.negatives_formed)
              for cid, c in model.csvs.items()}
    events = model.observe(instance)
    report = ReplayReport()
    if archive.rows:
        formed_now = {e["csv"] for e in events if e["kind"] == "negatives_formed"}
        for cid, (xp, xn, y, _) in before.items():
            c = model.csvs[cid]
            if c.xp == xp and c.xn == xn and c.y == y:
                continue
            report.checks += 1
            old = archive.states(xp, xn, y)
            new = archive.states(c.xp, c.xn, c.y)
            report.pairs += len(old)
            for i in np.flatnonzero(old != new):
                rec = {"csv": cid, "step": model.step - 1, "instance_step": archive.steps[i],
                       "before": int(old[i]), "after": int(new[i])}
                if cid in formed_now or c.y != y:
                    report.exempt.append(rec)
                elif old[i] == UNOBSERVED:
                    report.generalized.append(rec)
                else:
                    report.violations.append(rec)
    archive.add(model.last_snapshot, model.step - 1)
    return events, report


def replay_check(model: CsvModel, stream: Iterable[Mapping[str, int]],
                 capacity: int | None = None) -> ReplayReport:
    archive = ReplayArchive(model, capacity)
    total = ReplayReport()
    for inst in stream:
        _, rep = replay_observe(model, archive, inst)
        total.merge(rep)
    return total


def read_stream(lines: Iterable[str]) -> list[dict]:
    out = []
    for n, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CsvError(f"line {n}: {exc}") from None
        if not isinstance(rec, dict) or any(v not in STATES for v in rec.values()):
            raise CsvError(f"line {n}: expected a mapping of SV ids to 1/-1/0")
        out.append(rec)
    return out
