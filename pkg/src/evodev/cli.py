"""Command-line drivers.  Each command writes a run directory and exits 0 (pass), 1 or 2.

Run directory layout::

    config.json     resolved configuration
    events.jsonl    header line (the only place a timestamp appears), then events
    metrics.jsonl   measurements the verdicts are computed from
    *.csv           landscape grids, header ``param1,param2,cost``
    summary.json    verdicts, re-derived from the files above
"""
from __future__ import annotations

import argparse
import copy
import dataclasses
import datetime
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import graph as g
from . import growth as gr
from .baselines import (Mlp, as_instances, make_task_pair, run_sequential, run_sequential_csv,
                        task_a_drop)
from .conditioning import CsvConfig, CsvError, CsvModel, replay_check
from .landscape import (LandscapeGrid, is_local_minimum, is_saddle, saddle_directions,
                        scan_landscape, xor_stall_networks)
from .tasks import gen_fuzz_stream, gen_random_boolean, gen_signed_xor

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(Exception):
    pass


# ----------------------------------------------------------------- config

DEFAULTS = {
    "seed": 0,
    "trials": None,          # per-command default below
    "grid_steps": 81,
    "growth": {},
    "csv": {},
    "baseline": {"hidden": [16, 16], "gamma": 0.1, "steps": 20_000, "kind": "parity",
                 "eval_every": 500, "csv_passes": 3, "csv_depth": 5,
                 "drop_min": 30.0, "joint_drop_max": 5.0},
    "landscape": {"ranges": [[-2.0, 2.0], [-2.0, 2.0]], "invert_targets": True},
    "task": {"n_min": 2, "n_max": 3, "max_steps": 200_000},
    "fuzz": {"steps": 40, "max_inputs": 8, "capacity": 2000, "max_depth": 2},
    "covariance": {"network": None, "edge": None, "inputs": None, "targets": None,
                   "expect": None, "tolerance": 1e-6},
    "demo": {"consistent": 100},
}
TRIALS = {"xor-demo": 1, "landscape": 1, "grow-train": 50, "csv-demo": 1, "csv-fuzz": 10_000,
          "destructive-demo": 5, "covariance-check": 1}
_GROWTH_FIELDS = {f.name for f in dataclasses.fields(gr.GrowthConfig)} - {"seed"}
_CSV_FIELDS = {f.name for f in dataclasses.fields(CsvConfig)}


def _merge_block(name: str, base: dict, extra, allowed: set | None = None) -> dict:
    if not isinstance(extra, dict):
        raise ConfigError(f"'{name}' must be an object")
    keys = allowed if allowed is not None else set(base)
    unknown = set(extra) - keys
    if unknown:
        raise ConfigError(f"unknown key(s) in '{name}': {', '.join(sorted(unknown))}")
    out = dict(base)
    out.update(extra)
    return out


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if args.config is not None:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}") from None
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(doc) - set(DEFAULTS) - {"command"}
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        if doc.get("command", command) != command:
            raise ConfigError(f"config is for {doc['command']!r}, not {command!r}")
        for key, val in doc.items():
            if key == "command":
                continue
            if key == "growth":
                cfg[key] = _merge_block(key, cfg[key], val, _GROWTH_FIELDS)
            elif key == "csv":
                cfg[key] = _merge_block(key, cfg[key], val, _CSV_FIELDS)
            elif isinstance(DEFAULTS[key], dict):
                cfg[key] = _merge_block(key, cfg[key], val)
            else:
                cfg[key] = val
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.trials is not None:
        cfg["trials"] = args.trials
    if args.grid_steps is not None:
        cfg["grid_steps"] = args.grid_steps
    if args.k is not None:
        cfg["growth"]["k"] = args.k
    if args.gamma is not None:
        if command == "destructive-demo":
            cfg["baseline"]["gamma"] = args.gamma
        else:
            cfg["growth"]["gamma"] = args.gamma
    if cfg["trials"] is None:
        cfg["trials"] = TRIALS[command]
    cfg["command"] = command
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    for key in ("seed", "trials", "grid_steps"):
        if not isinstance(cfg[key], int) or isinstance(cfg[key], bool):
            raise ConfigError(f"'{key}' must be an integer")
    if cfg["seed"] < 0:
        raise ConfigError("'seed' must be >= 0")
    if cfg["trials"] < 1:
        raise ConfigError("'trials' must be >= 1")
    if cfg["grid_steps"] < 3:
        raise ConfigError("'grid_steps' must be >= 3")
    try:
        gr.GrowthConfig(**cfg["growth"])
        CsvConfig(**cfg["csv"])
    except (TypeError, gr.GrowthError, CsvError) as exc:
        raise ConfigError(str(exc)) from None
    b = cfg["baseline"]
    if not (isinstance(b["hidden"], list) and all(isinstance(h, int) and h > 0 for h in b["hidden"])):
        raise ConfigError("'baseline.hidden' must be a list of positive integers")
    if b["kind"] not in ("parity", "random"):
        raise ConfigError("'baseline.kind' must be 'parity' or 'random'")
    t = cfg["task"]
    if not 2 <= t["n_min"] <= t["n_max"] <= 8:
        raise ConfigError("'task' needs 2 <= n_min <= n_max <= 8")
    rng = cfg["landscape"]["ranges"]
    if not (isinstance(rng, list) and len(rng) == 2 and all(len(r) == 2 and r[0] < r[1] for r in rng)):
        raise ConfigError("'landscape.ranges' must be two [lo, hi] pairs")
    c = cfg["covariance"]
    if c["expect"] not in (None, "satisfied", "violated"):
        raise ConfigError("'covariance.expect' must be 'satisfied' or 'violated'")
    if c["network"] is not None:
        if not os.path.exists(c["network"]):
            raise ConfigError(f"network file not found: {c['network']}")
        if c["edge"] is None or c["inputs"] is None or c["targets"] is None:
            raise ConfigError("'covariance' needs edge, inputs and targets with a network file")


# ----------------------------------------------------------------- run writer

def _dumps(rec) -> str:
    return json.dumps(rec, sort_keys=True, allow_nan=True)


class Run:
    def __init__(self, out: Path, cfg: dict):
        self.out = out
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
        self._events = open(out / "events.jsonl", "w")
        self._metrics = open(out / "metrics.jsonl", "w")
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
        self.event({"type": "header", "command": cfg["command"], "seed": cfg["seed"],
                    "version": __version__, "timestamp": stamp})

    def event(self, rec: dict) -> None:
        self._events.write(_dumps(rec) + "\n")

    def metric(self, rec: dict) -> None:
        self._metrics.write(_dumps(rec) + "\n")

    def close(self) -> None:
        self._events.close()
        self._metrics.close()


def _verdict(name: str, passed: bool, detail: str) -> dict:
    return {"criterion": name, "passed": bool(passed), "detail": detail}


# ----------------------------------------------------------------- commands

def _growth_config(cfg: dict, seed: int, **over) -> gr.GrowthConfig:
    kw = dict(cfg["growth"])
    kw.update(over)
    return gr.GrowthConfig(seed=seed, **kw)


def _log_training(run: Run, tlog: gr.TrainingLog, trial: int, every: int) -> None:
    for rec in tlog.records():
        rec["trial"] = trial
        if rec["type"] == "step":
            if rec["step"] % every == 0:
                run.metric(rec)
        elif rec["type"] == "halt":
            run.event(rec)
            run.metric(rec)
        else:
            run.event(rec)


def cmd_xor_demo(cfg: dict, run: Run) -> None:
    data = gen_signed_xor()
    for trial in range(cfg["trials"]):
        seed = cfg["seed"] + trial
        net = g.Network(2, 1, k=cfg["growth"].get("k", 1.0))
        tlog = gr.train_d1(net, data, _growth_config(cfg, seed))
        _log_training(run, tlog, trial, 25)
        residual = max((e.residual for e in tlog.events if e.residual is not None), default=0.0)
        run.metric({"type": "trial", "trial": trial, "seed": seed, "reason": tlog.reason,
                    "final_cost": tlog.final_cost, "enc_count": tlog.enc_count,
                    "steps": tlog.steps, "nodes": len(net.nodes), "edges": len(net.edges),
                    "max_residual": residual, "network": g.to_dict(net)})


def verdict_xor_demo(metrics: list[dict], cfg: dict) -> list[dict]:
    trials = [m for m in metrics if m["type"] == "trial"]
    ok = [m for m in trials if m["final_cost"] < 1e-3 and m["enc_count"] >= 1]
    need = math.ceil(0.9 * len(trials))
    residual = max(m["max_residual"] for m in trials)
    return [_verdict("xor-converges-with-enc", len(ok) >= need,
                     f"{len(ok)}/{len(trials)} trials reached cost < 1e-3 with >= 1 ENC (need {need})"),
            _verdict("growth-neutral", residual <= 1e-9, f"max output deviation {residual:.3e}")]


def cmd_landscape(cfg: dict, run: Run) -> None:
    k = cfg["growth"].get("k", 1.0)
    data, pre, pre_key, post, post_keys = xor_stall_networks(k, cfg["landscape"]["invert_targets"])
    (r1, r2), n = cfg["landscape"]["ranges"], cfg["grid_steps"]
    grid_pre = scan_landscape(pre, data, [pre_key], ranges=[r1], steps=n)
    grid_post = scan_landscape(post, data, list(post_keys), ranges=[r1, r2], steps=n)
    grid_pre.write_csv(run.out / "grid_pre.csv")
    grid_post.write_csv(run.out / "grid_post.csv")
    for name, grid in (("pre", grid_pre), ("post", grid_post)):
        run.metric({"type": "grid", "name": name, "file": f"grid_{name}.csv",
                    "params": [g.param_name(p) for p in grid.params], "steps": n,
                    "min_cost": float(grid.costs.min()), "max_cost": float(grid.costs.max())})
    run.event({"type": "networks", "pre": g.to_dict(pre), "post": g.to_dict(post)})


def read_grid(path) -> LandscapeGrid:
    """Inverse of ``LandscapeGrid.write_csv``."""
    rows = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=float)
    rows = np.atleast_2d(rows)
    if np.isnan(rows[:, 1]).all():
        return LandscapeGrid(("param1",), (rows[:, 0],), rows[:, 2])
    a, b = np.unique(rows[:, 0]), np.unique(rows[:, 1])
    return LandscapeGrid(("param1", "param2"), (a, b), rows[:, 2].reshape(len(a), len(b)))


def verdict_landscape(metrics: list[dict], cfg: dict, out: Path) -> list[dict]:
    files = {m["name"]: m["file"] for m in metrics if m["type"] == "grid"}
    pre, post = read_grid(out / files["pre"]), read_grid(out / files["post"])
    dirs = saddle_directions(post)
    return [_verdict("pre-enc-local-minimum", is_local_minimum(pre),
                     f"cost at 0: {pre.costs[pre.index_of(0, 0.0)]:.6f}"),
            _verdict("post-enc-saddle", is_saddle(post),
                     f"steepest one-step drop {-min(dirs.values()):.3e}, "
                     f"largest rise {max(dirs.values()):.3e}")]


def _boolean_task(cfg: dict, trial: int):
    rng = np.random.default_rng([cfg["seed"], trial])
    n = int(rng.integers(cfg["task"]["n_min"], cfg["task"]["n_max"] + 1))
    data, _, table = gen_random_boolean(n, int(rng.integers(2**31)))
    return n, data, table


def cmd_grow_train(cfg: dict, run: Run) -> None:
    tol = cfg["covariance"]["tolerance"]
    for trial in range(cfg["trials"]):
        n, data, table = _boolean_task(cfg, trial)
        net = g.Network(n, 1, k=cfg["growth"].get("k", 1.0))
        tcfg = _growth_config(cfg, cfg["seed"] + trial,
                              max_steps=cfg["growth"].get("max_steps", cfg["task"]["max_steps"]))
        tlog = gr.train_d1(net, data, tcfg)
        _log_training(run, tlog, trial, 100)
        checks = []
        if tlog.reason != "converged":
            for eid in sorted(net.edges):
                try:
                    rep = gr.covariance_termination_check(net, data, eid, tolerance=tol)
                except gr.GrowthError as exc:
                    checks.append({"edge": eid, "skipped": str(exc)})
                    continue
                checks.append({"edge": eid, "candidates": rep.candidates,
                               "max_abs_cov": rep.max_abs_cov, "witness": list(rep.witness)})
        run.metric({"type": "trial", "trial": trial, "n": n, "truth_table": table.values.tolist(),
                    "reason": tlog.reason, "final_cost": tlog.final_cost, "steps": tlog.steps,
                    "enc_count": tlog.enc_count, "nodes": len(net.nodes), "covariance": checks})


def verdict_grow_train(metrics: list[dict], cfg: dict) -> list[dict]:
    tol = cfg["covariance"]["tolerance"]
    trials = [m for m in metrics if m["type"] == "trial"]
    halted = [m for m in trials if m["reason"] != "converged"]
    checked = [c for m in halted for c in m["covariance"] if "max_abs_cov" in c]
    skipped = [c for m in halted for c in m["covariance"] if "skipped" in c]
    bad = [c for c in checked if c["max_abs_cov"] >= tol]
    worst = max((c["max_abs_cov"] for c in checked), default=0.0)
    return [_verdict("covariance-termination", not bad and not skipped,
                     f"{len(halted)}/{len(trials)} runs halted unconverged; {len(checked)} edges checked, "
                     f"{len(bad)} violations, {len(skipped)} skipped, max |Cov| {worst:.3e}")]


FOUR_STEP_TRACE = [
    {"X0": 1, "X1": 1, "X2": -1, "X3": -1, "Y": 1},
    {"X0": 1, "X1": -1, "Y": 1},
    {"X0": 1, "X2": 1, "X3": 1, "Y": -1},
    {"X0": 1, "X2": 1, "X3": -1, "Y": -1},
]


def cmd_csv_demo(cfg: dict, run: Run) -> None:
    names = ["X0", "X1", "X2", "X3"]
    model = CsvModel(names, ["Y"], CsvConfig(**cfg["csv"]))
    rng = np.random.default_rng(cfg["seed"])
    stream = [{k: obs.get(k, 0) for k in (*names, "Y")} for obs in FOUR_STEP_TRACE]
    for _ in range(cfg["demo"]["consistent"]):
        x = rng.choice([-1, 1], size=4)
        inst = {k: int(v) for k, v in zip(names, x)}
        inst["Y"] = 1 if x[0] == 1 and x[2] == -1 else -1
        stream.append(inst)
    for i, inst in enumerate(stream):
        for ev in model.observe(inst):
            run.event(dict(ev, type="csv_event"))
        if i == len(FOUR_STEP_TRACE) - 1 or i == len(stream) - 1:
            run.metric({"type": "structure", "after": i + 1, "csvs": model.to_dict()["csvs"]})
    report = replay_check(CsvModel(names, ["Y"], CsvConfig(**cfg["csv"])), stream)
    run.metric({"type": "replay", "checks": report.checks, "pairs": report.pairs, "violations": len(report.violations),
                "exempt": len(report.exempt), "generalized": len(report.generalized)})


def verdict_csv_demo(metrics: list[dict], cfg: dict) -> list[dict]:
    snaps = [m for m in metrics if m["type"] == "structure"]
    first, last = snaps[0], snaps[-1]
    base = [c for c in first["csvs"] if c["y"] == ["Y"]]
    ok = len(base) == 1 and base[0]["xp"] == ["X0"] and base[0]["xn"] == ["X2"]
    replay = next(m for m in metrics if m["type"] == "replay")
    return [_verdict("four-step-structure", ok, f"CSVs for Y after 4 observations: "
                     + "; ".join(f"XP={c['xp']} XN={c['xn']}" for c in base)),
            _verdict("structure-stable", first["csvs"] == last["csvs"],
                     f"after {last['after'] - first['after']} further consistent observations"),
            _verdict("replay-invariant", replay["violations"] == 0,
                     f"{replay['violations']} violations over {replay['checks']} structure changes, "
                     f"{replay['pairs']} archived states compared")]


def cmd_csv_fuzz(cfg: dict, run: Run) -> None:
    f = cfg["fuzz"]
    rng = np.random.default_rng(cfg["seed"])
    for trial in range(cfg["trials"]):
        names, targets, stream = gen_fuzz_stream(rng, steps=f["steps"], max_inputs=f["max_inputs"])
        depth = int(rng.integers(0, f["max_depth"] + 1))
        conf = dict(cfg["csv"], depth=depth)
        report = replay_check(CsvModel(names, targets, CsvConfig(**conf)), stream,
                              capacity=f["capacity"])
        for v in report.violations:
            run.event({"type": "violation", "trial": trial, **v})
        run.metric({"type": "trial", "trial": trial, "inputs": len(names), "targets": len(targets),
                    "depth": depth, "checks": report.checks, "pairs": report.pairs, "violations": len(report.violations),
                    "exempt": len(report.exempt), "generalized": len(report.generalized)})


def verdict_csv_fuzz(metrics: list[dict], cfg: dict) -> list[dict]:
    trials = [m for m in metrics if m["type"] == "trial"]
    bad = sum(m["violations"] for m in trials)
    pairs = sum(m["pairs"] for m in trials)
    return [_verdict("replay-invariance", bad == 0,
                     f"{bad} violations over {len(trials)} streams, {pairs} archived states compared")]


def cmd_destructive_demo(cfg: dict, run: Run) -> None:
    b = cfg["baseline"]
    for trial in range(cfg["trials"]):
        seed = cfg["seed"] + trial
        pair = make_task_pair(seed, kind=b["kind"])
        sizes = [pair.n_inputs, *b["hidden"], 1]
        for protocol, joint in (("sequential", False), ("joint", True)):
            tl = run_sequential(Mlp(sizes, seed=seed), pair, b["steps"], b["gamma"], joint=joint,
                                eval_every=b["eval_every"])
            for rec in tl:
                run.metric(dict(rec, type="timeline", protocol=protocol, trial=trial))
        rng = np.random.default_rng(seed)
        ia = as_instances(pair.xa, pair.ta, pair.names)
        ib = as_instances(pair.xb, pair.tb, pair.names)
        sa = [ia[i] for _ in range(b["csv_passes"]) for i in rng.permutation(len(ia))]
        sb = [ib[i] for _ in range(b["csv_passes"]) for i in rng.permutation(len(ib))]
        conf = dict(cfg["csv"], depth=b["csv_depth"])
        for protocol, inter in (("csv", False), ("csv-interleaved", True)):
            model = CsvModel(pair.names, ["Y"], CsvConfig(**conf))
            for rec in run_sequential_csv(model, sa, sb, interleave=inter, seed=seed):
                run.metric(dict(rec, type="timeline", protocol=protocol, trial=trial))


def verdict_destructive_demo(metrics: list[dict], cfg: dict) -> list[dict]:
    b = cfg["baseline"]
    tl = [m for m in metrics if m["type"] == "timeline"]
    trials = sorted({m["trial"] for m in tl})
    seq, joint, csv_ok = [], [], []
    for t in trials:
        seq.append(task_a_drop([m for m in tl if m["trial"] == t and m["protocol"] == "sequential"]))
        joint.append(task_a_drop([m for m in tl if m["trial"] == t and m["protocol"] == "joint"]))
        csv_ok.append(all(m["preserved"] == 1.0 for m in tl
                          if m["trial"] == t and m["protocol"].startswith("csv")))
    fmt = lambda xs: ", ".join(f"{x:.1f}" for x in xs)
    return [_verdict("mlp-sequential-drop", min(seq) >= b["drop_min"],
                     f"task-A drops [{fmt(seq)}] points (need >= {b['drop_min']})"),
            _verdict("mlp-joint-retained", max(joint) < b["joint_drop_max"],
                     f"task-A drops [{fmt(joint)}] points (need < {b['joint_drop_max']})"),
            _verdict("csv-preserved", all(csv_ok),
                     f"{sum(csv_ok)}/{len(csv_ok)} trials kept every archived task-A response")]


def cmd_covariance_check(cfg: dict, run: Run) -> None:
    c = cfg["covariance"]
    if c["network"] is None:
        data = gen_signed_xor()
        _, net, key, _, _ = xor_stall_networks(cfg["growth"].get("k", 1.0), invert=False)
        eid, expect = key[1], c["expect"] or "violated"
    else:
        net = g.deserialize(Path(c["network"]).read_text())
        data = g.make_dataset(c["inputs"], c["targets"])
        eid, expect = c["edge"], c["expect"] or "satisfied"
    rep = gr.covariance_termination_check(net, data, eid, tolerance=c["tolerance"])
    run.metric({"type": "covariance", "edge": eid, "candidates": rep.candidates,
                "max_abs_cov": rep.max_abs_cov, "witness": list(rep.witness),
                "tolerance": rep.tolerance, "expect": expect})


def verdict_covariance_check(metrics: list[dict], cfg: dict) -> list[dict]:
    m = next(m for m in metrics if m["type"] == "covariance")
    satisfied = m["max_abs_cov"] < m["tolerance"]
    outcome = "satisfied" if satisfied else "violated"
    return [_verdict("covariance-condition", outcome == m["expect"],
                     f"edge {m['edge']}: max |Cov| {m['max_abs_cov']:.3e} with subset {m['witness']}; "
                     f"{outcome}, expected {m['expect']}")]


COMMANDS = {
    "xor-demo": (cmd_xor_demo, verdict_xor_demo),
    "landscape": (cmd_landscape, verdict_landscape),
    "grow-train": (cmd_grow_train, verdict_grow_train),
    "csv-demo": (cmd_csv_demo, verdict_csv_demo),
    "csv-fuzz": (cmd_csv_fuzz, verdict_csv_fuzz),
    "destructive-demo": (cmd_destructive_demo, verdict_destructive_demo),
    "covariance-check": (cmd_covariance_check, verdict_covariance_check),
}


def summarize(command: str, cfg: dict, out: Path) -> list[dict]:
    """Recompute verdicts from a finished run directory."""
    with open(out / "metrics.jsonl") as fh:
        metrics = [json.loads(line) for line in fh if line.strip()]
    verdict = COMMANDS[command][1]
    if command == "landscape":
        return verdict(metrics, cfg, out)
    return verdict(metrics, cfg)


# ----------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="evodev", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="run directory (default runs/<command>-s<seed>)")
        sp.add_argument("--trials", type=int)
        sp.add_argument("--grid-steps", type=int, dest="grid_steps")
        sp.add_argument("--k", type=float)
        sp.add_argument("--gamma", type=float)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    try:
        cfg = resolve_config(args.command, args)
    except ConfigError as exc:
        print(f"evodev: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out or f"runs/{args.command}-s{cfg['seed']}")
    t0 = time.perf_counter()
    run = Run(out, cfg)
    try:
        COMMANDS[args.command][0](cfg, run)
    finally:
        run.close()
    verdicts = summarize(args.command, cfg, out)
    (out / "summary.json").write_text(json.dumps(
        {"command": args.command, "seed": cfg["seed"], "verdicts": verdicts,
         "passed": all(v["passed"] for v in verdicts)}, indent=2, sort_keys=True) + "\n")
    for v in verdicts:
        print(f"{'PASS' if v['passed'] else 'FAIL'}  {v['criterion']}: {v['detail']}")
    print(f"run directory: {out}  ({time.perf_counter() - t0:.1f} s)")
    failed = [v["criterion"] for v in verdicts if not v["passed"]]
    if failed:
        print(f"evodev: acceptance failure: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_PASS


if __name__ == "__main__":
    sys.exit(main())
