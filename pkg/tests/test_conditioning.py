import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evodev.conditioning import (ACTIVE, INACTIVE, UNOBSERVED, Csv, CsvConfig, CsvError, CsvModel,
                                 ReplayArchive, csv_state, model_export, model_import,
                                 read_stream, replay_check, replay_observe)
from evodev.tasks import conjunction_table, gen_conjunction

NAMES = ["X0", "X1", "X2", "X3"]
TRACE = [
    {"X0": 1, "X1": 1, "X2": -1, "X3": -1, "Y": 1},
    {"X0": 1, "X1": -1, "Y": 1},
    {"X0": 1, "X2": 1, "X3": 1, "Y": -1},
    {"X0": 1, "X2": 1, "X3": -1, "Y": -1},
]


def full(obs):
    return {k: obs.get(k, 0) for k in (*NAMES, "Y")}


def trace_model(steps=4, depth=1):
    m = CsvModel(NAMES, ["Y"], CsvConfig(depth=depth))
    for obs in TRACE[:steps]:
        m.observe(full(obs))
    return m


def base(m, target="Y"):
    (c,) = [c for c in m.csvs.values() if c.y == [target]]
    return c


def test_csv_state_definition():
    c = Csv("C0", {"X0"}, {"X2"}, ["Y"])
    assert csv_state(c, {"X0": 1, "X2": -1, "Y": 1}) == ACTIVE
    assert csv_state(c, {"X0": 1, "X2": 1, "Y": 1}) == UNOBSERVED
    assert csv_state(c, {"X0": 1, "X2": -1, "Y": -1}) == INACTIVE
    assert csv_state(c, {"X0": 1, "X2": -1, "Y": 0}) == UNOBSERVED
    with pytest.raises(CsvError):
        csv_state(c, {"X0": 1}, strict=True)


def test_trace_trace_step_by_step():
    c = base(trace_model(1))
    assert (c.xp, c.xn, c.negatives_formed) == ({"X0", "X1"}, set(), False)
    c = base(trace_model(2))
    assert c.xp == {"X0"}
    c = base(trace_model(3))
    assert c.xn == {"X2", "X3"} and c.negatives_formed
    c = base(trace_model(4))
    assert (c.xp, c.xn) == ({"X0"}, {"X2"})


def test_trace_structure_stable_under_consistent_observations():
    m = trace_model()
    before = m.structure()
    rng = np.random.default_rng(0)
    for _ in range(200):
        x = rng.choice([-1, 1], size=4)
        inst = dict(zip(NAMES, map(int, x)))
        inst["Y"] = 1 if x[0] == 1 and x[2] == -1 else -1
        m.observe(inst)
    assert m.structure() == before


def test_trace_predictions():
    m = trace_model()
    assert m.predict({"X0": 1, "X1": 0, "X2": -1, "X3": 0})["Y"] == ACTIVE
    assert m.predict({"X0": -1, "X1": 1, "X2": -1, "X3": 1})["Y"] == INACTIVE
    for x0, x2 in itertools.product([-1, 1], repeat=2):
        for x1, x3 in itertools.product([-1, 1], repeat=2):
            pred = m.predict({"X0": x0, "X1": x1, "X2": x2, "X3": x3})["Y"]
            assert pred == (ACTIVE if x0 == 1 and x2 == -1 else INACTIVE)


def test_open_world_prediction():
    m = CsvModel(NAMES, ["Y"], CsvConfig(closed_world=False))
    m.observe(full(TRACE[0]))
    assert m.predict({"X0": -1, "X1": -1, "X2": 1, "X3": 1})["Y"] == UNOBSERVED


def test_trace_replay_has_no_violations():
    rep = replay_check(CsvModel(NAMES, ["Y"]), [full(o) for o in TRACE])
    assert rep.ok and rep.pairs > 0


def test_negative_formation_is_exempt():
    stream = [{"A": 1, "B": 1, "Y": 1}, {"A": 1, "B": -1, "Y": 1}, {"A": 1, "B": 1, "Y": -1}]
    rep = replay_check(CsvModel(["A", "B"], ["Y"], CsvConfig(depth=0)), stream)
    assert rep.ok
    assert [(r["before"], r["after"]) for r in rep.exempt] == [(ACTIVE, UNOBSERVED)]


def test_observe_rejects_partial_or_bad_instances():
    m = CsvModel(NAMES, ["Y"])
    with pytest.raises(CsvError):
        m.observe({"X0": 1})
    with pytest.raises(CsvError):
        m.observe({**full(TRACE[0]), "X0": 2})


def test_unobserved_inputs_not_captured():
    m = CsvModel(NAMES, ["Y"])
    m.observe({"X0": 1, "X1": 0, "X2": -1, "X3": 0, "Y": 1})
    assert base(m).xp == {"X0"}


def test_grouped_formation():
    m = CsvModel(["A", "B"], ["Y1", "Y2"], CsvConfig(depth=0))
    m.observe({"A": 1, "B": -1, "Y1": 1, "Y2": 1})
    (c,) = m.csvs.values()
    assert c.y == ["Y1", "Y2"] and c.xp == {"A"}


def test_upstream_level_targets_csv():
    m = trace_model(1, depth=1)
    ups = m.upstream_of("C0")
    assert len(ups) == 1 and m.level[ups[0].id] == 1


def test_archive_mode_seeds_upstream_csv():
    m = CsvModel(NAMES, ["Y"], CsvConfig(refine="archive"))
    m.observe(full(TRACE[0]))
    m.observe(full(TRACE[1]))
    kinds = [e["kind"] for e in m.events]
    assert "archived" in kinds


def test_config_validation():
    with pytest.raises(CsvError):
        CsvConfig(depth=-1)
    with pytest.raises(CsvError):
        CsvConfig(refine="shred")


def test_round_trip_trace_and_empty():
    m = trace_model()
    back = model_import(model_export(m))
    assert back.structure() == m.structure()
    assert back.events == m.events and back.step == m.step
    assert json.loads(model_export(back)) == json.loads(model_export(m))
    empty = model_import(model_export(CsvModel()))
    assert empty.csvs == {} and empty.inputs == []


def test_reloaded_model_keeps_learning_identically():
    a = trace_model(2)
    b = model_import(model_export(a))
    for obs in TRACE[2:]:
        a.observe(full(obs))
        b.observe(full(obs))
    assert a.structure() == b.structure()


@pytest.mark.parametrize("mutate", [
    lambda d: d["csvs"][0].update(xn=d["csvs"][0]["xp"][:1]),
    lambda d: d["csvs"][0].update(y=[]),
    lambda d: d["csvs"][0].update(xp=["Y"]),
    lambda d: d["csvs"][0].update(y=["X1"]),
    lambda d: d.update(bogus=1),
    lambda d: d["svs"].append({"id": "Z", "role": "weird"}),
])
def test_import_rejects_invalid(mutate):
    doc = trace_model().to_dict()
    mutate(doc)
    with pytest.raises(CsvError):
        model_import(json.dumps(doc))


def test_import_rejects_cycles_and_malformed():
    doc = trace_model().to_dict()
    c0, c1 = doc["csvs"][0], doc["csvs"][1]
    c0["y"] = [c1["id"]]
    with pytest.raises(CsvError):
        model_import(json.dumps(doc))
    with pytest.raises(CsvError):
        model_import("{not json")


def test_read_stream():
    lines = [json.dumps(full(o)) for o in TRACE] + [""]
    assert read_stream(lines) == [full(o) for o in TRACE]


def test_literal_reading_of_replay_invariance_fails():
    # An archived unobserved state can become determined after refinement.
    names = ["X0", "X1", "X2"]
    m = CsvModel(names, ["Y"], CsvConfig(depth=0))
    archive = ReplayArchive(m)
    stream = [
        {"X0": 1, "X1": 1, "X2": -1, "Y": 1},
        {"X0": 1, "X1": -1, "X2": 1, "Y": -1},
        {"X0": 1, "X1": -1, "X2": -1, "Y": 1},
    ]
    reports = [replay_observe(m, archive, s)[1] for s in stream]
    assert not reports[1].violations
    last = reports[2]
    assert last.generalized and not last.violations
    changed = last.generalized[0]
    assert (changed["before"], changed["after"]) == (UNOBSERVED, INACTIVE)


def test_source_sets_never_grow():
    rng = np.random.default_rng(4)
    for _ in range(50):
        lits, stream, _ = gen_conjunction(int(rng.integers(2, 7)), int(rng.integers(1 << 30)))
        m = CsvModel([f"X{i}" for i in range(len(lits))], ["Y"], CsvConfig(depth=2))
        seen = {}
        for inst in stream:
            m.observe(inst)
            for cid, c in m.csvs.items():
                if cid in seen:
                    xp, xn, nf = seen[cid]
                    assert c.xp <= xp
                    assert c.xn <= xn or not nf
                    assert c.negatives_formed or not nf
                seen[cid] = (set(c.xp), set(c.xn), c.negatives_formed)


@pytest.mark.parametrize("seed", range(20))
def test_converges_to_literal_sets_with_one_negative(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    lits = np.zeros(n, dtype=int)
    chosen = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
    lits[chosen] = 1
    if rng.random() < 0.5 and len(chosen) > 1:
        lits[chosen[0]] = -1
    table = conjunction_table(lits)
    m = CsvModel(table.names, ["Y"], CsvConfig(depth=0))
    for inst in table.stream(passes=2, rng=rng):
        m.observe(inst)
    c = base(m)
    assert c.xp == {f"X{i}" for i in np.flatnonzero(lits == 1)}
    negs = {f"X{i}" for i in np.flatnonzero(lits == -1)}
    if negs:
        assert c.xn == negs
    before = m.structure()
    for inst in table.stream(passes=1, rng=rng):
        m.observe(inst)
    assert m.structure() == before


@pytest.mark.parametrize("seed", range(10))
def test_prediction_matches_truth_table(seed):
    lits, stream, table = gen_conjunction(6, seed, passes=3)
    m = CsvModel(table.names, ["Y"], CsvConfig(depth=5))
    for inst in stream:
        m.observe(inst)
    for row, val in zip(table.rows, table.values):
        assert m.predict(dict(zip(table.names, map(int, row))))["Y"] == val


instances = st.lists(st.fixed_dictionaries(
    {k: st.sampled_from([-1, 0, 1]) for k in ["A", "B", "C", "Y"]}), min_size=1, max_size=30)


@settings(max_examples=200, deadline=None)
@given(instances, st.integers(0, 2))
def test_determined_archived_states_never_change(stream, depth):
    rep = replay_check(CsvModel(["A", "B", "C"], ["Y"], CsvConfig(depth=depth)), stream)
    assert rep.violations == []
