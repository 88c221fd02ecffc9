import json
import math

import numpy as np
import pytest

from evodev import graph as g
from evodev.tasks import gen_signed_xor, random_network


def reference_states(net, xs):
    """Plain-Python evaluator, written independently of forward_batch."""
    out = []
    for x in xs:
        a = dict(zip(net.inputs, x))
        pending = [n for n in net.nodes if n not in a]
        while pending:
            for n in list(pending):
                ins = [e for e in net.edges.values() if e.target == n]
                if any(e.source not in a for e in ins):
                    continue
                node = net.nodes[n]
                if node.kind == g.MODULATORY:
                    z0 = sum(e.weight * a[e.source] for e in ins if e.term == 0)
                    z1 = node.term_biases[1] + sum(e.weight * a[e.source] for e in ins if e.term == 1)
                    a[n] = z0 * (4.0 / (1.0 + math.exp(-net.k * z1)) - 1.0)
                else:
                    z = node.bias + sum(e.weight * a[e.source] for e in ins)
                    a[n] = math.tanh(z) if node.activation == "tanh" else z
                pending.remove(n)
        out.append(a)
    return out


def fd_rows(net, x, t, h=1e-6):
    """Central differences of every per-sample cost w.r.t. every parameter."""
    keys = net.parameter_keys()
    rows = np.zeros((len(x), len(keys)))
    for j, key in enumerate(keys):
        v = net.get_param(key)
        net.set_param(key, v + h)
        plus = ((g.forward_batch(net, x).outputs(net) - t) ** 2).sum(axis=1)
        net.set_param(key, v - h)
        minus = ((g.forward_batch(net, x).outputs(net) - t) ** 2).sum(axis=1)
        net.set_param(key, v)
        rows[:, j] = (plus - minus) / (2 * h)
    return rows


def single_edge(w=0.0, bias=0.0, activation="tanh"):
    net = g.Network(1, 1)
    net.nodes[net.outputs[0]].bias = bias
    net.nodes[net.outputs[0]].activation = activation
    e = net.add_edge(net.inputs[0], net.outputs[0], w)
    return net, e


def test_single_edge_zero_weight_gives_zero():
    net, _ = single_edge()
    assert g.forward(net, g.Sample((1.0,), (0.0,))).outputs(net)[0, 0] == 0.0


def test_modulatory_with_empty_regulator_passes_term0():
    net = g.Network(1, 1, k=1.0)
    m = net.add_node(g.MODULATORY)
    net.add_edge(net.inputs[0], m, 1.0)
    tr = g.forward_batch(net, np.array([[0.5]]))
    assert tr.a[m][0] == pytest.approx(0.5, abs=1e-15)


def test_sigma1_matches_logistic_form():
    x = np.linspace(-30, 30, 601)
    for k in (0.5, 1.0, 3.0):
        ref = 4.0 / (1.0 + np.exp(-k * x)) - 1.0
        assert np.max(np.abs(g.sigma1(x, k) - ref)) < 1e-12
        fd = (g.sigma1(x + 1e-6, k) - g.sigma1(x - 1e-6, k)) / 2e-6
        assert np.max(np.abs(g.sigma1_prime(x, k) - fd)) < 1e-6


def test_forward_matches_reference_evaluator():
    rng = np.random.default_rng(11)
    for _ in range(20):
        net = random_network(rng, n_inputs=2, n_outputs=1, n_hidden=3, n_modulatory=1)
        xs = rng.normal(size=(10, 2))
        tr = g.forward_batch(net, xs)
        ref = reference_states(net, xs)
        for n in net.nodes:
            assert np.allclose(tr.a[n], [r[n] for r in ref], atol=1e-12)


def test_forward_is_reproducible():
    net = random_network(np.random.default_rng(2))
    x = np.random.default_rng(3).normal(size=(7, 3))
    a, b = g.forward_batch(net, x), g.forward_batch(net, x)
    for n in net.nodes:
        assert np.array_equal(a.a[n], b.a[n])


def test_cost_examples():
    net, _ = single_edge()
    assert g.cost(net, g.make_dataset([(1.0,)], [(0.0,)]))[0] == 0.0
    assert g.cost(net, g.make_dataset([(0.0,), (0.0,)], [(-1.0,), (1.0,)]))[0] == 1.0
    xor = gen_signed_xor()
    mean, per = g.cost(g.Network(2, 1), xor)
    assert mean == 1.0 and np.all(per == 1.0)


def test_cost_rejects_empty_dataset():
    with pytest.raises(g.GraphError):
        g.cost(g.Network(1, 1), [])


def test_arity_mismatch():
    net = g.Network(2, 1)
    with pytest.raises(g.GraphError):
        g.forward(net, g.Sample((1.0,), (0.0,)))
    with pytest.raises(g.GraphError):
        g.backward_batch(net, g.forward_batch(net, np.ones((1, 2))), np.ones((1, 2)))


def test_zero_error_zero_gradient():
    net, e = single_edge()
    tr = g.batch_gradients(net, g.make_dataset([(1.0,)], [(0.0,)]))
    assert tr.column(("w", e))[0] == 0.0


def test_single_edge_gradient_value():
    net, e = single_edge(w=0.5)
    data = g.make_dataset([(1.0,)], [(1.0,)])
    grad = g.batch_gradients(net, data).column(("w", e))[0]
    fd = fd_rows(net, np.array([[1.0]]), np.array([[1.0]]))[0, net.parameter_keys().index(("w", e))]
    assert grad == pytest.approx(fd, abs=1e-8)
    assert grad == pytest.approx(-0.8460, abs=5e-5)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(5)
    for k in (0.7, 1.0, 2.0):
        net = random_network(rng, n_hidden=5, n_modulatory=2, k=k)
        x = rng.normal(size=(6, 3))
        t = rng.normal(size=(6, 2))
        rows = g.backward_batch(net, g.forward_batch(net, x), t).rows
        fd = fd_rows(net, x, t)
        assert np.allclose(rows, fd, rtol=1e-6, atol=1e-8)


def test_mean_gradient_is_gradient_of_mean_cost():
    rng = np.random.default_rng(8)
    net = random_network(rng)
    data = g.make_dataset(rng.normal(size=(5, 3)), rng.normal(size=(5, 2)))
    tr = g.batch_gradients(net, data)
    x, t = g.dataset_arrays(data)
    assert np.allclose(tr.mean, fd_rows(net, x, t).mean(axis=0), rtol=1e-6, atol=1e-8)


def test_stale_trace_rejected():
    net, e = single_edge(w=0.2)
    tr = g.forward_batch(net, np.ones((1, 1)))
    net.add_node(g.STANDARD)
    with pytest.raises(g.StaleTraceError):
        g.backward_batch(net, tr, np.ones((1, 1)))
    tr = g.forward_batch(net, np.ones((1, 1)))
    net.set_param(("w", e), 0.3)
    with pytest.raises(g.StaleTraceError):
        g.backward_batch(net, tr, np.ones((1, 1)))
    other, _ = single_edge(w=0.2)
    with pytest.raises(g.StaleTraceError):
        g.backward_batch(other, g.forward_batch(net, np.ones((1, 1))), np.ones((1, 1)))


def test_apply_update_descends():
    rng = np.random.default_rng(4)
    net = random_network(rng)
    data = g.make_dataset(rng.normal(size=(8, 3)), rng.uniform(-0.9, 0.9, size=(8, 2)))
    before = g.cost(net, data)[0]
    g.apply_update(net, g.batch_gradients(net, data).mean, 1e-3)
    assert g.cost(net, data)[0] < before


def test_apply_update_dimension_mismatch():
    net, _ = single_edge()
    with pytest.raises(g.GraphError):
        g.apply_update(net, np.zeros(5), 0.1)


def test_cycles_rejected():
    net = g.Network(1, 1)
    a = net.add_node(g.STANDARD)
    b = net.add_node(g.STANDARD)
    net.add_edge(a, b)
    with pytest.raises(g.CycleError):
        net.add_edge(b, a)
    with pytest.raises(g.CycleError):
        net.add_edge(a, a)
    with pytest.raises(g.GraphError):
        net.add_edge(a, net.inputs[0])
    with pytest.raises(g.GraphError):
        net.add_edge(net.inputs[0], a, term=1)


def test_ids_never_reused():
    net = g.Network(1, 1)
    e = net.add_edge(net.inputs[0], net.outputs[0])
    net.remove_edge(e)
    assert net.add_edge(net.inputs[0], net.outputs[0]) != e


def test_topological_order_tracks_mutation():
    net = g.Network(1, 1)
    h = net.add_node(g.STANDARD)
    net.add_edge(h, net.outputs[0])
    order = net.topological_order()
    assert order.index(h) < order.index(net.outputs[0])
    net.add_edge(net.inputs[0], h)
    order = net.topological_order()
    assert order.index(net.inputs[0]) < order.index(h)


def test_serialization_round_trip():
    rng = np.random.default_rng(9)
    net = random_network(rng, n_modulatory=2)
    back = g.deserialize(g.serialize(net))
    assert g.structurally_equal(net, back)
    x = rng.normal(size=(4, 3))
    assert np.array_equal(g.outputs(net, x), g.outputs(back, x))
    assert json.loads(g.serialize(back)) == json.loads(g.serialize(net))


@pytest.mark.parametrize("mutate, message", [
    (lambda d: d.update(extra=1), "unknown"),
    (lambda d: d["nodes"][0].update(colour="red"), "unknown"),
    (lambda d: d["edges"][0].update(target=999), "missing node"),
    (lambda d: d["nodes"][-1].update(kind="weird"), "kind"),
])
def test_deserialize_rejects_bad_documents(mutate, message):
    net = random_network(np.random.default_rng(1))
    doc = g.to_dict(net)
    mutate(doc)
    with pytest.raises(g.GraphError, match=message):
        g.from_dict(doc)


def test_deserialize_rejects_term0_bias():
    net = random_network(np.random.default_rng(1), n_modulatory=1)
    doc = g.to_dict(net)
    for n in doc["nodes"]:
        if n["kind"] == g.MODULATORY:
            n["term_biases"][0] = 0.5
    with pytest.raises(g.GraphError):
        g.from_dict(doc)


def test_deserialize_rejects_cycle():
    net = g.Network(1, 1)
    a = net.add_node(g.STANDARD)
    b = net.add_node(g.STANDARD)
    net.add_edge(a, b)
    doc = g.to_dict(net)
    doc["edges"].append({"id": 99, "source": b, "target": a, "term": 0, "weight": 0.0})
    with pytest.raises(g.GraphError):
        g.from_dict(doc)
