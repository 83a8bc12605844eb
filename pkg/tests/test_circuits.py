import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from potp import circuits, encoding
from potp.circuits import AND, OR, Circuit, CircuitBuilder, Edge, Node
from potp.encoding import GateTable
from potp.errors import InvalidArgument, UnsupportedTopologyError

from enumeration import per_slot_enumeration

DEVIATIONS = {"1101": 0.75, "0001": 0.625, "0111": 0.5625, "0100": 0.53125}


def bits4(i):
    return format(i, "04b")


def test_single_and_slot():
    cb = CircuitBuilder()
    a, b = cb.input("a"), cb.input("b")
    cb.output("y", cb.otp("g", AND, a, b))
    c = cb.build()
    assert circuits.ideal_eval(c, {"a": 1, "b": 1}) == {"y": 1}
    assert circuits.ideal_eval(c, {"a": 1, "b": 0}) == {"y": 0}


def test_single_xor():
    cb = CircuitBuilder()
    a, b = cb.input("a"), cb.input("b")
    cb.output("y", cb.gate("x", "xor", a, b))
    assert circuits.ideal_eval(cb.build(), {"a": 1, "b": 1}) == {"y": 0}


def test_millionaires_gate_sequence():
    c = circuits.compile_millionaires("0101")
    tables = [c.nodes[n].table for n in c.otp_ids]
    assert tables == [AND, OR, AND, OR]


def test_millionaires_exhaustive():
    for a in range(16):
        c = circuits.compile_millionaires(bits4(a))
        for b in range(16):
            assert circuits.ideal_eval(c, circuits.bob_inputs(bits4(b)))["gt"] == int(b > a)


def test_predictions_for_one_bit_deviations():
    c = circuits.compile_millionaires("0101")
    for bob, want in DEVIATIONS.items():
        got = circuits.predict_success(c, circuits.bob_inputs(bob), 0.75)["gt"]
        assert got == pytest.approx(want, abs=1e-12)
    preds = list(DEVIATIONS.values())
    assert all(x > y for x, y in zip(preds, preds[1:]))


def test_noiseless_prediction_is_one():
    c = circuits.compile_millionaires("1010")
    for b in range(16):
        assert circuits.predict_success(c, circuits.bob_inputs(bits4(b)), 1.0)["gt"] == pytest.approx(1)


@given(st.integers(0, 15), st.integers(0, 15), st.floats(0.5, 1.0))
def test_dp_matches_slot_enumeration(a, b, p):
    c = circuits.compile_millionaires(bits4(a))
    inputs = circuits.bob_inputs(bits4(b))
    dp = circuits.predict_success(c, inputs, p)["gt"]
    assert dp == pytest.approx(per_slot_enumeration(c, inputs, p)["gt"], abs=1e-12)
    assert 0.5 - 1e-12 <= dp <= 1 + 1e-12


def test_zero_draws_leave_circuit_unchanged():
    c = circuits.compile_millionaires("0110")
    r = circuits.randomize_not_pairs(c, draws=[0, 0, 0, 0])
    assert all(r.nodes[n].table == c.nodes[n].table for n in c.otp_ids)
    assert r.output_pads.get("gt", 0) == 0


def test_all_draws_alter_every_slot():
    c = circuits.compile_millionaires("0101")
    r = circuits.randomize_not_pairs(c, draws=[1, 1, 1, 1])
    assert all(r.nodes[n].table != c.nodes[n].table for n in c.otp_ids)
    for b in range(16):
        inputs = circuits.bob_inputs(bits4(b))
        got = circuits.apply_output_pads(r, circuits.ideal_eval(r, inputs))
        assert got == circuits.ideal_eval(c, inputs)


@given(st.integers(0, 15), st.lists(st.integers(0, 1), min_size=4, max_size=4))
def test_randomisation_preserves_function_and_prediction(a, draws):
    c = circuits.compile_millionaires(bits4(a))
    r = circuits.randomize_not_pairs(c, draws=draws)
    for b in range(16):
        inputs = circuits.bob_inputs(bits4(b))
        assert circuits.apply_output_pads(r, circuits.ideal_eval(r, inputs)) == circuits.ideal_eval(c, inputs)
        assert circuits.predict_success(r, inputs, 0.75)["gt"] == pytest.approx(
            circuits.predict_success(c, inputs, 0.75)["gt"], abs=1e-12)


def test_negation_propagates_through_public_gates():
    # otp -> not -> otp: a NOT pair after the first slot lands on the second slot's input
    cb = CircuitBuilder()
    a, b, d = cb.input("a"), cb.input("b"), cb.input("d")
    g1 = cb.otp("g1", AND, a, b)
    n = cb.gate("n", "not", g1)
    cb.output("y", cb.otp("g2", GateTable.parse("0110"), n, d))
    c = cb.build()
    r = circuits.randomize_not_pairs(c, draws=[1, 0])
    assert r.nodes["g1"].table == AND.flipped()
    assert r.nodes["g2"].table == GateTable.parse("0110").with_input_negation(0b10)
    for bits in itertools.product((0, 1), repeat=3):
        inputs = dict(zip("abd", bits))
        assert circuits.apply_output_pads(r, circuits.ideal_eval(r, inputs)) == circuits.ideal_eval(c, inputs)


def test_negation_becomes_output_pad():
    cb = CircuitBuilder()
    a = cb.input("a")
    cb.output("y", cb.otp("g", GateTable.parse("01"), a))
    r = circuits.randomize_not_pairs(cb.build(), draws=[1])
    assert r.output_pads == {"y": 1}


def test_json_round_trip_and_redaction():
    c = circuits.compile_millionaires("0101")
    back = Circuit.from_json(c.to_json())
    assert [back.nodes[n].table for n in back.otp_ids] == [c.nodes[n].table for n in c.otp_ids]
    public = Circuit.from_dict(c.to_dict(redact=True))
    assert all(public.nodes[n].table is None and public.nodes[n].k == 2 for n in public.otp_ids)
    assert "table" not in c.to_json(redact=True)


def test_validation_rules():
    nodes = {"a": Node("a", "input", label="a"), "y": Node("y", "output", label="y"),
             "z": Node("z", "output", label="z")}
    with pytest.raises(InvalidArgument, match="fanout"):
        Circuit(nodes, [Edge("a", "y", 0), Edge("a", "z", 0)])
    with pytest.raises(InvalidArgument, match="ports"):
        Circuit({"a": nodes["a"], "x": Node("x", "xor"), "y": nodes["y"]},
                [Edge("a", "x", 0), Edge("x", "y", 0)])
    with pytest.raises(InvalidArgument, match="unsupported"):
        Circuit({"a": Node("a", "nand")}, [])
    cyc = {"n1": Node("n1", "not"), "n2": Node("n2", "not")}
    with pytest.raises(InvalidArgument, match="cycle"):
        Circuit(cyc, [Edge("n1", "n2", 0), Edge("n2", "n1", 0)])


def test_shared_noisy_ancestor_rejected():
    cb = CircuitBuilder()
    a, b = cb.input("a"), cb.input("b")
    f = cb.gate("f", "fanout", cb.otp("g", AND, a, b))
    cb.output("y", cb.gate("x", "xor", f, f))
    # two wires out of one fanout into both ports of the xor
    c = cb.build()
    with pytest.raises(UnsupportedTopologyError):
        circuits.predict_success(c, {"a": 1, "b": 1}, 0.75)


def test_monte_carlo_matches_prediction():
    rng = np.random.default_rng(5)
    c = circuits.compile_millionaires("0101")
    inputs = circuits.bob_inputs("0001")
    n = 6000

    def gate(node, bits):
        return encoding.evaluate_otp(encoding.encode_linear_g2(node.table, rng), bits, rng)

    hits = sum(circuits.run(c, inputs, gate)["gt"] == 0 for _ in range(n))
    assert abs(hits / n - 0.625) <= 3 * np.sqrt(0.625 * 0.375 / n)
