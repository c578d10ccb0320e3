import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mqsvt_spoof.moments import (
    DELTA,
    T4_DENOMINATOR,
    WEINGARTEN_S4,
    compose,
    cyclic_partition,
    dense_permutation_operator,
    inverse,
    moment_dense,
    moment_mc,
    moment_t2,
    moment_t4_table,
    moment_t4_weingarten,
    moment_weingarten,
    permutation_trace,
    table_cases,
    weingarten_s4,
    xy_row_dependence,
)
from mqsvt_spoof.pauli import PauliString, dense_matrix, two_qubit_labels

LABELS = two_qubit_labels()
S4 = list(itertools.permutations(range(4)))
label = st.sampled_from(LABELS)


@pytest.mark.parametrize(
    "perm, part",
    [((0, 1, 2, 3), (1, 1, 1, 1)), ((1, 0, 3, 2), (2, 2)), ((2, 1, 3, 0), (3, 1))],
)
def test_cyclic_partition(perm, part):
    assert cyclic_partition(perm) == part


def test_cyclic_partition_rejects_large():
    with pytest.raises(ValueError):
        cyclic_partition(tuple(range(9)))


def _kron(mats):
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def test_weingarten_table_is_gram_inverse():
    ws = [dense_permutation_operator(p, 4) for p in S4]
    gram = np.array([[np.trace(a.T @ b) for b in ws] for a in ws])
    inv = np.linalg.inv(gram)
    for i, s in enumerate(S4):
        for j, t in enumerate(S4):
            part = cyclic_partition(compose(inverse(s), t))
            assert inv[i, j] == pytest.approx(float(weingarten_s4(part)), abs=1e-12)


def test_weingarten_values():
    assert weingarten_s4((4,)) == Fraction(-20, DELTA)
    assert weingarten_s4((1, 1, 1, 1)) == Fraction(134, DELTA)
    assert weingarten_s4((2, 2)) == Fraction(22, DELTA)
    assert set(WEINGARTEN_S4) == {(4,), (3, 1), (2, 2), (2, 1, 1), (1, 1, 1, 1)}
    with pytest.raises(ValueError):
        weingarten_s4((5,))


def test_permutation_trace_examples():
    assert permutation_trace((0, 1, 2, 3), ["II"] * 4) == 256
    assert permutation_trace((2, 3, 0, 1), ["ZI", "XX", "ZI", "XX"]) == 16
    # A single 4-cycle yields one trace, so |value| <= 4.
    assert permutation_trace((1, 2, 3, 0), ["ZI", "XI", "ZI", "XI"]) == -4
    with pytest.raises(ValueError):
        permutation_trace((0, 1), ["Z", "Z"])


def test_permutation_trace_dense_random():
    rng = np.random.default_rng(5)
    ws = {p: dense_permutation_operator(p, 4) for p in S4}
    for _ in range(200):
        qs = [LABELS[i] for i in rng.integers(0, 16, 4)]
        op = _kron(dense_matrix(PauliString.from_str(q)) for q in qs)
        for p in S4:
            assert np.isclose(permutation_trace(p, qs), np.trace(ws[p] @ op))


def test_permutation_trace_cycle_order_convention():
    # Tr(W Q1 x Q2 x Q3) for a 3-cycle depends on the product order.
    qs = ["XI", "YI", "ZI"]
    op = _kron(dense_matrix(PauliString.from_str(q)) for q in qs)
    for p in itertools.permutations(range(3)):
        assert np.isclose(permutation_trace(p, qs), np.trace(dense_permutation_operator(p, 4) @ op))


@pytest.mark.parametrize(
    "args, value",
    [
        (("II", "II", "II", "II"), Fraction(1)),
        (("ZZ", "ZZ", "XY", "XY"), Fraction(1, 15)),
        (("ZZ", "ZI", "ZI", "ZI"), Fraction(0)),
    ],
)
def test_moment_t2_examples(args, value):
    assert moment_t2(*args).value == value


@given(label, label, label, label)
def test_moment_t2_equals_weingarten(a, b, c, d):
    assert moment_t2(a, b, c, d).value == moment_weingarten((a, b), (c, d)).value


def test_t4_weingarten_against_dense():
    rng = np.random.default_rng(11)
    cases = [("ZI",) * 8, ("ZZ", "ZI", "ZZ", "ZI", "ZI", "ZI", "ZI", "ZI"), ("ZI", "ZI", "XX", "XX", "ZI", "ZI", "YY", "YY")]
    cases += [tuple(LABELS[i] for i in rng.integers(0, 16, 8)) for _ in range(4)]
    for c in cases:
        exact = moment_weingarten(c[:4], c[4:]).value
        assert float(exact) == pytest.approx(moment_dense(c[:4], c[4:]), abs=1e-12)


def test_t4_denominator_and_range():
    for case in table_cases():
        for inst in case.instances[:20]:
            v = moment_weingarten(inst[: case.t], inst[case.t :]).value
            assert -1 <= v <= 1
            if case.t == 4:
                assert (v * T4_DENOMINATOR).denominator == 1


@given(st.lists(label, min_size=8, max_size=8), st.permutations(range(4)))
def test_copy_exchange_symmetry(labels, perm):
    ins, outs = labels[:4], labels[4:]
    a = moment_weingarten(ins, outs).value
    b = moment_weingarten([ins[i] for i in perm], [outs[i] for i in perm]).value
    assert a == b


def test_selected_exact_values():
    # Exact fourth moments used by the spoofing-path estimates.
    assert moment_t4_weingarten(*["ZI"] * 8).value == Fraction(1, 70)
    assert moment_t4_weingarten("ZZ", "ZI", "ZZ", "ZI", "ZI", "ZI", "ZI", "ZI").value == Fraction(1, 420)
    assert moment_t4_weingarten("II", "II", "XX", "XX", "II", "II", "YZ", "YZ").value == Fraction(1, 15)


def test_xy_rows_independent_of_p():
    dep = xy_row_dependence()
    values = {v for vals in dep.values() for v in vals.values()}
    assert values == {Fraction(0)}


def test_table_lookup_examples():
    assert moment_t4_table("ZI", "ZI", "II", "II", "ZI", "ZI", "II", "II").value == Fraction(602048, T4_DENOMINATOR)
    assert moment_t4_table("ZZ", "ZI", "IZ", "II", "ZI", "ZI", "ZI", "ZI").value == Fraction(73664, T4_DENOMINATOR)
    assert moment_t4_table("ZZ", "ZI", "II", "IZ", "ZI", "ZI", "XY", "XY").value == Fraction(960, T4_DENOMINATOR)
    with pytest.raises(ValueError):
        moment_t4_table("XX", "ZI", "ZI", "ZI", "ZI", "ZI", "ZI", "ZI")


def test_mc_trivial_cases():
    assert moment_mc(["II"] * 4, ["II"] * 4, 4, 100, 0) == (1.0, 0.0)
    assert moment_mc(["II", "ZZ"], ["ZZ", "ZZ"], 2, 100, 0) == (0.0, 0.0)
    with pytest.raises(ValueError):
        moment_mc(["ZZ", "ZZ"], ["XY", "XY"], 2, 50, 0)


def test_mc_deterministic():
    a = moment_mc(["ZZ", "ZZ"], ["XY", "XY"], 2, 2000, 4)
    b = moment_mc(["ZZ", "ZZ"], ["XY", "XY"], 2, 2000, 4)
    assert a == b


def test_mc_t2_agrees():
    est, se = moment_mc(["ZZ", "ZZ"], ["XY", "XY"], 2, 200_000, 1)
    assert abs(est - 1 / 15) < 3 * se


def test_mc_t4_agrees_with_weingarten():
    ins, outs = ("ZZ", "ZI", "ZZ", "ZI"), ("ZI",) * 4
    est, se = moment_mc(ins, outs, 4, 200_000, 2)
    assert abs(est - float(moment_weingarten(ins, outs).value)) < 3 * se
