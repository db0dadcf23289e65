import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from forster_nhqc.operators import (DimensionError, NotHermitianError, QuantumOperator,
                                    QuantumState, commutator, dump_operator, expm_skew,
                                    frobenius_distance, is_hermitian, is_unitary, load_operator,
                                    pauli, tensor, tensor_state, trace)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return a + a.conj().T


def test_pauli_algebra():
    x, y, z = pauli("x"), pauli("y"), pauli("z")
    assert frobenius_distance(commutator(x, y), 2j * z) < 1e-15
    assert frobenius_distance(x @ x, pauli("i")) == 0.0


def test_tensor_index_convention():
    a = np.diag([1.0, 2.0])
    b = np.diag([10.0, 20.0, 30.0])
    k = np.asarray(tensor(a, b))
    # index 3 * i_a + i_b
    assert k[4, 4] == 2.0 * 20.0
    assert tensor(a, b).basis_label == "bare(x)bare"


def test_dimension_and_label_checks():
    a = QuantumOperator(np.eye(2))
    with pytest.raises(DimensionError):
        a @ QuantumOperator(np.eye(3))
    with pytest.raises(DimensionError):
        a + QuantumOperator(np.eye(2), "dressed")
    with pytest.raises(DimensionError):
        QuantumOperator(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        QuantumOperator(np.array([[np.nan, 0], [0, 1]]))


def test_operator_is_immutable():
    a = QuantumOperator(np.eye(2))
    with pytest.raises(ValueError):
        a.entries[0, 0] = 5


def test_state_helpers():
    s = QuantumState([3.0, 4.0j])
    assert s.norm == pytest.approx(5.0)
    n = s.normalized()
    assert abs(n.overlap(n) - 1) < 1e-15
    assert is_hermitian(n.projector())
    assert trace(n.projector()) == pytest.approx(1.0)
    assert tensor_state([1, 0], [0, 1]).amplitudes.tolist() == [0, 1, 0, 0]


def test_expm_skew_matches_scipy():
    from scipy.linalg import expm
    rng = np.random.default_rng(3)
    h = random_hermitian(rng, 6)
    u = expm_skew(h, 0.37)
    assert np.allclose(np.asarray(u), expm(-0.37j * h), atol=1e-12)
    assert is_unitary(u, 1e-12)


def test_expm_skew_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        expm_skew(np.array([[0, 1], [0, 0]]), 1.0)


def test_dump_load_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    m = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    path = tmp_path / "op.txt"
    dump_operator(m, path)
    first = path.read_text().splitlines()[0].split()
    assert first[:2] == ["0", "0"]
    assert np.array_equal(np.asarray(load_operator(path)), m)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (4, 4), elements=finite), arrays(np.float64, (4, 4), elements=finite),
       st.floats(-3, 3))
def test_expm_skew_unitary_for_any_hermitian(re, im, s):
    a = re + 1j * im
    h = a + a.conj().T
    assert is_unitary(expm_skew(h, s), 1e-9)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (3, 3), elements=finite), arrays(np.float64, (3, 3), elements=finite))
def test_dagger_is_involution_and_commutator_antisymmetric(a, b):
    A, B = QuantumOperator(a + 0.5j * b), QuantumOperator(b - 0.25j * a)
    assert frobenius_distance(A.dag().dag(), A) == 0.0
    assert frobenius_distance(commutator(A, B), -commutator(B, A)) < 1e-12
