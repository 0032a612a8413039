import cmath
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from kerrcat import DimensionMismatch, InvalidParameter, TruncationWarning
from kerrcat.fock import (
    DensityMatrix,
    StateVector,
    TruncatedFockSpace,
    annihilation_op,
    coherent_state,
    creation_op,
    expectation,
    fidelity_pure,
    fock_state,
    hermiticity_defect,
    number_op,
    purity,
    recommended_dim,
    tail_mass,
    trace,
    ys_state,
)

S64 = TruncatedFockSpace(64)


def test_space_rejects_small_or_fractional_dim():
    for bad in (1, 0, -3, 2.5, True):
        with pytest.raises(InvalidParameter):
            TruncatedFockSpace(bad)
    assert TruncatedFockSpace(2).dim == 2


def test_annihilation_small_cases():
    assert np.array_equal(annihilation_op(TruncatedFockSpace(2)).matrix, [[0, 1], [0, 0]])
    a3 = annihilation_op(TruncatedFockSpace(3)).matrix
    assert a3[1, 2] == pytest.approx(math.sqrt(2), abs=1e-15)
    assert np.count_nonzero(a3) == 2


def test_commutator_is_identity_except_corner():
    space = TruncatedFockSpace(4)
    a, ad = annihilation_op(space), creation_op(space)
    comm = (a @ ad - ad @ a).matrix
    expected = np.eye(4)
    expected[3, 3] = 1 - 4
    assert np.allclose(comm, expected, atol=1e-14)


@pytest.mark.parametrize("dim", [2, 5, 64, 200])
def test_number_operator_exact_diagonal(dim):
    space = TruncatedFockSpace(dim)
    n = number_op(space).matrix
    assert np.array_equal(np.diag(n).real, np.arange(dim))
    assert np.count_nonzero(n - np.diag(np.diag(n))) == 0
    ad_a = (creation_op(space) @ annihilation_op(space)).matrix
    assert np.allclose(ad_a, n, atol=1e-12)


def test_operator_shape_checked():
    with pytest.raises(DimensionMismatch):
        annihilation_op(S64) @ annihilation_op(TruncatedFockSpace(8))


def test_coherent_vacuum():
    psi = coherent_state(0, TruncatedFockSpace(8))
    assert np.array_equal(psi.amplitudes, fock_state(0, TruncatedFockSpace(8)).amplitudes)


def test_coherent_mean_photon_number():
    rho = coherent_state(1.0, TruncatedFockSpace(32)).projector()
    assert abs(expectation(rho, number_op(rho.space)) - 1.0) < 1e-10


def test_coherent_matches_factorial_oracle():
    for alpha in (1.0, 2.0, 1.5 - 0.7j, 3j):
        c = oracles.coherent_amplitudes(alpha, 64)
        assert np.allclose(coherent_state(alpha, S64).amplitudes, c / np.linalg.norm(c), atol=1e-14)


def test_coherent_overlap_with_negative():
    # <1|-1> = e^{-2}
    overlap = np.vdot(coherent_state(1.0, S64).amplitudes, coherent_state(-1.0, S64).amplitudes)
    assert overlap == pytest.approx(0.1353352832366126, abs=1e-13)
    assert overlap.real == pytest.approx(math.exp(-2), abs=1e-13)


@given(
    r=st.floats(0.0, 4.0),
    phi=st.floats(0.0, 2 * math.pi),
)
@settings(max_examples=40, deadline=None)
def test_coherent_recurrence(r, phi):
    alpha = cmath.rect(r, phi)
    space = TruncatedFockSpace(recommended_dim(alpha) + 4)
    c = coherent_state(alpha, space).amplitudes
    n = np.arange(space.dim - 1)
    assert np.allclose(c[1:], c[:-1] * alpha / np.sqrt(n + 1), atol=1e-12, rtol=0)


def test_coherent_large_dim_no_overflow():
    c = coherent_state(12.0, TruncatedFockSpace(250)).amplitudes
    assert np.all(np.isfinite(c))
    assert abs(np.linalg.norm(c) - 1) < 1e-12


def test_truncation_warning():
    with pytest.warns(TruncationWarning):
        coherent_state(2.0, TruncatedFockSpace(8))
    with pytest.warns(TruncationWarning):
        # tail is tiny but the rule asks for 26 levels
        coherent_state(2.0, TruncatedFockSpace(24))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        coherent_state(2.0, TruncatedFockSpace(26))
        coherent_state(0.0, TruncatedFockSpace(2))
    assert tail_mass(2.0, 8) == pytest.approx(1 - sum(math.exp(-4) * 4**k / math.factorial(k) for k in range(8)))


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 3j])
def test_ys_norm(alpha):
    psi = ys_state(alpha, S64)
    assert abs(np.linalg.norm(psi.amplitudes) - 1.0) < 1e-12
    assert np.allclose(psi.amplitudes, oracles.ys_amplitudes(alpha, 64), atol=1e-14)


def test_ys_zero_alpha_is_vacuum():
    psi = ys_state(0.0, TruncatedFockSpace(4))
    assert abs(abs(psi.amplitudes[0]) - 1.0) < 1e-15
    assert np.allclose(psi.amplitudes[1:], 0)


def test_ys_mean_field():
    a = annihilation_op(S64)
    assert expectation(ys_state(1.0, S64).projector(), a) == pytest.approx(-0.1353352832366127j, abs=1e-13)
    assert expectation(ys_state(2.0, S64).projector(), a) == pytest.approx(-0.0006709252558049217j, abs=1e-15)


def test_expectation_examples():
    vac = fock_state(0, S64).projector()
    assert expectation(vac, number_op(S64)) == 0
    rho = coherent_state(1.3 + 0.4j, S64).projector()
    a = annihilation_op(S64)
    assert abs(expectation(rho, a) - (1.3 + 0.4j)) < 1e-9
    assert abs(expectation(rho, a @ a) - (1.3 + 0.4j) ** 2) < 1e-9
    with pytest.raises(DimensionMismatch):
        expectation(rho, annihilation_op(TruncatedFockSpace(8)))


def test_fidelity_examples():
    psi = ys_state(1.0, S64)
    assert fidelity_pure(psi.projector(), psi) == pytest.approx(1.0, abs=1e-14)
    space = TruncatedFockSpace(5)
    assert fidelity_pure(fock_state(0, space).projector(), fock_state(1, space)) == 0.0
    assert fidelity_pure(coherent_state(1.0, S64).projector(), psi) == pytest.approx(0.509157819444367, abs=1e-13)
    with pytest.raises(DimensionMismatch):
        fidelity_pure(psi.projector(), fock_state(0, space))


def test_fidelity_global_phase_invariant(rng):
    rho = coherent_state(1.2, S64).projector()
    psi = ys_state(1.0, S64)
    f0 = fidelity_pure(rho, psi)
    for phase in rng.uniform(0, 2 * math.pi, 8):
        rotated = StateVector(S64, psi.amplitudes * cmath.exp(1j * phase))
        assert abs(fidelity_pure(rho, rotated) - f0) <= 1e-12


def test_purity_examples():
    space = TruncatedFockSpace(6)
    assert abs(purity(coherent_state(0.7, S64).projector()) - 1) < 1e-10
    assert purity(DensityMatrix.maximally_mixed(space)) == pytest.approx(1 / 6)
    assert purity(DensityMatrix.maximally_mixed(space, 2)) == pytest.approx(0.5)
    rho = DensityMatrix(space, np.diag([0.5, 0.5, 0, 0, 0, 0]))
    assert purity(rho) == pytest.approx(0.5)
    assert trace(rho) == pytest.approx(1.0)
    assert hermiticity_defect(rho) == 0.0


def test_density_matrix_validation():
    space = TruncatedFockSpace(3)
    with pytest.raises(InvalidParameter):
        DensityMatrix(space, np.diag([0.5, 0.4, 0.0]))
    with pytest.raises(InvalidParameter):
        DensityMatrix(space, np.array([[0.5, 0.1, 0], [0.0, 0.5, 0], [0, 0, 0]]))
    with pytest.raises(DimensionMismatch):
        DensityMatrix(space, np.eye(4) / 4)
    with pytest.raises(InvalidParameter):
        StateVector(space, np.array([1.0, 1.0, 0.0]))


def test_values_are_immutable():
    rho = coherent_state(1.0, TruncatedFockSpace(20)).projector()
    with pytest.raises(ValueError):
        rho.matrix[0, 0] = 0.0
