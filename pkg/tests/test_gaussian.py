import math

import numpy as np
import pytest

from herald_opt.cases import singlerail_spec
from herald_opt.gaussian import (
    CoreMatrixSpec,
    DampingVector,
    HeraldPattern,
    InvalidDampingError,
    InvalidSpecError,
    NonPhysicalError,
    assemble_A,
    assemble_B,
    is_physical,
    normalization_Z,
    physicality_margin,
    squeezing_values,
    weighted_gram,
    with_output_squeezing,
)
from herald_opt.extremal import det_weighted


def random_spec(rng, m, scale=1.0):
    s = tuple(scale * complex(*rng.normal(size=2)) for _ in range(m))
    nu = tuple(scale * complex(*rng.normal(size=2)) for _ in range(m * (m - 1) // 2))
    return CoreMatrixSpec(s=s, nu=nu)


def test_pattern_fields():
    p = HeraldPattern((3, 2))
    assert (p.m, p.N) == (2, 5)
    with pytest.raises(ValueError):
        HeraldPattern((1, -1))
    with pytest.raises(ValueError):
        HeraldPattern((2, 0)).require_positive()


def test_smallest_core_matrix():
    B = assemble_B(CoreMatrixSpec(s=(0.0,)))
    np.testing.assert_array_equal(B, [[0, 1], [1, 0]])


def test_two_mode_B_layout():
    B = assemble_B(CoreMatrixSpec(s=(0.3, 0.4j), nu=(1.5,)))
    np.testing.assert_allclose(B, [[0, 1, 1], [1, 0.3, 1.5], [1, 1.5, 0.4j]])
    assert np.allclose(B, B.T)


def test_singlerail_B_layout():
    B = assemble_B(singlerail_spec(0.7, 0.1, 0.2))
    expected = np.array([
        [0, 0, 1, 0],
        [0, 0, 0, 1],
        [1, 0, 0.1, 0.7],
        [0, 1, 0.7, 0.2],
    ])
    np.testing.assert_allclose(B, expected)


def test_spec_dimension_errors():
    with pytest.raises(InvalidSpecError):
        CoreMatrixSpec(s=(0.1, 0.2), nu=(1.0, 2.0))
    with pytest.raises(InvalidSpecError):
        CoreMatrixSpec(s=(0.1,), b00=1.0)


def test_assemble_A_scaling():
    A = assemble_A(CoreMatrixSpec(s=(0.0,)), (0.25,))
    np.testing.assert_allclose(A, [[0, 0.5], [0.5, 0]])
    spec = CoreMatrixSpec(s=(0.2, -0.1), nu=(0.3,))
    np.testing.assert_allclose(assemble_A(spec, (1.0, 1.0)), assemble_B(spec))


def test_damping_must_be_positive():
    with pytest.raises(InvalidDampingError):
        DampingVector((0.1, 0.0))
    with pytest.raises(InvalidDampingError):
        assemble_A(CoreMatrixSpec(s=(0.0,)), (-0.5,))
    with pytest.raises(InvalidDampingError):
        assemble_A(CoreMatrixSpec(s=(0.0,)), (0.1, 0.2))


def test_normalization_examples():
    assert normalization_Z(np.zeros((3, 3))) == 1.0
    assert normalization_Z(np.array([[0, 0.5], [0.5, 0]])) == pytest.approx(0.5625)
    with pytest.raises(NonPhysicalError):
        normalization_Z(np.array([[0, 1.0], [1.0, 0]]))


def test_Z_matches_singular_values(rng):
    for _ in range(20):
        A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        A = A + A.T
        A *= 0.9 / np.linalg.svd(A, compute_uv=False)[0]
        sv = np.linalg.svd(A, compute_uv=False)
        assert normalization_Z(A) == pytest.approx(np.prod(1 - sv**2), rel=1e-12)
        np.testing.assert_allclose(squeezing_values(A), sv, atol=1e-12)


def test_margin_examples():
    assert physicality_margin(np.zeros((2, 2))) == 1.0
    assert physicality_margin(np.array([[0, 1.0], [1.0, 0]])) == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(squeezing_values(np.array([[0, 0.5], [0.5, 0]])), [0.5, 0.5])
    assert not np.any(squeezing_values(np.zeros((3, 3))))


def test_margin_sign_matches_squeezing(rng):
    for _ in range(50):
        spec = random_spec(rng, 2, scale=rng.uniform(0.1, 2))
        X = rng.uniform(0.01, 1, 2)
        A = assemble_A(spec, X)
        assert (physicality_margin(A) > 0) == (squeezing_values(A)[0] < 1)
        assert is_physical(A) == (physicality_margin(A) > 1e-9)


def test_weighted_determinant_identity(rng):
    """det(I - A A^dagger) equals det(I - B K B^dagger K) for physical points."""
    checked = 0
    while checked < 100:
        m = int(rng.integers(1, 4))
        spec = random_spec(rng, m, scale=rng.uniform(0.1, 1.5))
        X = rng.uniform(0.01, 0.6, m)
        A = assemble_A(spec, X)
        if physicality_margin(A) <= 1e-6:
            continue
        assert det_weighted(spec, X) == pytest.approx(normalization_Z(A), rel=1e-10)
        G = weighted_gram(spec, X)
        np.testing.assert_allclose(np.linalg.eigvalsh(G), np.linalg.eigvalsh(A @ A.conj().T), atol=1e-12)
        checked += 1


def test_real_B_factorisation(rng):
    for _ in range(100):
        m = int(rng.integers(1, 4))
        spec = CoreMatrixSpec(s=tuple(rng.normal(size=m)), nu=tuple(rng.normal(size=m * (m - 1) // 2)))
        X = rng.uniform(0.01, 2, m)
        B = assemble_B(spec).real
        K = np.diag(np.concatenate([[1.0], X]))
        I = np.eye(len(B))
        lhs = np.linalg.det(I - B @ K @ B @ K)
        rhs = np.linalg.det(I - B @ K) * np.linalg.det(I + B @ K)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_output_squeezing():
    spec = CoreMatrixSpec(s=(0.1,))
    assert with_output_squeezing(spec, 0.0) is spec
    assert with_output_squeezing(spec, math.atanh(0.5)).b00 == pytest.approx(0.5)
    assert with_output_squeezing(spec, -0.3).b00 == pytest.approx(math.tanh(-0.3))
    with pytest.raises(InvalidSpecError):
        with_output_squeezing(spec, float("inf"))


def test_reference_optimum_is_physical(table_rows):
    for row in table_rows:
        cfg = row["config"]
        assert cfg.physicality_margin > 0
        assert cfg.physicality_margin == pytest.approx(physicality_margin(assemble_A(cfg.spec, cfg.damping.X)))
