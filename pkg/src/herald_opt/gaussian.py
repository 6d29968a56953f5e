"""Gaussian core-state data model: the matrices B, K and A = Lambda B Lambda.

Mode ordering is signal modes first, then the ``m`` heralding modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

PHYSICAL_TOL = 1e-9


class InvalidSpecError(ValueError):
    pass


class InvalidDampingError(ValueError):
    pass


class NonPhysicalError(ValueError):
    pass


@dataclass(frozen=True)
class HeraldPattern:
    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(n) for n in self.counts)
        if not counts:
            raise ValueError("herald pattern needs at least one mode")
        if any(n < 0 for n in counts):
            raise ValueError(f"photon counts must be non-negative, got {counts}")
        object.__setattr__(self, "counts", counts)

    @property
    def m(self) -> int:
        return len(self.counts)

    @property
    def N(self) -> int:
        return sum(self.counts)

    def require_positive(self) -> None:
        if any(n == 0 for n in self.counts):
            raise ValueError(f"damping optimisation needs n_j > 0 for all modes, got {self.counts}")


def _pair_index(m: int) -> list[tuple[int, int]]:
    return [(j, k) for j in range(m) for k in range(j + 1, m)]


@dataclass(frozen=True)
class CoreMatrixSpec:
    """Parameters of the matrix B.

    ``nu`` lists the herald-herald couplings in row-major upper-triangle
    order, ``(0,1), (0,2), ..., (m-2, m-1)`` in herald indices.
    ``coupling`` is the ``signal_count x m`` 0/1 mask of signal-herald
    entries; ``None`` means all ones.
    """

    s: tuple[complex, ...]
    nu: tuple[complex, ...] = ()
    signal_count: int = 1
    coupling: tuple[tuple[int, ...], ...] | None = None
    b00: float = 0.0

    def __post_init__(self):
        s = tuple(complex(v) for v in self.s)
        nu = tuple(complex(v) for v in self.nu)
        m = len(s)
        if m < 1:
            raise InvalidSpecError("need at least one herald mode")
        if len(nu) != m * (m - 1) // 2:
            raise InvalidSpecError(f"expected {m * (m - 1) // 2} couplings nu for m={m}, got {len(nu)}")
        if self.signal_count < 1:
            raise InvalidSpecError("signal_count must be >= 1")
        coupling = self.coupling
        if coupling is None:
            coupling = tuple((1,) * m for _ in range(self.signal_count))
        coupling = tuple(tuple(int(c) for c in row) for row in coupling)
        if len(coupling) != self.signal_count or any(len(row) != m for row in coupling):
            raise InvalidSpecError("coupling mask must be signal_count x m")
        if not -1.0 < float(self.b00) < 1.0:
            raise InvalidSpecError(f"b00 = tanh r must lie in (-1, 1), got {self.b00}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "coupling", coupling)
        object.__setattr__(self, "b00", float(self.b00))

    @property
    def m(self) -> int:
        return len(self.s)

    @property
    def dim(self) -> int:
        return self.signal_count + self.m

    def nu_matrix(self) -> np.ndarray:
        out = np.zeros((self.m, self.m), dtype=complex)
        for (j, k), v in zip(_pair_index(self.m), self.nu):
            out[j, k] = out[k, j] = v
        return out

    @property
    def is_real(self) -> bool:
        return all(v.imag == 0 for v in self.s + self.nu)


@dataclass(frozen=True)
class DampingVector:
    X: tuple[float, ...]

    def __post_init__(self):
        X = tuple(float(v) for v in self.X)
        if any(not v > 0 for v in X):
            raise InvalidDampingError(f"damping parameters must be positive, got {X}")
        object.__setattr__(self, "X", X)

    @property
    def x(self) -> np.ndarray:
        return np.sqrt(np.array(self.X))


@dataclass
class Configuration:
    spec: CoreMatrixSpec
    damping: DampingVector
    p_success: float
    squeezing_singular_values: list[float] = field(default_factory=list)
    physicality_margin: float = float("nan")
    label: str = ""
    notes: dict = field(default_factory=dict)

    @property
    def max_squeezing_r(self) -> float:
        return float(np.arctanh(self.squeezing_singular_values[0]))


def assemble_B(spec: CoreMatrixSpec) -> np.ndarray:
    S, m = spec.signal_count, spec.m
    B = np.zeros((S + m, S + m), dtype=complex)
    B[0, 0] = spec.b00
    mask = np.array(spec.coupling, dtype=float)
    B[:S, S:] = mask
    B[S:, :S] = mask.T
    B[S:, S:] = spec.nu_matrix()
    B[np.arange(S, S + m), np.arange(S, S + m)] = spec.s
    return B


def k_diagonal(spec: CoreMatrixSpec, X: Sequence[float]) -> np.ndarray:
    return np.concatenate([np.ones(spec.signal_count), np.asarray(X, dtype=float)])


def assemble_A(spec: CoreMatrixSpec, damping: DampingVector | Sequence[float]) -> np.ndarray:
    if not isinstance(damping, DampingVector):
        damping = DampingVector(tuple(damping))
    if len(damping.X) != spec.m:
        raise InvalidDampingError(f"expected {spec.m} damping parameters, got {len(damping.X)}")
    lam = np.sqrt(k_diagonal(spec, damping.X))
    return lam[:, None] * assemble_B(spec) * lam[None, :]


def _aad_eigs(A: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(A @ A.conj().T)


def physicality_margin(A: np.ndarray) -> float:
    """Smallest eigenvalue of ``I - A A^dagger``."""
    return float(1.0 - _aad_eigs(np.asarray(A))[-1])


def squeezing_values(A: np.ndarray) -> np.ndarray:
    """Singular values ``tanh r_j`` of A, descending."""
    eigs = np.clip(_aad_eigs(np.asarray(A)), 0.0, None)
    return np.sqrt(eigs)[::-1]


def normalization_Z(A: np.ndarray) -> float:
    eigs = _aad_eigs(np.asarray(A))
    if eigs[-1] >= 1.0:
        raise NonPhysicalError(f"largest eigenvalue of AA^dagger is {eigs[-1]:.6g} >= 1")
    return float(np.prod(1.0 - eigs))


def is_physical(A: np.ndarray, tol: float = PHYSICAL_TOL) -> bool:
    return physicality_margin(A) > tol


def with_output_squeezing(spec: CoreMatrixSpec, r: float) -> CoreMatrixSpec:
    if not math.isfinite(r):
        raise InvalidSpecError("output squeezing must be finite")
    if r == 0:
        return spec
    return replace(spec, b00=math.tanh(r))


def weighted_gram(spec: CoreMatrixSpec, X: Sequence[float]) -> np.ndarray:
    """``K^{1/2} B K B^dagger K^{1/2}``, Hermitian and iso-spectral with ``A A^dagger``."""
    A = assemble_A(spec, X)
    return A @ A.conj().T


def make_configuration(spec: CoreMatrixSpec, X: Sequence[float], p_success: float, **kw) -> Configuration:
    A = assemble_A(spec, X)
    return Configuration(
        spec=spec,
        damping=DampingVector(tuple(X)),
        p_success=float(p_success),
        squeezing_singular_values=[float(v) for v in squeezing_values(A)],
        physicality_margin=physicality_margin(A),
        **kw,
    )
