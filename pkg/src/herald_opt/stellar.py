"""Stellar coefficients d_k of the heralded state.

Forward direction: d_k from the matrix B via matching sums.  Inverse
direction: the d_k a requested Fock superposition (optionally squeezed)
demands of B.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gaussian import CoreMatrixSpec, HeraldPattern, assemble_B
from .poly import Poly


class DegenerateTargetError(ValueError):
    pass


def _is_zero(v) -> bool:
    if isinstance(v, Poly):
        return not v.terms
    return v == 0


def hafnian_with_multiplicity(B, multiplicity: Sequence[int]):
    """Sum over perfect matchings of the multiset in which index i occurs
    ``multiplicity[i]`` times, each matching weighted by the product of its
    B entries.

    Equals the mixed derivative of ``exp(z^T B z / 2)`` at ``z = 0``.  Entries
    of ``B`` may be numbers or :class:`Poly` objects.
    """
    n = len(B)
    mult = tuple(int(v) for v in multiplicity)
    if len(mult) != n:
        raise ValueError(f"multiplicity has length {len(mult)}, matrix has dimension {n}")
    if any(v < 0 for v in mult):
        raise ValueError("multiplicities must be non-negative")
    if sum(mult) % 2:
        return 0
    memo: dict[tuple[int, ...], object] = {}

    def rec(counts: tuple[int, ...]):
        if counts in memo:
            return memo[counts]
        i = next((t for t, c in enumerate(counts) if c), None)
        if i is None:
            return 1
        rest = list(counts)
        rest[i] -= 1
        total = 0
        for j in range(i, n):
            ways = rest[j]
            if not ways or _is_zero(B[i][j]):
                continue
            nxt = rest.copy()
            nxt[j] -= 1
            sub = rec(tuple(nxt))
            if _is_zero(sub):
                continue
            total = total + ways * (B[i][j] * sub)
        memo[counts] = total
        return total

    return rec(mult)


def _core_B(spec: CoreMatrixSpec) -> np.ndarray:
    B = assemble_B(spec)
    B[0, 0] = 0.0
    return B


def dk_coefficients(spec: CoreMatrixSpec, pattern: HeraldPattern) -> np.ndarray:
    """d_0..d_N of the single-mode heralded state; B00 is held at zero."""
    if spec.signal_count != 1:
        raise ValueError("dk_coefficients handles one signal mode; use signal_coefficients")
    if pattern.m != spec.m:
        raise ValueError(f"pattern has {pattern.m} modes, spec has {spec.m}")
    return dk_from_matrix(_core_B(spec), pattern.counts)


def dk_from_matrix(B, counts: Sequence[int]) -> np.ndarray | list:
    """d_k for k = 0..N from any single-signal matrix (numeric or Poly entries)."""
    N = sum(counts)
    out = []
    for k in range(N + 1):
        if (N - k) % 2:
            out.append(0)
            continue
        h = hafnian_with_multiplicity(B, (k, *counts))
        out.append(h / math.factorial(k))
    if all(not isinstance(v, Poly) for v in out):
        return np.array(out, dtype=complex)
    return out


def signal_coefficients(spec: CoreMatrixSpec, pattern: HeraldPattern) -> dict[tuple[int, ...], complex]:
    """d_k over signal multi-indices k (|k| <= N, matching parity)."""
    B = _core_B(spec)
    S = spec.signal_count
    N = pattern.N
    out = {}
    for k in itertools.product(range(N + 1), repeat=S):
        tot = sum(k)
        if tot > N or (N - tot) % 2:
            continue
        h = hafnian_with_multiplicity(B, (*k, *pattern.counts))
        out[k] = complex(h) / math.prod(math.factorial(v) for v in k)
    return out


def norm_factor(d: dict[tuple[int, ...], complex] | np.ndarray) -> float:
    """``sum_k k! |d_k|^2`` (multi-index version multiplies the factorials)."""
    if isinstance(d, dict):
        return float(sum(math.prod(math.factorial(v) for v in k) * abs(c) ** 2 for k, c in d.items()))
    d = np.asarray(d)
    return float(sum(math.factorial(k) * abs(v) ** 2 for k, v in enumerate(d)))


@dataclass(frozen=True)
class TargetSuperposition:
    """Target ``S(r) sum_k c_k |k>``; coefficients are normalised on construction."""

    coefficients: tuple[complex, ...]
    output_squeezing_r: float = 0.0

    def __post_init__(self):
        c = np.array([complex(v) for v in self.coefficients])
        if c.size == 0 or c[-1] == 0:
            raise DegenerateTargetError("highest Fock amplitude c_N must be non-zero")
        N = c.size - 1
        bad = [k for k in range(N + 1) if (N - k) % 2 and c[k] != 0]
        if bad:
            raise DegenerateTargetError(f"amplitudes at k={bad} break the photon-number parity of N={N}")
        c = c / np.linalg.norm(c)
        object.__setattr__(self, "coefficients", tuple(complex(v) for v in c))
        object.__setattr__(self, "output_squeezing_r", float(self.output_squeezing_r))

    @property
    def N(self) -> int:
        return len(self.coefficients) - 1

    @property
    def parity(self) -> str:
        return "even" if self.N % 2 == 0 else "odd"

    @property
    def c(self) -> np.ndarray:
        return np.array(self.coefficients)

    @classmethod
    def balanced(cls, N: int) -> "TargetSuperposition":
        c = [1.0 if (N - k) % 2 == 0 else 0.0 for k in range(N + 1)]
        return cls(tuple(c))

    @classmethod
    def fock(cls, N: int) -> "TargetSuperposition":
        return cls(tuple([0.0] * N + [1.0]))


def target_rhs(target: TargetSuperposition) -> np.ndarray:
    if target.output_squeezing_r != 0:
        raise ValueError("target carries output squeezing; use target_rhs_squeezed")
    c = target.c
    N = target.N
    if c[N] == 0:
        raise DegenerateTargetError("c_N = 0")
    d = np.array([math.sqrt(math.factorial(N) / math.factorial(k)) * c[k] / c[N] for k in range(N + 1)])
    d[[k for k in range(N + 1) if (N - k) % 2]] = 0
    return d


def target_rhs_squeezed(target: TargetSuperposition) -> np.ndarray:
    """Solve the triangular system linking d_k to a squeezed target, top row first."""
    r = target.output_squeezing_r
    c = target.c
    N = target.N
    if c[N] == 0:
        raise DegenerateTargetError("c_N = 0")
    ch, sh = math.cosh(r), math.sinh(r)
    d = np.zeros(N + 1, dtype=complex)
    for k in range(N, -1, -2):
        rhs = math.sqrt(math.factorial(N) / math.factorial(k)) * c[k] / c[N]
        acc = 0j
        for j in range(1, (N - k) // 2 + 1):
            acc += squeeze_weight(k, j, N, ch, sh) * d[k + 2 * j]
        d[k] = (rhs - acc) / squeeze_weight(k, 0, N, ch, sh)
    return d


def squeeze_weight(k: int, j: int, N: int, ch: float, sh: float) -> float:
    return math.factorial(k + 2 * j) / (2**j * math.factorial(k) * math.factorial(j)) * ch ** (k + j - N) * sh**j


def squeezed_lhs(d: Sequence[complex], N: int, r: float) -> np.ndarray:
    """Left side of the triangular system, for residual checks."""
    ch, sh = math.cosh(r), math.sinh(r)
    out = np.zeros(N + 1, dtype=complex)
    for k in range(N, -1, -2):
        out[k] = sum(squeeze_weight(k, j, N, ch, sh) * d[k + 2 * j] for j in range((N - k) // 2 + 1))
    return out


def rhs_for(target: TargetSuperposition) -> np.ndarray:
    return target_rhs_squeezed(target) if target.output_squeezing_r else target_rhs(target)
