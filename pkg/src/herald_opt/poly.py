"""Sparse multivariate polynomials with complex coefficients.

Small and dict-based on purpose: the systems handled here have at most a
handful of variables and a few hundred monomials.  Evaluation is vectorised
through a compiled (exponents, coefficients) array pair.
"""

from __future__ import annotations

from functools import cached_property
from numbers import Number
from typing import Iterable, Mapping, Sequence

import numpy as np

Monomial = tuple[int, ...]


class Poly:
    """Polynomial in ``nvars`` variables stored as ``{exponent tuple: coefficient}``."""

    __slots__ = ("nvars", "terms", "__dict__")

    def __init__(self, nvars: int, terms: Mapping[Monomial, complex] | None = None):
        self.nvars = nvars
        self.terms: dict[Monomial, complex] = {}
        if terms:
            for mono, c in terms.items():
                if len(mono) != nvars:
                    raise ValueError(f"monomial {mono} does not have {nvars} exponents")
                if c != 0:
                    self.terms[tuple(mono)] = complex(c)

    # -- constructors ------------------------------------------------------
    @classmethod
    def const(cls, c: complex, nvars: int) -> "Poly":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, i: int, nvars: int) -> "Poly":
        mono = [0] * nvars
        mono[i] = 1
        return cls(nvars, {tuple(mono): 1.0})

    @classmethod
    def variables(cls, nvars: int) -> list["Poly"]:
        return [cls.var(i, nvars) for i in range(nvars)]

    # -- arithmetic --------------------------------------------------------
    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise ValueError("variable count mismatch")
            return other
        if isinstance(other, (Number, np.number)):
            return Poly.const(complex(other), self.nvars)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self.terms)
        for mono, c in other.terms.items():
            out[mono] = out.get(mono, 0) + c
        return Poly(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.nvars, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (Number, np.number)):
            c = complex(other)
            return Poly(self.nvars, {m: v * c for m, v in self.terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict[Monomial, complex] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                mono = tuple(a + b for a, b in zip(m1, m2))
                out[mono] = out.get(mono, 0) + c1 * c2
        return Poly(self.nvars, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (Number, np.number)):
            return self * (1.0 / complex(other))
        return NotImplemented

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        out = Poly.const(1.0, self.nvars)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def conj(self) -> "Poly":
        """Conjugate the coefficients (variables are taken to be real)."""
        return Poly(self.nvars, {m: c.conjugate() for m, c in self.terms.items()})

    @property
    def real(self) -> "Poly":
        return Poly(self.nvars, {m: c.real for m, c in self.terms.items()})

    @property
    def imag(self) -> "Poly":
        return Poly(self.nvars, {m: c.imag for m, c in self.terms.items()})

    # -- calculus ----------------------------------------------------------
    def diff(self, i: int) -> "Poly":
        out: dict[Monomial, complex] = {}
        for mono, c in self.terms.items():
            e = mono[i]
            if e:
                m = list(mono)
                m[i] = e - 1
                m = tuple(m)
                out[m] = out.get(m, 0) + c * e
        return Poly(self.nvars, out)

    def x_diff(self, i: int) -> "Poly":
        """``x_i * d/dx_i``: scales each monomial by its exponent in ``x_i``."""
        return Poly(self.nvars, {m: c * m[i] for m, c in self.terms.items()})

    def substitute(self, values: Mapping[int, complex], keep: Sequence[int]) -> "Poly":
        """Fix the variables in ``values``; the remaining ones are renumbered as ``keep``."""
        out: dict[Monomial, complex] = {}
        for mono, c in self.terms.items():
            coef = c
            for i, v in values.items():
                if mono[i]:
                    coef *= v ** mono[i]
            m = tuple(mono[i] for i in keep)
            out[m] = out.get(m, 0) + coef
        return Poly(len(keep), out)

    def embed(self, nvars: int, positions: Sequence[int]) -> "Poly":
        """Re-express in a larger variable set; variable ``i`` becomes ``positions[i]``."""
        out = {}
        for mono, c in self.terms.items():
            m = [0] * nvars
            for i, e in enumerate(mono):
                m[positions[i]] = e
            out[tuple(m)] = c
        return Poly(nvars, out)

    # -- inspection --------------------------------------------------------
    @property
    def degree(self) -> int:
        return max((sum(m) for m in self.terms), default=0)

    def degree_in(self, i: int) -> int:
        return max((m[i] for m in self.terms), default=0)

    def coeff(self, mono: Monomial) -> complex:
        return self.terms.get(tuple(mono), 0j)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self.terms.values())

    def prune(self, tol: float) -> "Poly":
        scale = max((abs(c) for c in self.terms.values()), default=0.0)
        return Poly(self.nvars, {m: c for m, c in self.terms.items() if abs(c) > tol * scale})

    def __repr__(self) -> str:
        return f"Poly(nvars={self.nvars}, terms={len(self.terms)}, degree={self.degree})"

    # -- evaluation --------------------------------------------------------
    @cached_property
    def _compiled(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.terms:
            return np.zeros((0, self.nvars), dtype=int), np.zeros(0, dtype=complex)
        monos = np.array(list(self.terms.keys()), dtype=int).reshape(-1, self.nvars)
        coefs = np.array(list(self.terms.values()), dtype=complex)
        return monos, coefs

    @cached_property
    def is_real(self) -> bool:
        return all(c.imag == 0 for c in self.terms.values())

    def __call__(self, x):
        x = np.asarray(x)
        monos, coefs = self._compiled
        if x.ndim == 1:
            val = np.prod(x[None, :] ** monos, axis=1) @ coefs if len(coefs) else 0j
            if self.is_real and not np.iscomplexobj(x):
                return float(np.real(val))
            return complex(val)
        # batch of points, shape (npts, nvars)
        if not len(coefs):
            return np.zeros(x.shape[0])
        vals = np.prod(x[:, None, :] ** monos[None, :, :], axis=2) @ coefs
        if self.is_real and not np.iscomplexobj(x):
            return vals.real
        return vals


def poly_det(M: Sequence[Sequence]):
    """Determinant by Laplace expansion, memoised on column subsets.

    Works for any commutative ring elements supporting ``+`` and ``*``,
    in particular :class:`Poly` entries.
    """
    n = len(M)
    if n == 0:
        return 1.0
    memo: dict[tuple[int, int], object] = {}

    def minor(row: int, cols: int):
        # determinant of rows row..n-1 restricted to the column bitmask
        if row == n:
            return 1.0
        key = (row, cols)
        if key in memo:
            return memo[key]
        total = None
        sign = 1
        for c in range(n):
            if not cols >> c & 1:
                continue
            entry = M[row][c]
            if not (isinstance(entry, Poly) and not entry.terms) and not (
                not isinstance(entry, Poly) and entry == 0
            ):
                term = entry * minor(row + 1, cols & ~(1 << c))
                if sign < 0:
                    term = -term
                total = term if total is None else total + term
            sign = -sign
        if total is None:
            total = 0.0
        memo[key] = total
        return total

    return minor(0, (1 << n) - 1)


def poly_matmul(A: Sequence[Sequence], B: Sequence[Sequence]) -> list[list]:
    n, k, m = len(A), len(B), len(B[0])
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = 0.0
            for t in range(k):
                a, b = A[i][t], B[t][j]
                if _is_zero(a) or _is_zero(b):
                    continue
                acc = a * b + acc
            row.append(acc)
        out.append(row)
    return out


def _is_zero(v) -> bool:
    if isinstance(v, Poly):
        return not v.terms
    return v == 0


def as_poly(v, nvars: int) -> Poly:
    return v if isinstance(v, Poly) else Poly.const(complex(v), nvars)


def eval_many(polys: Iterable[Poly], x) -> np.ndarray:
    return np.array([p(x) for p in polys])
