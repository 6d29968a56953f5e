"""Objective functions and polynomial extremal systems for the damping parameters.

Every system is built as explicit multivariate polynomials (exact expansion by
polynomial arithmetic on the matrix entries), so residuals are globally
defined, including where ``I - B K B^dagger K`` is singular.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .gaussian import (
    CoreMatrixSpec,
    HeraldPattern,
    NonPhysicalError,
    assemble_A,
    assemble_B,
    k_diagonal,
    normalization_Z,
    with_output_squeezing,
)
from .poly import Poly, poly_det, poly_matmul
from .stellar import (
    TargetSuperposition,
    dk_coefficients,
    hafnian_with_multiplicity,
    norm_factor,
    rhs_for,
    signal_coefficients,
)


class OverdeterminedError(ValueError):
    pass


class TargetMismatchError(ValueError):
    pass


@dataclass
class PolySystem:
    """Square polynomial system ``polys(x) = 0`` over named real (or complex) variables."""

    variables: list[str]
    polys: list[Poly]
    kind: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.polys) != len(self.variables):
            raise ValueError(f"{len(self.polys)} equations for {len(self.variables)} variables")
        n = len(self.variables)
        if any(p.nvars != n for p in self.polys):
            raise ValueError("polynomial variable count does not match the system")
        self._res = _compile(self.polys)
        self._jac = [_compile([p.diff(i) for p in self.polys]) for i in range(n)]
        self._real = all(p.is_real for p in self.polys)

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def expanded_coefficients(self) -> list[dict]:
        return [dict(p.terms) for p in self.polys]

    @property
    def degrees(self) -> list[int]:
        return [p.degree for p in self.polys]

    def _eval(self, table, x):
        monos, C = table
        x = np.asarray(x)
        val = C @ np.prod(x[None, :] ** monos, axis=1)
        if self._real and not np.iscomplexobj(x):
            return val.real
        return val

    def residual(self, x) -> np.ndarray:
        return self._eval(self._res, x)

    def jacobian(self, x) -> np.ndarray:
        return np.stack([self._eval(t, x) for t in self._jac], axis=1)


def _compile(polys: Sequence[Poly]) -> tuple[np.ndarray, np.ndarray]:
    n = polys[0].nvars if polys else 0
    monos = sorted({m for p in polys for m in p.terms})
    if not monos:
        return np.zeros((1, n), dtype=int), np.zeros((len(polys), 1), dtype=complex)
    index = {m: i for i, m in enumerate(monos)}
    C = np.zeros((len(polys), len(monos)), dtype=complex)
    for r, p in enumerate(polys):
        for m, c in p.terms.items():
            C[r, index[m]] = c
    return np.array(monos, dtype=int), C


# ---------------------------------------------------------------------------
# numeric objective
# ---------------------------------------------------------------------------

def gram_matrix(spec: CoreMatrixSpec, X: Sequence[float]) -> np.ndarray:
    """``B K B^dagger K``."""
    B = assemble_B(spec)
    k = k_diagonal(spec, X)
    return (B * k[None, :]) @ B.conj().T * k[None, :]


def det_weighted(spec: CoreMatrixSpec, X: Sequence[float]) -> float:
    G = gram_matrix(spec, X)
    return float(np.linalg.det(np.eye(len(G)) - G).real)


def ptilde(spec: CoreMatrixSpec, pattern: HeraldPattern, X: Sequence[float]) -> float:
    pattern.require_positive()
    X = np.asarray(X, dtype=float)
    return det_weighted(spec, X) * float(np.prod(X ** (2 * np.array(pattern.counts))))


def ptilde_eps(spec: CoreMatrixSpec, pattern: HeraldPattern, X: Sequence[float], eps: float = 1e-8) -> float:
    """Regularised objective, a diagnostic for the real-B reformulation."""
    X = np.asarray(X, dtype=float)
    return (det_weighted(spec, X) + eps) * float(np.prod(X ** (2 * np.array(pattern.counts))))


def q_trace(spec: CoreMatrixSpec, pattern: HeraldPattern, X: Sequence[float]) -> np.ndarray:
    """Q_j evaluated through Jacobi's formula (needs a non-singular ``I - BKB^dagger K``)."""
    B = assemble_B(spec)
    Bd = B.conj().T
    k = k_diagonal(spec, X)
    K = np.diag(k)
    M = np.eye(len(B)) - B @ K @ Bd @ K
    det = np.linalg.det(M)
    Minv = np.linalg.inv(M)
    S = spec.signal_count
    out = []
    for j, n in enumerate(pattern.counts):
        Sig = np.zeros_like(K)
        Sig[S + j, S + j] = 1.0
        tr = np.trace(Minv @ (B @ Sig @ Bd @ K + B @ K @ Bd @ Sig))
        out.append((det * (2 * n - X[j] * tr)).real)
    return np.array(out)


def heralding_probability(spec: CoreMatrixSpec, pattern: HeraldPattern, X: Sequence[float]) -> float:
    """Probability of the herald pattern for a core state, from B's own stellar coefficients."""
    if spec.b00 != 0:
        raise ValueError("heralding_probability expects a core state (b00 = 0)")
    A = assemble_A(spec, X)
    Z = normalization_Z(A)
    norm = norm_factor(signal_coefficients(spec, pattern))
    weight = math.prod(x**n / math.factorial(n) for x, n in zip(X, pattern.counts))
    return norm * math.sqrt(Z) * weight


def check_reproduces(spec: CoreMatrixSpec, pattern: HeraldPattern, target: TargetSuperposition, tol: float = 1e-8):
    """Raise unless B's stellar coefficients match the target's to relative ``tol``."""
    if target.N != pattern.N:
        raise TargetMismatchError(f"target has stellar rank {target.N}, pattern counts {pattern.N} photons")
    d = dk_coefficients(spec, pattern)
    rhs = rhs_for(target)
    err = np.max(np.abs(d - rhs) / np.maximum(1.0, np.abs(rhs)))
    if err > tol:
        raise TargetMismatchError(f"spec does not reproduce target stellar coefficients (max rel. error {err:.3g})")
    return err


def success_probability(
    spec: CoreMatrixSpec, pattern: HeraldPattern, X: Sequence[float], target: TargetSuperposition
) -> float:
    """Heralding probability of the target state.

    For a squeezed target the output squeezing enters B00 = tanh r and the
    result carries the factor ``cosh(r)^(2N+1)``.
    """
    check_reproduces(spec, pattern, target)
    N = target.N
    r = target.output_squeezing_r
    full = with_output_squeezing(replace(spec, b00=0.0), r)
    A = assemble_A(full, X)
    Z = normalization_Z(A)
    cN = target.c[N]
    weight = math.prod(x**n / math.factorial(n) for x, n in zip(X, pattern.counts))
    return math.factorial(N) / abs(cN) ** 2 * math.sqrt(Z) * weight * math.cosh(r) ** (2 * N + 1)


# ---------------------------------------------------------------------------
# polynomial construction
# ---------------------------------------------------------------------------

def _param_names(m: int) -> list[str]:
    names = [f"s{j + 1}" for j in range(m)]
    names += [f"nu{j + 1}{k + 1}" for j in range(m) for k in range(j + 1, m)]
    return names


def _param_position(spec: CoreMatrixSpec, name: str) -> tuple[int, int]:
    S, m = spec.signal_count, spec.m
    if name.startswith("s"):
        j = int(name[1:]) - 1
        if not 0 <= j < m:
            raise ValueError(f"unknown parameter {name}")
        return S + j, S + j
    if name.startswith("nu"):
        j, k = int(name[2]) - 1, int(name[3]) - 1
        if not (0 <= j < k < m):
            raise ValueError(f"unknown parameter {name}")
        return S + j, S + k
    raise ValueError(f"unknown parameter {name}")


def b_poly(
    spec: CoreMatrixSpec,
    nvars: int,
    params: Mapping[str, tuple[int, int | None]] | None = None,
    core: bool = False,
) -> list[list[Poly]]:
    """B with selected entries replaced by ``re + i*im`` polynomial variables.

    ``params`` maps parameter names (``s1``, ``nu12``...) to the variable
    indices of their real and imaginary parts (``None`` for a real parameter).
    """
    B = assemble_B(spec)
    if core:
        B[0, 0] = 0.0
    out = [[Poly.const(B[u, v], nvars) if B[u, v] != 0 else Poly(nvars) for v in range(len(B))] for u in range(len(B))]
    for name, (re, im) in (params or {}).items():
        u, v = _param_position(spec, name)
        entry = Poly.var(re, nvars)
        if im is not None:
            entry = entry + 1j * Poly.var(im, nvars)
        out[u][v] = entry
        out[v][u] = entry
    return out


def _dagger(M: list[list[Poly]]) -> list[list[Poly]]:
    n = len(M)
    return [[M[v][u].conj() for v in range(n)] for u in range(n)]


def weighted_det_poly(
    spec: CoreMatrixSpec,
    nvars: int,
    x_index: Sequence[int],
    params: Mapping[str, tuple[int, int | None]] | None = None,
    shift: float | Poly = 1.0,
) -> Poly:
    """``det(shift*I - B K B^dagger K)`` as a polynomial; returns its real part."""
    B = b_poly(spec, nvars, params)
    Bd = _dagger(B)
    kd = [Poly.const(1.0, nvars)] * spec.signal_count + [Poly.var(i, nvars) for i in x_index]
    BK = [[B[u][v] * kd[v] for v in range(len(B))] for u in range(len(B))]
    G = poly_matmul(BK, Bd)
    n = len(G)
    M = [
        [(shift if u == v else 0.0) - (G[u][v] * kd[v] if isinstance(G[u][v], Poly) else 0.0) for v in range(n)]
        for u in range(n)
    ]
    M = [[e if isinstance(e, Poly) else Poly.const(e, nvars) for e in row] for row in M]
    return poly_det(M).real


def _real_det_poly(spec: CoreMatrixSpec, nvars: int, x_index, params, sign: float) -> Poly:
    """``det(I + sign * B K)`` for real B."""
    B = b_poly(spec, nvars, params)
    kd = [Poly.const(1.0, nvars)] * spec.signal_count + [Poly.var(i, nvars) for i in x_index]
    n = len(B)
    M = [[(1.0 if u == v else 0.0) + sign * (B[u][v] * kd[v]) for v in range(n)] for u in range(n)]
    return poly_det(M).real


def det_polynomial(spec: CoreMatrixSpec) -> Poly:
    """``det(I - B K B^dagger K)`` in the variables X_1..X_m."""
    m = spec.m
    return weighted_det_poly(spec, m, list(range(m))).prune(1e-15)


def _q_polys(P: Poly, counts: Sequence[int], x_index: Sequence[int]) -> list[Poly]:
    return [P * (2 * n) + P.x_diff(i) for n, i in zip(counts, x_index)]


def _x_names(m: int) -> list[str]:
    return [f"X{j + 1}" for j in range(m)]


def extremal_Q(spec: CoreMatrixSpec, pattern: HeraldPattern) -> PolySystem:
    """Q_j(X) = 2 n_j P + X_j dP/dX_j, with P = det(I - B K B^dagger K)."""
    pattern.require_positive()
    if pattern.m != spec.m:
        raise ValueError("pattern and spec disagree on the number of herald modes")
    P = det_polynomial(spec)
    return PolySystem(_x_names(spec.m), _q_polys(P, pattern.counts, range(spec.m)), kind="extremal", meta={"P": P})


def extremal_Q_realB(
    spec: CoreMatrixSpec, pattern: HeraldPattern, free_real: Sequence[str] = ()
) -> PolySystem:
    """Extremal system for real B with the E = F = 0 continuum removed.

    With ``E = det(I - BK)`` and ``F = det(I + BK)`` each stationarity
    condition that has no ``E F`` term reads ``a E + b F = 0``.  Requiring
    all those (a, b) rows to be parallel (consecutive 2x2 determinants),
    plus ``Q_1`` and the first row, keeps the system square.

    ``free_real`` names B entries (real) that are optimised alongside X.
    """
    pattern.require_positive()
    if not spec.is_real:
        raise ValueError("real-B reformulation requires real s and nu")
    m = spec.m
    nfree = len(free_real)
    if m < 2 and nfree == 0:
        return extremal_Q(spec, pattern)
    nvars = m + nfree
    params = {name: (m + i, None) for i, name in enumerate(free_real)}
    xi = list(range(m))
    E = _real_det_poly(spec, nvars, xi, params, -1.0)
    F = _real_det_poly(spec, nvars, xi, params, +1.0)
    n = pattern.counts
    rows = []
    for i in range(nfree):
        v = m + i
        rows.append((F.diff(v), E.diff(v)))
    for j in range(1, m):
        a = F.x_diff(j) * n[0] - F.x_diff(0) * n[j]
        b = E.x_diff(j) * n[0] - E.x_diff(0) * n[j]
        rows.append((a, b))
    EF = E * F
    eqs = [EF * (2 * n[0]) + EF.x_diff(0), rows[0][0] * E + rows[0][1] * F]
    for r in range(len(rows) - 1):
        (a1, b1), (a2, b2) = rows[r], rows[r + 1]
        eqs.append(a1 * b2 - b1 * a2)
    names = _x_names(m) + list(free_real)
    return PolySystem(names, [e.prune(1e-15) for e in eqs], kind="extremal-realB", meta={"E": E, "F": F})


def squeeze_constraint_D(spec: CoreMatrixSpec, pattern: HeraldPattern, mu2: float) -> Poly:
    """``det(mu^2 I - B K B^dagger K)`` in X_1..X_m."""
    m = spec.m
    return weighted_det_poly(spec, m, list(range(m)), shift=float(mu2)).prune(1e-15)


def shifted_charpoly_coeffs(spec: CoreMatrixSpec, pattern: HeraldPattern, mu2: float) -> list[Poly]:
    """Coefficients D_j(X) of ``det((y + mu^2) I - B K B^dagger K) = sum_j D_j y^j``.

    The list runs over j = 0..dim(B); the last entry is identically one.
    """
    m = spec.m
    nvars = m + 1
    y = Poly.var(m, nvars)
    full = weighted_det_poly(spec, nvars, list(range(m)), shift=y + float(mu2))
    dim = spec.dim
    out = []
    for j in range(dim + 1):
        terms = {mono[:m]: c for mono, c in full.terms.items() if mono[m] == j}
        out.append(Poly(m, terms).prune(1e-15))
    return out


def constrained_system(spec: CoreMatrixSpec, pattern: HeraldPattern, mu2: float, eliminate: bool = False) -> PolySystem:
    """Stationarity of ``p~ - lambda D`` on ``D = 0``.

    The multiplier is carried in the scaled form ``kappa = lambda / prod X^(2n)``
    so that the rows ``Q_j - kappa X_j dD/dX_j`` stay low-degree polynomials.
    With ``eliminate=True`` (m = 2 only) the multiplier is removed and the
    system is ``Q_1 X_2 D_2 - Q_2 X_1 D_1 = 0, D = 0``.
    """
    pattern.require_positive()
    m = spec.m
    P = det_polynomial(spec)
    D = squeeze_constraint_D(spec, pattern, mu2)
    Q = _q_polys(P, pattern.counts, range(m))
    meta = {"P": P, "D": D, "Q": Q, "mu2": mu2}
    if eliminate:
        if m != 2:
            raise ValueError("multiplier elimination is implemented for two herald modes")
        eq = Q[0] * D.x_diff(1) - Q[1] * D.x_diff(0)
        return PolySystem(_x_names(m), [eq.prune(1e-15), D], kind="constrained-eliminated", meta=meta)
    nvars = m + 1
    pos = list(range(m))
    kappa = Poly.var(m, nvars)
    eqs = [Q[j].embed(nvars, pos) - kappa * D.x_diff(j).embed(nvars, pos) for j in range(m)]
    eqs.append(D.embed(nvars, pos))
    return PolySystem(_x_names(m) + ["kappa"], eqs, kind="constrained", meta=meta)


def kappa_to_lambda(kappa: float, X: Sequence[float], pattern: HeraldPattern) -> float:
    return float(kappa * np.prod(np.asarray(X) ** (2 * np.array(pattern.counts))))


def kappa_estimate(system: PolySystem, X: Sequence[float]) -> float:
    """Least-squares multiplier for a point X on (or near) the constraint."""
    Q = np.array([q(X) for q in system.meta["Q"]])
    D = system.meta["D"]
    g = np.array([D.x_diff(j)(X) for j in range(len(X))])
    return float(Q @ g / (g @ g)) if g @ g > 0 else 0.0


def underdetermined_system(
    spec_template: CoreMatrixSpec,
    pattern: HeraldPattern,
    target: TargetSuperposition | Mapping[tuple[int, ...], complex],
    free: Sequence[str] | None = None,
) -> PolySystem:
    """Joint stationarity in X, the free B entries (split into real and
    imaginary parts) and Lagrange multipliers enforcing the target d_k.

    Multipliers are scaled by ``prod X^(2n)`` like the constrained system.
    Constraints independent of the free entries are checked against the
    template and dropped.
    """
    pattern.require_positive()
    m = spec_template.m
    free = list(free) if free is not None else _param_names(m)
    nfree = 2 * len(free)
    base = m + nfree
    params = {name: (m + 2 * i, m + 2 * i + 1) for i, name in enumerate(free)}

    # constraint polynomials in the base variable set
    B = b_poly(spec_template, base, params, core=True)
    S = spec_template.signal_count
    N = pattern.N
    if isinstance(target, TargetSuperposition):
        if S != 1:
            raise ValueError("single-mode target given for a multi-signal spec")
        if target.N != N:
            raise TargetMismatchError(f"target rank {target.N} != photons {N}")
        rhs = rhs_for(target)
        wanted = {(k,): rhs[k] for k in range(N)}
    else:
        wanted = {tuple(k): complex(v) for k, v in target.items()}
    free_idx = list(range(m, base))
    constraints: list[Poly] = []
    for k, value in wanted.items():
        if (N - sum(k)) % 2:
            if abs(value) > 1e-12:
                raise TargetMismatchError(f"target coefficient at {k} violates parity")
            continue
        h = hafnian_with_multiplicity(B, (*k, *pattern.counts))
        h = h if isinstance(h, Poly) else Poly.const(complex(h), base)
        g = h / math.prod(math.factorial(v) for v in k) - value
        depends = any(g.degree_in(i) for i in free_idx)
        if not depends:
            if abs(g.coeff((0,) * base)) > 1e-8 * max(1.0, abs(value)):
                raise TargetMismatchError(f"fixed entries of B cannot reproduce coefficient {k}")
            continue
        for part in (g.real, g.imag):
            if not part.prune(1e-14).is_zero():
                constraints.append(part.prune(1e-14))
    if nfree <= len(constraints):
        raise OverdeterminedError(
            f"{nfree} free real parameters vs {len(constraints)} constraints: use extremal_Q on each solution"
        )
    nc = len(constraints)
    nvars = base + nc
    pos = list(range(base))
    P = weighted_det_poly(spec_template, base, list(range(m)), params).prune(1e-15)
    eqs = [q.embed(nvars, pos) for q in _q_polys(P, pattern.counts, range(m))]
    lams = [Poly.var(base + c, nvars) for c in range(nc)]
    for i in free_idx:
        row = P.diff(i).embed(nvars, pos)
        for lam, g in zip(lams, constraints):
            row = row - lam * g.diff(i).embed(nvars, pos)
        eqs.append(row)
    eqs += [g.embed(nvars, pos) for g in constraints]
    names = _x_names(m)
    for name in free:
        names += [f"Re_{name}", f"Im_{name}"]
    names += [f"lambda{c}" for c in range(nc)]
    return PolySystem(
        names,
        [e.prune(1e-15) for e in eqs],
        kind="underdetermined",
        meta={"P": P, "free": free, "constraints": constraints, "n_base": base},
    )


def spec_from_underdetermined(spec_template: CoreMatrixSpec, free: Sequence[str], x: Sequence[float]) -> CoreMatrixSpec:
    """Write a root's free-parameter values back into a spec."""
    m = spec_template.m
    s = list(spec_template.s)
    nu = list(spec_template.nu)
    pairs = [(j, k) for j in range(m) for k in range(j + 1, m)]
    for i, name in enumerate(free):
        val = complex(x[m + 2 * i], x[m + 2 * i + 1])
        if name.startswith("s"):
            s[int(name[1:]) - 1] = val
        else:
            nu[pairs.index((int(name[2]) - 1, int(name[3]) - 1))] = val
    return CoreMatrixSpec(
        s=tuple(s), nu=tuple(nu), signal_count=spec_template.signal_count,
        coupling=spec_template.coupling, b00=spec_template.b00,
    )


__all__ = [
    "NonPhysicalError",
    "OverdeterminedError",
    "PolySystem",
    "TargetMismatchError",
    "check_reproduces",
    "constrained_system",
    "det_polynomial",
    "extremal_Q",
    "extremal_Q_realB",
    "heralding_probability",
    "ptilde",
    "ptilde_eps",
    "q_trace",
    "shifted_charpoly_coeffs",
    "squeeze_constraint_D",
    "success_probability",
    "underdetermined_system",
]
