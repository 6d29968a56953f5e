"""Two-herald closed forms, the generic core-parameter solver, the 24-row
configuration table and the single-rail entangled-qubit example."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .extremal import PolySystem, b_poly, _param_names
from .gaussian import CoreMatrixSpec, HeraldPattern, assemble_A, normalization_Z
from .polysolve import SolveOptions, homotopy_solve, optimize_damping, _newton
from .stellar import TargetSuperposition, dk_coefficients, dk_from_matrix, target_rhs

BACKSUB_TOL = 1e-8


class UnsuitablePatternError(ValueError):
    pass


@dataclass(frozen=True)
class TwoModeConfig:
    nu: complex
    s1: complex
    s2: complex
    pattern: HeraldPattern

    def to_spec(self) -> CoreMatrixSpec:
        return CoreMatrixSpec(s=(self.s1, self.s2), nu=(self.nu,))

    def residual(self, rhs: np.ndarray) -> float:
        d = dk_coefficients(self.to_spec(), self.pattern)
        return float(np.max(np.abs(d - rhs) / np.maximum(1.0, np.abs(rhs))))


def _polish_root(coeffs: np.ndarray, z: complex, iters: int = 8) -> complex:
    p = np.poly1d(coeffs)
    dp = p.deriv()
    for _ in range(iters):
        d = dp(z)
        if d == 0:
            break
        step = p(z) / d
        z = z - step
        if abs(step) < 1e-15 * max(1.0, abs(z)):
            break
    return complex(z)


def poly_roots(coeffs: Sequence[complex]) -> list[complex]:
    """Roots via companion-matrix eigenvalues, each polished by Newton.

    ``coeffs`` are ordered highest degree first.
    """
    c = np.trim_zeros(np.asarray(coeffs, dtype=complex), "f")
    if len(c) <= 1:
        return []
    n = len(c) - 1
    comp = np.zeros((n, n), dtype=complex)
    comp[0, :] = -c[1:] / c[0]
    comp[1:, :-1] = np.eye(n - 1)
    return [_polish_root(c, z) for z in np.linalg.eigvals(comp)]


def _dedup_configs(configs: list[TwoModeConfig], tol: float = 1e-7) -> list[TwoModeConfig]:
    out: list[TwoModeConfig] = []
    for c in configs:
        if not any(abs(c.nu - o.nu) < tol and abs(c.s1 - o.s1) < tol and abs(c.s2 - o.s2) < tol for o in out):
            out.append(c)
    return out


def _sqrt(z: complex) -> complex:
    return complex(np.sqrt(complex(z)))


def solve_pattern_33(rhs: np.ndarray) -> list[TwoModeConfig]:
    """Pattern (3,3): cubic in nu, then both (s1, s2) branches per root."""
    d0, d2, d4 = rhs[0], rhs[2], rhs[4]
    pattern = HeraldPattern((3, 3))
    out = []
    for nu in poly_roots([15, -3 * d4, d2, -d0]):
        root = _sqrt(d4**2 - 4 * d2 - 6 * d4 * nu + 45 * nu**2)
        for sign in (1, -1):
            s1 = (d4 - 9 * nu + sign * root) / 6
            s2 = (d4 - 9 * nu - sign * root) / 6
            out.append(TwoModeConfig(nu, s1, s2, pattern))
    return _dedup_configs(out)


def _backsub(cands: list[TwoModeConfig], rhs: np.ndarray) -> tuple[list[TwoModeConfig], list[TwoModeConfig]]:
    good, rejected = [], []
    for c in cands:
        (good if c.residual(rhs) <= BACKSUB_TOL else rejected).append(c)
    return _dedup_configs(good), rejected


def solve_pattern_42(rhs: np.ndarray, return_rejected: bool = False):
    """Pattern (4,2): sextic in nu from elimination, candidates checked by back-substitution."""
    d0, d2, d4 = rhs[0], rhs[2], rhs[4]
    c = [
        14400,
        -5760 * d4,
        5520 * d2 - 144 * d4**2,
        -23520 * d0 + 96 * d2 * d4,
        -416 * d2**2 + 4704 * d0 * d4,
        352 * d0 * d2 + 32 * d2**2 * d4 - 384 * d0 * d4**2,
        -1331 * d0**2 - 12 * d2**3 + 154 * d0 * d2 * d4 + d2**2 * d4**2 - 12 * d0 * d4**3,
    ]
    pattern = HeraldPattern((4, 2))
    cands = []
    for nu in poly_roots(c):
        root = math.sqrt(3) * _sqrt(3 * d4**2 - 11 * d2 - 24 * d4 * nu + 180 * nu**2)
        for sign in (1, -1):
            s1 = (3 * d4 - 12 * nu - sign * root) / 33
            s2 = (5 * d4 - 64 * nu + 2 * sign * root) / 11
            cands.append(TwoModeConfig(nu, s1, s2, pattern))
    good, rejected = _backsub(cands, rhs)
    return (good, rejected) if return_rejected else good


def solve_pattern_43(rhs: np.ndarray, return_rejected: bool = False):
    """Pattern (4,3): sextic in nu, then the quadratic for (s1, s2)."""
    d1, d3, d5 = rhs[1], rhs[3], rhs[5]
    c = [
        282240,
        -80640 * d5,
        -117936 * d3 + 37680 * d5**2,
        51072 * d1 + 15168 * d3 * d5 - 4800 * d5**3,
        -5616 * d3**2 - 7296 * d1 * d5 + 2112 * d3 * d5**2 - 80 * d5**4,
        4752 * d1 * d3 - 144 * d3**2 * d5 - 784 * d1 * d5**2 + 16 * d3 * d5**3,
        -1331 * d1**2 - 12 * d3**3 + 154 * d1 * d3 * d5 + d3**2 * d5**2 - 12 * d1 * d5**3,
    ]
    pattern = HeraldPattern((4, 3))
    cands = []
    for nu in poly_roots(c):
        root = math.sqrt(3) * _sqrt(3 * d5**2 - 11 * d3 - 16 * d5 * nu + 168 * nu**2)
        for sign in (1, -1):
            s1 = (3 * d5 - 30 * nu + sign * root) / 33
            s2 = (5 * d5 - 72 * nu - 2 * sign * root) / 33
            cands.append(TwoModeConfig(nu, s1, s2, pattern))
    good, rejected = _backsub(cands, rhs)
    return (good, rejected) if return_rejected else good


# ---------------------------------------------------------------------------
# generic core-parameter systems
# ---------------------------------------------------------------------------

def core_system(pattern: HeraldPattern, rhs: np.ndarray) -> PolySystem:
    """``d_k(B) = rhs_k`` for every free k < N, in the complex entries of B.

    Variables are ``s_1..s_m`` followed by ``nu_jk``; the polynomials are
    holomorphic, so the system is meant for complex root finding.
    """
    m, N = pattern.m, pattern.N
    names = _param_names(m)
    n = len(names)
    template = CoreMatrixSpec(s=(0,) * m, nu=(0,) * (m * (m - 1) // 2))
    B = b_poly(template, n, {name: (i, None) for i, name in enumerate(names)}, core=True)
    d = dk_from_matrix(B, pattern.counts)
    eqs = [d[k] - complex(rhs[k]) for k in range(N - 2, -1, -2)]
    if len(eqs) != n:
        raise UnsuitablePatternError(
            f"pattern {pattern.counts} gives {len(eqs)} coefficient equations for {n} parameters"
        )
    system = PolySystem(names, eqs, kind="core")
    rng = np.random.default_rng(1)
    z = rng.normal(size=n) + 1j * rng.normal(size=n)
    if np.linalg.matrix_rank(system.jacobian(z), tol=1e-9) < n:
        raise UnsuitablePatternError(
            f"pattern {pattern.counts} cannot tune all coefficients: some B entries never enter d_k"
        )
    return system


def solve_core_generic(pattern: HeraldPattern, rhs: np.ndarray, opts: SolveOptions = SolveOptions()) -> list[TwoModeConfig]:
    """All complex solutions of the coefficient system (m = 2) by homotopy continuation."""
    if pattern.m != 2:
        raise ValueError("two herald modes expected")
    system = core_system(pattern, rhs)
    roots = homotopy_solve(system, opts, real_only=False)
    out = []
    for r in roots.roots:
        r, nf, ok = _newton(system, np.asarray(r, dtype=complex), 1e-12, 20)
        cfg = TwoModeConfig(complex(r[2]), complex(r[0]), complex(r[1]), pattern)
        if cfg.residual(rhs) <= BACKSUB_TOL:
            out.append(cfg)
    return _dedup_configs(out)


def solve_pattern_52(rhs: np.ndarray, opts: SolveOptions = SolveOptions()) -> list[TwoModeConfig]:
    """Pattern (5,2) through the generic machinery (no closed form used)."""
    return solve_core_generic(HeraldPattern((5, 2)), rhs, opts)


CLOSED_FORMS = {(3, 3): solve_pattern_33, (4, 2): solve_pattern_42, (4, 3): solve_pattern_43}


def solve_core(pattern: HeraldPattern, rhs: np.ndarray, opts: SolveOptions = SolveOptions()) -> list[TwoModeConfig]:
    key = tuple(pattern.counts)
    if key in CLOSED_FORMS:
        return CLOSED_FORMS[key](rhs)
    return solve_core_generic(pattern, rhs, opts)


# ---------------------------------------------------------------------------
# Q_1, Q_2 coefficient tables
# ---------------------------------------------------------------------------

def _q1_table(n1: int, s1: complex, s2: complex, nu: complex) -> np.ndarray:
    a = abs
    q = np.zeros((3, 3))
    q[0, 0] = 2 * n1
    q[1, 0] = -2 - 4 * n1
    q[2, 0] = 2 * (1 + n1) * (1 - a(s1) ** 2)
    q[0, 1] = -4 * n1
    q[1, 1] = 2 * (1 - a(nu) ** 2) * (1 + 2 * n1)
    q[2, 1] = 4 * (1 + n1) * a(nu - s1) ** 2
    q[0, 2] = 2 * n1 * (1 - a(s2) ** 2)
    q[1, 2] = 2 * (1 + 2 * n1) * a(nu - s2) ** 2
    cross = nu**2 * np.conj(s1) * np.conj(s2) + s1 * np.conj(s2) - 2 * nu * (np.conj(s1) + np.conj(s2))
    q[2, 2] = -2 * (1 + n1) * (
        4 * a(nu) ** 2 + a(s1) ** 2 + a(s2) ** 2 - a(nu) ** 4 - a(s1) ** 2 * a(s2) ** 2 + 2 * cross.real
    )
    return q


def q_coefficients_two_mode(spec: CoreMatrixSpec, pattern: HeraldPattern) -> tuple[np.ndarray, np.ndarray]:
    """Tables ``q[j, k]`` with ``Q_l = sum q^(l)_jk X_1^j X_2^k``."""
    if spec.m != 2 or pattern.m != 2:
        raise ValueError("two herald modes required")
    s1, s2 = spec.s
    (nu,) = spec.nu
    n1, n2 = pattern.counts
    q1 = _q1_table(n1, s1, s2, nu)
    q2 = _q1_table(n2, s2, s1, nu).T
    return q1, q2


# ---------------------------------------------------------------------------
# configuration table
# ---------------------------------------------------------------------------

TABLE1_CASES = (((3, 3), 6), ((4, 2), 6), ((4, 3), 7), ((5, 2), 7))


def reproduce_table1(opts: SolveOptions = SolveOptions()) -> list[dict]:
    """Every core configuration of the two balanced targets with its optimal damping."""
    rows = []
    for counts, N in TABLE1_CASES:
        pattern = HeraldPattern(counts)
        target = TargetSuperposition.balanced(N)
        rhs = target_rhs(target)
        configs = solve_core(pattern, rhs, opts)
        for cfg in sorted(configs, key=lambda c: (round(c.nu.real, 6), round(c.nu.imag, 6), round(c.s1.real, 6), round(c.s1.imag, 6))):
            best, _ = optimize_damping(cfg.to_spec(), pattern, target, opts=opts)
            row = {"n1": counts[0], "n2": counts[1], "nu": cfg.nu, "s1": cfg.s1, "s2": cfg.s2}
            if best is None:
                row.update(X1=float("nan"), X2=float("nan"), p_S=float("nan"))
            else:
                row.update(X1=best.damping.X[0], X2=best.damping.X[1], p_S=best.p_success, config=best)
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# single-rail entangled qubits
# ---------------------------------------------------------------------------

SINGLERAIL_PATTERN = HeraldPattern((1, 1))


def singlerail_spec(w: float, s1: complex = 0.0, s2: complex = 0.0) -> CoreMatrixSpec:
    """Two signal modes, each coupled to its own herald; herald-herald coupling w."""
    if w < 0:
        raise ValueError("w must be non-negative")
    return CoreMatrixSpec(s=(s1, s2), nu=(w,), signal_count=2, coupling=((1, 0), (0, 1)))


def singlerail_target(w: float) -> dict[tuple[int, int], complex]:
    """Stellar coefficients of ``|11> + w|00>`` for the under-determined solver."""
    return {(1, 1): 1.0, (0, 0): w, (2, 0): 0.0, (0, 2): 0.0}


def singlerail_probability(w: float, X1: float, X2: float, s1: complex = 0.0, s2: complex = 0.0) -> float:
    A = assemble_A(singlerail_spec(w, s1, s2), (X1, X2))
    return (1 + w**2) * X1 * X2 * math.sqrt(normalization_Z(A))


def singlerail_optimum(w: float) -> tuple[float, float]:
    """Optimal symmetric damping and heralding probability at s1 = s2 = 0.

    ``X = 2 / (3 + sqrt(1 + 8 w^2))`` is the rationalised closed form; it is
    regular at w = 1 where the textbook expression is 0/0.
    """
    if w < 0:
        raise ValueError("w must be non-negative")
    root = math.sqrt(1 + 8 * w**2)
    X = 2.0 / (3.0 + root)
    if abs(1 - w**2) > 1e-3:
        p = (1 + w**2) * (3 - root) ** 2 / (128 * (1 - w**2) ** 3) * (1 - 4 * w**2 + root)
    else:
        p = singlerail_probability(w, X, X)
    return X, p


def stationary_candidates_singlerail(w: float) -> list[float]:
    """Non-zero real roots s1 = s2 of the single-rail stationarity polynomial."""
    return [w, -w, math.sqrt(1 + 9 * w**2) / 3, -math.sqrt(1 + 9 * w**2) / 3]
