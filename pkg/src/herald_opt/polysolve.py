"""Root finding for the polynomial systems and selection of the probability maximiser."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .extremal import (
    PolySystem,
    check_reproduces,
    constrained_system,
    extremal_Q,
    heralding_probability,
    kappa_estimate,
    kappa_to_lambda,
    spec_from_underdetermined,
    success_probability,
    underdetermined_system,
)
from .gaussian import (
    PHYSICAL_TOL,
    Configuration,
    CoreMatrixSpec,
    HeraldPattern,
    assemble_A,
    make_configuration,
    physicality_margin,
    squeezing_values,
    with_output_squeezing,
)
from .stellar import TargetSuperposition

log = logging.getLogger(__name__)

METHODS = ("newton-multistart", "homotopy", "both")


@dataclass(frozen=True)
class SolveOptions:
    start_count: int = 32
    newton_tol: float = 1e-9
    max_iter: int = 60
    dedup_tol: float = 1e-7
    box: tuple[tuple[float, float], ...] | None = None
    rng_seed: int = 0
    method: str = "newton-multistart"
    workers: int | None = None

    def __post_init__(self):
        if self.start_count < 1:
            raise ValueError("start_count must be >= 1")
        if self.newton_tol <= 0 or self.dedup_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")

    def n_workers(self) -> int:
        if self.workers is not None:
            return max(1, self.workers)
        env = os.environ.get("HERALD_OPT_THREADS")
        return max(1, int(env)) if env else 1


@dataclass
class RootSet:
    roots: list[np.ndarray] = field(default_factory=list)
    residual_norms: list[float] = field(default_factory=list)
    multiplicity_flags: list[int] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.roots)

    def as_array(self) -> np.ndarray:
        return np.array(self.roots)


class NoSolutionError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Newton
# ---------------------------------------------------------------------------

def _newton(system: PolySystem, x0: np.ndarray, tol: float, max_iter: int) -> tuple[np.ndarray, float, bool]:
    x = np.array(x0, dtype=float if not np.iscomplexobj(x0) else complex)
    F = system.residual(x)
    nf = np.linalg.norm(F)
    for _ in range(max_iter):
        J = system.jacobian(x)
        try:
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(J, -F, rcond=None)[0]
        if not np.all(np.isfinite(dx)):
            return x, nf, False
        t = 1.0
        while True:
            xn = x + t * dx
            Fn = system.residual(xn)
            nfn = np.linalg.norm(Fn)
            if nfn < (1 - 1e-4 * t) * nf or t < 1e-3:
                break
            t *= 0.5
        step = np.linalg.norm(t * dx)
        x, F, nf = xn, Fn, nfn
        if np.linalg.norm(x) > 1e8 or not np.isfinite(nf):
            return x, nf, False
        if step <= 1e-13 * (1 + np.linalg.norm(x)) or nf == 0:
            break
    return x, nf, nf <= tol


def _dedup(points: list[np.ndarray], norms: list[float], tol: float) -> RootSet:
    out = RootSet()
    order = sorted(range(len(points)), key=lambda i: tuple(np.round(np.real(points[i]), 9)))
    for i in order:
        p = points[i]
        for k, q in enumerate(out.roots):
            if np.max(np.abs(p - q)) <= tol:
                out.multiplicity_flags[k] += 1
                if norms[i] < out.residual_norms[k]:
                    out.roots[k], out.residual_norms[k] = p, norms[i]
                break
        else:
            out.roots.append(p)
            out.residual_norms.append(norms[i])
            out.multiplicity_flags.append(1)
    return out


def quasi_random_starts(box: Sequence[tuple[float, float]], count: int, seed: int) -> np.ndarray:
    box = np.asarray(box, dtype=float)
    sampler = qmc.Sobol(d=len(box), scramble=True, seed=seed)
    pts = sampler.random(count)
    return box[:, 0] + pts * (box[:, 1] - box[:, 0])


def newton_multistart(
    system: PolySystem, opts: SolveOptions = SolveOptions(), starts: np.ndarray | None = None
) -> RootSet:
    """Damped Newton from Sobol starts in ``opts.box`` (default (0, 1] per variable)."""
    if starts is None:
        box = opts.box or tuple((0.0, 1.0) for _ in range(system.n))
        if len(box) != system.n:
            raise ValueError(f"box has {len(box)} intervals for {system.n} variables")
        starts = quasi_random_starts(box, opts.start_count, opts.rng_seed)

    def run(x0):
        return _newton(system, x0, opts.newton_tol, opts.max_iter)

    workers = opts.n_workers()
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, starts))
    else:
        results = [run(x0) for x0 in starts]
    pts, norms = [], []
    for x, nf, ok in results:
        if ok:
            pts.append(x)
            norms.append(float(nf))
    return _dedup(pts, norms, opts.dedup_tol)


# ---------------------------------------------------------------------------
# homotopy continuation
# ---------------------------------------------------------------------------

def _track(system: PolySystem, degs: np.ndarray, gamma: complex, x0: np.ndarray) -> tuple[np.ndarray | None, str]:
    def H(x, t):
        return (1 - t) * gamma * (x**degs - 1) + t * system.residual(x)

    def Hx(x, t):
        return (1 - t) * gamma * np.diag(degs * x ** (degs - 1)) + t * system.jacobian(x)

    def Ht(x):
        return system.residual(x) - gamma * (x**degs - 1)

    def velocity(x, t):
        return np.linalg.solve(Hx(x, t), -Ht(x))

    x = x0.astype(complex)
    t, h = 0.0, 0.02
    successes = 0
    steps = 0
    while t < 1.0:
        steps += 1
        if steps > 5000:
            return None, "step budget exhausted"
        h = min(h, 1.0 - t)
        try:
            k1 = velocity(x, t)
            k2 = velocity(x + 0.5 * h * k1, t + 0.5 * h)
            k3 = velocity(x + 0.5 * h * k2, t + 0.5 * h)
            k4 = velocity(x + h * k3, t + h)
            xp = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            tn = t + h
            ok = False
            for _ in range(3):
                dx = np.linalg.solve(Hx(xp, tn), -H(xp, tn))
                xp = xp + dx
                if np.linalg.norm(dx) <= 1e-9 * (1 + np.linalg.norm(xp)):
                    ok = True
                    break
        except np.linalg.LinAlgError:
            ok = False
        if ok and np.all(np.isfinite(xp)):
            x, t = xp, tn
            successes += 1
            if successes >= 3:
                h = min(2 * h, 0.1)
                successes = 0
            if np.linalg.norm(x) > 1e7:
                return None, "diverged (root at infinity)"
        else:
            h *= 0.5
            successes = 0
            if h < 1e-12:
                return None, f"step size underflow at t={t:.6g}"
    return x, "ok"


def homotopy_solve(
    system: PolySystem, opts: SolveOptions = SolveOptions(), real_only: bool = True, imag_tol: float = 1e-8
) -> RootSet:
    """Total-degree homotopy with a random gamma; returns finite endpoints.

    The number of tracked paths is the Bezout number ``prod(degrees)``.
    With ``real_only`` the result keeps roots whose imaginary part falls
    below ``imag_tol`` after refinement, stored as real vectors.
    """
    degs = np.array(system.degrees)
    if np.any(degs < 1):
        raise ValueError("every equation must have positive degree")
    rng = np.random.default_rng(opts.rng_seed)
    gamma = np.exp(2j * np.pi * rng.random())
    grids = np.meshgrid(*[np.exp(2j * np.pi * np.arange(d) / d) for d in degs], indexing="ij")
    starts = np.stack([g.ravel() for g in grids], axis=1)

    def run(x0):
        return _track(system, degs, gamma, x0)

    workers = opts.n_workers()
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, starts))
    else:
        results = [run(x0) for x0 in starts]
    pts, norms, failures = [], [], []
    for i, (x, status) in enumerate(results):
        if x is None:
            failures.append(f"path {i}: {status}")
            continue
        x, nf, ok = _newton(system, x, opts.newton_tol, opts.max_iter)
        if not ok:
            failures.append(f"path {i}: endpoint refinement failed (|F|={nf:.2e})")
            continue
        if real_only:
            if np.max(np.abs(x.imag)) > imag_tol * max(1.0, np.max(np.abs(x))):
                continue
            x, nf, ok = _newton(system, x.real.copy(), opts.newton_tol, opts.max_iter)
            if not ok:
                continue
        pts.append(x)
        norms.append(float(nf))
    out = _dedup(pts, norms, opts.dedup_tol)
    out.failures = failures
    return out


def solve(system: PolySystem, opts: SolveOptions = SolveOptions(), starts: np.ndarray | None = None) -> RootSet:
    if opts.method == "newton-multistart":
        return newton_multistart(system, opts, starts)
    if opts.method == "homotopy":
        return homotopy_solve(system, opts)
    a = newton_multistart(system, opts, starts)
    b = homotopy_solve(system, opts)
    merged = _dedup(a.roots + b.roots, a.residual_norms + b.residual_norms, opts.dedup_tol)
    merged.failures = b.failures
    return merged


# ---------------------------------------------------------------------------
# physical filtering and maximisation
# ---------------------------------------------------------------------------

def _probability(spec: CoreMatrixSpec, pattern: HeraldPattern, X, target: TargetSuperposition | None) -> float:
    if target is None:
        return heralding_probability(spec, pattern, X)
    return success_probability(spec, pattern, X, target)


def filter_physical(
    roots: RootSet,
    spec: CoreMatrixSpec,
    pattern: HeraldPattern,
    mu2: float | None = None,
    target: TargetSuperposition | None = None,
) -> list[Configuration]:
    """Keep roots with X_j > 0, ``I - A A^dagger > 0`` and, if given, ``max eig(A A^dagger) <= mu2``.

    ``spec`` is the core spec; with a squeezed target the physicality test
    uses B00 = tanh r.
    """
    m = spec.m
    full = spec if target is None else with_output_squeezing(replace(spec, b00=0.0), target.output_squeezing_r)
    out = []
    for x, rn in zip(roots.roots, roots.residual_norms):
        X = np.real(np.asarray(x[:m]))
        if np.any(X <= 0):
            continue
        A = assemble_A(full, X)
        margin = physicality_margin(A)
        if margin <= PHYSICAL_TOL:
            continue
        top = squeezing_values(A)[0] ** 2
        if mu2 is not None and top > mu2 + 1e-9:
            continue
        p = _probability(spec, pattern, X, target)
        cfg = make_configuration(full, X, p)
        cfg.notes.update(root=np.asarray(x).tolist(), residual_norm=rn)
        out.append(cfg)
    return out


def fd_hessian(f: Callable[[np.ndarray], float], x: np.ndarray, rel_step: float = 1e-4) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = len(x)
    h = rel_step * np.maximum(np.abs(x), 1e-2)
    H = np.zeros((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4 * h[i] * h[j])
    return H


def projected_max_eig(H: np.ndarray, constraint_grads: np.ndarray | None = None) -> float:
    """Largest eigenvalue of H on the null space of the constraint gradients."""
    if constraint_grads is None or len(constraint_grads) == 0:
        return float(np.linalg.eigvalsh(H)[-1])
    G = np.atleast_2d(constraint_grads)
    _, s, vt = np.linalg.svd(G)
    rank = int(np.sum(s > 1e-12 * max(s.max(), 1e-300)))
    Zb = vt[rank:].T
    if Zb.shape[1] == 0:
        return -np.inf
    return float(np.linalg.eigvalsh(Zb.T @ H @ Zb)[-1])


def _log_ptilde_fn(P, counts: np.ndarray, m: int):
    def f(z):
        X = z[:m]
        val = P(z)
        if val <= 0 or np.any(X <= 0):
            return -1e300
        return float(np.log(val) + np.sum(2 * counts * np.log(X)))

    return f


def classify_unconstrained(cfg: Configuration, P, pattern: HeraldPattern, tol: float = 1e-6) -> bool:
    """True when log p~ has a negative semi-definite Hessian at the configuration."""
    X = np.array(cfg.damping.X)
    H = fd_hessian(_log_ptilde_fn(P, np.array(pattern.counts), len(X)), X)
    top = projected_max_eig(H)
    cfg.notes["hessian_max_eig"] = top
    scale = np.max(np.abs(np.diag(H))) if H.size else 1.0
    is_max = top <= tol * max(scale, 1.0)
    cfg.notes["kind"] = "local-max" if is_max else "saddle/minimum"
    return is_max


def classify_constrained(cfg: Configuration, system: PolySystem, pattern: HeraldPattern, tol: float = 1e-6) -> bool:
    """Second-order check of ``p~ - lambda D`` on the tangent space of ``D = 0``."""
    X = np.array(cfg.damping.X)
    P, D = system.meta["P"], system.meta["D"]
    counts = np.array(pattern.counts)
    kappa = kappa_estimate(system, X)
    g0 = float(np.prod(X ** (2 * counts)))
    lam = kappa * g0

    def lagr(z):
        return (P(z) * float(np.prod(z ** (2 * counts))) - lam * D(z)) / g0

    H = fd_hessian(lagr, X)
    grad = np.array([D.diff(i)(X) for i in range(len(X))])
    top = projected_max_eig(H, grad[None, :])
    cfg.notes.update(hessian_max_eig=top, kappa=kappa, multiplier=kappa_to_lambda(kappa, X, pattern))
    scale = np.max(np.abs(np.diag(H))) if H.size else 1.0
    is_max = top <= tol * max(scale, 1.0)
    cfg.notes["kind"] = "constrained-local-max" if is_max else "constrained-saddle/minimum"
    return is_max


@dataclass
class MaximizeResult:
    best: Configuration | None
    per_candidate: list[Configuration | None]
    diagnostics: list[list[Configuration]]
    status: str = "ok"

    @property
    def ranked(self) -> list[Configuration]:
        found = [c for c in self.per_candidate if c is not None]
        return sorted(found, key=lambda c: -c.p_success)


def optimize_damping(
    spec: CoreMatrixSpec,
    pattern: HeraldPattern,
    target: TargetSuperposition | None = None,
    mu2: float | None = None,
    opts: SolveOptions = SolveOptions(),
) -> tuple[Configuration | None, list[Configuration]]:
    """Best damping for one fixed B, optionally under the squeezing bound ``mu2``.

    Returns the best accepted local maximum and every physical stationary
    point examined (diagnostics).
    """
    full = spec if target is None else with_output_squeezing(replace(spec, b00=0.0), target.output_squeezing_r)
    sysQ = extremal_Q(full, pattern)
    P = sysQ.meta["P"]
    roots = solve(sysQ, opts)
    configs = filter_physical(roots, spec, pattern, mu2=mu2, target=target)
    accepted = [c for c in configs if classify_unconstrained(c, P, pattern)]
    diagnostics = list(configs)
    if mu2 is not None:
        cons = constrained_candidates(full, pattern, mu2, opts)
        cfgs = filter_physical(cons[0], spec, pattern, mu2=mu2, target=target)
        for c in cfgs:
            diagnostics.append(c)
            if classify_constrained(c, cons[1], pattern):
                accepted.append(c)
    best = max(accepted, key=lambda c: c.p_success, default=None)
    return best, diagnostics


def constrained_candidates(
    spec: CoreMatrixSpec, pattern: HeraldPattern, mu2: float, opts: SolveOptions = SolveOptions()
) -> tuple[RootSet, PolySystem]:
    """Stationary points of the Lagrangian on ``D = 0`` (X components only)."""
    full_sys = constrained_system(spec, pattern, mu2)
    if spec.m == 2:
        elim = constrained_system(spec, pattern, mu2, eliminate=True)
        roots = newton_multistart(elim, replace(opts, method="newton-multistart"))
        return roots, full_sys
    box = opts.box or tuple((0.0, 1.0) for _ in range(spec.m))
    xs = quasi_random_starts(box, opts.start_count, opts.rng_seed)
    starts = np.array([np.append(x, kappa_estimate(full_sys, x)) for x in xs])
    roots = newton_multistart(full_sys, opts, starts=starts)
    roots.roots = [r[: spec.m] for r in roots.roots]
    return roots, full_sys


def maximize_success(
    spec_candidates: Sequence[CoreMatrixSpec],
    pattern: HeraldPattern,
    target: TargetSuperposition,
    mu2: float | None = None,
    opts: SolveOptions = SolveOptions(),
) -> MaximizeResult:
    """Optimise the damping for each candidate B and keep the overall best."""
    per, diags = [], []
    for spec in spec_candidates:
        check_reproduces(spec, pattern, target)
        best, diag = optimize_damping(spec, pattern, target, mu2, opts)
        per.append(best)
        diags.append(diag)
    found = [c for c in per if c is not None]
    if not found:
        return MaximizeResult(None, per, diags, status="no-solution")
    best = max(found, key=lambda c: c.p_success)
    return MaximizeResult(best, per, diags)


def maximize_underdetermined(
    spec_template: CoreMatrixSpec,
    pattern: HeraldPattern,
    target,
    free: Sequence[str] | None = None,
    opts: SolveOptions = SolveOptions(),
) -> MaximizeResult:
    """Joint optimum over damping and the free B entries subject to the target.

    ``target`` is a TargetSuperposition or a mapping of signal multi-indices to
    stellar coefficients.  Every physical stationary point is kept as a
    diagnostic and the largest p_S wins.
    """
    system = underdetermined_system(spec_template, pattern, target, free)
    m = spec_template.m
    free = system.meta["free"]
    nb = system.meta["n_base"]
    box = opts.box or tuple([(0.05, 1.0)] * m + [(-1.5, 1.5)] * (nb - m) + [(-1.0, 1.0)] * (system.n - nb))
    roots = newton_multistart(system, replace(opts, box=box))
    sq = target if isinstance(target, TargetSuperposition) else None
    found = []
    for x, rn in zip(roots.roots, roots.residual_norms):
        X = np.asarray(x[:m], dtype=float)
        if np.any(X <= 0):
            continue
        spec = spec_from_underdetermined(spec_template, free, x)
        full = spec if sq is None else with_output_squeezing(replace(spec, b00=0.0), sq.output_squeezing_r)
        A = assemble_A(full, X)
        if physicality_margin(A) <= PHYSICAL_TOL:
            continue
        cfg = make_configuration(full, X, _probability(spec, pattern, X, sq))
        cfg.notes.update(root=np.asarray(x).tolist(), residual_norm=rn)
        found.append(cfg)
    if not found:
        return MaximizeResult(None, [], [found], status="no-solution")
    found.sort(key=lambda c: -c.p_success)
    return MaximizeResult(found[0], [found[0]], [found])
