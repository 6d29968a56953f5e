"""Brute-force ground truth in a truncated Fock basis.

The Gaussian state is built by summing ``O^p / p!`` applied to the vacuum,
with ``O = 1/2 sum_jk A_jk a_j^dagger a_k^dagger``, directly as a dense
amplitude tensor.  Nothing here uses the matching sums or the determinant
polynomials of the analytic modules.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import expm

log = logging.getLogger(__name__)

DEFAULT_CUTOFF = 30
NORM_DEFECT_TOL = 1e-10


class OracleNonPhysicalError(ValueError):
    pass


@dataclass
class TruncatedState:
    """Dense amplitudes; axis j holds photon numbers 0..cutoffs[j]."""

    amplitudes: np.ndarray
    cutoff: int
    norm_defect: float
    warnings: list[str] = field(default_factory=list)

    @property
    def cutoffs(self) -> tuple[int, ...]:
        return tuple(n - 1 for n in self.amplitudes.shape)


def _raise(T: np.ndarray, axis: int) -> np.ndarray:
    """Apply a creation operator along ``axis``, dropping what leaves the box."""
    out = np.zeros_like(T)
    n = T.shape[axis]
    src = [slice(None)] * T.ndim
    dst = [slice(None)] * T.ndim
    src[axis] = slice(0, n - 1)
    dst[axis] = slice(1, n)
    shape = [1] * T.ndim
    shape[axis] = n - 1
    out[tuple(dst)] = T[tuple(src)] * np.sqrt(np.arange(1, n)).reshape(shape)
    return out


def _apply_quadratic(A: np.ndarray, T: np.ndarray) -> np.ndarray:
    M = len(A)
    out = np.zeros_like(T)
    for j in range(M):
        rj = _raise(T, j)
        if A[j, j] != 0:
            out += 0.5 * A[j, j] * _raise(rj, j)
        for k in range(j + 1, M):
            if A[j, k] != 0:
                out += A[j, k] * _raise(rj, k)
    return out


def build_state(
    A: np.ndarray,
    cutoff: int = DEFAULT_CUTOFF,
    cutoffs: Sequence[int] | None = None,
) -> TruncatedState:
    """Amplitudes of ``Z^{1/4} exp(O)|vac>`` with photon numbers 0..cutoff per mode.

    ``cutoffs`` overrides the box per mode.  Since ``O`` only creates photons,
    every amplitude inside the box is exact; truncation only loses the mass
    outside it, which ``norm_defect`` reports.
    """
    A = np.asarray(A, dtype=complex)
    M = len(A)
    cutoffs = tuple(cutoffs) if cutoffs is not None else (cutoff,) * M
    if len(cutoffs) != M:
        raise ValueError("one cutoff per mode is required")
    gram = np.eye(M) - A @ A.conj().T
    if np.linalg.eigvalsh(gram)[0] <= 0:
        raise OracleNonPhysicalError("I - A A^dagger is not positive definite")
    sign, logdet = np.linalg.slogdet(gram)
    Z = float(np.exp(logdet.real))
    shape = tuple(c + 1 for c in cutoffs)
    term = np.zeros(shape, dtype=complex)
    term[(0,) * M] = 1.0
    total = term.copy()
    p = 0
    # each term lives on its own total photon number, so no cancellation
    # occurs; on a finite box the series ends once the box is full
    while 2 * p < sum(cutoffs):
        p += 1
        term = _apply_quadratic(A, term) / p
        if not term.any():
            break
        total += term
    total *= Z**0.25
    defect = 1.0 - float(np.sum(np.abs(total) ** 2))
    return TruncatedState(total, max(cutoffs), max(defect, 0.0))


def herald_project(state: TruncatedState, counts: Sequence[int], signal_count: int = 1) -> tuple[np.ndarray, float]:
    """Condition the herald modes (the trailing axes) on ``counts``."""
    counts = tuple(int(n) for n in counts)
    if any(n > c for n, c in zip(counts, state.cutoffs[signal_count:])):
        raise ValueError("herald pattern exceeds the cutoff")
    index = (slice(None),) * signal_count + counts
    sig = state.amplitudes[index]
    prob = float(np.sum(np.abs(sig) ** 2))
    if prob == 0:
        return sig, 0.0
    return sig / math.sqrt(prob), prob


def squeeze_operator(r: float, dim: int) -> np.ndarray:
    """``exp(r/2 (a^dagger^2 - a^2))`` in a truncated basis."""
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    ad = a.T
    return expm(0.5 * r * (ad @ ad - a @ a))


def expected_signal(
    coefficients: Sequence[complex] | Mapping[tuple[int, ...], complex], shape: tuple[int, ...], r: float = 0.0
) -> np.ndarray:
    """Normalised target amplitudes on a truncated signal grid."""
    out = np.zeros(shape, dtype=complex)
    if isinstance(coefficients, Mapping):
        for k, v in coefficients.items():
            out[tuple(k)] = v
    else:
        c = np.asarray(coefficients, dtype=complex)
        if r == 0:
            out[: len(c)] = c
        else:
            big = max(shape[0], len(c)) + 80
            vec = np.zeros(big, dtype=complex)
            vec[: len(c)] = c
            out[:] = (squeeze_operator(r, big) @ vec)[: shape[0]]
    return out / np.linalg.norm(out)


def phase_aligned_deviation(got: np.ndarray, want: np.ndarray) -> float:
    """Max |difference| after rotating both vectors by the phase of ``want``'s largest entry."""
    i = np.unravel_index(np.argmax(np.abs(want)), want.shape)
    g = got * np.exp(-1j * np.angle(got[i]))
    w = want * np.exp(-1j * np.angle(want[i]))
    return float(np.max(np.abs(g - w)))


@dataclass
class OracleReport:
    p_analytic: float
    p_oracle: float
    abs_error: float
    rel_error: float
    amplitude_deviation: float
    norm_defect: float
    cutoff: int
    status: str  # "pass", "fail" or "inconclusive"
    signal: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "p_analytic": self.p_analytic,
            "p_oracle": self.p_oracle,
            "abs_error": self.abs_error,
            "rel_error": self.rel_error,
            "amplitude_deviation": self.amplitude_deviation,
            "norm_defect": self.norm_defect,
            "cutoff": self.cutoff,
            "status": self.status,
        }


def sector_state(A: np.ndarray, counts: Sequence[int], signal_count: int, cutoff: int) -> TruncatedState:
    """State on the box that the projection onto ``counts`` reads.

    Herald axes stop at their counts, which is exact for that sector; signal
    axes run to ``cutoff``.  ``norm_defect`` is overwritten by the caller.
    """
    return build_state(A, cutoffs=(cutoff,) * signal_count + tuple(counts))


def heralded_sector(
    A: np.ndarray,
    counts: Sequence[int],
    signal_count: int = 1,
    cutoff: int = DEFAULT_CUTOFF,
    cap: int = 200,
    step: int = 10,
) -> TruncatedState:
    """Herald sector with the signal cutoff raised until the tail mass is below threshold.

    The tail estimate is the relative probability gained by extending the
    signal cutoff by ``step`` further levels; ``cap`` bounds the search and
    leaves a warning when reached.
    """
    counts = tuple(int(n) for n in counts)

    def sector_prob(st):
        return float(np.sum(np.abs(st.amplitudes[(slice(None),) * signal_count + counts]) ** 2))

    cut = min(cutoff, cap)
    while True:
        state = sector_state(A, counts, signal_count, cut)
        p = sector_prob(state)
        p_ahead = sector_prob(sector_state(A, counts, signal_count, cut + step))
        defect = max(0.0, 1.0 - p / p_ahead) if p_ahead > 0 else 0.0
        state.norm_defect = defect
        if defect < NORM_DEFECT_TOL:
            return state
        if cut >= cap:
            state.warnings.append(f"sector tail {defect:.2e} at cap cutoff {cut}")
            return state
        cut = min(cut + step, cap)


def oracle_check(
    spec,
    pattern,
    X: Sequence[float],
    target=None,
    cutoff: int = DEFAULT_CUTOFF,
    cap: int = 200,
    rel_tol: float = 1e-6,
    amp_tol: float = 1e-6,
) -> OracleReport:
    """Compare the analytic heralding probability and state against the oracle.

    ``target`` is a TargetSuperposition, a mapping of signal multi-indices to
    amplitudes (multi-signal specs), or ``None`` to skip the amplitude check
    (the heralded state is then compared with B's own stellar coefficients).
    """
    # analytic side, imported lazily so the oracle module stays standalone
    from .extremal import heralding_probability, success_probability
    from .gaussian import assemble_A, with_output_squeezing
    from .stellar import TargetSuperposition, signal_coefficients

    S = spec.signal_count
    r = 0.0
    if isinstance(target, TargetSuperposition):
        r = target.output_squeezing_r
        p_an = success_probability(spec, pattern, X, target)
        full = with_output_squeezing(replace(spec, b00=0.0), r)
        coeffs = target.c
    else:
        p_an = heralding_probability(spec, pattern, X)
        full = spec
        if target is None:
            d = signal_coefficients(spec, pattern)
            coeffs = {k: v * math.sqrt(math.prod(math.factorial(t) for t in k)) for k, v in d.items()}
        else:
            coeffs = dict(target)
    A = assemble_A(full, X)
    state = heralded_sector(A, pattern.counts, S, cutoff, cap)
    sig, p_or = herald_project(state, pattern.counts, S)
    want = expected_signal(coeffs, sig.shape, r)
    dev = phase_aligned_deviation(sig, want)
    abs_err = abs(p_an - p_or)
    rel = abs_err / max(abs(p_an), 1e-300)
    if state.norm_defect >= NORM_DEFECT_TOL:
        status = "inconclusive"
    elif rel <= rel_tol and dev <= amp_tol:
        status = "pass"
    else:
        status = "fail"
    return OracleReport(p_an, p_or, abs_err, rel, dev, state.norm_defect, state.cutoff, status, sig)
