import math

import numpy as np
import pytest

from herald_opt.cases import SINGLERAIL_PATTERN, singlerail_optimum, singlerail_spec
from herald_opt.gaussian import CoreMatrixSpec, HeraldPattern, assemble_A, physicality_margin
from herald_opt.oracle import (
    OracleNonPhysicalError,
    build_state,
    expected_signal,
    herald_project,
    heralded_sector,
    oracle_check,
    squeeze_operator,
)
from herald_opt.stellar import TargetSuperposition, target_rhs_squeezed


def random_case(rng):
    spec = CoreMatrixSpec(
        s=tuple(complex(*rng.normal(scale=0.5, size=2)) for _ in range(2)),
        nu=(complex(*rng.normal(scale=0.5, size=2)),),
    )
    pattern = HeraldPattern(tuple(int(v) for v in rng.integers(1, 4, 2)))
    while True:
        X = rng.uniform(0.05, 0.6, 2)
        if physicality_margin(assemble_A(spec, X)) > 0.05:
            return spec, pattern, X


def test_vacuum_and_single_mode_squeezed():
    st = build_state(np.zeros((2, 2)), cutoff=4)
    assert st.amplitudes[0, 0] == 1 and st.norm_defect == 0
    t = 0.4
    st = build_state(np.array([[t]]), cutoff=60)
    n = np.arange(0, 61, 2)
    k = n // 2
    log_amp = 0.5 * np.array([math.lgamma(v + 1) for v in n]) - k * math.log(2) - np.array([math.lgamma(v + 1) for v in k])
    amp = (1 - t * t) ** 0.25 * np.exp(log_amp) * t**k
    np.testing.assert_allclose(st.amplitudes[::2], amp, atol=1e-14)
    assert np.all(st.amplitudes[1::2] == 0)
    assert st.norm_defect < 1e-12


def test_two_mode_squeezed_vacuum():
    t = 0.3
    A = np.array([[0, t], [t, 0]])
    st = build_state(A, cutoff=20)
    for k in range(20):
        assert st.amplitudes[k, k] == pytest.approx(math.sqrt(1 - t * t) * t**k)
    sig, p = herald_project(st, (2,))
    assert p == pytest.approx((1 - t * t) * t**4)
    assert abs(sig[2]) == pytest.approx(1)


def test_squeeze_operator_matches_series():
    r = 0.5
    S = squeeze_operator(r, 80)
    vac = S[:, 0]
    st = build_state(np.array([[math.tanh(r)]]), cutoff=40)
    np.testing.assert_allclose(vac[:41], st.amplitudes, atol=1e-10)


def test_nonphysical_raises():
    with pytest.raises(OracleNonPhysicalError):
        build_state(np.array([[1.2]]), cutoff=5)


def test_random_two_mode_specs(rng):
    for _ in range(20):
        spec, pattern, X = random_case(rng)
        rep = oracle_check(spec, pattern, X)
        assert rep.status == "pass", rep.to_dict()
        assert rep.rel_error < 1e-6
        assert rep.amplitude_deviation < 1e-6
        assert rep.norm_defect < 1e-10


def test_reference_configurations_pass(table_rows):
    for row in table_rows:
        cfg = row["config"]
        N = 6 if (row["n1"], row["n2"]) in ((3, 3), (4, 2)) else 7
        rep = oracle_check(cfg.spec, HeraldPattern((row["n1"], row["n2"])), cfg.damping.X,
                           TargetSuperposition.balanced(N))
        assert rep.status == "pass"
        assert rep.p_oracle == pytest.approx(row["p_S"], rel=1e-6)


@pytest.mark.parametrize("r", [0.3, -0.5, 0.8])
def test_squeezed_target(r):
    target = TargetSuperposition((0.6, 0.0, 0.8), output_squeezing_r=r)
    rhs = target_rhs_squeezed(target)
    spec = CoreMatrixSpec(s=(rhs[0],))
    X = 0.3
    while physicality_margin(assemble_A(CoreMatrixSpec(s=(rhs[0],), b00=math.tanh(r)), (X,))) < 0.05:
        X *= 0.7
    rep = oracle_check(spec, HeraldPattern((2,)), (X,), target)
    assert rep.status == "pass", rep.to_dict()


def test_heralded_state_independent_of_damping(rng):
    for _ in range(5):
        spec, pattern, X = random_case(rng)
        a = oracle_check(spec, pattern, X)
        b = oracle_check(spec, pattern, 0.6 * X)
        n = min(len(a.signal), len(b.signal))
        ga = a.signal[:n] / np.exp(1j * np.angle(a.signal[np.argmax(abs(a.signal))]))
        gb = b.signal[:n] / np.exp(1j * np.angle(b.signal[np.argmax(abs(b.signal))]))
        assert np.max(np.abs(ga - gb)) < 1e-8


def test_sector_probability_grows_with_cutoff(rng):
    spec, pattern, X = random_case(rng)
    A = assemble_A(spec, X)
    probs = []
    for cut in (4, 8, 16, 32):
        st = build_state(A, cutoffs=(cut,) + pattern.counts)
        probs.append(herald_project(st, pattern.counts)[1])
    assert np.all(np.diff(probs) >= 0)


def test_inconclusive_when_cap_too_small():
    target = TargetSuperposition((0.0, 1.0), output_squeezing_r=1.5)
    spec = CoreMatrixSpec(s=(0.0,))
    rep = oracle_check(spec, HeraldPattern((1,)), (0.05,), target, cutoff=4, cap=4)
    assert rep.status == "inconclusive"
    A = assemble_A(CoreMatrixSpec(s=(0.0,), b00=math.tanh(1.5)), (0.05,))
    st = heralded_sector(A, (1,), cutoff=4, cap=4)
    assert st.warnings
    assert heralded_sector(A, (1,), cutoff=4, cap=30).cutoff == 30
    mild = assemble_A(CoreMatrixSpec(s=(0.0,), b00=math.tanh(0.8)), (0.05,))
    assert heralded_sector(mild, (1,), cutoff=4, cap=200).norm_defect < 1e-10


def test_singlerail_output():
    w = 0.5
    X, p = singlerail_optimum(w)
    rep = oracle_check(singlerail_spec(w), SINGLERAIL_PATTERN, (X, X), target={(1, 1): 1.0, (0, 0): w})
    assert rep.status == "pass"
    assert rep.p_oracle == pytest.approx(p, rel=1e-8)
    want = expected_signal({(1, 1): 1.0, (0, 0): w}, rep.signal.shape)
    assert abs(np.vdot(want, rep.signal)) == pytest.approx(1, abs=1e-10)
