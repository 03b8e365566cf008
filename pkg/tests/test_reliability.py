import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from neckflex.errors import StatisticsError
from neckflex.kinematics import AngleSeries, KinematicReport
from neckflex.reliability import (
    NormalizedWaveform, cmc, pearson, reliability_report, resample_cycle, sem,
)

waves = st.lists(st.floats(-100, 100), min_size=3, max_size=60)


def _cmc_oracle(Y):
    """Coefficient of multiple correlation written out as explicit sums."""
    M, T = len(Y), len(Y[0])
    col = [sum(Y[i][t] for i in range(M)) / M for t in range(T)]
    grand = sum(map(sum, Y)) / (M * T)
    num = sum((Y[i][t] - col[t]) ** 2 for i in range(M) for t in range(T)) / (T * (M - 1))
    den = sum((Y[i][t] - grand) ** 2 for i in range(M) for t in range(T)) / (M * T - 1)
    return math.sqrt(max(0.0, 1 - num / den))


def test_resample_examples():
    assert np.array_equal(resample_cycle(np.full(37, 2.0), n=101).values, np.full(101, 2.0))
    t = np.linspace(0, 7.3, 50)
    ramp = resample_cycle(10 * t / 7.3, t, 11).values
    assert np.allclose(ramp, np.arange(11), atol=1e-12)


def test_resample_dense_sine():
    t = np.linspace(0, 8, 2401)
    w = resample_cycle(30 * np.sin(2 * np.pi * t / 8), t, 101).values
    exact = 30 * np.sin(2 * np.pi * np.linspace(0, 8, 101) / 8)
    assert np.max(np.abs(w - exact)) < 0.001 * 30


def test_waveform_rejects_nan():
    with pytest.raises(ValueError):
        NormalizedWaveform(np.array([1.0, np.nan]))


def test_pearson_identities():
    a = np.sin(np.linspace(0, 6, 101))
    assert pearson(a, a) == 1.0
    assert pearson(a, -a) == -1.0
    assert pearson(a, 2 * a + 5) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(StatisticsError):
        pearson(a, np.ones_like(a))


@settings(max_examples=100)
@given(waves, st.integers(0, 2**31))
def test_pearson_matches_numpy(a, seed):
    a = np.array(a)
    b = np.random.default_rng(seed).normal(size=len(a))
    assume(np.ptp(a) > 1e-6)
    ref = np.corrcoef(a, b)[0, 1]
    r = pearson(a, b)
    assert -1 <= r <= 1
    assert r == pytest.approx(ref, abs=1e-9)


def test_sem_examples():
    a = np.cos(np.linspace(0, 3, 101))
    assert sem(a, a) == 0.0
    assert sem(a, a + 4.2) == pytest.approx(0.0, abs=1e-12)
    rng = np.random.default_rng(8)
    a = rng.normal(size=10_000)
    b = a + rng.normal(0, 2.0, a.size)
    assert sem(a, b) == pytest.approx(2.0 / math.sqrt(2), rel=0.1)


@settings(max_examples=100)
@given(waves, st.floats(-50, 50))
def test_sem_is_shift_invariant_and_symmetric(a, c):
    a = np.array(a)
    b = a[::-1] + c
    assert sem(a, b) == pytest.approx(sem(b, a), abs=1e-9)
    assert sem(a, b + 7.0) == pytest.approx(sem(a, b), abs=1e-6)


def test_cmc_examples():
    a = np.sin(np.linspace(0, 2 * np.pi, 101))
    assert cmc([a, a, a]) == 1.0
    rng = np.random.default_rng(9)
    assert cmc(rng.normal(size=(3, 101))) < 0.3
    assert cmc([a, a + rng.normal(0, 0.01, a.size)]) > 0.99


@settings(max_examples=60)
@given(st.integers(2, 4), st.integers(3, 20), st.integers(0, 2**31))
def test_cmc_matches_oracle(m, t, seed):
    Y = np.random.default_rng(seed).normal(size=(m, t)) + np.linspace(0, 3, t)
    c = cmc(Y)
    assert 0 <= c <= 1
    assert c == pytest.approx(_cmc_oracle(Y.tolist()), abs=1e-9)


def _report(phi, sid="1", subject="S1"):
    t = np.arange(len(phi)) / 30
    om = np.gradient(phi, t)
    return KinematicReport(
        max_angle=phi.max(), rom=np.ptp(phi), mean_omega=om.mean(), harmony=-1.0,
        series=AngleSeries(t, phi, om, np.gradient(om, t)), chair_ok=True,
        head_x=np.sin(t) + 3, head_y=np.cos(t) - 2, subject_id=subject, session_id=sid,
    )


def test_identical_reports_give_perfect_table():
    phi = 40 * np.sin(np.linspace(0, 4 * np.pi, 240))
    rel = reliability_report([_report(phi, s) for s in "123"])
    assert len(rel.rows) == 12
    for r in rel.rows:
        assert (r.sem, r.cmc, r.pearson) == (0.0, 1.0, 1.0)
    assert [r.session_pair for r in rel.rows[:3]] == [(1, 2), (1, 3), (2, 3)]
    table = rel.to_table()
    assert "Sessions 1 & 3" in table and "Pearson" in table


def test_reliability_needs_two_sessions():
    with pytest.raises(StatisticsError):
        reliability_report([_report(np.sin(np.arange(50.0)))])


def test_report_dict_has_no_nan():
    phi = np.sin(np.linspace(0, 6, 90))
    a, b = _report(phi, "1"), _report(phi, "2")
    b.head_x = np.full_like(b.head_x, 1.0)
    a.head_x = np.full_like(a.head_x, 2.0)
    d = reliability_report([a, b]).to_dict()
    x = [r for r in d["rows"] if r["quantity"] == "x_pos"][0]
    assert x["pearson"] is None
