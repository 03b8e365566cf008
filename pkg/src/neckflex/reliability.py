"""Test-retest statistics between sessions of one subject.

Waveforms are first resampled to a common length over each session's time
span, then compared pairwise with SEM, CMC and Pearson's r.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple

import numpy as np

from .errors import StatisticsError

QUANTITIES = ("phi", "omega", "x_pos", "y_pos")
UNITS = {"phi": "deg", "omega": "deg/s", "x_pos": "cm", "y_pos": "cm"}


@dataclass(frozen=True, eq=False)
class NormalizedWaveform:
    values: np.ndarray
    quantity: str = "phi"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ValueError("waveform values must be a finite 1-D array")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)


def _values(w) -> np.ndarray:
    return w.values if isinstance(w, NormalizedWaveform) else np.asarray(w, dtype=float)


def resample_cycle(series, t=None, n: int = 101, quantity: str = "phi") -> NormalizedWaveform:
    """Linearly interpolate ``series`` onto ``n`` equally spaced points over
    ``[t[0], t[-1]]`` (sample index when ``t`` is omitted)."""
    y = np.asarray(series, dtype=float)
    if len(y) < 2 or n < 2:
        raise StatisticsError("need a series of length >= 2 and n >= 2")
    t = np.arange(len(y), dtype=float) if t is None else np.asarray(t, dtype=float)
    if len(t) != len(y):
        raise StatisticsError("time and value arrays differ in length")
    grid = np.linspace(t[0], t[-1], n)
    return NormalizedWaveform(np.interp(grid, t, y), quantity)


def pearson(a, b) -> float:
    x, y = _values(a), _values(b)
    if len(x) != len(y):
        raise StatisticsError("waveforms differ in length")
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = xc @ xc, yc @ yc
    if sxx == 0 or syy == 0:
        raise StatisticsError("zero-variance waveform")
    r = (xc @ yc) / math.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))


def sem(a, b) -> float:
    """Standard error of measurement: SD of the pointwise differences / sqrt(2)."""
    x, y = _values(a), _values(b)
    if len(x) != len(y):
        raise StatisticsError("waveforms differ in length")
    if len(x) < 2:
        raise StatisticsError("need at least two points")
    return float(np.std(x - y, ddof=1) / math.sqrt(2))


def cmc(sessions) -> float:
    """Coefficient of multiple correlation across M sessions of T points each.

    A negative radicand (within-point scatter larger than overall scatter) is
    clamped to 0.
    """
    Y = np.array([_values(s) for s in sessions], dtype=float)
    if Y.ndim != 2 or Y.shape[0] < 2:
        raise StatisticsError("cmc needs at least two equal-length waveforms")
    M, T = Y.shape
    within = ((Y - Y.mean(axis=0)) ** 2).sum() / (T * (M - 1))
    total = ((Y - Y.mean()) ** 2).sum() / (M * T - 1)
    if total == 0:
        raise StatisticsError("zero grand variance")
    return float(math.sqrt(max(0.0, 1.0 - within / total)))


def _num(v: float):
    return None if math.isnan(v) else v


class ReliabilityRow(NamedTuple):
    quantity: str
    session_pair: tuple[int, int]
    sem: float
    cmc: float
    pearson: float


@dataclass
class ReliabilityReport:
    rows: list[ReliabilityRow] = field(default_factory=list)
    session_ids: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "session_ids": list(self.session_ids),
            "rows": [
                {"quantity": r.quantity, "sessions": list(r.session_pair),
                 "sem": _num(r.sem), "cmc": _num(r.cmc), "pearson": _num(r.pearson)}
                for r in self.rows
            ],
        }

    def to_table(self) -> str:
        lines = []
        for q in QUANTITIES:
            rows = [r for r in self.rows if r.quantity == q]
            if not rows:
                continue
            lines.append(f"{q} ({UNITS[q]})")
            lines.append(f"{'Variable':<18} | {'SEM':>8} | {'CMC':>6} | {'Pearson':>7}")
            for r in rows:
                i, j = r.session_pair
                lines.append(f"{f'Sessions {i} & {j}':<18} | {r.sem:8.2f} | {r.cmc:6.3f} | {r.pearson:7.3f}")
            lines.append("")
        return "\n".join(lines)


def _pair_stats(a: NormalizedWaveform, b: NormalizedWaveform) -> tuple[float, float, float]:
    try:
        c = cmc([a, b])
    except StatisticsError:
        c = 1.0  # two identical constant waveforms
    try:
        r = pearson(a, b)
    except StatisticsError:
        r = 1.0 if np.array_equal(a.values, b.values) else float("nan")
    return sem(a, b), c, r


def reliability_report(reports, positions=None, n: int = 101) -> ReliabilityReport:
    """Pairwise SEM/CMC/Pearson rows for angle, angular velocity and the
    MA1-referenced x/y position, mirroring one table per quantity.

    ``positions`` is a per-session list of ``(x, y)`` arrays; when omitted the
    head positions stored on each report are used. Sessions are numbered from 1.
    """
    reports = list(reports)
    if len(reports) < 2:
        raise StatisticsError("reliability needs at least two sessions")
    if positions is None:
        positions = [(r.head_x, r.head_y) for r in reports]
    waves = {q: [] for q in QUANTITIES}
    for rep, (x, y) in zip(reports, positions):
        t = rep.series.t
        waves["phi"].append(resample_cycle(rep.series.phi, t, n, "phi"))
        waves["omega"].append(resample_cycle(rep.series.omega, t, n, "omega"))
        waves["x_pos"].append(resample_cycle(x, t, n, "x_pos"))
        waves["y_pos"].append(resample_cycle(y, t, n, "y_pos"))
    out = ReliabilityReport(session_ids=[r.session_id for r in reports])
    for q in QUANTITIES:
        for i, j in combinations(range(len(reports)), 2):
            s, c, r = _pair_stats(waves[q][i], waves[q][j])
            out.rows.append(ReliabilityRow(q, (i + 1, j + 1), s, c, r))
    return out
