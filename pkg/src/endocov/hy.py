"""Hayashi-Yoshida estimation primitives.

Covers the realized covariation of a synchronous series, the pairwise
overlap estimator for asynchronous series, neighbour-time lookups, and the
adjacent-correlated subsequence of first-asset times used by the blockwise
bias/variance machinery. Estimators consume observed prices. Return
intervals are half-open on the right, so ties at interval endpoints never
create overlap, and the sums run over intervals ending strictly before the
evaluation time (the degenerate time-0 return never enters).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .sampling import ObservationSeries


def realized_covariation(
    sync_times: np.ndarray, p1: np.ndarray, p2: np.ndarray, t: float
) -> float:
    """Sum of cross return products over a common observation grid."""
    times = np.asarray(sync_times, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if not (times.size == p1.size == p2.size):
        raise ValueError(
            f"length mismatch: {times.size} times, {p1.size} and {p2.size} prices"
        )
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    stop = int(np.searchsorted(times, t, side="left"))
    if stop < 2:
        return 0.0
    return float(np.sum(np.diff(p1[:stop]) * np.diff(p2[:stop])))


def hayashi_yoshida(obs1: ObservationSeries, obs2: ObservationSeries, t: float) -> float:
    """Pairwise overlap estimator of the integrated covariation before t."""
    return hy_pair(obs1.times, obs1.observed, obs2.times, obs2.observed, t)


def hy_pair(
    t1: np.ndarray, p1: np.ndarray, t2: np.ndarray, p2: np.ndarray, t: float
) -> float:
    """Overlap sweep on raw time/price arrays (linear in the input sizes)."""
    t1 = np.ascontiguousarray(t1, dtype=float)
    t2 = np.ascontiguousarray(t2, dtype=float)
    p1 = np.ascontiguousarray(p1, dtype=float)
    p2 = np.ascontiguousarray(p2, dtype=float)
    if np.any(np.diff(t1) <= 0) or np.any(np.diff(t2) <= 0):
        raise ValueError("observation times must be strictly increasing")
    if t1.size != p1.size or t2.size != p2.size:
        raise ValueError("times and prices lengths differ")
    return float(kernels.hy_pair_sum(t1, p1, t2, p2, t))


def neighbor_times(
    tau1_ref: float, times2: np.ndarray
) -> tuple[float, Optional[float]]:
    """Closest second-asset times around a reference time.

    Returns (largest time strictly below the reference, smallest time at or
    above it). The left neighbour defaults to 0 when none exists; the right
    one is None when absent.
    """
    times2 = np.asarray(times2, dtype=float)
    pos = int(np.searchsorted(times2, tau1_ref, side="left"))
    tau_minus = float(times2[pos - 1]) if pos > 0 else 0.0
    tau_plus = float(times2[pos]) if pos < times2.size else None
    return tau_minus, tau_plus


@dataclass
class OneCorrelatedSeries:
    """Subsequence of first-asset times with adjacent-correlated summands.

    Entry i of the companion arrays holds the nearest second-asset times
    around tau_1c[i]: tau_minus[i] strictly below (0 by convention at i=0)
    and tau_plus[i] at-or-above. The final tau_plus may be missing (NaN)
    when the second asset never observes again; the corresponding last
    extended return is then NaN and excluded from downstream estimation.

    For i >= 1: returns_1[i-1] spans [tau_1c[i-1], tau_1c[i]] on asset 1,
    returns_2_mp[i-1] spans [tau_minus[i-1], tau_plus[i]] on asset 2, and
    durations[i-1] = tau_1c[i] - tau_1c[i-1].
    """

    tau_1c: np.ndarray
    tau_minus: np.ndarray
    tau_plus: np.ndarray
    z1: np.ndarray
    z2_minus: np.ndarray
    z2_plus: np.ndarray
    returns_1: np.ndarray
    returns_2_mp: np.ndarray
    durations: np.ndarray

    @property
    def n_returns(self) -> int:
        return int(self.returns_1.size)

    @property
    def n_usable(self) -> int:
        """Returns with complete companions (drops a trailing NaN window)."""
        n = self.n_returns
        if n and not np.isfinite(self.returns_2_mp[n - 1]):
            return n - 1
        return n


def one_correlated(obs1: ObservationSeries, obs2: ObservationSeries) -> OneCorrelatedSeries:
    """Build the adjacent-correlated subsequence and its companion times.

    From each retained first-asset time, wait for the next second-asset
    time at or after it, then take the first strictly later first-asset
    time; stop when either lookup runs off the end.
    """
    t1 = np.ascontiguousarray(obs1.times, dtype=float)
    t2 = np.ascontiguousarray(obs2.times, dtype=float)
    idx1 = kernels.one_correlated_merge(t1, t2)
    tau_1c = t1[idx1]
    z1 = obs1.observed[idx1]

    pos = np.searchsorted(t2, tau_1c, side="left")
    minus_idx = pos - 1
    tau_minus = np.where(minus_idx >= 0, t2[np.clip(minus_idx, 0, None)], 0.0)
    z2_minus = np.where(minus_idx >= 0, obs2.observed[np.clip(minus_idx, 0, None)], obs2.observed[0])
    tau_minus[0] = 0.0
    z2_minus[0] = obs2.observed[0]

    has_plus = pos < t2.size
    plus_idx = np.clip(pos, 0, t2.size - 1)
    tau_plus = np.where(has_plus, t2[plus_idx], np.nan)
    z2_plus = np.where(has_plus, obs2.observed[plus_idx], np.nan)

    returns_1 = np.diff(z1)
    durations = np.diff(tau_1c)
    returns_2_mp = z2_plus[1:] - z2_minus[:-1]
    return OneCorrelatedSeries(
        tau_1c=tau_1c,
        tau_minus=tau_minus,
        tau_plus=tau_plus,
        z1=z1,
        z2_minus=z2_minus,
        z2_plus=z2_plus,
        returns_1=returns_1,
        returns_2_mp=returns_2_mp,
        durations=durations,
    )


def hy_from_1c(oneC: OneCorrelatedSeries, t: float) -> float:
    """Diagnostic re-summation of the estimator along the subsequence.

    Agrees with the pairwise form up to a few windows at the edges; the
    pairwise form is the estimator of record.
    """
    n = oneC.n_usable
    if n == 0:
        return 0.0
    mask = oneC.tau_plus[1 : n + 1] < t
    return float(np.sum(oneC.returns_1[:n][mask] * oneC.returns_2_mp[:n][mask]))
