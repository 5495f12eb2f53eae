"""First-passage observation sampling from a simulated path.

An observation of asset k fires at the first grid node where the increment
of the asset's auxiliary process since the previous observation reaches or
leaves the active band [alpha*down, alpha*up]. The band policy is given by a
boundary specification; the supported variants cover constant barriers,
tick-size barriers, random jump-size barriers, rounded prices with an
uncertainty band, an irregular level grid, and fixed event-time barriers on
a separate clock process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .simulate import SamplePath

_EVENT_MARGIN = 1024


@dataclass(frozen=True)
class ConstantBarriers:
    """Fixed up/down barrier magnitudes per asset (both positive)."""

    up: tuple[float, float]
    down: tuple[float, float]

    def validate(self) -> None:
        for name, vals in (("up", self.up), ("down", self.down)):
            if len(vals) != 2 or any(not math.isfinite(v) or v <= 0 for v in vals):
                raise ValueError(f"constant {name} barriers must be finite and > 0: {vals}")

    def magnitude_range(self, asset: int) -> tuple[float, float]:
        mags = (self.up[asset - 1], self.down[asset - 1])
        return min(mags), max(mags)


@dataclass(frozen=True)
class TickBarriers:
    """Symmetric unit barriers: one tick up or down triggers an observation."""

    def validate(self) -> None:
        pass

    def magnitude_range(self, asset: int) -> tuple[float, float]:
        return 1.0, 1.0


@dataclass(frozen=True)
class LawOfL:
    """Bounded distribution of the integer number of ticks jumped per event."""

    values: tuple[int, ...] = (1,)
    probs: tuple[float, ...] = (1.0,)

    def validate(self) -> None:
        if len(self.values) != len(self.probs) or not self.values:
            raise ValueError("jump-size law needs matching nonempty values/probs")
        if any(int(v) != v or v < 1 for v in self.values):
            raise ValueError(f"jump sizes must be integers >= 1: {self.values}")
        if any(p < 0 for p in self.probs) or abs(sum(self.probs) - 1.0) > 1e-9:
            raise ValueError(f"jump-size probabilities must sum to 1: {self.probs}")

    def is_deterministic(self) -> bool:
        return len(self.values) == 1

    def draw(self, rng: Optional[np.random.Generator], n: int) -> np.ndarray:
        if self.is_deterministic():
            return np.full(n, self.values[0], dtype=np.int64)
        if rng is None:
            raise ValueError("random jump sizes require an rng")
        return rng.choice(np.asarray(self.values, dtype=np.int64), size=n, p=self.probs)

    def bounds(self) -> tuple[int, int]:
        return min(self.values), max(self.values)


@dataclass(frozen=True)
class JumpSizeBarriers:
    """Symmetric barriers of a random integer number of ticks per event."""

    law: LawOfL = LawOfL()

    def validate(self) -> None:
        self.law.validate()

    def magnitude_range(self, asset: int) -> tuple[float, float]:
        lo, hi = self.law.bounds()
        return float(lo), float(hi)


@dataclass(frozen=True)
class UncertaintyZones:
    """Rounded observed prices with a friction band around mid-tick.

    Event i fires when the efficient price touches one of the absolute
    levels Z +/- alpha*(L_i - 1/2 + eta), anchored at the last rounded
    observed price Z; the observed price then moves by exactly L_i ticks in
    the exit direction. ``eta`` quantifies the reluctance to change the
    price past mid-tick; asymmetric ``eta_up``/``eta_down`` override it. In
    increment terms the band seen from the last exit point is
    [-(eta_up+eta_down+L-1), +L] ticks after an upward change, mirrored
    after a downward one; with eta = 1/2 this collapses to symmetric
    jump-size barriers.
    """

    eta: float = 0.5
    law: LawOfL = LawOfL()
    eta_up: Optional[float] = None
    eta_down: Optional[float] = None

    def validate(self) -> None:
        for name, v in (("eta_up", self.frictions()[0]), ("eta_down", self.frictions()[1])):
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name} must lie in (0, 1): {v}")
        self.law.validate()

    def frictions(self) -> tuple[float, float]:
        up = self.eta if self.eta_up is None else self.eta_up
        down = self.eta if self.eta_down is None else self.eta_down
        return up, down

    def magnitude_range(self, asset: int) -> tuple[float, float]:
        eu, ed = self.frictions()
        lmin, lmax = self.law.bounds()
        mags = (lmin, lmax, eu + ed + lmin - 1, eu + ed + lmax - 1)
        return min(mags), max(mags)


@dataclass(frozen=True)
class IrregularGrid:
    """Observations fire when the price reaches a neighbouring grid level.

    Levels are in tick units (scaled by alpha at sampling time) and must be
    strictly increasing; the initial price must sit on a level. Outside the
    finite list the missing side never triggers.
    """

    levels: tuple[float, ...]

    def validate(self) -> None:
        lv = np.asarray(self.levels, dtype=float)
        if lv.size < 2 or not np.all(np.diff(lv) > 0):
            raise ValueError("grid levels must be strictly increasing with >= 2 entries")

    def magnitude_range(self, asset: int) -> tuple[float, float]:
        gaps = np.diff(np.asarray(self.levels, dtype=float))
        return float(gaps.min()), float(gaps.max())


@dataclass(frozen=True)
class ACDBarriers:
    """Fixed per-run event barriers on the auxiliary clock process."""

    down: float
    up: float

    def validate(self) -> None:
        if not (math.isfinite(self.down) and math.isfinite(self.up)):
            raise ValueError("ACD barriers must be finite")
        if not (self.down < 0.0 < self.up):
            raise ValueError(
                f"ACD barriers need down < 0 < up, got ({self.down}, {self.up})"
            )

    def magnitude_range(self, asset: int) -> tuple[float, float]:
        mags = (-self.down, self.up)
        return min(mags), max(mags)


BoundarySpec = (
    ConstantBarriers
    | TickBarriers
    | JumpSizeBarriers
    | UncertaintyZones
    | IrregularGrid
    | ACDBarriers
)


@dataclass
class ObservationSeries:
    """Per-asset observation times with latent and observed prices.

    Times are horizon fractions, strictly increasing and starting at 0.
    Observed prices equal latent ones except under rounding (uncertainty
    zones), where they are exact tick multiples. ``direction`` marks the
    side of each barrier exit (+1 up, -1 down, 0 for the initial row) when
    the variant tracks it.
    """

    times: np.ndarray
    latent: np.ndarray
    observed: np.ndarray
    direction: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.latent = np.asarray(self.latent, dtype=float)
        self.observed = np.asarray(self.observed, dtype=float)
        if self.times.size == 0 or self.times[0] != 0.0:
            raise ValueError("observation times must start at 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("observation times must be strictly increasing")
        if not (self.times.size == self.latent.size == self.observed.size):
            raise ValueError("times/latent/observed lengths differ")
        if not (np.all(np.isfinite(self.latent)) and np.all(np.isfinite(self.observed))):
            raise ValueError("prices must be finite")

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def n_events(self) -> int:
        return len(self) - 1

    def truncated(self, t: float) -> "ObservationSeries":
        """Restrict to observations strictly before t (keeps the origin row)."""
        stop = int(np.searchsorted(self.times, t, side="left"))
        stop = max(stop, 1)
        return ObservationSeries(
            times=self.times[:stop],
            latent=self.latent[:stop],
            observed=self.observed[:stop],
            direction=None if self.direction is None else self.direction[:stop],
        )


def _validate_magnitudes(
    boundary: BoundarySpec, asset: int, bounds: Optional[tuple[float, float]]
) -> None:
    if bounds is None:
        return
    g_minus, g_plus = bounds
    if not (0 < g_minus <= g_plus):
        raise ValueError(f"magnitude bounds need 0 < g- <= g+, got {bounds}")
    lo, hi = boundary.magnitude_range(asset)
    if lo < g_minus - 1e-12 or hi > g_plus + 1e-12:
        raise ValueError(
            f"boundary magnitudes [{lo:g}, {hi:g}] violate the allowed band "
            f"[{g_minus:g}, {g_plus:g}]"
        )


def _event_capacity(s: np.ndarray, horizon: float, alpha: float, g_lo: float, g_hi: float) -> int:
    """Conservative event-count bound from the path's realized quadratic variation."""
    qv = float(np.sum(np.diff(s) ** 2))
    if qv <= 0.0:
        return _EVENT_MARGIN
    expected = qv / (alpha * g_lo * alpha * g_hi)
    return int(2.0 * expected) + _EVENT_MARGIN


def generate_observations(
    path: SamplePath,
    boundary: BoundarySpec,
    asset: int,
    alpha: float = 1.0,
    rng: Optional[np.random.Generator] = None,
    magnitude_bounds: Optional[tuple[float, float]] = None,
) -> ObservationSeries:
    """Observation series of one asset by first passage on the grid.

    The walk emits at the first grid node where the auxiliary-process
    increment since the last observation reaches the scaled band edge; the
    increment then resets. If the band is never left again the series simply
    ends. ``rng`` feeds the per-event draws of variants with random barrier
    sizes; deterministic variants ignore it.
    """
    if asset not in (1, 2):
        raise ValueError(f"asset must be 1 or 2, got {asset}")
    if not (math.isfinite(alpha) and alpha > 0):
        raise ValueError(f"tick scale must be positive, got {alpha}")
    boundary.validate()
    _validate_magnitudes(boundary, asset, magnitude_bounds)

    s = np.ascontiguousarray(path.time_process(asset))
    prices = path.price_process(asset)
    direction: Optional[np.ndarray] = None

    if isinstance(boundary, ConstantBarriers):
        k = asset - 1
        idx = kernels.exit_walk_const(s, -alpha * boundary.down[k], alpha * boundary.up[k])
    elif isinstance(boundary, TickBarriers):
        idx = kernels.exit_walk_const(s, -alpha, alpha)
    elif isinstance(boundary, ACDBarriers):
        idx = kernels.exit_walk_const(s, alpha * boundary.down, alpha * boundary.up)
    elif isinstance(boundary, JumpSizeBarriers):
        if boundary.law.is_deterministic():
            width = alpha * boundary.law.values[0]
            idx = kernels.exit_walk_const(s, -width, width)
        else:
            g_lo, g_hi = boundary.magnitude_range(asset)
            cap = _event_capacity(s, path.horizon, alpha, g_lo, g_lo)
            while True:
                draws = boundary.law.draw(rng, cap).astype(float) * alpha
                idx, exhausted = kernels.exit_walk_per_event(s, -draws, draws)
                if not exhausted:
                    break
                cap *= 2
    elif isinstance(boundary, UncertaintyZones):
        idx, direction, ticks = _walk_uncertainty_zones(s, boundary, alpha, rng, path.horizon)
        observed = np.empty(idx.size + 1)
        observed[0] = ticks[0] * alpha
        observed[1:] = ticks[1:] * alpha
        times = np.empty(idx.size + 1)
        times[0] = 0.0
        times[1:] = idx * path.dt
        latent = np.empty(idx.size + 1)
        latent[0] = prices[0]
        latent[1:] = prices[idx]
        dirs = np.zeros(idx.size + 1, dtype=np.int8)
        dirs[1:] = direction
        return ObservationSeries(times=times, latent=latent, observed=observed, direction=dirs)
    elif isinstance(boundary, IrregularGrid):
        levels = alpha * np.asarray(boundary.levels, dtype=float)
        k0 = int(np.argmin(np.abs(levels - s[0])))
        if abs(levels[k0] - s[0]) > 1e-9 * max(1.0, abs(s[0])):
            raise ValueError(
                f"initial value {s[0]:g} does not sit on a grid level (nearest {levels[k0]:g})"
            )
        idx, _ = kernels.exit_walk_grid(s, levels, k0)
    else:
        raise TypeError(f"unsupported boundary spec {type(boundary).__name__}")

    times = np.empty(idx.size + 1)
    times[0] = 0.0
    times[1:] = idx * path.dt
    latent = np.empty(idx.size + 1)
    latent[0] = prices[0]
    latent[1:] = prices[idx]
    return ObservationSeries(times=times, latent=latent, observed=latent.copy())


def _walk_uncertainty_zones(
    s: np.ndarray,
    boundary: UncertaintyZones,
    alpha: float,
    rng: Optional[np.random.Generator],
    horizon: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Anchored walk plus exact tick accounting of the observed price.

    Barrier levels are anchored at the rounded observed price, so grid
    overshoot of the latent path does not propagate into the next band.
    Observed prices move by exactly L ticks per event in the exit direction,
    starting from the rounded initial value.
    """
    eta_up, eta_down = boundary.frictions()
    g_lo, _ = boundary.magnitude_range(1)
    ticks0 = round(s[0] / alpha)
    cap = _event_capacity(s, horizon, alpha, g_lo, g_lo)
    while True:
        ls = boundary.law.draw(rng, cap)
        width_up = alpha * (ls - 0.5 + eta_up)
        width_dn = alpha * (ls - 0.5 + eta_down)
        idx, direction, exhausted = kernels.exit_walk_uncertainty(
            s, alpha, width_up, width_dn, ticks0, ls
        )
        if not exhausted:
            break
        cap *= 2
    ticks = np.empty(idx.size + 1, dtype=np.int64)
    ticks[0] = ticks0
    steps = direction.astype(np.int64) * ls[: idx.size]
    np.cumsum(steps, out=ticks[1:])
    ticks[1:] += ticks0
    return idx, direction, ticks


def count_scaling_report(
    series_at_alpha: ObservationSeries, series_at_half_alpha: ObservationSeries
) -> dict:
    """Event-count ratio between a tick scale and its half.

    Under the square-law observation frequency the ratio concentrates
    around 4 when the tick is halved.
    """
    n_coarse = series_at_alpha.n_events
    n_fine = series_at_half_alpha.n_events
    if n_coarse == 0 or n_fine == 0:
        raise ValueError("count scaling needs nonempty series at both tick scales")
    return {
        "n_coarse": n_coarse,
        "n_fine": n_fine,
        "ratio": n_fine / n_coarse,
    }
