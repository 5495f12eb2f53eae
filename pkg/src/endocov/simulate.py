"""Simulation of the four-process price/sampling system on a fine grid.

The latent state is (X1, X2, T1, T2): two log prices and the two auxiliary
processes whose barrier crossings trigger observations. Prices follow either
constant-volatility or Heston dynamics, optionally with compound Poisson
jumps in prices and variances. Each auxiliary process either equals its
price process or is a separate (unit-volatility) diffusion with an explicit
correlation row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels

_RNG_CHUNK = 1 << 21


@dataclass(frozen=True)
class ConstantVol:
    """Constant per-asset volatilities (per unit time, horizon units)."""

    sigma: tuple[float, float]

    def validate(self) -> None:
        if len(self.sigma) != 2 or any(
            not math.isfinite(s) or s < 0 for s in self.sigma
        ):
            raise ValueError(f"constant volatilities must be finite and >= 0: {self.sigma}")

    def long_run_vol(self) -> tuple[float, float]:
        return self.sigma


@dataclass(frozen=True)
class Heston:
    """Square-root variance dynamics per asset.

    Variance v satisfies dv = kappa*(sigma_bar^2 - v) dt + vol_of_vol*sqrt(v) dB
    with corr(price driver, variance driver) = leverage per asset; the two
    variance drivers are mutually uncorrelated.
    """

    kappa: tuple[float, float]
    sigma_bar: tuple[float, float]
    vol_of_vol: tuple[float, float]
    leverage: tuple[float, float]
    v0: Optional[tuple[float, float]] = None

    def validate(self) -> None:
        for name, vals in (
            ("kappa", self.kappa),
            ("sigma_bar", self.sigma_bar),
            ("vol_of_vol", self.vol_of_vol),
        ):
            if len(vals) != 2 or any(not math.isfinite(v) or v <= 0 for v in vals):
                raise ValueError(f"Heston {name} must be finite and > 0: {vals}")
        if len(self.leverage) != 2 or any(abs(r) >= 1 for r in self.leverage):
            raise ValueError(f"Heston leverage must lie in (-1, 1): {self.leverage}")
        if self.v0 is not None and any(
            not math.isfinite(v) or v < 0 for v in self.v0
        ):
            raise ValueError(f"Heston v0 must be finite and >= 0: {self.v0}")

    def initial_variance(self) -> tuple[float, float]:
        if self.v0 is not None:
            return tuple(self.v0)  # type: ignore[return-value]
        return (self.sigma_bar[0] ** 2, self.sigma_bar[1] ** 2)

    def long_run_vol(self) -> tuple[float, float]:
        return self.sigma_bar


@dataclass(frozen=True)
class JumpSpec:
    """Compound Poisson jumps; sizes are +/-size with equal probability."""

    price_intensity: tuple[float, float] = (0.0, 0.0)
    price_jump_size: float = 0.0
    vol_intensity: tuple[float, float] = (0.0, 0.0)
    vol_jump_size: float = 0.0

    def validate(self) -> None:
        for name, vals in (
            ("price_intensity", self.price_intensity),
            ("vol_intensity", self.vol_intensity),
        ):
            if len(vals) != 2 or any(not math.isfinite(v) or v < 0 for v in vals):
                raise ValueError(f"jump {name} must be finite and >= 0: {vals}")
        for name, v in (
            ("price_jump_size", self.price_jump_size),
            ("vol_jump_size", self.vol_jump_size),
        ):
            if not math.isfinite(v):
                raise ValueError(f"jump {name} must be finite: {v}")


@dataclass(frozen=True)
class DiffusionSpec:
    """Full parameterisation of the four-process system.

    ``time_equals_price`` flags, per asset, that the auxiliary sampling
    process is the price itself. When an entry is False the corresponding
    process is a drifted unit-volatility diffusion (scaled by ``time_vol``)
    whose correlations with the two prices are taken from
    ``time_price_correlation`` (rows = auxiliary process, columns = prices)
    and with the other auxiliary process from ``time_time_correlation``.
    """

    drift: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    vol_model: ConstantVol | Heston = ConstantVol((0.016, 0.02))
    price_correlation: float = 0.0
    time_equals_price: tuple[bool, bool] = (True, True)
    time_price_correlation: Optional[Sequence[Sequence[float]]] = None
    time_time_correlation: float = 0.0
    time_vol: tuple[float, float] = (1.0, 1.0)
    jumps: Optional[JumpSpec] = None

    def validate(self) -> None:
        if len(self.drift) != 4 or any(not math.isfinite(m) for m in self.drift):
            raise ValueError(f"drift must be a finite 4-vector: {self.drift}")
        self.vol_model.validate()
        if not math.isfinite(self.price_correlation) or abs(self.price_correlation) >= 1:
            raise ValueError(
                f"price correlation must lie in (-1, 1): {self.price_correlation}"
            )
        if self.jumps is not None:
            self.jumps.validate()
        if any(not v for v in self.time_equals_price):
            if self.time_price_correlation is None:
                raise ValueError(
                    "time_price_correlation required when an auxiliary process "
                    "is distinct from its price"
                )
        if any(v <= 0 or not math.isfinite(v) for v in self.time_vol):
            raise ValueError(f"time_vol must be finite and > 0: {self.time_vol}")
        # driver correlation must be a valid correlation matrix
        corr, _ = self.driver_correlation()
        correlation_factor(corr)

    def is_heston(self) -> bool:
        return isinstance(self.vol_model, Heston)

    def driver_correlation(self) -> tuple[np.ndarray, dict[str, int]]:
        """Correlation matrix of the distinct Brownian drivers.

        Returns the matrix and a layout mapping driver names (``w1``, ``w2``,
        ``t1``, ``t2``, ``v1``, ``v2``) to column indices; absent drivers
        (auxiliary process equal to price, constant vol) are omitted.
        """
        layout: dict[str, int] = {"w1": 0, "w2": 1}
        ncols = 2
        for k in range(2):
            if not self.time_equals_price[k]:
                layout[f"t{k + 1}"] = ncols
                ncols += 1
        if self.is_heston():
            layout["v1"] = ncols
            layout["v2"] = ncols + 1
            ncols += 2
        corr = np.eye(ncols)
        corr[0, 1] = corr[1, 0] = self.price_correlation
        tpc = None
        if self.time_price_correlation is not None:
            tpc = np.asarray(self.time_price_correlation, dtype=float)
            if tpc.shape != (2, 2):
                raise ValueError("time_price_correlation must be 2x2")
        for k in range(2):
            name = f"t{k + 1}"
            if name in layout:
                c = layout[name]
                corr[c, 0] = corr[0, c] = tpc[k, 0]  # type: ignore[index]
                corr[c, 1] = corr[1, c] = tpc[k, 1]  # type: ignore[index]
        if "t1" in layout and "t2" in layout:
            c1, c2 = layout["t1"], layout["t2"]
            corr[c1, c2] = corr[c2, c1] = self.time_time_correlation
        if self.is_heston():
            lev = self.vol_model.leverage  # type: ignore[union-attr]
            for k in range(2):
                c = layout[f"v{k + 1}"]
                corr[c, k] = corr[k, c] = lev[k]
        return corr, layout

    def to_json(self) -> dict:
        vm = self.vol_model
        if isinstance(vm, ConstantVol):
            vol = {"kind": "constant", "sigma": list(vm.sigma)}
        else:
            vol = {
                "kind": "heston",
                "kappa": list(vm.kappa),
                "sigma_bar": list(vm.sigma_bar),
                "vol_of_vol": list(vm.vol_of_vol),
                "leverage": list(vm.leverage),
            }
            if vm.v0 is not None:
                vol["v0"] = list(vm.v0)
        out = {
            "drift": list(self.drift),
            "vol_model": vol,
            "price_correlation": self.price_correlation,
            "time_equals_price": list(self.time_equals_price),
            "time_vol": list(self.time_vol),
        }
        if self.time_price_correlation is not None:
            out["time_price_correlation"] = [
                list(row) for row in self.time_price_correlation
            ]
            out["time_time_correlation"] = self.time_time_correlation
        if self.jumps is not None:
            out["jumps"] = {
                "price_intensity": list(self.jumps.price_intensity),
                "price_jump_size": self.jumps.price_jump_size,
                "vol_intensity": list(self.jumps.vol_intensity),
                "vol_jump_size": self.jumps.vol_jump_size,
            }
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "DiffusionSpec":
        vm = doc.get("vol_model", {})
        kind = vm.get("kind")
        if kind == "constant":
            vol: ConstantVol | Heston = ConstantVol(tuple(vm["sigma"]))
        elif kind == "heston":
            vol = Heston(
                kappa=tuple(vm["kappa"]),
                sigma_bar=tuple(vm["sigma_bar"]),
                vol_of_vol=tuple(vm["vol_of_vol"]),
                leverage=tuple(vm["leverage"]),
                v0=tuple(vm["v0"]) if "v0" in vm else None,
            )
        else:
            raise ValueError(f"vol_model.kind must be 'constant' or 'heston', got {kind!r}")
        jumps = None
        if "jumps" in doc:
            j = doc["jumps"]
            jumps = JumpSpec(
                price_intensity=tuple(j.get("price_intensity", (0.0, 0.0))),
                price_jump_size=j.get("price_jump_size", 0.0),
                vol_intensity=tuple(j.get("vol_intensity", (0.0, 0.0))),
                vol_jump_size=j.get("vol_jump_size", 0.0),
            )
        spec = cls(
            drift=tuple(doc.get("drift", (0.0, 0.0, 0.0, 0.0))),
            vol_model=vol,
            price_correlation=doc.get("price_correlation", 0.0),
            time_equals_price=tuple(doc.get("time_equals_price", (True, True))),
            time_price_correlation=doc.get("time_price_correlation"),
            time_time_correlation=doc.get("time_time_correlation", 0.0),
            time_vol=tuple(doc.get("time_vol", (1.0, 1.0))),
            jumps=jumps,
        )
        spec.validate()
        return spec


@dataclass
class SamplePath:
    """Fine-grid joint path of the four latent processes.

    ``values`` has one row per grid node (floor(horizon/dt)+1 rows) and
    columns (X1, X2, T1, T2). ``spot_vol`` holds the instantaneous price
    volatilities and ``spot_rho`` the instantaneous price correlation at the
    nodes; their trapezoidal product integral is the Monte Carlo truth.
    ``jump_marks`` lists (grid index, process index, size) with process
    indices 0/1 for prices and 2/3 for the variance processes.
    """

    dt: float
    values: np.ndarray
    spot_vol: np.ndarray
    spot_rho: np.ndarray
    jump_marks: list[tuple[int, int, float]] = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return self.values.shape[0] - 1

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.shape[0]) * self.dt

    def time_process(self, asset: int) -> np.ndarray:
        if asset not in (1, 2):
            raise ValueError(f"asset must be 1 or 2, got {asset}")
        return self.values[:, 1 + asset]

    def price_process(self, asset: int) -> np.ndarray:
        if asset not in (1, 2):
            raise ValueError(f"asset must be 1 or 2, got {asset}")
        return self.values[:, asset - 1]


def correlation_factor(corr: np.ndarray) -> np.ndarray:
    """Lower-triangular factor L with L @ L.T equal to the correlation matrix.

    Uses the Cholesky factor; for a singular PSD matrix an eigenvalue-based
    factor is substituted. Matrices with a negative eigenvalue beyond
    tolerance are rejected, reporting the smallest eigenvalue.
    """
    corr = np.asarray(corr, dtype=float)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise ValueError(f"correlation matrix must be square, got shape {corr.shape}")
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise ValueError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
        raise ValueError("correlation matrix must have unit diagonal")
    try:
        return np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        eigvals, eigvecs = np.linalg.eigh(corr)
        if eigvals[0] < -1e-10:
            raise ValueError(
                "correlation matrix is not positive semi-definite "
                f"(smallest eigenvalue {eigvals[0]:.3e})"
            ) from None
        return eigvecs @ np.diag(np.sqrt(np.clip(eigvals, 0.0, None)))


def correlate_increments(corr: np.ndarray, iid_normals: np.ndarray) -> np.ndarray:
    """Mix iid standard normal columns to the prescribed correlation."""
    factor = correlation_factor(corr)
    z = np.asarray(iid_normals, dtype=float)
    if z.ndim == 1:
        z = z[None, :]
        return (z @ factor.T)[0]
    if z.shape[1] != factor.shape[0]:
        raise ValueError(
            f"normals have {z.shape[1]} columns, correlation is {factor.shape[0]}x{factor.shape[0]}"
        )
    return z @ factor.T


def _draw_correlated(rng: np.random.Generator, n: int, factor: np.ndarray) -> np.ndarray:
    """Correlated standard-normal increments, drawn in fixed-size chunks.

    Chunking bounds transient memory on fine grids without changing the
    stream: consecutive chunks continue the same row-major draw order.
    """
    m = factor.shape[0]
    out = np.empty((n, m))
    for lo in range(0, n, _RNG_CHUNK):
        hi = min(lo + _RNG_CHUNK, n)
        z = rng.standard_normal((hi - lo, m))
        np.matmul(z, factor.T, out=out[lo:hi])
    return out


def _poisson_marks(
    rng: np.random.Generator, intensity: float, horizon: float, dt: float, n: int
) -> list[int]:
    """Exact exponential event gaps snapped to the nearest grid node (>= 1)."""
    marks: list[int] = []
    if intensity <= 0:
        return marks
    t = rng.exponential(1.0 / intensity)
    while t < horizon:
        idx = int(round(t / dt))
        marks.append(min(max(idx, 1), n))
        t += rng.exponential(1.0 / intensity)
    return marks


def simulate_path(
    spec: DiffusionSpec, horizon: float, dt: float, seed
) -> SamplePath:
    """Euler path of the four-process system; bit-reproducible given the seed.

    Heston variances use full truncation (negative state floored inside the
    coefficients). Jump times are drawn exactly and applied at the nearest
    grid node. ``seed`` may be an int or a ``numpy.random.SeedSequence``.
    """
    spec.validate()
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive and finite, got {dt}")
    if not (math.isfinite(horizon) and horizon > 0):
        raise ValueError(f"horizon must be positive and finite, got {horizon}")
    if dt >= horizon:
        raise ValueError(f"dt ({dt}) must be smaller than the horizon ({horizon})")
    n = round(horizon / dt)
    if abs(n * dt - horizon) > 1e-9 * horizon:
        raise ValueError(f"horizon {horizon} is not a multiple of dt {dt}")

    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.Generator(np.random.PCG64DXSM(ss))

    corr, layout = spec.driver_correlation()
    factor = correlation_factor(corr)
    dw = _draw_correlated(rng, n, factor)
    dw *= math.sqrt(dt)

    jump_marks: list[tuple[int, int, float]] = []
    price_jump_incr = [None, None]
    vol_jumps: list[tuple[list[int], list[float]]] = [([], []), ([], [])]
    if spec.jumps is not None:
        j = spec.jumps
        for k in range(2):
            marks = _poisson_marks(rng, j.price_intensity[k], horizon, dt, n)
            if marks:
                incr = np.zeros(n)
                for idx in marks:
                    size = j.price_jump_size if rng.integers(0, 2) else -j.price_jump_size
                    incr[idx - 1] += size
                    jump_marks.append((idx, k, size))
                price_jump_incr[k] = incr
        for k in range(2):
            marks = _poisson_marks(rng, j.vol_intensity[k], horizon, dt, n)
            idxs, sizes = vol_jumps[k]
            for idx in marks:
                size = j.vol_jump_size if rng.integers(0, 2) else -j.vol_jump_size
                idxs.append(idx)
                sizes.append(size)
                jump_marks.append((idx, 2 + k, size))

    spot_vol = np.empty((n + 1, 2))
    if spec.is_heston():
        hm: Heston = spec.vol_model  # type: ignore[assignment]
        v0 = hm.initial_variance()
        for k in range(2):
            idxs, sizes = vol_jumps[k]
            order = np.argsort(idxs, kind="stable") if idxs else None
            jidx = np.asarray(idxs, dtype=np.int64)[order] if idxs else None
            jsz = np.asarray(sizes, dtype=float)[order] if idxs else None
            v = kernels.heston_variance(
                v0[k],
                hm.kappa[k],
                hm.sigma_bar[k] ** 2,
                hm.vol_of_vol[k],
                dt,
                np.ascontiguousarray(dw[:, layout[f"v{k + 1}"]]),
                jidx,
                jsz,
            )
            np.sqrt(np.clip(v, 0.0, None), out=spot_vol[:, k])
    else:
        cv: ConstantVol = spec.vol_model  # type: ignore[assignment]
        spot_vol[:, 0] = cv.sigma[0]
        spot_vol[:, 1] = cv.sigma[1]
    spot_rho = np.full(n + 1, spec.price_correlation)

    values = np.empty((n + 1, 4))
    values[0, :] = 0.0
    for k in range(2):
        incr = spot_vol[:-1, k] * dw[:, k]
        if spec.drift[k] != 0.0:
            incr += spec.drift[k] * dt
        if price_jump_incr[k] is not None:
            incr += price_jump_incr[k]
        np.cumsum(incr, out=values[1:, k])
    for k in range(2):
        col = 2 + k
        if spec.time_equals_price[k]:
            values[:, col] = values[:, k]
        else:
            incr = spec.time_vol[k] * dw[:, layout[f"t{k + 1}"]]
            if spec.drift[col] != 0.0:
                incr += spec.drift[col] * dt
            np.cumsum(incr, out=values[1:, col])
            values[0, col] = 0.0

    return SamplePath(
        dt=dt,
        values=values,
        spot_vol=spot_vol,
        spot_rho=spot_rho,
        jump_marks=jump_marks,
    )


def true_integrated_covariation(path: SamplePath, t: float) -> float:
    """Trapezoidal integral of spot_vol product times spot correlation on [0, t]."""
    horizon = path.horizon
    if not (0.0 <= t <= horizon * (1 + 1e-12)):
        raise ValueError(f"t={t} outside the simulated horizon {horizon}")
    integrand = path.spot_vol[:, 0] * path.spot_vol[:, 1] * path.spot_rho
    pos = min(t / path.dt, float(path.n_steps))
    full = int(pos)
    total = float(np.trapezoid(integrand[: full + 1], dx=path.dt))
    frac = pos - full
    if frac > 0:
        left = integrand[full]
        right = left + (integrand[full + 1] - left) * frac
        total += 0.5 * (left + right) * frac * path.dt
    return total
