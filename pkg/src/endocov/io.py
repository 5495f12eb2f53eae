"""CSV/JSON interchange for observation series, tick data and experiment runs.

All numeric output is written with 17 significant digits so a round trip
through text loses nothing.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable

import numpy as np

from .experiment import ExperimentResult, histogram_counts
from .sampling import ObservationSeries

_FMT = "%.17g"


def write_observations(series: ObservationSeries, path: str | Path) -> None:
    """One observation per row: ``time,observed,latent``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "observed", "latent"])
        for t, z, x in zip(series.times, series.observed, series.latent):
            writer.writerow([_FMT % t, _FMT % z, _FMT % x])


def read_observations(path: str | Path) -> ObservationSeries:
    times, observed, latent = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["time", "observed", "latent"]:
            raise ValueError(f"{path}: expected header 'time,observed,latent', got {header}")
        for i, row in enumerate(reader, start=2):
            try:
                times.append(float(row[0]))
                observed.append(float(row[1]))
                latent.append(float(row[2]))
            except (IndexError, ValueError) as exc:
                raise ValueError(f"{path}: malformed row {i}: {row}") from exc
    return ObservationSeries(
        times=np.asarray(times), latent=np.asarray(latent), observed=np.asarray(observed)
    )


def read_ticks(path: str | Path) -> ObservationSeries:
    """Tick file (``time,price`` with header) as an observation series.

    Raw timestamps are normalised to [0, 1] by (t - open) / (close - open)
    unless the file already starts at 0 and ends within [0, 1]. Prices are
    taken as the observed values.
    """
    times, prices = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty tick file")
        try:
            float(header[0])
        except (ValueError, IndexError):
            pass  # header row
        else:
            raise ValueError(f"{path}: tick files need a header row (e.g. 'time,price')")
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                times.append(float(row[0]))
                prices.append(float(row[1]))
            except (IndexError, ValueError) as exc:
                raise ValueError(f"{path}: malformed row {i}: {row}") from exc
    if not times:
        raise ValueError(f"{path}: no data rows")
    t = np.asarray(times)
    p = np.asarray(prices)
    bad = np.flatnonzero(np.diff(t) <= 0)
    if bad.size:
        raise ValueError(
            f"{path}: times not strictly increasing at row {int(bad[0]) + 3}"
        )
    if t[0] != 0.0 or t[-1] > 1.0:
        span = t[-1] - t[0]
        if span <= 0:
            raise ValueError(f"{path}: cannot normalise a zero time span")
        t = (t - t[0]) / span
    return ObservationSeries(times=t, latent=p, observed=p.copy())


def write_replications(result: ExperimentResult, path: str | Path) -> None:
    """Per-replication results: ``rep,truth,hy,bchy,ab_hat,av_hat,statistic``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rep", "truth", "hy", "bchy", "ab_hat", "av_hat", "statistic"])
        for r in result.replications:
            if r.failed:
                writer.writerow([r.rep, "failed", "", "", "", "", ""])
            else:
                writer.writerow(
                    [r.rep]
                    + [_FMT % v for v in (r.truth, r.hy, r.bchy, r.ab_hat, r.av_hat, r.statistic)]
                )


def read_replications(path: str | Path) -> dict[str, np.ndarray]:
    cols: dict[str, list[float]] = {
        k: [] for k in ("rep", "truth", "hy", "bchy", "ab_hat", "av_hat", "statistic")
    }
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        for row in reader:
            if row[1] == "failed":
                continue
            for key, val in zip(header, row):
                cols[key].append(float(val))
    return {k: np.asarray(v) for k, v in cols.items()}


def write_summary(result: ExperimentResult, path: str | Path) -> None:
    doc = {"config": result.config.to_json(), "summary": result.summary}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_histogram(values: Iterable[float], path: str | Path, bins: int = 40) -> None:
    """Histogram rows ``bin_left,bin_right,count`` of the statistic sample."""
    edges, counts = histogram_counts(list(values), bins=bins)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_left", "bin_right", "count"])
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            writer.writerow([_FMT % lo, _FMT % hi, int(c)])
