import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from endocov.sampling import ObservationSeries  # noqa: E402
from endocov.simulate import SamplePath  # noqa: E402


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64DXSM(987654321))


def make_path(values_col, dt=1.0, sigma=(1.0, 1.0), rho=0.0):
    """SamplePath whose four columns all equal the given array."""
    v = np.asarray(values_col, dtype=float)
    values = np.tile(v[:, None], (1, 4))
    n = v.size
    spot_vol = np.tile(np.asarray(sigma, dtype=float), (n, 1))
    return SamplePath(
        dt=dt, values=values, spot_vol=spot_vol, spot_rho=np.full(n, rho)
    )


def series(times, prices):
    t = np.asarray(times, dtype=float)
    p = np.asarray(prices, dtype=float)
    return ObservationSeries(times=t, latent=p, observed=p.copy())
