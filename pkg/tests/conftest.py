import numpy as np
import pytest

from stpod import GeneratorSpec, SnapshotSeries, generate, lag_correlations
from stpod.backend import HAS_NUMBA, using_backend


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once so timed tests measure computation only."""
    spec_ou = GeneratorSpec.ou(np.array([[-1.0, 0.1], [0.0, -0.5]]), 1.0, seed=0)
    spec_nb = GeneratorSpec.narrowband(1.0, 0.1, seed=0)
    spec_lz = GeneratorSpec.lorenz63(seed=0)
    small = SnapshotSeries(np.random.default_rng(0).standard_normal((2, 16)), 1.0)
    backends = ("numba", "numpy") if HAS_NUMBA else ("numpy",)
    for name in backends:
        with using_backend(name):
            generate(spec_ou, 8, 0.1)
            generate(GeneratorSpec.ou(-1.0, 1.0, seed=0), 8, 0.1)
            generate(spec_nb, 8, 0.1)
            generate(spec_lz, 4, 0.1)
            lag_correlations(small, 3)
