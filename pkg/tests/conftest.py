import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite", deadline=None, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("suite")


@pytest.fixture(scope="session")
def w_grid():
    """The R = 50 grid used by the static-profile fidelity runs."""
    from nlwlab import RadialGrid
    return RadialGrid(h=0.01, n=5000)


@pytest.fixture(scope="session")
def w_state(w_grid):
    from nlwlab import reference_W
    return reference_W(w_grid)


@pytest.fixture(scope="session")
def w_rest_trajectory(w_state):
    """Single-layer trajectory holding the static profile at t = 0."""
    from nlwlab.solver import SolverConfig, evolve
    cfg = SolverConfig(grid=w_state.grid, params=w_state.params, t_final=0.0,
                       cone_floor=None)
    return evolve(cfg, w_state)


def bump(r, radius=1.0, amp=1.0):
    x = np.minimum(np.abs(r) / radius, 1.0)
    out = np.zeros_like(np.asarray(r, dtype=float))
    inside = x < 1.0
    out[inside] = amp * np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return out
