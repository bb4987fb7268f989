import numpy as np
import pytest

from gtib.glme import assemble
from gtib.spectral import KernelTable, SignMode


def make_table(values, z0=0.0, dz=0.05):
    values = np.asarray(values, dtype=complex)
    return KernelTable(z0=z0, dz=dz, values=values,
                       flags=np.zeros(values.size, bool),
                       hard=np.zeros(values.size, bool))


def random_system(rng, m, h=0.05, sign=SignMode.WITH_DISCRETE, scale=1.0):
    """Random bounded-generator system of block size m."""
    n = 2 * m + 2
    values = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    table = make_table(values, z0=0.0, dz=h)
    base = m  # leaves indices base-(m-1) .. base+m inside the table
    t = 0.5 * (table.z0 + base * h + m * h)
    return assemble(table, t=t, P=m * h, M=m, sign=sign), table


@pytest.fixture(scope="session", autouse=True)
def _warm_numba():
    """Trigger jit compilation once so timed tests measure math, not compiles."""
    rng = np.random.default_rng(0)
    system, _ = random_system(rng, 4)
    from gtib.glme import solve
    solve(system)
    from gtib.oracles import Dispersion, _transfer_chain, _jost_trajectories
    q = np.zeros(16, dtype=complex)
    _transfer_chain(q, -1.0, 0.125, np.array([0.5 + 0.5j]), -1.0)
    _jost_trajectories(q, -1.0, 0.125, 0.5 + 0.5j, -1.0)
    yield
