"""Named experiment setups shared by the CLI and the convergence harness.

Each scenario supplies spectral data for both equation sides, an exact
reference signal where one exists, and grid defaults chosen so that step
halvings keep integral grid counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import cutter, oracles
from .errors import ConfigError
from .signals import RecoveredSignal, TimeGrid
from .spectral import Side, SpectralData
from .cutter import CutPlan, Method

# The eight-soliton configuration: solitons 1-6 form a chain whose
# neighbouring zones all overlap while the chain's edge zones do not (a
# "long" group needing per-soliton cuts), soliton 7 is separated from the
# chain by a margin of only 0.38 time units beyond the zone sum, and
# solitons 7-8 merge into a short pair.  Zone radii use the default
# constant 6.
EIGHT_SOLITON_PARAMS = tuple(
    oracles.SolitonParams(eta=eta, xi=xi, theta=theta, delta=2.0 * eta * c)
    for eta, c, xi, theta in [
        (1.0, -11.0, 0.30, 0.0),
        (1.2, -8.0, -0.40, 0.7),
        (0.9, -5.0, 0.20, -0.4),
        (1.3, -2.0, -0.30, 1.1),
        (1.0, 1.0, 0.40, 0.3),
        (1.2, 4.0, -0.20, -0.8),
        (1.3, 14.0, 0.30, 0.5),
        (1.3, 18.0, -0.35, 1.4),
    ]
)

TWO_SOLITON_BASE = ((1.0, 0.5, 0.1), (1.75, -1.4, 0.8))  # (eta, xi, theta) pairs

_CHIRPED_DATA_POINTS = 8192
_CHIRPED_XI_SPAN = 20.0
_CHIRPED_XI_POINTS = 4097


@dataclass
class Scenario:
    name: str
    data_left: SpectralData | None
    data_right: SpectralData | None
    span: tuple[float, float]
    default_count: int
    default_method: Method
    oracle: "callable | None" = None  # grid array -> RecoveredSignal

    def grid_for(self, h: float | None = None, count: int | None = None) -> TimeGrid:
        t_min, t_max = self.span
        if h is None and count is None:
            count = self.default_count
        if count is None:
            tau = 0.5 * h
            fcount = (t_max - t_min) / tau
            count = int(round(fcount))
            if abs(fcount - count) > 1e-9 * fcount:
                raise ConfigError(
                    f"step h={h:g} does not divide the span [{t_min:g}, {t_max:g}]")
        return TimeGrid(t_min, (t_max - t_min) / count, count)


@dataclass
class ScenarioRun:
    scenario: Scenario
    grid: TimeGrid
    plan: CutPlan
    recovered: RecoveredSignal
    oracle: RecoveredSignal | None


def _soliton_scenario(name, params, span, count, method):
    left = oracles.positioned_soliton_train(list(params), Side.LEFT)
    right = oracles.positioned_soliton_train(list(params), Side.RIGHT)

    def oracle(grid_array):
        if len(params) == 1:
            return oracles.exact_soliton(params[0], grid_array)
        return oracles.darboux_multisoliton(left.discrete, grid_array, Side.LEFT)

    return Scenario(name=name, data_left=left, data_right=right, span=span,
                    default_count=count, default_method=method, oracle=oracle)


@lru_cache(maxsize=8)
def _chirped_data(A: float, C: float, dispersion: oracles.Dispersion):
    span = 22.4
    t = np.linspace(-span, span, _CHIRPED_DATA_POINTS + 1)
    sig = oracles.chirped_sech(oracles.ChirpedSechParams(A, C), t)
    xi = np.linspace(-_CHIRPED_XI_SPAN, _CHIRPED_XI_SPAN, _CHIRPED_XI_POINTS)
    eta_cap = 1.1 * A + 0.3
    left = oracles.forward_scatter(sig, xi, dispersion, Side.LEFT,
                                   eta_search_max=eta_cap)
    right = oracles.forward_scatter(sig, xi, dispersion, Side.RIGHT,
                                    eta_search_max=eta_cap)
    return left, right


def build_scenario(name: str, **params) -> Scenario:
    """Construct a named scenario.

    single_soliton: eta, xi, theta, delta (defaults 1, 0.5, 0.8, 0).
    two_soliton: delta (8 by default) with the standard parameter pairs.
    eight_soliton: the frozen configuration above.
    chirped_sech: A, C, dispersion ("anomalous"/"normal").
    """
    if name == "single_soliton":
        p = oracles.SolitonParams(
            eta=params.pop("eta", 1.0), xi=params.pop("xi", 0.5),
            theta=params.pop("theta", 0.8), delta=params.pop("delta", 0.0))
        _reject_extra(name, params)
        return _soliton_scenario(name, [p], (-12.8, 12.8), 1024, Method.NO_CUTS)
    if name == "two_soliton":
        delta = float(params.pop("delta", 8.0))
        _reject_extra(name, params)
        pars = [
            oracles.SolitonParams(TWO_SOLITON_BASE[0][0], TWO_SOLITON_BASE[0][1],
                                  TWO_SOLITON_BASE[0][2], -delta),
            oracles.SolitonParams(TWO_SOLITON_BASE[1][0], TWO_SOLITON_BASE[1][1],
                                  TWO_SOLITON_BASE[1][2], delta),
        ]
        return _soliton_scenario(name, pars, (-25.6, 19.2), 2048, Method.WITH_CUTS)
    if name == "eight_soliton":
        _reject_extra(name, params)
        return _soliton_scenario(name, EIGHT_SOLITON_PARAMS, (-23.04, 23.04),
                                 4096, Method.EXTENDED)
    if name == "chirped_sech":
        A = float(params.pop("A", 5.2))
        C = float(params.pop("C", 4.0))
        disp = params.pop("dispersion", "anomalous")
        _reject_extra(name, params)
        dispersion = oracles.Dispersion(disp) if not isinstance(disp, oracles.Dispersion) else disp
        left, right = _chirped_data(A, C, dispersion)
        pp = oracles.ChirpedSechParams(A, C)

        def oracle(grid_array):
            return oracles.chirped_sech(pp, grid_array)

        return Scenario(name=f"chirped_sech_{dispersion.value}", data_left=left,
                        data_right=right, span=(-22.4, 22.4), default_count=2048,
                        default_method=Method.NO_CUTS, oracle=oracle)
    raise ConfigError(f"unknown scenario {name!r}")


def _reject_extra(name, params):
    if params:
        raise ConfigError(f"unknown parameters for {name}: {sorted(params)}")


def run_scenario(name: str, h: float | None = None, count: int | None = None,
                 method: Method | None = None,
                 zone_constant: float = cutter.DEFAULT_ZONE_CONSTANT,
                 **params) -> ScenarioRun:
    """Plan and execute one scenario end to end."""
    sc = build_scenario(name, **params)
    grid = sc.grid_for(h=h, count=count)
    m = grid.count
    p = m * 2.0 * grid.tau
    use_method = sc.default_method if method is None else method
    plan_data = sc.data_left if sc.data_left is not None else sc.data_right
    plan_obj = cutter.plan(plan_data, grid, p, m, use_method, zone_constant)
    if use_method is Method.LEFT_ONLY:
        recovered = cutter.recover(sc.data_left, plan_obj, p, m)
    elif use_method is Method.RIGHT_ONLY:
        recovered = cutter.recover(sc.data_right, plan_obj, p, m)
    else:
        recovered = cutter.recover_with_sides(sc.data_left, sc.data_right,
                                              plan_obj, p, m)
    oracle = sc.oracle(grid.array) if sc.oracle is not None else None
    return ScenarioRun(scenario=sc, grid=grid, plan=plan_obj,
                       recovered=recovered, oracle=oracle)
