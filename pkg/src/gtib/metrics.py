"""Recovery error measurement and convergence-order studies.

Pointwise error is |q - q_exact| normalized by max|q_exact|; the summary
number is the root mean square of that profile over all grid points.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np


@dataclass
class ErrorReport:
    pointwise: np.ndarray
    rmse: float
    h: float
    label: str = ""

    def write_csv(self, path, t=None) -> None:
        """CSV of (t, epsilon); indices stand in for t when no grid is given."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "epsilon"])
            ts = np.arange(self.pointwise.size) if t is None else np.asarray(t)
            for tj, ej in zip(ts, self.pointwise):
                writer.writerow([f"{tj:.17g}", f"{ej:.17g}"])


def pointwise_error(q, q_exact) -> np.ndarray:
    """epsilon(t_j) = |q(t_j) - q_exact(t_j)| / max|q_exact|."""
    q = np.asarray(q, dtype=complex)
    q_exact = np.asarray(q_exact, dtype=complex)
    if q.shape != q_exact.shape:
        raise ValueError(f"grid mismatch: {q.shape} vs {q_exact.shape}")
    scale = float(np.max(np.abs(q_exact)))
    if scale == 0.0:
        raise ValueError("reference signal is identically zero")
    return np.abs(q - q_exact) / scale


def rmse(pointwise) -> float:
    """Root mean square of the pointwise error over all grid samples."""
    eps = np.asarray(pointwise, dtype=float)
    if eps.size == 0:
        raise ValueError("empty error profile")
    return float(np.sqrt(np.mean(eps ** 2)))


def error_report(q, q_exact, h: float, label: str = "") -> ErrorReport:
    eps = pointwise_error(q, q_exact)
    return ErrorReport(pointwise=eps, rmse=rmse(eps), h=h, label=label)


def fit_slope(h_list, rmse_list) -> float:
    """Least-squares slope of log RMSE against log h (all points, no rejection)."""
    lh = np.log(np.asarray(h_list, dtype=float))
    lr = np.log(np.asarray(rmse_list, dtype=float))
    slope, _ = np.polyfit(lh, lr, 1)
    return float(slope)


def convergence_sweep(scenario: str, h_list, **scenario_kwargs):
    """Run a named scenario across step sizes and fit the error-order slope.

    Returns (reports, slope); slope is None with fewer than three step sizes.
    Scenario names are those of gtib.scenarios.build_scenario.
    """
    from . import scenarios

    h_list = list(h_list)
    if any(b >= a for a, b in zip(h_list, h_list[1:])):
        raise ValueError("h_list must be strictly decreasing")
    reports = []
    for h in h_list:
        run = scenarios.run_scenario(scenario, h=h, **scenario_kwargs)
        if run.oracle is None:
            raise ValueError(f"scenario {scenario} has no exact reference")
        reports.append(error_report(run.recovered.q, run.oracle.q, h=h,
                                    label=f"{scenario} h={h:g}"))
    slope = fit_slope(h_list, [r.rmse for r in reports]) if len(h_list) >= 3 else None
    return reports, slope


def sweep_summary_json(path, scenario: str, reports, slope) -> None:
    doc = {
        "scenario": scenario,
        "points": [{"h": r.h, "rmse": r.rmse} for r in reports],
        "slope": slope,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
