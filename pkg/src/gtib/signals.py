"""Complex signals sampled on uniform time grids."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

NO_PROVENANCE = -1


@dataclass
class RecoveredSignal:
    """Complex samples q(t_j) on a uniform grid.

    provenance[j] identifies which recovery segment produced sample j;
    NO_PROVENANCE marks samples that did not come from a marched segment
    (reference signals, partially failed recoveries).
    """

    t: np.ndarray
    q: np.ndarray
    provenance: np.ndarray = field(default=None)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.q = np.asarray(self.q, dtype=complex)
        if self.t.shape != self.q.shape:
            raise ValueError("t and q must have identical shapes")
        if self.provenance is None:
            self.provenance = np.full(self.t.shape, NO_PROVENANCE, dtype=int)
        else:
            self.provenance = np.asarray(self.provenance, dtype=int)
        if self.t.size > 1:
            steps = np.diff(self.t)
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
                raise ValueError("time grid must be uniform")

    @property
    def tau(self) -> float:
        if self.t.size < 2:
            return 0.0
        return float(self.t[1] - self.t[0])

    def write_csv(self, path) -> None:
        """Write as the 3-column t, Re q, Im q format (17 significant digits)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "re_q", "im_q"])
            for tj, qj in zip(self.t, self.q):
                writer.writerow([f"{tj:.17g}", f"{qj.real:.17g}", f"{qj.imag:.17g}"])

    @classmethod
    def read_csv(cls, path) -> "RecoveredSignal":
        t, re, im = [], [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [c.strip() for c in header[:3]] != ["t", "re_q", "im_q"]:
                raise ValueError(f"unexpected signal CSV header: {header}")
            for row in reader:
                t.append(float(row[0]))
                re.append(float(row[1]))
                im.append(float(row[2]))
        return cls(np.array(t), np.array(re) + 1j * np.array(im))


def uniform_grid(t_min: float, t_max: float, count: int) -> np.ndarray:
    """Grid of `count` + 1 points covering [t_min, t_max]."""
    return t_min + (t_max - t_min) * np.arange(count + 1) / count


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of count+1 points: t_j = t_min + j tau, j = 0..count."""

    t_min: float
    tau: float
    count: int

    def __post_init__(self):
        if self.tau <= 0 or self.count < 1:
            raise ValueError("grid needs tau > 0 and at least one interval")

    @classmethod
    def from_array(cls, t: np.ndarray) -> "TimeGrid":
        t = np.asarray(t, dtype=float)
        if t.size < 2:
            raise ValueError("grid needs at least two points")
        steps = np.diff(t)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ValueError("grid must be uniform")
        return cls(float(t[0]), float(steps[0]), t.size - 1)

    @property
    def t_max(self) -> float:
        return self.t_min + self.tau * self.count

    @property
    def array(self) -> np.ndarray:
        return self.t_min + self.tau * np.arange(self.count + 1)

    def t_at(self, index: int) -> float:
        return self.t_min + self.tau * index

    def snap(self, t: float) -> int:
        """Nearest grid index, clamped to the grid."""
        return int(min(max(round((t - self.t_min) / self.tau), 0), self.count))
