"""Discretized coupled integral equations as block-Toeplitz systems.

At recovery point t with window length P = M h the unknowns X1(kh), Y2(kh),
k = 1..M satisfy

    X1 + s h T* Y2 = 0,      h T X1 + Y2 = F,

with T_ij = K(2t - P + (i-j) h), F_m = K(2t - P + m h), T* the conjugate
transpose and s = -1 when a discrete spectrum is present (+1 otherwise).
The signal value is q(t) = 2 s Y2(Mh).

Moving the recovery point by h/2 while letting the window grow by h keeps
every kernel argument fixed, so the block system at the new point extends
the old one by a single bordered row/column; a march across an interval is
one continued recursion.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import _levinson
from .errors import CutRequiredError, InstabilityError, KernelRangeError
from .spectral import KernelTable, SignMode

# recursion aborts when a 2x2 pivot's smallest singular value drops below
# PIVOT_FACTOR * eps * max(1, h * running generator max)
PIVOT_FACTOR = 1e3
# march-time instability monitor on the normalized first-row residual
DEFAULT_RESIDUAL_TOL = 1e-4


class Direction(enum.Enum):
    RIGHTWARD_LEFT_GLME = "rightward_left_glme"
    LEFTWARD_RIGHT_GLME = "leftward_right_glme"


class StopReason(enum.Enum):
    CUT_BOUNDARY = "cut_boundary"
    PIVOT = "pivot"
    RESIDUAL = "residual"


@dataclass
class GlmeSystem:
    """The M-dimensional discretized system at a fixed recovery point."""

    kernel: KernelTable
    t: float
    P: float
    M: int
    h: float
    sign: SignMode
    base_off: int  # table index of K(2t - P)

    @property
    def toeplitz_gen(self) -> np.ndarray:
        """Generator sequence K(2t - P + k h), k = -(M-1)..(M-1)."""
        return self.kernel.values[self.base_off - (self.M - 1): self.base_off + self.M]

    @property
    def rhs(self) -> np.ndarray:
        """F_m = K(2t - P + m h), m = 1..M."""
        return self.kernel.values[self.base_off + 1: self.base_off + self.M + 1]


@dataclass
class GlmeSolution:
    x1: np.ndarray
    y2: np.ndarray
    q_at_t: complex


@dataclass
class MarchState:
    """Levinson factors and bookkeeping for an in-progress march."""

    direction: Direction
    sign: SignMode
    h: float
    t_start: float      # engine-time recovery point of the initial solve
    M0: int
    base_off: int
    base_z: float
    step_count: int = 0
    n: int = 0          # current block size
    gmax: float = 0.0
    allow_flagged: bool = False
    residual_tol: float = DEFAULT_RESIDUAL_TOL
    pivot_factor: float = PIVOT_FACTOR
    stop_reason: StopReason | None = None
    fw: np.ndarray = field(default=None, repr=False)
    bw: np.ndarray = field(default=None, repr=False)
    u: np.ndarray = field(default=None, repr=False)
    q_buf: np.ndarray = field(default=None, repr=False)
    rho_buf: np.ndarray = field(default=None, repr=False)

    @property
    def sigma(self) -> float:
        return self.sign.sigma

    def engine_t(self, n: int) -> float:
        """Engine-time recovery point of block size n."""
        return self.t_start + (n - self.M0) * 0.5 * self.h

    def user_t(self, n: int) -> float:
        te = self.engine_t(n)
        return te if self.direction is Direction.RIGHTWARD_LEFT_GLME else -te

    def user_q(self, q: complex) -> complex:
        return q if self.direction is Direction.RIGHTWARD_LEFT_GLME else -q

    def _ensure_capacity(self, cap: int) -> None:
        if self.fw is not None and self.fw.shape[0] >= cap:
            return
        new_cap = max(cap, 2 * (self.fw.shape[0] if self.fw is not None else 64))
        for name, shape in (("fw", (new_cap, 2, 2)), ("bw", (new_cap, 2, 2)),
                            ("u", (new_cap, 2))):
            arr = np.zeros(shape, dtype=complex)
            old = getattr(self, name)
            if old is not None:
                arr[: old.shape[0]] = old
            setattr(self, name, arr)
        for name in ("q_buf", "rho_buf"):
            arr = np.zeros(new_cap + 1, dtype=complex if name == "q_buf" else float)
            old = getattr(self, name)
            if old is not None:
                arr[: old.shape[0]] = old
            setattr(self, name, arr)


@dataclass
class MarchResult:
    """Samples emitted by march(); t[0], q[0] is the state's current point."""

    t: np.ndarray
    q: np.ndarray
    steps_taken: int
    stop_reason: StopReason | None = None
    stop_step: int | None = None


def assemble(kernel: KernelTable, t: float, P: float, M: int, sign: SignMode,
             allow_flagged: bool = False) -> GlmeSystem:
    """Build the system at recovery point t by exact kernel-table lookup.

    Requires the table to cover K(2t - P + k h) for k = -(M-1)..M on its
    exact grid.  Divergence-flagged entries in that range raise
    CutRequiredError (the caller must re-plan with a cut) unless
    allow_flagged is set, in which case only unrepresentable entries block.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    h = P / M
    if abs(h - kernel.dz) > 1e-12 * max(1.0, kernel.dz):
        raise KernelRangeError(f"window step {h} does not match kernel grid step {kernel.dz}")
    base_off = kernel.index_of(2.0 * t - P)
    lo, hi = base_off - (M - 1), base_off + M
    if not kernel.covers(lo, hi):
        raise KernelRangeError(
            f"kernel table covers indices 0..{kernel.n - 1}, system needs {lo}..{hi}")
    bad = kernel.hard if allow_flagged else kernel.flags
    if bad[lo: hi + 1].any():
        k = lo + int(np.argmax(bad[lo: hi + 1]))
        raise CutRequiredError(
            f"divergent kernel entry at z={kernel.z0 + k * kernel.dz:g} inside the system range")
    return GlmeSystem(kernel=kernel, t=t, P=P, M=M, h=h, sign=sign, base_off=base_off)


def extend_start(system: GlmeSystem, extra: int) -> GlmeSystem:
    """Same recovery point with the integration window enlarged by `extra` steps."""
    if extra < 0:
        raise ValueError("extra must be nonnegative")
    if extra == 0:
        return system
    return assemble(system.kernel, system.t, system.P + extra * system.h,
                    system.M + extra, system.sign)


def _run_recursion(system: GlmeSystem, capacity: int, residual_tol: float,
                   allow_flagged: bool):
    state = MarchState(
        direction=Direction.RIGHTWARD_LEFT_GLME,
        sign=system.sign,
        h=system.h,
        t_start=system.t,
        M0=system.M,
        base_off=system.base_off,
        base_z=system.kernel.z0 + system.base_off * system.kernel.dz,
        allow_flagged=allow_flagged,
        residual_tol=residual_tol,
    )
    state._ensure_capacity(capacity)
    status, n, gmax = _levinson.advance(
        system.kernel.values, system.base_off, system.h, state.sigma,
        0, system.M, state.fw, state.bw, state.u, state.q_buf, state.rho_buf,
        0.0, state.pivot_factor, residual_tol)
    state.gmax = gmax
    state.n = n
    if status == _levinson.STATUS_PIVOT:
        raise InstabilityError(
            f"near-singular pivot at recursion step {n + 1} of {system.M}",
            step_index=n + 1)
    if status == _levinson.STATUS_RESIDUAL:
        raise InstabilityError(
            f"residual monitor tripped at recursion step {n + 1} of {system.M}",
            step_index=n + 1)
    return state


def solve(system: GlmeSystem) -> GlmeSolution:
    """Solve the system by running the bordering recursion from size 1 to M.

    O(M^2) arithmetic, O(M) memory beyond inputs.  There is no dense solve
    anywhere on this path.
    """
    state = _run_recursion(system, system.M, residual_tol=np.inf,
                           allow_flagged=True)
    u = state.u[: system.M]
    return GlmeSolution(x1=u[:, 0].copy(), y2=u[:, 1].copy(),
                        q_at_t=complex(2.0 * state.sigma * u[system.M - 1, 1]))


def start_march(system: GlmeSystem, direction: Direction = Direction.RIGHTWARD_LEFT_GLME,
                expected_steps: int = 0, allow_flagged: bool = False,
                residual_tol: float = DEFAULT_RESIDUAL_TOL) -> tuple[GlmeSolution, MarchState]:
    """Solve the start system and keep the recursion state for marching.

    For LEFTWARD_RIGHT_GLME the caller must supply the mirrored (engine-form)
    kernel table and the engine recovery point -t_user; emitted samples are
    mapped back to user time automatically.
    """
    state = _run_recursion(system, system.M + expected_steps,
                           residual_tol=residual_tol, allow_flagged=allow_flagged)
    state.direction = direction
    state.allow_flagged = allow_flagged
    sol = GlmeSolution(x1=state.u[: system.M, 0].copy(),
                       y2=state.u[: system.M, 1].copy(),
                       q_at_t=complex(2.0 * state.sigma * state.u[system.M - 1, 1]))
    return sol, state


def march(state: MarchState, kernel: KernelTable, steps: int) -> MarchResult:
    """Advance the recovery point by `steps` half-steps of size h/2.

    Each advance grows the window by h, reusing every previously consumed
    generator entry and costing O(current size).  Marching stops early when
    the next step would consume a divergence-flagged kernel entry
    (stop_reason CUT_BOUNDARY) or when the recursion loses validity
    (PIVOT / RESIDUAL).  The returned samples always start with the state's
    current point.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    off = kernel.index_of(state.base_z)
    if off != state.base_off:
        state.base_off = off

    n0 = state.n
    bad = kernel.hard if state.allow_flagged else kernel.flags

    # longest clean run: step to size n+1 consumes table entries off-n, off+n+1
    clean = steps
    hit_flag = False
    for s in range(1, steps + 1):
        n = n0 + s - 1
        lo_idx, hi_idx = off - n, off + n + 1
        if lo_idx < 0 or hi_idx >= kernel.n:
            raise KernelRangeError(
                f"kernel table too short to march {steps} steps from size {n0}")
        if bad[lo_idx] or bad[hi_idx]:
            clean = s - 1
            hit_flag = True
            break

    state._ensure_capacity(n0 + clean)
    stop_reason = None
    stop_step = None
    if clean > 0:
        status, n_reached, gmax = _levinson.advance(
            kernel.values, off, state.h, state.sigma, n0, n0 + clean,
            state.fw, state.bw, state.u, state.q_buf, state.rho_buf,
            state.gmax, state.pivot_factor, state.residual_tol)
        state.gmax = gmax
        state.n = n_reached
        if status == _levinson.STATUS_PIVOT:
            stop_reason = StopReason.PIVOT
            stop_step = n_reached + 1
        elif status == _levinson.STATUS_RESIDUAL:
            stop_reason = StopReason.RESIDUAL
            stop_step = n_reached + 1
    if stop_reason is None and hit_flag:
        stop_reason = StopReason.CUT_BOUNDARY
        stop_step = n0 + clean + 1

    state.stop_reason = stop_reason
    sizes = np.arange(n0, state.n + 1)
    t = np.array([state.user_t(int(n)) for n in sizes])
    q = state.q_buf[sizes - 1].copy()
    if state.direction is Direction.LEFTWARD_RIGHT_GLME:
        q = -q
    taken = state.n - n0
    state.step_count += taken
    return MarchResult(t=t, q=q, steps_taken=taken,
                       stop_reason=stop_reason, stop_step=stop_step)
