"""Multi-zone recovery: stability zones, cut planning, and stitched execution.

A soliton of half-amplitude eta can be carried stably by the recursion only
within about zone_constant/eta of its center; beyond that its kernel term
grows exponentially and must be cut out of the active data.  The planner
splits the time grid into stability zones, chooses march start points and
directions, pre-plans the cuts from zone geometry (divergence flags remain
as a backstop), and the executor stitches the per-segment marches into one
signal.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import PlanningError, RecoveryError, SpectralDataError
from .glme import Direction, MarchState, assemble, march, start_march
from .signals import NO_PROVENANCE, RecoveredSignal, TimeGrid
from .spectral import (ContinuousSpectrum, DiscreteEigenvalue, Side,
                       SpectralData, convert_side, mirror_to_left,
                       restrict_solitons, synthesize_kernel)

DEFAULT_ZONE_CONSTANT = 6.0
# a start point needs the extended window when the isolated-soliton estimate
# there exceeds this fraction of the largest amplitude
EXTENSION_THRESHOLD = 1e-6


class Method(enum.Enum):
    NO_CUTS = "no_cuts"
    WITH_CUTS = "with_cuts"
    EXTENDED = "extended"
    LEFT_ONLY = "left_only"
    RIGHT_ONLY = "right_only"


@dataclass(frozen=True)
class StabilityZone:
    center: float
    radius: float
    active_solitons: frozenset

    def __post_init__(self):
        if self.radius <= 0 or not self.active_solitons:
            raise PlanningError("zone needs a positive radius and at least one soliton")

    @property
    def lo(self) -> float:
        return self.center - self.radius

    @property
    def hi(self) -> float:
        return self.center + self.radius


@dataclass(frozen=True)
class Segment:
    """One march job: grid indices, direction, active labels, ownership."""

    start_index: int
    end_index: int
    direction: Direction
    active_solitons: frozenset
    use_extended: bool
    own_lo: int
    own_hi: int  # inclusive; own_lo > own_hi marks an ownerless helper segment

    def steps(self) -> int:
        return abs(self.end_index - self.start_index)


@dataclass
class CutPlan:
    grid: TimeGrid
    zones: list[StabilityZone]
    segments: list[Segment]
    method: Method = Method.WITH_CUTS
    zone_constant: float = DEFAULT_ZONE_CONSTANT

    def segment_times(self, seg: Segment) -> tuple[float, float]:
        return self.grid.t_at(seg.start_index), self.grid.t_at(seg.end_index)

    def to_json_dict(self) -> dict:
        zones = [
            {"center": z.center, "radius": z.radius,
             "active_solitons": sorted(z.active_solitons)}
            for z in self.zones
        ]
        segments = []
        for seg in self.segments:
            t0, t1 = self.segment_times(seg)
            segments.append({
                "start_t": t0,
                "end_t": t1,
                "direction": seg.direction.value,
                "active_solitons": sorted(seg.active_solitons),
                "use_extended": seg.use_extended,
                "owned_range": [self.grid.t_at(seg.own_lo), self.grid.t_at(seg.own_hi)]
                               if seg.own_lo <= seg.own_hi else None,
            })
        return {
            "method": self.method.value,
            "zone_constant": self.zone_constant,
            "grid": {"t_min": self.grid.t_min, "tau": self.grid.tau,
                     "count": self.grid.count},
            "zones": zones,
            "segments": segments,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)


# ---------------------------------------------------------------------------
# cut semantics


def _restrict_compensated(src: SpectralData, active, compensate) -> SpectralData:
    """Cut solitons with pass-through compensation of the kept normings.

    Side-referenced norming constants encode each soliton's position as seen
    from that side's reference end, including the collision displacement
    picked up across every soliton in between.  Removing soliton k while
    recovering on the far side of it therefore requires multiplying every
    kept norming (and the continuous reflection) by the squared Blaschke
    factor ((z - zeta_k)/(z - conj(zeta_k)))^2, so that the reduced data
    describes the signal that matches the true one on the recovery region.
    `compensate` lists the cut labels that sit between the reference end and
    the region (for planner-built segments: all of them).
    """
    reduced = restrict_solitons(src, active)
    comp = [src.discrete[k - 1].zeta for k in compensate]
    if not comp:
        return reduced
    def factor(z):
        out = np.ones_like(np.asarray(z, dtype=complex))
        for zk in comp:
            out = out * ((z - zk) / (z - np.conj(zk))) ** 2
        return out
    discrete = [DiscreteEigenvalue(d.zeta, d.norming * complex(factor(d.zeta)))
                for d in reduced.discrete]
    cont = None
    if reduced.continuous is not None:
        c = reduced.continuous
        cont = ContinuousSpectrum(c.xi0, c.dxi, c.values * factor(c.xi_grid))
    return SpectralData(side=src.side, discrete=discrete, continuous=cont)


# ---------------------------------------------------------------------------
# center finding


def _isolated_magnitude(label_params, t):
    """Estimated |q| of one isolated soliton: 2 eta sech(2 eta (t - center))."""
    eta, center = label_params
    x = np.abs(2.0 * eta * (np.asarray(t) - center))
    e = np.exp(-x)
    return 2.0 * eta * 2.0 * e / (1.0 + e * e)


def _march_magnitude(data: SpectralData, grid: TimeGrid) -> np.ndarray:
    """|q| profile of (possibly reduced) data by one flag-tolerant left march."""
    engine = data if data.side is Side.LEFT else mirror_to_left(data)
    h = 2.0 * grid.tau
    t0 = grid.t_min if data.side is Side.LEFT else -grid.t_max
    m_fin = 1 + grid.count
    z_anchor = 2.0 * t0 - h
    kernel = synthesize_kernel(engine, z_anchor - (m_fin - 1) * h, h, 2 * m_fin + 2)
    system = assemble(kernel, t0, h, 1, engine.sign_mode)
    direction = (Direction.RIGHTWARD_LEFT_GLME if data.side is Side.LEFT
                 else Direction.LEFTWARD_RIGHT_GLME)
    _, state = start_march(system, direction, expected_steps=grid.count)
    result = march(state, kernel, grid.count)
    mag = np.zeros(grid.count + 1)
    for t, q in zip(result.t, result.q):
        mag[grid.snap(t)] = abs(q)
    return mag


def find_centers(data: SpectralData, t_grid) -> list[tuple[int, float]]:
    """Per-soliton center times, located by isolated sub-recovery peaks.

    Each discrete eigenvalue is recovered alone with a cheap march across
    the grid and its center taken as the argmax of |q|, accurate to the grid
    step tau.  A first rough pass fixes the left-to-right order, a second
    pass applies the pass-through compensation so the centers land on the
    peaks of the full signal.  Returns (1-based label, center) pairs sorted
    by center.
    """
    if not data.discrete:
        raise SpectralDataError("center finding needs discrete eigenvalues")
    grid = TimeGrid.from_array(np.asarray(t_grid)) if not isinstance(t_grid, TimeGrid) \
        else t_grid

    def isolate(label, rough):
        others = set(range(1, data.n_solitons + 1)) - {label}
        if rough is None:
            comp = set()
        elif data.side is Side.LEFT:
            comp = {k for k in others if rough[k] < rough[label]
                    or (rough[k] == rough[label] and k < label)}
        else:
            comp = {k for k in others if rough[k] > rough[label]
                    or (rough[k] == rough[label] and k > label)}
        alone = _restrict_compensated(data, {label}, comp)
        if alone.continuous is not None:
            alone = SpectralData(side=alone.side, discrete=list(alone.discrete))
        mag = _march_magnitude(alone, grid)
        return grid.t_at(int(np.argmax(mag)))

    rough = {label: isolate(label, None) for label in range(1, data.n_solitons + 1)}
    centers = [(label, isolate(label, rough)) for label in rough]
    centers.sort(key=lambda lc: lc[1])
    return centers


# ---------------------------------------------------------------------------
# planning


@dataclass
class _SolitonGeometry:
    label: int
    eta: float
    center: float
    radius: float

    @property
    def lo(self) -> float:
        return self.center - self.radius

    @property
    def hi(self) -> float:
        return self.center + self.radius


def _geometries(data, grid, zone_constant):
    centers = find_centers(data, grid)
    geos = []
    for label, center in centers:
        eta = data.discrete[label - 1].eta
        if not (grid.t_min <= center <= grid.t_max):
            raise PlanningError(f"soliton {label} center {center:g} lies outside the grid")
        geos.append(_SolitonGeometry(label, eta, center, zone_constant / eta))
    return geos


def _merge_groups(geos):
    """Transitive merge of overlapping zone intervals (geos sorted by center)."""
    groups = []
    for g in geos:
        if groups and g.lo <= max(m.hi for m in groups[-1]):
            groups[-1].append(g)
        else:
            groups.append([g])
    return groups


def _estimate(geos, t):
    if not geos:
        return np.zeros_like(np.asarray(t, dtype=float))
    total = np.zeros_like(np.asarray(t, dtype=float))
    for g in geos:
        total = np.maximum(total, _isolated_magnitude((g.eta, g.center), t))
    return total


def _argmin_between(grid, geos, t_lo, t_hi):
    """Cleanest grid point strictly between t_lo and t_hi."""
    i_lo, i_hi = grid.snap(t_lo), grid.snap(t_hi)
    if i_hi - i_lo < 2:
        return min(max(i_lo + 1, 0), grid.count)
    idx = np.arange(i_lo + 1, i_hi)
    est = _estimate(geos, grid.t_min + grid.tau * idx)
    return int(idx[np.argmin(est)])


def _needs_extension(geos, t, eta_max):
    return float(_estimate(geos, np.array([t]))[0]) > EXTENSION_THRESHOLD * 2.0 * eta_max


def _split_directed(grid, geos, start_idx, end_idx, direction, method, eta_max,
                    own_lo, own_hi):
    """Split one directed march into cut sub-segments with ownership."""
    rightward = direction is Direction.RIGHTWARD_LEFT_GLME
    if rightward:
        assert start_idx <= end_idx
        crossings = sorted({grid.snap(g.hi) for g in geos
                            if start_idx < grid.snap(g.hi) < end_idx})
        bounds = [start_idx] + crossings + [end_idx]
    else:
        assert start_idx >= end_idx
        crossings = sorted({grid.snap(g.lo) for g in geos
                            if end_idx < grid.snap(g.lo) < start_idx}, reverse=True)
        bounds = [start_idx] + crossings + [end_idx]

    segments = []
    for k in range(len(bounds) - 1):
        s, e = bounds[k], bounds[k + 1]
        if rightward:
            active = frozenset(g.label for g in geos if grid.snap(g.hi) >= e)
            lo = max(s, own_lo)
            hi = min(e - 1, own_hi) if k < len(bounds) - 2 else min(e, own_hi)
        else:
            active = frozenset(g.label for g in geos if grid.snap(g.lo) <= e)
            hi = min(s, own_hi)
            lo = max(e + 1, own_lo) if k < len(bounds) - 2 else max(e, own_lo)
        use_ext = (method is Method.EXTENDED
                   and _needs_extension(geos, grid.t_at(s), eta_max))
        segments.append(Segment(start_index=s, end_index=e, direction=direction,
                                active_solitons=active, use_extended=use_ext,
                                own_lo=lo, own_hi=hi))
    return segments


def plan(data: SpectralData, t_grid, P: float, M: int,
         method: Method = Method.WITH_CUTS,
         zone_constant: float = DEFAULT_ZONE_CONSTANT) -> CutPlan:
    """Build the zone/segment plan for recovering `data` on `t_grid`.

    Zones get radius zone_constant/eta and merge transitively when they
    overlap.  Between neighbouring groups the march starts at the cleanest
    interior point and heads toward each group; a group whose edge zones
    still overlap is recovered whole, otherwise it is worked soliton by
    soliton with pre-planned cuts at zone boundaries (EXTENDED method only;
    WITH_CUTS raises for such "long" groups... the paper-facing limitation).
    The window parameters (P, M) are carried for the executor's extended
    starts; h = P/M must equal twice the grid step.
    """
    grid = t_grid if isinstance(t_grid, TimeGrid) else TimeGrid.from_array(np.asarray(t_grid))
    h = P / M
    if abs(h - 2.0 * grid.tau) > 1e-9 * h:
        raise PlanningError(f"window step P/M = {h:g} must equal 2 tau = {2 * grid.tau:g}")

    if method in (Method.LEFT_ONLY, Method.RIGHT_ONLY):
        base = plan(data, grid, P, M, Method.EXTENDED, zone_constant) \
            if data.discrete else plan(data, grid, P, M, Method.NO_CUTS, zone_constant)
        side = Side.LEFT if method is Method.LEFT_ONLY else Side.RIGHT
        return _single_direction_plan(data, base, side)

    geos = _geometries(data, grid, zone_constant) if data.discrete else []
    zones = [StabilityZone(g.center, g.radius, frozenset([g.label])) for g in geos]
    eta_max = max((g.eta for g in geos), default=1.0)

    if method is Method.NO_CUTS or not geos:
        if geos:
            c_lo = min(g.center for g in geos)
            c_hi = max(g.center for g in geos)
            stitch = _argmin_between(grid, geos, c_lo, c_hi) \
                if c_hi > c_lo else grid.snap(c_lo)
        else:
            stitch = grid.count // 2
        all_labels = frozenset(g.label for g in geos)
        segments = []
        if stitch > 0:
            segments.append(Segment(0, stitch, Direction.RIGHTWARD_LEFT_GLME,
                                    all_labels, False, 0, stitch))
        segments.append(Segment(grid.count, stitch, Direction.LEFTWARD_RIGHT_GLME,
                                all_labels, False, stitch + 1 if stitch > 0 else 0,
                                grid.count))
        plan_out = CutPlan(grid=grid, zones=zones, segments=segments,
                           method=method, zone_constant=zone_constant)
        _check_tiling(plan_out)
        return plan_out

    groups = _merge_groups(geos)

    # targets: one stitch per whole-recoverable group, or the member centers
    # of a long group; starts: grid edges and cleanest inter-target points
    targets: list[int] = []
    for members in groups:
        t_reach_right = max(g.lo for g in members)   # leftward marches reach here
        t_reach_left = min(g.hi for g in members)    # rightward marches reach here
        if t_reach_right <= t_reach_left:
            targets.append(grid.snap(0.5 * (t_reach_right + t_reach_left)))
        else:
            # long group: work it soliton by soliton with cuts at the zone
            # boundaries; hopeless when member centers cannot be told apart
            for a, b in zip(members, members[1:]):
                if abs(b.center - a.center) < 2.0 * grid.tau \
                        and method is not Method.EXTENDED:
                    raise PlanningError(
                        f"solitons {a.label} and {b.label} in a long group have "
                        f"indistinguishable centers; the potential cannot be "
                        f"recovered without the extended method")
            targets.extend(grid.snap(g.center) for g in members)
    targets = sorted(set(targets))

    starts = [0]
    flat = sorted(geos, key=lambda g: g.center)
    for k in range(len(targets) - 1):
        lo_t, hi_t = grid.t_at(targets[k]), grid.t_at(targets[k + 1])
        m_idx = _argmin_between(grid, geos, lo_t, hi_t)
        starts.append(int(min(max(m_idx, targets[k] + 1), targets[k + 1] - 1)))
    starts.append(grid.count)

    segments: list[Segment] = []
    for k, tgt in enumerate(targets):
        s_left, s_right = starts[k], starts[k + 1]
        segments.extend(_split_directed(grid, flat, s_left, tgt,
                                        Direction.RIGHTWARD_LEFT_GLME, method,
                                        eta_max, own_lo=s_left, own_hi=tgt))
        own_hi = s_right - 1 if k + 1 < len(targets) else grid.count
        segments.extend(_split_directed(grid, flat, s_right, tgt,
                                        Direction.LEFTWARD_RIGHT_GLME, method,
                                        eta_max, own_lo=tgt + 1, own_hi=own_hi))

    plan_out = CutPlan(grid=grid, zones=zones, segments=segments,
                       method=method, zone_constant=zone_constant)
    _check_tiling(plan_out)
    return plan_out


def _single_direction_plan(data, base: CutPlan, side: Side) -> CutPlan:
    grid = base.grid
    geos = [_SolitonGeometry(next(iter(z.active_solitons)),
                             base.zone_constant / z.radius, z.center, z.radius)
            for z in base.zones]
    eta_max = max((g.eta for g in geos), default=1.0)
    if side is Side.LEFT:
        segments = _split_directed(grid, geos, 0, grid.count,
                                   Direction.RIGHTWARD_LEFT_GLME, Method.EXTENDED,
                                   eta_max, 0, grid.count)
        m = Method.LEFT_ONLY
    else:
        segments = _split_directed(grid, geos, grid.count, 0,
                                   Direction.LEFTWARD_RIGHT_GLME, Method.EXTENDED,
                                   eta_max, 0, grid.count)
        m = Method.RIGHT_ONLY
    out = CutPlan(grid=grid, zones=base.zones, segments=segments, method=m,
                  zone_constant=base.zone_constant)
    _check_tiling(out)
    return out


def _check_tiling(plan_out: CutPlan) -> None:
    """Every grid sample owned exactly once."""
    seen = np.zeros(plan_out.grid.count + 1, dtype=int)
    for seg in plan_out.segments:
        if seg.own_lo <= seg.own_hi:
            seen[seg.own_lo: seg.own_hi + 1] += 1
    if not np.all(seen == 1):
        bad = np.where(seen != 1)[0]
        raise PlanningError(
            f"segment ownership does not tile the grid (first bad index {bad[0]}, "
            f"coverage {seen[bad[0]]})")


# ---------------------------------------------------------------------------
# execution


def _engine_inputs(data_by_side, seg: Segment, grid: TimeGrid):
    """Restricted, mirrored-to-engine-form data for one segment."""
    if seg.direction is Direction.RIGHTWARD_LEFT_GLME:
        src = data_by_side[Side.LEFT]
    else:
        src = data_by_side[Side.RIGHT]
    if src is None:
        raise PlanningError(f"no {seg.direction.value} data available")
    if src.discrete:
        all_labels = frozenset(range(1, src.n_solitons + 1))
        active = seg.active_solitons & all_labels
        # planner geometry guarantees every cut soliton lies between the
        # data's reference end and the recovery region: compensate them all
        reduced = _restrict_compensated(src, active, all_labels - active)
    else:
        reduced = src
    engine = reduced if src.side is Side.LEFT else mirror_to_left(reduced)
    t_user = grid.t_at(seg.start_index)
    t_engine = t_user if src.side is Side.LEFT else -t_user
    return engine, t_engine


def _run_segment(data_by_side, plan_in: CutPlan, seg: Segment, seg_id: int,
                 extra: int, permissive: bool):
    grid = plan_in.grid
    src = data_by_side[Side.LEFT if seg.direction is Direction.RIGHTWARD_LEFT_GLME
                       else Side.RIGHT]
    if src is not None and src.discrete and not seg.active_solitons \
            and src.continuous is None:
        # everything cut and nothing continuous: the active signal is zero
        sign = 1 if seg.direction is Direction.RIGHTWARD_LEFT_GLME else -1
        t = grid.t_at(seg.start_index) + sign * grid.tau * np.arange(seg.steps() + 1)
        from .glme import MarchResult
        return MarchResult(t=t, q=np.zeros(t.size, dtype=complex),
                           steps_taken=seg.steps())
    engine, t_engine = _engine_inputs(data_by_side, seg, grid)
    h = 2.0 * grid.tau
    steps = seg.steps()
    m0 = 1 + (extra if seg.use_extended else 0)
    m_fin = m0 + steps
    z_anchor = 2.0 * t_engine - m0 * h
    kernel = synthesize_kernel(engine, z_anchor - (m_fin - 1) * h, h,
                               2 * m_fin + 2)
    system = assemble(kernel, t_engine, m0 * h, m0, engine.sign_mode,
                      allow_flagged=permissive)
    residual_tol = np.inf if permissive else None
    kwargs = {} if residual_tol is None else {"residual_tol": residual_tol}
    state: MarchState
    _, state = start_march(system, seg.direction, expected_steps=steps,
                           allow_flagged=permissive, **kwargs)
    if permissive:
        state.pivot_factor = 0.0
    result = march(state, kernel, steps)
    if result.steps_taken < steps and not permissive:
        raise RecoveryError(
            f"segment {seg_id} stopped after {result.steps_taken} of {steps} "
            f"steps ({result.stop_reason.value if result.stop_reason else 'unknown'})",
            segment_index=seg_id, step_index=result.stop_step)
    return result


def _execute(data_by_side, plan_in: CutPlan, M: int, extra: int | None):
    grid = plan_in.grid
    q = np.full(grid.count + 1, np.nan, dtype=complex)
    provenance = np.full(grid.count + 1, NO_PROVENANCE, dtype=int)
    extra_steps = M if extra is None else extra
    permissive = plan_in.method is Method.NO_CUTS
    failure = None
    for seg_id, seg in enumerate(plan_in.segments):
        if seg.own_lo > seg.own_hi and seg.steps() == 0:
            continue
        try:
            result = _run_segment(data_by_side, plan_in, seg, seg_id,
                                  extra_steps, permissive)
        except RecoveryError as exc:
            failure = exc
            break
        sign = 1 if seg.direction is Direction.RIGHTWARD_LEFT_GLME else -1
        for j, qj in enumerate(result.q):
            idx = seg.start_index + sign * j
            if seg.own_lo <= idx <= seg.own_hi:
                q[idx] = qj
                provenance[idx] = seg_id
    signal = RecoveredSignal(t=grid.array, q=q, provenance=provenance)
    if failure is not None:
        failure.partial = signal
        raise failure
    return signal


def recover(data: SpectralData, plan_in: CutPlan, P: float, M: int,
            extra: int | None = None) -> RecoveredSignal:
    """Execute a plan: per segment restrict, synthesize, assemble, march, stitch.

    Rightward segments consume left-side data, leftward segments right-side
    data; the side the caller did not supply is derived by convert_side.
    `extra` sets the window enlargement of extended starts (default M).
    Failures propagate as RecoveryError with the partial signal attached.
    """
    needs = {seg.direction for seg in plan_in.segments}
    data_by_side = {Side.LEFT: None, Side.RIGHT: None}
    data_by_side[data.side] = data
    if Direction.RIGHTWARD_LEFT_GLME in needs and data_by_side[Side.LEFT] is None:
        data_by_side[Side.LEFT] = convert_side(data, Side.LEFT)
    if Direction.LEFTWARD_RIGHT_GLME in needs and data_by_side[Side.RIGHT] is None:
        data_by_side[Side.RIGHT] = convert_side(data, Side.RIGHT)
    return _execute(data_by_side, plan_in, M, extra)


def recover_with_sides(left_data: SpectralData | None,
                       right_data: SpectralData | None,
                       plan_in: CutPlan, P: float, M: int,
                       extra: int | None = None) -> RecoveredSignal:
    """recover() with both sides' data supplied explicitly (no conversion)."""
    data_by_side = {Side.LEFT: left_data, Side.RIGHT: right_data}
    return _execute(data_by_side, plan_in, M, extra)


def recover_single_direction(data: SpectralData, plan_in: CutPlan, P: float,
                             M: int, side: Side,
                             extra: int | None = None) -> RecoveredSignal:
    """Recover using only one equation side, cut to cut across the grid."""
    if not plan_in.segments and not plan_in.zones:
        return RecoveredSignal(t=np.zeros(0), q=np.zeros(0, dtype=complex))
    one_sided = _single_direction_plan(data, plan_in, side)
    return recover(data, one_sided, P, M, extra)
