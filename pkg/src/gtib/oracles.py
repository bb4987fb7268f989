"""Reference generators and independent solvers used for validation.

Everything here is deliberately independent of the bordering recursion:
closed-form signals, a Darboux construction for multi-soliton references,
transfer-matrix forward scattering, and a dense factorization solver.
"""

from __future__ import annotations

import cmath
import enum
from dataclasses import dataclass

import numpy as np

from . import _levinson
from .errors import GtibError, SpectralDataError
from .glme import GlmeSolution, GlmeSystem
from .signals import RecoveredSignal
from .spectral import ContinuousSpectrum, DiscreteEigenvalue, Side, SpectralData

try:
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

DENSE_SOLVE_MAX_M = 512
EDGE_DECAY_LIMIT = 1e-8


class Dispersion(enum.Enum):
    ANOMALOUS = "anomalous"
    NORMAL = "normal"

    @property
    def sigma_s(self) -> float:
        """Sign of the conjugate coupling in the scattering system."""
        return -1.0 if self is Dispersion.ANOMALOUS else 1.0


@dataclass(frozen=True)
class SolitonParams:
    """eta: half-amplitude, xi: half of negative frequency, theta: phase, delta: position."""

    eta: float
    xi: float = 0.0
    theta: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    @property
    def zeta(self) -> complex:
        return complex(self.xi, self.eta)

    @property
    def center(self) -> float:
        return self.delta / (2.0 * self.eta)


@dataclass(frozen=True)
class ChirpedSechParams:
    A: float
    C: float

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError("amplitude must be positive")


def _sech(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    e = np.exp(-ax)
    return 2.0 * e / (1.0 + e * e)


def exact_soliton(p: SolitonParams, grid: np.ndarray) -> RecoveredSignal:
    """q(t) = 2 eta sech(2 eta t - delta) exp(-i (2 xi t + theta))."""
    t = np.asarray(grid, dtype=float)
    q = 2.0 * p.eta * _sech(2.0 * p.eta * t - p.delta) * np.exp(-1j * (2.0 * p.xi * t + p.theta))
    return RecoveredSignal(t=t, q=q)


def soliton_spectral_data(p: SolitonParams, side: Side) -> SpectralData:
    """Exact one-soliton spectral data (eigenvalue + norming constant)."""
    return multi_soliton_spectral_data([p], side)


def multi_soliton_spectral_data(params: list[SolitonParams], side: Side) -> SpectralData:
    """Spectral data whose n-th norming constant equals the isolated-soliton value.

    Left: l_n = -2i eta e^{-delta} e^{-i theta}; right: r_n = 2i eta e^{delta} e^{i theta}.
    For well-separated solitons the corresponding signal consists of the
    individual pulses up to exponentially small interaction shifts.
    """
    discrete = []
    for p in params:
        if side is Side.LEFT:
            norming = -2j * p.eta * cmath.exp(-p.delta - 1j * p.theta)
        else:
            norming = 2j * p.eta * cmath.exp(p.delta + 1j * p.theta)
        discrete.append(DiscreteEigenvalue(zeta=p.zeta, norming=norming))
    return SpectralData(side=side, discrete=discrete)


def positioned_soliton_train(params: list[SolitonParams], side: Side) -> SpectralData:
    """Multi-soliton data whose n-th pulse peaks at delta_n / (2 eta_n).

    Side-referenced norming constants accumulate a collision displacement
    across every soliton between the reference end and the pulse; this
    constructor pre-compensates with the inverse squared Blaschke factors so
    the actual signal peaks land on the requested positions.
    """
    order = sorted(range(len(params)), key=lambda k: params[k].center)
    base = multi_soliton_spectral_data(params, side)
    discrete = list(base.discrete)
    for pos, n in enumerate(order):
        zn = params[n].zeta
        if side is Side.LEFT:
            between = order[:pos]
        else:
            between = order[pos + 1:]
        factor = 1.0 + 0j
        for k in between:
            zk = params[k].zeta
            factor *= ((zn - zk) / (zn - np.conj(zk))) ** -2
        d = discrete[n]
        discrete[n] = DiscreteEigenvalue(d.zeta, d.norming * factor)
    return SpectralData(side=side, discrete=discrete)


def chirped_sech(p: ChirpedSechParams, grid: np.ndarray) -> RecoveredSignal:
    """q(t) = A [sech(t)]^{1 + iC}."""
    t = np.asarray(grid, dtype=float)
    # log cosh t, stable for large |t|
    log_cosh = np.abs(t) + np.log1p(np.exp(-2.0 * np.abs(t))) - np.log(2.0)
    q = p.A * _sech(t) * np.exp(-1j * p.C * log_cosh)
    return RecoveredSignal(t=t, q=q)


# ---------------------------------------------------------------------------
# Darboux construction


def _blaschke_derivative(zetas: np.ndarray, j: int) -> complex:
    """d/dzeta of prod_k (zeta - zeta_k)/(zeta - conj(zeta_k)) at its j-th zero."""
    zj = zetas[j]
    val = 1.0 / (zj - np.conj(zj))
    for k, zk in enumerate(zetas):
        if k != j:
            val *= (zj - zk) / (zj - np.conj(zk))
    return complex(val)


def darboux_multisoliton(eigenvalues: list[DiscreteEigenvalue], grid: np.ndarray,
                         side: Side = Side.LEFT) -> RecoveredSignal:
    """Reflectionless multi-soliton signal matching the given discrete data.

    Built by iterated single-step dressing transformations seeded from the
    zero signal, eigenvalues added in order of increasing imaginary part.
    The norming constants are interpreted per `side` (left by default).
    """
    t = np.asarray(grid, dtype=float)
    zetas = np.array([d.zeta for d in eigenvalues])
    if zetas.size == 0:
        return RecoveredSignal(t=t, q=np.zeros_like(t, dtype=complex))
    for a in range(zetas.size):
        for b in range(a + 1, zetas.size):
            if abs(zetas[a] - zetas[b]) < 1e-12 * max(1.0, abs(zetas[a])):
                raise GtibError(f"coincident eigenvalues {zetas[a]} and {zetas[b]}")

    # scattering coefficient b_n in the transfer-matrix convention; the
    # dressing chain preserves b at every other eigenvalue, so each seed
    # ratio is just -b_n regardless of insertion order
    b_coeffs = np.empty(zetas.size, dtype=complex)
    for j, d in enumerate(eigenvalues):
        ap = _blaschke_derivative(zetas, j)
        if side is Side.LEFT:
            b_coeffs[j] = 1.0 / (d.norming * ap)
        else:
            b_coeffs[j] = -d.norming * ap

    order = np.argsort(zetas.imag, kind="stable")
    q = np.zeros(t.size, dtype=complex)
    dressings: list[tuple[complex, np.ndarray]] = []  # (zeta_k, projector v of unit norm)
    for j in order:
        zeta = complex(zetas[j])
        eta = zeta.imag
        gamma = -b_coeffs[j]
        # normalized (e^{-i zeta t}, gamma e^{i zeta t}) without overflow
        e1 = -1j * zeta * t
        e2 = cmath.log(gamma) + 1j * zeta * t
        m = np.maximum(e1.real, e2.real)
        v1 = np.exp(e1 - m)
        v2 = np.exp(e2 - m)
        for zk, (s11, s12, s21, s22) in dressings:
            w1 = (zeta - s11) * v1 - s12 * v2
            w2 = -s21 * v1 + (zeta - s22) * v2
            nrm = np.sqrt(np.abs(w1) ** 2 + np.abs(w2) ** 2)
            v1, v2 = w1 / nrm, w2 / nrm
        nrm = np.sqrt(np.abs(v1) ** 2 + np.abs(v2) ** 2)
        v1 /= nrm
        v2 /= nrm
        q = q + 4.0 * eta * v1 * np.conj(v2)
        two_ieta = 2j * eta
        s11 = np.conj(zeta) + two_ieta * np.abs(v1) ** 2
        s12 = two_ieta * v1 * np.conj(v2)
        s21 = two_ieta * v2 * np.conj(v1)
        s22 = np.conj(zeta) + two_ieta * np.abs(v2) ** 2
        dressings.append((zeta, (s11, s12, s21, s22)))
    return RecoveredSignal(t=t, q=q)


# ---------------------------------------------------------------------------
# Forward scattering


@njit(cache=True)
def _transfer_chain(q, t0, tau, zetas, sigma_s):
    """Scaled Jost propagation: returns (a, b) per zeta.

    w1 = phi_1 e^{i zeta t}, w2 = phi_2 e^{-i zeta t}; each grid cell uses its
    exact constant-coefficient propagator (second order in tau overall).
    """
    nz = zetas.size
    a_out = np.empty(nz, dtype=np.complex128)
    b_out = np.empty(nz, dtype=np.complex128)
    n = q.size
    for iz in range(nz):
        zeta = zetas[iz]
        w1 = 1.0 + 0j
        w2 = 0.0 + 0j
        for k in range(n):
            qk = q[k]
            tk = t0 + k * tau
            aq = qk.real * qk.real + qk.imag * qk.imag
            lam2 = sigma_s * aq - zeta * zeta
            lam = np.sqrt(lam2)
            w = lam * tau
            ew = np.exp(w)
            emw = 1.0 / ew
            ch = 0.5 * (ew + emw)
            sh = 0.5 * (ew - emw)
            if abs(w) < 1e-8:
                s_over = tau * (1.0 + w * w / 6.0)
            else:
                s_over = tau * sh / w
            m11 = ch - 1j * zeta * s_over
            m22 = ch + 1j * zeta * s_over
            m12 = qk * s_over
            m21 = sigma_s * np.conj(qk) * s_over
            # carrier-scaled propagator: diagonal picks up e^{+-i zeta tau},
            # couplings the cell-center phase e^{+-2i zeta t_k}
            ph = np.exp(2j * zeta * tk)
            ee = np.exp(1j * zeta * tau)
            u1 = ee * m11 * w1 + ph * m12 * w2
            u2 = (m21 / ph) * w1 + m22 * w2 / ee
            w1 = u1
            w2 = u2
        a_out[iz] = w1
        b_out[iz] = w2
    return a_out, b_out


@njit(cache=True)
def _jost_trajectories(q, t0, tau, zeta, sigma_s):
    """Left-launched phi and right-launched psi in carrier-scaled variables.

    Returns (w, y) of shape (n+1, 2): w[k] is the scaled phi just after cell
    k-1, y[k] the scaled psi just before cell k; both on cell boundaries so
    w[k] = b * y[k] holds at a bound state for every k.
    """
    n = q.size
    w = np.empty((n + 1, 2), dtype=np.complex128)
    y = np.empty((n + 1, 2), dtype=np.complex128)
    w[0, 0] = 1.0
    w[0, 1] = 0.0
    y[n, 0] = 0.0
    y[n, 1] = 1.0
    for k in range(n):
        qk = q[k]
        tk = t0 + k * tau
        aq = qk.real * qk.real + qk.imag * qk.imag
        lam = np.sqrt(sigma_s * aq - zeta * zeta)
        wv = lam * tau
        ew = np.exp(wv)
        emw = 1.0 / ew
        ch = 0.5 * (ew + emw)
        sh = 0.5 * (ew - emw)
        if abs(wv) < 1e-8:
            s_over = tau * (1.0 + wv * wv / 6.0)
        else:
            s_over = tau * sh / wv
        m11 = ch - 1j * zeta * s_over
        m22 = ch + 1j * zeta * s_over
        m12 = qk * s_over
        m21 = sigma_s * np.conj(qk) * s_over
        ph = np.exp(2j * zeta * tk)
        ee = np.exp(1j * zeta * tau)
        w[k + 1, 0] = ee * m11 * w[k, 0] + ph * m12 * w[k, 1]
        w[k + 1, 1] = (m21 / ph) * w[k, 0] + m22 * w[k, 1] / ee
    for k in range(n - 1, -1, -1):
        qk = q[k]
        tk = t0 + k * tau
        aq = qk.real * qk.real + qk.imag * qk.imag
        lam = np.sqrt(sigma_s * aq - zeta * zeta)
        wv = lam * tau
        ew = np.exp(wv)
        emw = 1.0 / ew
        ch = 0.5 * (ew + emw)
        sh = 0.5 * (ew - emw)
        if abs(wv) < 1e-8:
            s_over = tau * (1.0 + wv * wv / 6.0)
        else:
            s_over = tau * sh / wv
        # inverse cell propagator: cosh(w) E - (sinh(w)/lam) A
        m11 = ch + 1j * zeta * s_over
        m22 = ch - 1j * zeta * s_over
        m12 = -qk * s_over
        m21 = -sigma_s * np.conj(qk) * s_over
        ph = np.exp(2j * zeta * tk)
        ee = np.exp(1j * zeta * tau)
        y[k, 0] = m11 * y[k + 1, 0] / ee + ph * m12 * y[k + 1, 1]
        y[k, 1] = (m21 / ph) * y[k + 1, 0] + ee * m22 * y[k + 1, 1]
    return w, y


def _match_b_once(q, t0, tau, zeta, sigma_s) -> complex:
    w, y = _jost_trajectories(q, t0, tau, zeta, sigma_s)
    # at a bound state w and y are proportional wherever both propagations
    # are clean; the normalized cross product exposes contaminated stretches
    c1 = w[:, 0] * y[:, 1]
    c2 = w[:, 1] * y[:, 0]
    mismatch = np.abs(c1 - c2) / (np.abs(c1) + np.abs(c2) + 1e-300)
    k = int(np.argmin(mismatch))
    denom = np.abs(y[k, 0]) ** 2 + np.abs(y[k, 1]) ** 2
    return complex((np.conj(y[k, 0]) * w[k, 0] + np.conj(y[k, 1]) * w[k, 1]) / denom)


def _match_b(signal: RecoveredSignal, zeta: complex, dispersion: Dispersion) -> complex:
    """Norming coefficient at a bound state by bidirectional matching.

    Launch phi from the left and psi from the right, join them where both
    propagations are best conditioned; Richardson-extrapolate over the step.
    """
    tau = signal.tau
    b1 = _match_b_once(signal.q, float(signal.t[0]), tau, zeta, dispersion.sigma_s)
    b2 = _match_b_once(signal.q[1::2], float(signal.t[1]), 2.0 * tau, zeta,
                       dispersion.sigma_s)
    return b1 + (b1 - b2) / 3.0


def _scattering_ab(signal: RecoveredSignal, zetas: np.ndarray, dispersion: Dispersion):
    """(a, b) per zeta, Richardson-extrapolated over the grid step.

    Coarse passes reuse every 2nd and 4th sample with widened cells; the
    three-level combination (32 A_1 - 12 A_2 + A_4)/21 cancels the quadratic
    and cubic error terms.  Half-cell span mismatches at the grid edges are
    below the decay precondition.
    """
    zetas = np.asarray(zetas, dtype=complex)
    tau = signal.tau
    a1, b1 = _transfer_chain(signal.q, float(signal.t[0]), tau, zetas,
                             dispersion.sigma_s)
    if signal.q.size < 8:
        return a1, b1
    a2, b2 = _transfer_chain(signal.q[1::2], float(signal.t[1]), 2.0 * tau,
                             zetas, dispersion.sigma_s)
    return a1 + (a1 - a2) / 3.0, b1 + (b1 - b2) / 3.0


def _winding(a_vals: np.ndarray) -> float:
    ang = np.angle(a_vals)
    d = np.diff(ang)
    d = (d + np.pi) % (2.0 * np.pi) - np.pi
    return float(d.sum() / (2.0 * np.pi))


def _count_zeros(signal, dispersion, corner_lo, corner_hi, samples=96, depth=0):
    """Argument-principle zero count of a(.) inside an axis-aligned rectangle."""
    x0, y0 = corner_lo.real, corner_lo.imag
    x1, y1 = corner_hi.real, corner_hi.imag
    edges = [
        np.linspace(complex(x0, y0), complex(x1, y0), samples),
        np.linspace(complex(x1, y0), complex(x1, y1), samples),
        np.linspace(complex(x1, y1), complex(x0, y1), samples),
        np.linspace(complex(x0, y1), complex(x0, y0), samples),
    ]
    contour = np.concatenate([e[:-1] for e in edges] + [edges[-1][-1:]])
    a_vals, _ = _scattering_ab(signal, contour, dispersion)
    if np.min(np.abs(a_vals)) < 1e-13:
        raise GtibError("scattering coefficient vanishes on the search contour")
    jumps = np.abs(np.diff(np.angle(a_vals)))
    jumps = np.minimum(jumps, 2.0 * np.pi - jumps)
    if jumps.max() > 1.5 and depth < 6:
        return _count_zeros(signal, dispersion, corner_lo, corner_hi,
                            samples=samples * 2, depth=depth + 1)
    w = _winding(a_vals)
    n = int(round(w))
    if abs(w - n) > 0.2:
        raise GtibError(f"non-integer winding {w:.3f} over search rectangle")
    return n


def _derivative_on_circle(signal, dispersion, center: complex, radius: float,
                          k: int = 24) -> complex:
    theta = 2.0 * np.pi * np.arange(k) / k
    pts = center + radius * np.exp(1j * theta)
    a_vals, _ = _scattering_ab(signal, pts, dispersion)
    return complex(np.sum(a_vals * np.exp(-1j * theta)) / (k * radius))


def _newton_root(signal, dispersion, start: complex, scale: float):
    zeta = start
    for _ in range(60):
        a_val, _ = _scattering_ab(signal, np.array([zeta]), dispersion)
        a_val = a_val[0]
        radius = max(1e-7, 1e-3 * scale)
        ap = _derivative_on_circle(signal, dispersion, zeta, radius)
        if ap == 0:
            break
        step = a_val / ap
        zeta = zeta - step
        if abs(step) < 1e-13 * (1.0 + abs(zeta)):
            return zeta
    raise GtibError(f"eigenvalue refinement did not converge; last iterate {zeta}")


def _find_eigenvalues(signal, dispersion, xi_bound, eta_min, eta_max):
    found = []
    stack = [(complex(-xi_bound, eta_min), complex(xi_bound, eta_max))]
    while stack:
        lo, hi = stack.pop()
        n = _count_zeros(signal, dispersion, lo, hi)
        if n == 0:
            continue
        width = hi.real - lo.real
        height = hi.imag - lo.imag
        if n == 1 and max(width, height) < 0.05:
            center = 0.5 * (lo + hi)
            root = _newton_root(signal, dispersion, center, max(width, height))
            found.append(root)
            continue
        # split the longer side; slightly irrational ratio dodges zeros
        # sitting exactly on a split line
        f = 0.5000918273
        if width >= height:
            xm = lo.real + f * width
            stack.append((lo, complex(xm, hi.imag)))
            stack.append((complex(xm, lo.imag), hi))
        else:
            ym = lo.imag + f * height
            stack.append((lo, complex(hi.real, ym)))
            stack.append((complex(lo.real, ym), hi))
    found.sort(key=lambda z: (round(z.imag, 9), z.real))
    dedup = []
    for z in found:
        if all(abs(z - w) > 1e-8 for w in dedup):
            dedup.append(z)
    return dedup


def forward_scatter(signal: RecoveredSignal, xi_grid: np.ndarray,
                    dispersion: Dispersion = Dispersion.ANOMALOUS,
                    side: Side = Side.LEFT,
                    xi_search_bound: float = 8.0,
                    eta_search_min: float = 0.02,
                    eta_search_max: float | None = None) -> SpectralData:
    """Compute one side's spectral data from a decaying signal.

    The continuous reflection coefficient is evaluated on xi_grid by
    transfer-matrix integration; for anomalous dispersion the discrete
    eigenvalues are located by argument-principle counting over a rectangle
    in the upper half-plane followed by Newton refinement, and norming
    constants follow from the residue relation.

    Args:
        signal: complex samples on a uniform grid; |q| must be below 1e-8 at
            both grid edges.
        xi_grid: uniform real grid for the continuous part.
        dispersion: ANOMALOUS (solitons possible) or NORMAL.
        side: which reflection convention to return.
        xi_search_bound, eta_search_min, eta_search_max: eigenvalue search
            rectangle; the default height scales with max|q|.
    """
    amax = float(np.max(np.abs(signal.q))) if signal.q.size else 0.0
    if signal.q.size < 4:
        raise SpectralDataError("signal too short to scatter")
    if max(abs(signal.q[0]), abs(signal.q[-1])) > EDGE_DECAY_LIMIT:
        raise SpectralDataError(
            f"signal does not decay at the grid edges "
            f"(|q| up to {max(abs(signal.q[0]), abs(signal.q[-1])):.2e})")

    xi_grid = np.asarray(xi_grid, dtype=float)
    if xi_grid.size < 2:
        raise SpectralDataError("xi grid needs at least two points")
    d = np.diff(xi_grid)
    if not np.allclose(d, d[0], rtol=1e-9, atol=1e-12) or d[0] <= 0:
        raise SpectralDataError("xi grid must be uniform and increasing")

    discrete = []
    if dispersion is Dispersion.ANOMALOUS and amax > 0:
        eta_hi = eta_search_max if eta_search_max is not None else 1.1 * amax + 0.2
        roots = _find_eigenvalues(signal, dispersion, xi_search_bound,
                                  eta_search_min, eta_hi)
        for zeta in roots:
            b_n = _match_b(signal, zeta, dispersion)
            ap = _derivative_on_circle(signal, dispersion, zeta, 1e-4)
            if side is Side.LEFT:
                norming = 1.0 / (b_n * ap)
            else:
                norming = -b_n / ap
            discrete.append(DiscreteEigenvalue(zeta=zeta, norming=norming))

    # the reflection's sign factor follows the sign branch the data will
    # select (discrete part present or not), keeping scattering and recovery
    # conventions consistent even for sub-threshold anomalous pulses
    a_vals, b_vals = _scattering_ab(signal, xi_grid.astype(complex), dispersion)
    kappa_l = -dispersion.sigma_s if discrete else dispersion.sigma_s
    if side is Side.LEFT:
        refl = kappa_l * np.conj(b_vals) / a_vals
    else:
        refl = -kappa_l * b_vals / a_vals
    continuous = ContinuousSpectrum(float(xi_grid[0]), float(d[0]), refl)

    return SpectralData(side=side, discrete=discrete, continuous=continuous)


# ---------------------------------------------------------------------------
# Dense oracle


def dense_solve(system: GlmeSystem) -> GlmeSolution:
    """Materialize the full block matrix and solve by dense factorization.

    Test oracle for the bordering recursion; refuses M beyond
    DENSE_SOLVE_MAX_M to keep memory bounded.
    """
    if system.M > DENSE_SOLVE_MAX_M:
        raise GtibError(f"dense solve limited to M <= {DENSE_SOLVE_MAX_M}")
    A, rhs = _levinson.materialize(system.kernel.values, system.base_off,
                                   system.h, system.sign.sigma, system.M)
    sol = np.linalg.solve(A, rhs)
    x1 = sol[: system.M]
    y2 = sol[system.M:]
    return GlmeSolution(x1=x1, y2=y2,
                        q_at_t=complex(2.0 * system.sign.sigma * y2[-1]))
