"""Spectral data containers and synthesis of the integral-equation kernels.

The recovery kernels are built from a reflection coefficient sampled on a
uniform frequency grid plus a set of discrete eigenvalue / norming-constant
pairs.  Left-side data feeds kernels of the form

    K_left(z)  = (1/2pi) int l(xi) e^{-i xi z} dxi  -  i sum_n l_n e^{-i zeta_n z}

and right-side data the mirror form with e^{+i xi z}, e^{+i zeta_n z}.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import KernelRangeError, SpectralDataError

# |K| above this is treated as divergent: such entries may never enter a
# linear system (the value is still representable far beyond this point).
DIVERGENCE_THRESHOLD = float(np.finfo(float).eps) ** -0.5

# exp() overflows double precision past ~709.8; entries beyond are stored NaN.
_HARD_EXPONENT = 700.0


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"


class SignMode(enum.Enum):
    """Selects the sign branch of the coupled integral equations."""

    WITH_DISCRETE = "with_discrete"
    CONTINUOUS_ONLY = "continuous_only"

    @property
    def sigma(self) -> float:
        """Off-diagonal sign: -1 when a discrete spectrum is present."""
        return -1.0 if self is SignMode.WITH_DISCRETE else 1.0


@dataclass(frozen=True)
class DiscreteEigenvalue:
    """Eigenvalue zeta = xi + i eta in the upper half-plane with its norming constant."""

    zeta: complex
    norming: complex

    def __post_init__(self):
        if not np.imag(self.zeta) > 0:
            raise SpectralDataError(f"eigenvalue {self.zeta} must lie in the upper half-plane")
        if self.norming == 0:
            raise SpectralDataError("norming constant must be nonzero")

    @property
    def eta(self) -> float:
        return float(np.imag(self.zeta))

    @property
    def xi(self) -> float:
        return float(np.real(self.zeta))


@dataclass
class ContinuousSpectrum:
    """Reflection-coefficient samples on a uniform, strictly increasing xi grid."""

    xi0: float
    dxi: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != 1 or self.values.size < 2:
            raise SpectralDataError("continuous spectrum needs at least two samples")
        if not self.dxi > 0:
            raise SpectralDataError("xi grid step must be positive")

    @property
    def xi_grid(self) -> np.ndarray:
        return self.xi0 + self.dxi * np.arange(self.values.size)


@dataclass
class SpectralData:
    """One side's spectral data: continuous part, discrete part, sign branch."""

    side: Side
    discrete: list[DiscreteEigenvalue] = field(default_factory=list)
    continuous: ContinuousSpectrum | None = None
    sign_mode: SignMode | None = None

    def __post_init__(self):
        if self.continuous is None and not self.discrete:
            raise SpectralDataError("spectral data needs a continuous or discrete part")
        derived = SignMode.WITH_DISCRETE if self.discrete else SignMode.CONTINUOUS_ONLY
        if self.sign_mode is None:
            self.sign_mode = derived
        elif self.sign_mode is not derived:
            raise SpectralDataError(
                "sign_mode must be WITH_DISCRETE exactly when discrete data is present"
            )

    @property
    def n_solitons(self) -> int:
        return len(self.discrete)

    def to_json_dict(self) -> dict:
        cont = None
        if self.continuous is not None:
            cont = {
                "xi0": self.continuous.xi0,
                "dxi": self.continuous.dxi,
                "values": [[v.real, v.imag] for v in self.continuous.values],
            }
        return {
            "side": self.side.value,
            "discrete": [
                {"zeta": [d.zeta.real, d.zeta.imag], "norming": [d.norming.real, d.norming.imag]}
                for d in self.discrete
            ],
            "continuous": cont,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SpectralData":
        try:
            side = Side(doc["side"])
            discrete = [
                DiscreteEigenvalue(complex(d["zeta"][0], d["zeta"][1]),
                                   complex(d["norming"][0], d["norming"][1]))
                for d in doc.get("discrete", [])
            ]
            cont = None
            if doc.get("continuous") is not None:
                c = doc["continuous"]
                vals = np.array([complex(v[0], v[1]) for v in c["values"]])
                cont = ContinuousSpectrum(float(c["xi0"]), float(c["dxi"]), vals)
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise SpectralDataError(f"malformed spectral data document: {exc}") from exc
        return cls(side=side, discrete=discrete, continuous=cont)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "SpectralData":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass
class KernelTable:
    """Kernel samples K(z0 + k dz), k = 0..n-1, with divergence flags.

    flags[k] marks entries whose magnitude bound exceeds DIVERGENCE_THRESHOLD;
    hard[k] marks entries that are not even representable (stored NaN).
    Lookups are exact index arithmetic: z must be grid-aligned.
    """

    z0: float
    dz: float
    values: np.ndarray
    flags: np.ndarray
    hard: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        self.flags = np.asarray(self.flags, dtype=bool)
        self.hard = np.asarray(self.hard, dtype=bool)
        if not self.dz > 0:
            raise SpectralDataError("kernel table step must be positive")
        if self.values.shape != self.flags.shape or self.values.shape != self.hard.shape:
            raise SpectralDataError("kernel table arrays must share one shape")

    @property
    def n(self) -> int:
        return self.values.size

    def index_of(self, z: float) -> int:
        """Exact table index of argument z (no interpolation exists anywhere)."""
        fk = (z - self.z0) / self.dz
        k = int(round(fk))
        if abs(fk - k) > 1e-6:
            raise KernelRangeError(f"argument {z} is not aligned with the kernel grid")
        if k < 0 or k >= self.n:
            raise KernelRangeError(f"argument {z} outside kernel table range")
        return k

    def covers(self, k_lo: int, k_hi: int) -> bool:
        return 0 <= k_lo and k_hi < self.n


def _discrete_term_logmags(data: SpectralData, z: np.ndarray) -> np.ndarray:
    """log|term_n(z)| for every discrete term, shape (N, len(z))."""
    if not data.discrete:
        return np.zeros((0, z.size))
    eta = np.array([d.eta for d in data.discrete])
    logc = np.array([np.log(abs(d.norming)) for d in data.discrete])
    orient = -1.0 if data.side is Side.RIGHT else 1.0
    # left terms scale like e^{+eta z}, right terms like e^{-eta z}
    return logc[:, None] + orient * eta[:, None] * z[None, :]


def _synthesize(data: SpectralData, z0: float, dz: float, count: int) -> KernelTable:
    if count < 1:
        raise SpectralDataError("kernel table needs at least one entry")
    z = z0 + dz * np.arange(count)
    values = np.zeros(count, dtype=complex)

    # continuous part: trapezoidal rule on the supplied xi grid; the grid's
    # step and extent bound this contribution's error independently of dz.
    if data.continuous is not None:
        c = data.continuous
        w = np.ones(c.values.size)
        w[0] = w[-1] = 0.5
        weighted = (c.dxi / (2.0 * np.pi)) * w * c.values
        s = -1.0 if data.side is Side.LEFT else 1.0
        xi = c.xi_grid
        chunk = max(1, int(2**22 // max(xi.size, 1)))
        for lo in range(0, count, chunk):
            hi = min(count, lo + chunk)
            phase = np.exp(1j * s * np.outer(z[lo:hi], xi))
            values[lo:hi] = phase @ weighted

    logmags = _discrete_term_logmags(data, z)
    hard = np.zeros(count, dtype=bool)
    if data.discrete:
        hard = logmags.max(axis=0) > _HARD_EXPONENT
        bound = np.exp(np.minimum(logmags, _HARD_EXPONENT)).sum(axis=0)
        flags = bound > DIVERGENCE_THRESHOLD
        zetas = np.array([d.zeta for d in data.discrete])
        norm = np.array([d.norming for d in data.discrete])
        s = -1.0 if data.side is Side.LEFT else 1.0
        safe = ~hard
        expo = 1j * s * np.outer(zetas, z[safe])
        with np.errstate(over="ignore", under="ignore"):
            values[safe] += -1j * (norm[:, None] * np.exp(expo)).sum(axis=0)
        values[hard] = np.nan
    else:
        flags = np.zeros(count, dtype=bool)

    flags = flags | hard
    return KernelTable(z0=z0, dz=dz, values=values, flags=flags, hard=hard)


def kernel_left(data: SpectralData, z0: float, dz: float, count: int) -> KernelTable:
    """Tabulate the left kernel on z0 + k dz, k = 0..count-1.

    The continuous integral uses the trapezoidal rule over the data's xi grid;
    the caller is responsible for supplying a grid whose bandwidth and step
    keep the truncated-integral tail below the accuracy it needs.  Divergent
    entries (discrete part growing beyond DIVERGENCE_THRESHOLD) are flagged
    per entry rather than failing the whole table.
    """
    if data.side is not Side.LEFT:
        raise SpectralDataError("kernel_left needs left-side spectral data")
    return _synthesize(data, z0, dz, count)


def kernel_right(data: SpectralData, z0: float, dz: float, count: int) -> KernelTable:
    """Mirror of kernel_left for right-side data (e^{+i xi z}, e^{+i zeta_n z})."""
    if data.side is not Side.RIGHT:
        raise SpectralDataError("kernel_right needs right-side spectral data")
    return _synthesize(data, z0, dz, count)


def synthesize_kernel(data: SpectralData, z0: float, dz: float, count: int) -> KernelTable:
    """Side-dispatching kernel synthesis."""
    if data.side is Side.LEFT:
        return kernel_left(data, z0, dz, count)
    return kernel_right(data, z0, dz, count)


def restrict_solitons(data: SpectralData, active) -> SpectralData:
    """Keep only the discrete eigenvalues with 1-based labels in `active`.

    This is the kernel-level realization of a cut: removed solitons no longer
    contribute to any synthesized kernel.  The continuous part is unchanged.
    """
    labels = set(int(a) for a in active)
    valid = set(range(1, data.n_solitons + 1))
    if not labels <= valid:
        raise SpectralDataError(f"active labels {sorted(labels - valid)} out of range 1..{data.n_solitons}")
    kept = [d for n, d in enumerate(data.discrete, start=1) if n in labels]
    if not kept and data.continuous is None:
        raise SpectralDataError("cutting every soliton of purely discrete data leaves nothing to recover")
    return SpectralData(side=data.side, discrete=kept, continuous=data.continuous)


def _blaschke(zetas: np.ndarray, z: np.ndarray) -> np.ndarray:
    out = np.ones_like(np.asarray(z, dtype=complex))
    for zk in zetas:
        out = out * (z - zk) / (z - np.conj(zk))
    return out


def _blaschke_derivative_at_zero(zetas: np.ndarray, j: int) -> complex:
    zj = zetas[j]
    val = 1.0 / (zj - np.conj(zj))
    for k, zk in enumerate(zetas):
        if k != j:
            val *= (zj - zk) / (zj - np.conj(zk))
    return complex(val)


def _hilbert_uniform(f: np.ndarray) -> np.ndarray:
    """(1/pi) PV integral of f(x')/(x'-x) dx' on f's uniform unit-step grid.

    Pole handled by the symmetric skip; the caller scales by the actual grid
    step (it cancels) and must supply f decaying to zero at the grid edges.
    """
    n = f.size
    m = np.arange(-(n - 1), n, dtype=float)
    kern = np.zeros(2 * n - 1)
    nz = m != 0
    kern[nz] = -1.0 / m[nz]
    full = np.convolve(f, kern)
    out = full[n - 1: 2 * n - 1]
    # the skipped central cell contributes f'(x) dx to the principal value
    fp = np.gradient(f)
    return (out + fp) / np.pi


def convert_side(data: SpectralData, target: Side) -> SpectralData:
    """Re-express one side's spectral data in the other side's convention.

    Discrete part: the norming constants trade through the squared derivative
    of the scattering coefficient at each eigenvalue,
    r_n = -1 / (l_n a'(zeta_n)^2), where a combines the Blaschke product of
    the eigenvalues with the exponential of a Cauchy integral of
    log(1 -+ |reflection|^2).  Continuous part: |a| follows from the unimodular
    energy relation and its phase from the Hilbert transform (a is outer after
    removing the Blaschke factor), giving r(xi) = -conj(l(xi)) conj(a)/a.

    The discrete trade is closed-form exact; the continuous trade inherits
    the xi grid's resolution.
    """
    if data.side is target:
        return data
    zetas = np.array([d.zeta for d in data.discrete])
    # focusing (discrete present): |a|^2 (1 + |rho|^2) = 1;
    # defocusing: |a|^2 (1 - |rho|^2) = 1
    foc = 1.0 if data.sign_mode is SignMode.WITH_DISCRETE else -1.0

    cont_out = None
    if data.continuous is not None:
        c = data.continuous
        xi = c.xi_grid
        mod2 = np.abs(c.values) ** 2
        # defocusing |rho| can graze 1 (near-total reflection); clip so the
        # phase reconstruction degrades gracefully instead of failing
        inner = np.maximum(1.0 + foc * mod2, 1e-12)
        log_abs_a = -0.5 * np.log(inner)
        phase = -_hilbert_uniform(log_abs_a)
        a_on_grid = np.exp(log_abs_a + 1j * phase) * _blaschke(zetas, xi.astype(complex))
        refl = -np.conj(c.values) * np.conj(a_on_grid) / a_on_grid
        cont_out = ContinuousSpectrum(c.xi0, c.dxi, refl)

    discrete_out = []
    for j, d in enumerate(data.discrete):
        ap = _blaschke_derivative_at_zero(zetas, j)
        if data.continuous is not None:
            c = data.continuous
            xi = c.xi_grid
            integrand = np.log1p(foc * np.abs(c.values) ** 2)
            w = np.ones(xi.size)
            w[0] = w[-1] = 0.5
            outer = np.exp(-np.sum(w * integrand / (xi - d.zeta)) * c.dxi / (2j * np.pi))
            ap = ap * outer
        discrete_out.append(DiscreteEigenvalue(d.zeta, -1.0 / (d.norming * ap * ap)))

    return SpectralData(side=target, discrete=discrete_out, continuous=cont_out)


def mirror_to_left(data: SpectralData) -> SpectralData:
    """Map right-side data to the left-side data of the conjugate-mirrored signal.

    If the right data recovers q(t), the returned left data recovers -q(-t):
    xi -> -xi with conjugation in the continuous part, zeta_n -> -conj(zeta_n),
    and norming -> -conj(norming).  This lets one inner-bordering engine serve
    both equation sides.
    """
    if data.side is not Side.RIGHT:
        raise SpectralDataError("mirror_to_left expects right-side data")
    discrete = [
        DiscreteEigenvalue(-np.conj(d.zeta), -np.conj(d.norming)) for d in data.discrete
    ]
    cont = None
    if data.continuous is not None:
        c = data.continuous
        xi_hi = c.xi0 + c.dxi * (c.values.size - 1)
        cont = ContinuousSpectrum(-xi_hi, c.dxi, np.conj(c.values[::-1]))
    return SpectralData(side=Side.LEFT, discrete=discrete, continuous=cont)
