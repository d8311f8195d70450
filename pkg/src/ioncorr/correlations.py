"""Equal-time photon statistics of N independent driven two-level emitters.

Far-field operator along ``n``: ``E+ = sum_j exp(-i k n.r_j) sigma-_j``,
normalised so that one atom radiates intensity ``n_a``. Every emitter
phase enters through ``theta_j = (k n - k_L) . r_j``.

Two routes to ``g2(0)`` are provided and cross-checked in the tests:

* :func:`g2_zero_closed` in terms of ``E_coh``, ``I_coh``, ``I_SE`` and
  ``Phi`` for uniform saturation;
* :func:`g2_zero_exact` from per-atom populations and coherences, which
  also covers non-uniform illumination.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import _backend, constants
from .emitter import DriveParams, steady_state
from .errors import DivergentLimitError, DomainError, NotDestructiveWarning
from .geometry import EmitterChain


@dataclass(frozen=True)
class ObservationGeometry:
    direction: tuple[float, float, float] = (0.0, 0.0, 1.0)
    wavenumber: float = constants.WAVENUMBER

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if d.shape != (3,) or not np.all(np.isfinite(d)):
            raise DomainError("direction must be a finite 3-vector")
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise DomainError("direction must be a unit vector")
        if not self.wavenumber > 0:
            raise DomainError("wavenumber must be positive")
        object.__setattr__(self, "direction", tuple(float(x) for x in d))

    @classmethod
    def from_angles(cls, polar: float, azimuth: float = 0.0, wavenumber: float = constants.WAVENUMBER):
        """Direction at ``polar`` angle from the chain (z) axis."""
        st = math.sin(polar)
        return cls((st * math.cos(azimuth), st * math.sin(azimuth), math.cos(polar)), wavenumber)

    @classmethod
    def forward(cls, drive: DriveParams) -> ObservationGeometry:
        return cls(drive.drive_direction, drive.wavenumber)

    def scattering_vector(self, drive: DriveParams) -> np.ndarray:
        return self.wavenumber * np.asarray(self.direction) - drive.k_vector


@dataclass(frozen=True)
class FieldComponents:
    e_coh: complex
    i_coh: float
    i_se: float
    phi: complex
    n_active: int
    saturation: float


@dataclass(frozen=True)
class CorrelationResult:
    intensity: float
    g2_zero: float
    components: FieldComponents
    mandel_q: float | None = None


def emitter_phases(chain: EmitterChain, drive: DriveParams, obs: ObservationGeometry) -> np.ndarray:
    """``(k n - k_L) . r_j`` for the active emitters."""
    return chain.active_positions @ obs.scattering_vector(drive)


def _require_active(chain: EmitterChain) -> None:
    if chain.n_active < 1:
        raise DomainError("at least one active emitter is required")


def field_components(chain: EmitterChain, drive: DriveParams, obs: ObservationGeometry) -> FieldComponents:
    _require_active(chain)
    s = drive.saturation
    theta = emitter_phases(chain, drive, obs)
    n = len(theta)
    e_coh = math.sqrt(s / 2.0) / (1.0 + s) * np.exp(-1j * theta).sum()
    phi = (s / 2.0) / (1.0 + s) ** 2 * np.exp(-2j * theta).sum()
    i_se = n * s * s / (2.0 * (1.0 + s) ** 2)
    return FieldComponents(complex(e_coh), float(abs(e_coh) ** 2), float(i_se), complex(phi), n, s)


def single_atom_states(chain: EmitterChain, drive: DriveParams, obs: ObservationGeometry):
    """Populations and phased coherences ``(n_a, beta_a)`` of the active emitters."""
    _require_active(chain)
    states = [steady_state(drive, r, obs) for r in chain.active_positions]
    return (
        np.array([st.population for st in states]),
        np.array([st.coherence for st in states], dtype=complex),
    )


def intensity_from_states(populations, coherences) -> float:
    """``I = sum n_a + |sum beta_a|^2 - sum |beta_a|^2``."""
    n = np.asarray(populations, dtype=float)
    b = np.asarray(coherences, dtype=complex)
    return float(n.sum() + abs(b.sum()) ** 2 - np.sum(np.abs(b) ** 2))


def intensity(chain: EmitterChain, drive: DriveParams, obs: ObservationGeometry) -> float:
    return intensity_from_states(*single_atom_states(chain, drive, obs))


def g2_from_components(fc: FieldComponents) -> float:
    n, s = fc.n_active, fc.saturation
    denom = (fc.i_se + fc.i_coh) ** 2
    if denom == 0:
        raise DomainError("intensity vanishes; g2(0) undefined")
    # (4/(N s)) I_SE^2 == N s^3/(1+s)^4, regular at s = 0
    num = (
        (2.0 - 2.0 / n) * fc.i_se**2
        + n * s**3 / (1.0 + s) ** 4
        + 4.0 * (1.0 - 2.0 / n) * fc.i_se * fc.i_coh
        + abs(fc.e_coh**2 - fc.phi) ** 2
    )
    return float(num / denom)


def g2_zero_closed(chain: EmitterChain, drive: DriveParams, obs: ObservationGeometry) -> float:
    """Closed-form ``g2(0)`` for uniform saturation; N counts active emitters."""
    return g2_from_components(field_components(chain, drive, obs))


def g2_unnormalized_exact(populations, coherences) -> tuple[float, float]:
    """``(G2(0), I)`` for a product state with arbitrary per-atom ``(n_a, beta_a)``."""
    n = np.asarray(populations, dtype=float)
    b = np.asarray(coherences, dtype=complex)
    if n.shape != b.shape or n.ndim != 1:
        raise DomainError("populations and coherences must be equal-length 1-D sequences")
    sn = n.sum()
    sb = b.sum()
    b2 = np.abs(b) ** 2
    sb2 = b2.sum()
    abs_sb2 = abs(sb) ** 2
    g2 = (
        2.0 * sn**2
        - 2.0 * np.sum(n**2)
        + 4.0 * sn * (abs_sb2 - sb2)
        - 8.0 * (np.sum(n * b.conj()) * sb).real
        + 8.0 * np.sum(n * b2)
        + abs_sb2**2
        - 6.0 * np.sum(b2**2)
        - 4.0 * abs_sb2 * sb2
        + 8.0 * (sb * np.sum(b2 * b.conj())).real
        + 2.0 * sb2**2
        - 2.0 * (sb**2 * np.sum(b.conj() ** 2)).real
        + abs(np.sum(b**2)) ** 2
    )
    return float(g2), float(sn + abs_sb2 - sb2)


def g2_zero_exact(populations, coherences) -> float:
    g2, inten = g2_unnormalized_exact(populations, coherences)
    if inten == 0:
        raise DomainError("intensity vanishes; g2(0) undefined")
    return g2 / inten**2


def _phase_sums(chain, obs, drive_direction):
    if isinstance(drive_direction, DriveParams):
        k_l = drive_direction.k_vector
    else:
        d = np.asarray(drive_direction, dtype=float)
        k_l = obs.wavenumber * d / np.linalg.norm(d)
    theta = chain.active_positions @ (obs.wavenumber * np.asarray(obs.direction) - k_l)
    return np.exp(-1j * theta).sum(), np.exp(-2j * theta).sum(), len(theta)


def g2_elastic_limit(chain: EmitterChain, obs: ObservationGeometry, drive_direction) -> float:
    """``|E_coh^2 - Phi|^2 / I_coh^2`` in the ``s -> 0`` limit (independent of ``s``).

    Raises :class:`DivergentLimitError` where the coherent field cancels.
    """
    _require_active(chain)
    s1, s2, n = _phase_sums(chain, obs, drive_direction)
    i1 = abs(s1) ** 2
    if i1 <= 1e-24 * n * n:
        raise DivergentLimitError("coherent intensity vanishes; use g2_destructive_approx")
    return float(abs(s1 * s1 - s2) ** 2 / i1**2)


def g2_destructive_approx(chain: EmitterChain, drive: DriveParams, obs: ObservationGeometry) -> float:
    """Superbunching estimate ``4/(N s) + |sum exp(-2i theta)|^2 / (N s)^2``.

    Warns with :class:`NotDestructiveWarning` unless ``I_coh / I_SE < 0.01``.
    """
    fc = field_components(chain, drive, obs)
    n, s = fc.n_active, fc.saturation
    if s <= 0:
        raise DomainError("saturation must be positive")
    if not fc.i_coh < 0.01 * fc.i_se:
        warnings.warn(
            f"direction is not destructive: I_coh/I_SE = {fc.i_coh / fc.i_se:.3g}",
            NotDestructiveWarning,
            stacklevel=2,
        )
    _, s2, _ = _phase_sums(chain, obs, drive)
    return float(4.0 / (n * s) + abs(s2) ** 2 / (n * s) ** 2)


def g2_constructive_asymptotic(n: int, s: float) -> float:
    """Speckle-maximum prediction ``2 - 1/(1+s/2)^2 - 2s(6+s)/(N(2+s)^2)``.

    Meaningful for N of a few ions upwards; it does not reach 2 at N = 1.
    """
    if n < 2:
        raise DomainError("N must be at least 2")
    if not s > 0:
        raise DomainError("s must be positive")
    return 2.0 - 1.0 / (1.0 + s / 2.0) ** 2 - 2.0 * s * (6.0 + s) / (n * (2.0 + s) ** 2)


def speckle_intensity(n: int, s: float, contrast: float = 2.0) -> float:
    """Total intensity of a speckle grain whose elastic part is ``contrast`` times the mean."""
    return n * s * s / (2.0 * (1.0 + s) ** 2) + contrast * n * s / (2.0 * (1.0 + s) ** 2)


def mean_photon_number(
    intensity_value: float,
    efficiency: float = 1.0,
    linewidth: float = constants.LINEWIDTH,
    bin_time: float | None = None,
) -> float:
    """``eta * I * Gamma * T_bin``; the default bin ``1/Gamma`` gives ``eta * I``."""
    if bin_time is None:
        bin_time = 1.0 / linewidth
    return efficiency * intensity_value * linewidth * bin_time


def mandel_q(g2_zero: float, mean_photon_number: float) -> float:
    if mean_photon_number < 0:
        raise DomainError("mean photon number must be non-negative")
    return mean_photon_number * (g2_zero - 1.0)


def correlation_result(chain, drive, obs, efficiency=1.0, bin_time=None) -> CorrelationResult:
    fc = field_components(chain, drive, obs)
    g2 = g2_from_components(fc)
    inten = fc.i_se + fc.i_coh
    q = mandel_q(g2, mean_photon_number(inten, efficiency, drive.linewidth, bin_time))
    return CorrelationResult(inten, g2, fc, q)


def intensity_grid(chain, drive, obs_directions, wavenumber) -> np.ndarray:
    """Intensity for each row of ``obs_directions`` (shape (M, 3)), uniform saturation."""
    _require_active(chain)
    q = wavenumber * np.asarray(obs_directions, dtype=float) - drive.k_vector
    theta = q @ chain.active_positions.T
    _, inten, _ = _backend.eq2_moments(theta, np.ones_like(theta, dtype=np.uint8), drive.saturation)
    return inten


def find_extremal_direction(
    chain: EmitterChain,
    drive: DriveParams,
    kind: str = "constructive",
    wavenumber: float = constants.WAVENUMBER,
    numerical_aperture: float = constants.NUMERICAL_APERTURE,
    n_polar: int = 64,
    n_azimuth: int = 16,
) -> ObservationGeometry:
    """Brightest (``constructive``) or darkest (``destructive``) direction in the detection cone.

    The cone is centred on the chain axis. A polar x azimuth grid locates
    the extremum, then a bounded scalar search refines the polar angle.
    """
    if kind not in ("constructive", "destructive"):
        raise DomainError(f"kind must be 'constructive' or 'destructive', got {kind!r}")
    sign = -1.0 if kind == "constructive" else 1.0
    max_polar = math.asin(min(1.0, numerical_aperture))
    polar = np.linspace(0.0, max_polar, n_polar)
    azimuth = np.linspace(0.0, 2 * math.pi, n_azimuth, endpoint=False)
    pp, aa = np.meshgrid(polar, azimuth, indexing="ij")
    dirs = np.stack([np.sin(pp) * np.cos(aa), np.sin(pp) * np.sin(aa), np.cos(pp)], axis=-1).reshape(-1, 3)
    values = sign * intensity_grid(chain, drive, dirs, wavenumber)
    ip, ia = np.unravel_index(int(np.argmin(values)), pp.shape)
    phi0 = azimuth[ia]

    def objective(theta):
        d = ObservationGeometry.from_angles(theta, phi0, wavenumber).direction
        return sign * intensity_grid(chain, drive, [d], wavenumber)[0]

    lo = polar[max(ip - 1, 0)]
    hi = polar[min(ip + 1, n_polar - 1)]
    best_theta, best_val = polar[ip], values[ip * n_azimuth + ia]
    if hi > lo:
        res = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        if res.fun < best_val:
            best_theta = float(res.x)
    return ObservationGeometry.from_angles(best_theta, phi0, wavenumber)


__all__ = [
    "CorrelationResult",
    "FieldComponents",
    "ObservationGeometry",
    "correlation_result",
    "emitter_phases",
    "field_components",
    "find_extremal_direction",
    "g2_constructive_asymptotic",
    "g2_destructive_approx",
    "g2_elastic_limit",
    "g2_from_components",
    "g2_unnormalized_exact",
    "g2_zero_closed",
    "g2_zero_exact",
    "intensity",
    "intensity_from_states",
    "intensity_grid",
    "mandel_q",
    "mean_photon_number",
    "single_atom_states",
    "speckle_intensity",
]
