"""Emitter positions: Coulomb-chain equilibria, thermal jitter, dark ions.

Ions sit on the z axis of a harmonic trap. Positions are solved in the
dimensionless units of the chain length scale ``ell`` (see
:func:`length_scale`) where the potential energy reads

    V(u) = sum_m u_m^2 / 2 + sum_{m<n} 1 / |u_m - u_n|.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from . import constants
from .errors import ConvergenceError, DomainError

GRADIENT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class TrapParams:
    axial_frequency: float = constants.AXIAL_FREQUENCY_MAX
    ion_mass: float = constants.CA40_MASS
    ion_charge: float = constants.ELEMENTARY_CHARGE

    def __post_init__(self):
        for name in ("axial_frequency", "ion_mass", "ion_charge"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise DomainError(f"{name} must be strictly positive, got {value!r}")


@dataclass(frozen=True, eq=False)
class EmitterChain:
    """Positions (N, 3) in metres and a per-emitter active flag."""

    positions: np.ndarray
    active_mask: np.ndarray = None

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float, copy=True)
        if pos.ndim == 1:
            pos = pos.reshape(-1, 3)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise DomainError(f"positions must have shape (N, 3), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise DomainError("positions must be finite")
        if self.active_mask is None:
            mask = np.ones(len(pos), dtype=bool)
        else:
            mask = np.array(self.active_mask, dtype=bool, copy=True)
        if mask.shape != (len(pos),):
            raise DomainError("active_mask length must equal the number of emitters")
        pos.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "active_mask", mask)

    @property
    def N(self) -> int:
        return len(self.positions)

    @property
    def n_active(self) -> int:
        return int(self.active_mask.sum())

    @property
    def active_positions(self) -> np.ndarray:
        return self.positions[self.active_mask]

    def with_mask(self, active_mask) -> EmitterChain:
        return EmitterChain(self.positions, active_mask)

    def length(self) -> float:
        """Extent along z between the outermost ions."""
        z = self.positions[:, 2]
        return float(z.max() - z.min())

    @classmethod
    def on_axis(cls, z, active_mask=None) -> EmitterChain:
        z = np.asarray(z, dtype=float)
        pos = np.zeros((len(z), 3))
        pos[:, 2] = z
        return cls(pos, active_mask)


@dataclass(frozen=True)
class JitterModel:
    """Isotropic Gaussian displacement, ``rms_width`` per Cartesian axis.

    ``per_axis`` optionally overrides the width for (x, y, z) separately.
    """

    rms_width: float = constants.JITTER_RMS
    seed: int = 0
    per_axis: tuple[float, float, float] | None = None

    def __post_init__(self):
        widths = self.widths()
        if np.any(widths < 0) or not np.all(np.isfinite(widths)):
            raise DomainError("jitter widths must be finite and non-negative")

    def widths(self) -> np.ndarray:
        if self.per_axis is not None:
            return np.asarray(self.per_axis, dtype=float)
        return np.full(3, float(self.rms_width))


@dataclass(frozen=True)
class DarkIonModel:
    dark_probability: float = constants.DARK_PROBABILITY
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.dark_probability <= 1.0:
            raise DomainError(f"dark_probability must lie in [0, 1], got {self.dark_probability!r}")


def length_scale(trap: TrapParams) -> float:
    """Coulomb-chain length scale ``(q^2 / (4 pi eps0 M w_z^2))^(1/3)`` in metres."""
    coulomb = trap.ion_charge**2 * constants.COULOMB_E2 / constants.ELEMENTARY_CHARGE**2
    return float(np.cbrt(coulomb / (trap.ion_mass * trap.axial_frequency**2)))


def chain_energy(u) -> float:
    u = np.asarray(u, dtype=float)
    i, j = np.triu_indices(len(u), 1)
    return float(0.5 * np.sum(u**2) + np.sum(1.0 / np.abs(u[i] - u[j])))


def chain_gradient(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    d = u[:, None] - u[None, :]
    np.fill_diagonal(d, np.inf)
    return u - np.sum(np.sign(d) / d**2, axis=1)


def chain_hessian(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    d = np.abs(u[:, None] - u[None, :])
    np.fill_diagonal(d, np.inf)
    h = -2.0 / d**3
    np.fill_diagonal(h, 1.0 + 2.0 * np.sum(1.0 / d**3, axis=1))
    return h


def _solve_dimensionless(n: int, tol: float = GRADIENT_TOLERANCE, max_iter: int = 200) -> np.ndarray:
    if n == 1:
        return np.zeros(1)
    half_span = 0.5 * n**0.87
    u = np.linspace(-half_span, half_span, n)
    energy = chain_energy(u)
    for _ in range(max_iter):
        grad = chain_gradient(u)
        if np.max(np.abs(grad)) < tol:
            break
        step = np.linalg.solve(chain_hessian(u), -grad)
        # ordering must survive the step, otherwise the Coulomb term flips sign
        gaps, dgaps = np.diff(u), np.diff(step)
        shrinking = dgaps < 0
        t = min(1.0, 0.9 * float(np.min(-gaps[shrinking] / dgaps[shrinking]))) if shrinking.any() else 1.0
        trial = u + t * step
        trial_energy = chain_energy(trial)
        while trial_energy > energy + 1e-14 * abs(energy) and t > 1e-12:
            t *= 0.5
            trial = u + t * step
            trial_energy = chain_energy(trial)
        u, energy = trial, trial_energy
        u = 0.5 * (u - u[::-1])
    residual = float(np.max(np.abs(chain_gradient(u))))
    if residual >= tol:
        raise ConvergenceError(f"equilibrium solver did not converge for N={n}", residual)
    return u


@functools.lru_cache(maxsize=256)
def _dimensionless_cached(n: int) -> np.ndarray:
    u = _solve_dimensionless(n)
    u.setflags(write=False)
    return u


def equilibrium_dimensionless(n: int) -> np.ndarray:
    """Sorted, mirror-symmetric equilibrium of ``n`` ions in units of ``ell``."""
    if int(n) != n or n < 1:
        raise DomainError(f"N must be a positive integer, got {n!r}")
    return _dimensionless_cached(int(n))


def _solve_direct(n: int, trap: TrapParams) -> np.ndarray:
    # Newton on the SI potential, in micrometres to keep the Hessian well scaled
    k_spring = trap.ion_mass * trap.axial_frequency**2 * 1e-12
    k_coul = trap.ion_charge**2 * constants.COULOMB_E2 / constants.ELEMENTARY_CHARGE**2 * 1e6
    z = length_scale(trap) * 1e6 * np.linspace(-0.5, 0.5, n) * n**0.87 if n > 1 else np.zeros(1)
    for _ in range(200):
        d = z[:, None] - z[None, :]
        np.fill_diagonal(d, np.inf)
        grad = k_spring * z - k_coul * np.sum(np.sign(d) / d**2, axis=1)
        ad = np.abs(d)
        hess = -2.0 * k_coul / ad**3
        np.fill_diagonal(hess, k_spring + 2.0 * k_coul * np.sum(1.0 / ad**3, axis=1))
        step = np.linalg.solve(hess, -grad)
        dgaps = np.diff(step)
        shrinking = dgaps < 0
        t = min(1.0, 0.5 * float(np.min(-np.diff(z)[shrinking] / dgaps[shrinking]))) if shrinking.any() else 1.0
        z = z + t * step
        if np.max(np.abs(step)) < 1e-13 * max(1.0, np.max(np.abs(z))):
            break
    return z * 1e-6


def equilibrium_positions(n: int, trap: TrapParams = TrapParams(), method: str = "scaled") -> EmitterChain:
    """Equilibrium chain of ``n`` ions on the z axis, all active.

    ``method="scaled"`` multiplies the cached dimensionless solution by
    :func:`length_scale`; ``method="direct"`` re-solves the force balance in
    physical units and serves as a cross-check of the scaling law.
    """
    u = equilibrium_dimensionless(n)
    if method == "scaled":
        z = u * length_scale(trap)
    elif method == "direct":
        z = _solve_direct(int(n), trap)
    else:
        raise DomainError(f"unknown method {method!r}")
    return EmitterChain.on_axis(z)


def _rng(rng_state, seed):
    if rng_state is None:
        return np.random.default_rng(seed)
    return rng_state


def sample_jitter(chain: EmitterChain, jitter: JitterModel, rng_state=None) -> EmitterChain:
    """Displace every coordinate by an independent zero-mean Gaussian.

    The input chain is not modified; the active mask is carried over.
    """
    widths = jitter.widths()
    if not np.any(widths):
        return EmitterChain(chain.positions, chain.active_mask)
    rng = _rng(rng_state, jitter.seed)
    shift = rng.standard_normal(chain.positions.shape) * widths
    return EmitterChain(chain.positions + shift, chain.active_mask)


def sample_dark_mask(n: int, model: DarkIonModel, rng_state=None) -> np.ndarray:
    """Active mask where each ion is independently dark with ``dark_probability``."""
    if int(n) != n or n < 1:
        raise DomainError(f"N must be a positive integer, got {n!r}")
    rng = _rng(rng_state, model.seed)
    return rng.random(int(n)) >= model.dark_probability


def min_spacing(chain: EmitterChain) -> float:
    z = np.sort(chain.positions[:, 2])
    return float(np.min(np.diff(z))) if len(z) > 1 else float("inf")


__all__ = [
    "DarkIonModel",
    "EmitterChain",
    "JitterModel",
    "TrapParams",
    "chain_energy",
    "chain_gradient",
    "equilibrium_dimensionless",
    "equilibrium_positions",
    "length_scale",
    "min_spacing",
    "sample_dark_mask",
    "sample_jitter",
]
