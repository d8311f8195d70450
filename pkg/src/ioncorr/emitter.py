"""Driven two-level atom: steady state and optical-Bloch propagation.

Conventions
-----------
Rotating frame at the drive frequency with ``H = -Delta |e><e| +
(Omega/2)(sigma+ + sigma-)`` (hbar = 1, ``Delta = w_laser - w_atom``) and
spontaneous decay ``sqrt(Gamma) sigma-``. Density matrices are 2x2 in the
basis ``(e, g)``; they are vectorised row-major as
``(rho_ee, rho_eg, rho_ge, rho_gg)`` so the Liouvillian is a 4x4 complex
matrix acting on arbitrary (also non-Hermitian) operators, which the
quantum-regression correlators need.

The drive phase ``exp(i k_L . r)`` of an atom at ``r`` is not part of the
propagator; it commutes with the dynamics and is carried by the spatial
phase factors of :func:`steady_state` and :mod:`ioncorr.temporal`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import constants
from .errors import DomainError

SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.T.copy()


@dataclass(frozen=True)
class DriveParams:
    rabi_frequency: float
    detuning: float = constants.DETUNING
    linewidth: float = constants.LINEWIDTH
    drive_direction: tuple[float, float, float] = (
        math.sin(constants.DRIVE_ANGLE),
        0.0,
        math.cos(constants.DRIVE_ANGLE),
    )
    wavenumber: float = constants.WAVENUMBER

    def __post_init__(self):
        if not self.linewidth > 0:
            raise DomainError("linewidth must be positive")
        if not self.wavenumber > 0:
            raise DomainError("wavenumber must be positive")
        if not (np.isfinite(self.rabi_frequency) and np.isfinite(self.detuning)):
            raise DomainError("rabi_frequency and detuning must be finite")
        direction = np.asarray(self.drive_direction, dtype=float)
        if direction.shape != (3,) or abs(np.linalg.norm(direction) - 1.0) > 1e-9:
            raise DomainError("drive_direction must be a unit 3-vector")
        object.__setattr__(self, "drive_direction", tuple(float(x) for x in direction))

    @classmethod
    def from_saturation(cls, s: float, **kwargs) -> DriveParams:
        """Back-derive the Rabi frequency giving saturation ``s`` at the stated detuning."""
        if s < 0 or not np.isfinite(s):
            raise DomainError(f"saturation parameter must be finite and >= 0, got {s!r}")
        detuning = kwargs.get("detuning", constants.DETUNING)
        linewidth = kwargs.get("linewidth", constants.LINEWIDTH)
        rabi = math.sqrt(s * (linewidth**2 + 4.0 * detuning**2) / 2.0)
        return cls(rabi_frequency=rabi, **kwargs)

    @property
    def saturation(self) -> float:
        return 2.0 * self.rabi_frequency**2 / (self.linewidth**2 + 4.0 * self.detuning**2)

    @property
    def k_vector(self) -> np.ndarray:
        return self.wavenumber * np.asarray(self.drive_direction)


@dataclass(frozen=True)
class SingleAtomState:
    population: float
    coherence: complex


@dataclass(frozen=True, eq=False)
class BlochState:
    """A 2x2 operator in the ``(e, g)`` basis; not necessarily a density matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise DomainError("BlochState needs a 2x2 matrix")
        object.__setattr__(self, "matrix", m)

    @property
    def rho_ee(self) -> complex:
        return self.matrix[0, 0]

    @property
    def rho_eg(self) -> complex:
        return self.matrix[0, 1]

    @property
    def rho_ge(self) -> complex:
        return self.matrix[1, 0]

    @property
    def trace(self) -> complex:
        return self.matrix[0, 0] + self.matrix[1, 1]

    @classmethod
    def ground(cls) -> BlochState:
        return cls(np.array([[0, 0], [0, 1]], dtype=complex))

    @classmethod
    def from_vector(cls, vec) -> BlochState:
        return cls(np.asarray(vec, dtype=complex).reshape(2, 2))

    def vector(self) -> np.ndarray:
        return self.matrix.reshape(4)

    def __add__(self, other):
        return BlochState(self.matrix + other.matrix)

    def __mul__(self, scalar):
        return BlochState(scalar * self.matrix)

    __rmul__ = __mul__


def coherence_phase(drive: DriveParams) -> complex:
    """Unit phase of ``<sigma->`` at ``r = 0``; equals ``-i`` on resonance."""
    z = complex(drive.linewidth / 2.0, drive.detuning)
    return -1j * z / abs(z)


def steady_state(drive: DriveParams, position=(0.0, 0.0, 0.0), obs=None) -> SingleAtomState:
    """Population ``n_a`` and phased coherence ``beta_a`` of one driven atom.

    ``beta_a = exp(-i k n.r) <sigma->`` with the drive phase
    ``exp(i k_L.r)`` included in ``<sigma->``. Without ``obs`` the
    observation phase is omitted.
    """
    s = drive.saturation
    population = s / (2.0 * (1.0 + s))
    amplitude = math.sqrt(s / 2.0) / (1.0 + s)
    r = np.asarray(position, dtype=float)
    q = -drive.k_vector if obs is None else obs.wavenumber * np.asarray(obs.direction) - drive.k_vector
    phase = float(q @ r)
    return SingleAtomState(population, amplitude * coherence_phase(drive) * complex(math.cos(phase), -math.sin(phase)))


def steady_state_matrix(drive: DriveParams) -> np.ndarray:
    """Steady-state density matrix at ``r = 0`` in the ``(e, g)`` basis."""
    st = steady_state(drive)
    rho_eg = st.coherence
    return np.array(
        [[st.population, rho_eg], [np.conj(rho_eg), 1.0 - st.population]],
        dtype=complex,
    )


def liouvillian(drive: DriveParams) -> np.ndarray:
    """4x4 generator acting on row-major ``vec(rho)``."""
    eye = np.eye(2)
    h = np.array(
        [[-drive.detuning, drive.rabi_frequency / 2.0], [drive.rabi_frequency / 2.0, 0.0]],
        dtype=complex,
    )
    sm, sp = SIGMA_MINUS, SIGMA_PLUS
    spsm = sp @ sm
    # vec(A rho B) = kron(A, B.T) vec(rho) for row-major vec
    gen = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    gen += drive.linewidth * (np.kron(sm, sp.T) - 0.5 * np.kron(spsm, eye) - 0.5 * np.kron(eye, spsm.T))
    return gen


def propagators(drive: DriveParams, taus) -> np.ndarray:
    """``exp(L tau)`` for every ``tau``; shape ``(len(taus), 4, 4)``."""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if np.any(taus < 0) or not np.all(np.isfinite(taus)):
        raise DomainError("propagation time must be finite and non-negative")
    gen = liouvillian(drive)
    return expm(taus[:, None, None] * gen[None, :, :])


def bloch_propagate(initial: BlochState, drive: DriveParams, tau: float) -> BlochState:
    """Evolve ``initial`` for a time ``tau`` under the optical Bloch equations.

    The map is linear over complex coefficients, so it also propagates the
    non-Hermitian operators used in quantum regression.
    """
    if tau < 0:
        raise DomainError(f"tau must be non-negative, got {tau!r}")
    if tau == 0:
        return BlochState(initial.matrix.copy())
    prop = propagators(drive, [tau])[0]
    return BlochState.from_vector(prop @ initial.vector())


__all__ = [
    "BlochState",
    "DriveParams",
    "SIGMA_MINUS",
    "SIGMA_PLUS",
    "SingleAtomState",
    "bloch_propagate",
    "coherence_phase",
    "liouvillian",
    "propagators",
    "steady_state",
    "steady_state_matrix",
]
