"""Ensemble averages over position jitter and dark ions, and parameter sweeps.

Realisations are processed in fixed-size blocks. Block ``b`` of stream
``key`` draws from ``default_rng(SeedSequence([master_seed, *key, b]))``,
and the per-realisation samples are concatenated in block order before
any reduction. Results therefore do not depend on the number of worker
threads.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import argrelextrema

from . import _backend, constants
from .correlations import (
    ObservationGeometry,
    correlation_result,
    find_extremal_direction,
    g2_constructive_asymptotic,
    mandel_q,
    mean_photon_number,
)
from .emitter import DriveParams
from .errors import DomainError, IonCorrError
from .geometry import (
    DarkIonModel,
    EmitterChain,
    JitterModel,
    TrapParams,
    equilibrium_dimensionless,
    equilibrium_positions,
    length_scale,
)

log = logging.getLogger(__name__)

ESTIMATORS = ("ratio_of_averages", "average_of_ratios")


@dataclass(frozen=True)
class EnsembleConfig:
    n_realizations: int = constants.N_REALIZATIONS
    jitter: JitterModel = JitterModel()
    dark: DarkIonModel = DarkIonModel()
    master_seed: int = 0
    estimator: str = "ratio_of_averages"
    block_size: int = 256

    def __post_init__(self):
        if int(self.n_realizations) != self.n_realizations or self.n_realizations < 1:
            raise DomainError("n_realizations must be a positive integer")
        if self.estimator not in ESTIMATORS:
            raise DomainError(f"estimator must be one of {ESTIMATORS}")
        if self.block_size < 1:
            raise DomainError("block_size must be positive")


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    """Ensemble averages; ``g2_zero`` follows ``estimator``.

    Both estimators are always computed: ``g2_ratio_of_averages`` is
    ``<G2> / <I>^2`` and ``g2_average_of_ratios`` is ``<G2 / I^2>``.
    """

    mean_intensity: float
    g2_zero: float
    mean_g2_unnormalized: float
    stderr_intensity: float
    stderr_g2: float
    n_used: int
    n_skipped: int
    estimator: str
    g2_ratio_of_averages: float
    g2_average_of_ratios: float
    samples: dict | None = None


def sample_moments(chain, drive, obs, cfg: EnsembleConfig, key=(0,), threads: int = 1):
    """Per-realisation ``(G2, I, n_active)`` arrays in realisation order."""
    q = obs.scattering_vector(drive)
    n_blocks = math.ceil(cfg.n_realizations / cfg.block_size)
    sizes = [min(cfg.block_size, cfg.n_realizations - b * cfg.block_size) for b in range(n_blocks)]

    def work(b):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, *key, b]))
        n = chain.N
        jitter = rng.standard_normal((sizes[b], n, 3)) * cfg.jitter.widths()
        dark = rng.random((sizes[b], n)) < cfg.dark.dark_probability
        phases = (chain.positions[None, :, :] + jitter) @ q
        active = (chain.active_mask[None, :] & ~dark).astype(np.uint8)
        return _backend.eq2_moments(phases, active, drive.saturation)

    if threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(n_blocks)))
    else:
        parts = [work(b) for b in range(n_blocks)]
    g2 = np.concatenate([p[0] for p in parts])
    inten = np.concatenate([p[1] for p in parts])
    nact = np.concatenate([p[2] for p in parts])
    return g2, inten, nact


def reduce_samples(g2, inten, nact, estimator="ratio_of_averages", keep_samples=False) -> EnsembleResult:
    used = nact > 0
    n_used = int(used.sum())
    n_skipped = int(len(nact) - n_used)
    if n_used == 0:
        raise DomainError("every realisation had all ions dark")
    g, i = g2[used], inten[used]
    mg, mi = float(np.mean(g)), float(np.mean(i))
    roa = mg / mi**2
    ratios = g / i**2
    aor = float(np.mean(ratios))
    if n_used > 1:
        cov = np.cov(np.vstack([g, i]), ddof=1)
        var_roa = (cov[0, 0] / mi**4 + 4 * mg**2 * cov[1, 1] / mi**6 - 4 * mg * cov[0, 1] / mi**5) / n_used
        se_roa = math.sqrt(max(var_roa, 0.0))
        se_aor = float(np.std(ratios, ddof=1) / math.sqrt(n_used))
        se_i = float(math.sqrt(cov[1, 1] / n_used))
    else:
        se_roa = se_aor = se_i = float("nan")
    if estimator == "ratio_of_averages":
        g2_value, se_g2 = roa, se_roa
    else:
        g2_value, se_g2 = aor, se_aor
    samples = {"g2_unnormalized": g, "intensity": i, "n_active": nact[used]} if keep_samples else None
    return EnsembleResult(mi, g2_value, mg, se_i, se_g2, n_used, n_skipped, estimator, roa, aor, samples)


def run_ensemble(
    chain: EmitterChain,
    drive: DriveParams,
    obs: ObservationGeometry,
    cfg: EnsembleConfig,
    threads: int = 1,
    key=(0,),
    keep_samples: bool = False,
) -> EnsembleResult:
    """Average ``I`` and ``G2(0)`` over jitter and dark-ion realisations.

    Dark ions drop out of both the coherent and incoherent sums of a
    realisation; realisations with every ion dark are skipped and counted.
    """
    g2, inten, nact = sample_moments(chain, drive, obs, cfg, key=key, threads=threads)
    return reduce_samples(g2, inten, nact, cfg.estimator, keep_samples)


# ---------------------------------------------------------------------------
# trap-frequency tuning of the interference direction

def _kappa(u, omega, trap, qz):
    # ell scales as omega^(-2/3) at fixed mass and charge
    ell = length_scale(trap) * (trap.axial_frequency / np.atleast_1d(omega)) ** (2.0 / 3.0)
    theta = (u[None, :] * ell[:, None]) * qz
    return np.abs(np.exp(-1j * theta).sum(axis=1)) ** 2 / len(u)


def tune_axial_frequency(
    n_ions: int,
    trap: TrapParams,
    drive: DriveParams,
    kind: str = "constructive",
    selection: str = "typical",
    window: tuple[float, float] = (constants.AXIAL_FREQUENCY_MIN, constants.AXIAL_FREQUENCY_MAX),
    wavenumber: float = constants.WAVENUMBER,
    n_grid: int = 4000,
) -> float:
    """Axial frequency placing the chain-axis detector on an intensity extremum.

    Scans ``window`` for local maxima (``constructive``) or minima
    (``destructive``) of the on-axis elastic intensity. ``selection``
    picks among them: ``extreme`` takes the brightest maximum or darkest
    minimum; ``typical`` takes, for maxima, the one closest to twice the
    window-averaged elastic background (a typical speckle maximum) and,
    for minima, the darkest one.
    """
    if kind not in ("constructive", "destructive"):
        raise DomainError(f"kind must be 'constructive' or 'destructive', got {kind!r}")
    if selection not in ("typical", "extreme"):
        raise DomainError(f"selection must be 'typical' or 'extreme', got {selection!r}")
    lo, hi = window
    if not 0 < lo < hi:
        raise DomainError("tuning window must satisfy 0 < low < high")
    u = equilibrium_dimensionless(n_ions)
    qz = float(wavenumber - drive.k_vector[2])
    omegas = np.linspace(lo, hi, n_grid)
    kappa = _kappa(u, omegas, trap, qz)
    comparator = np.greater if kind == "constructive" else np.less
    idx = argrelextrema(kappa, comparator)[0]
    if len(idx) == 0:
        idx = np.array([int(np.argmax(kappa) if kind == "constructive" else np.argmin(kappa))])
    if kind == "destructive" or selection == "extreme":
        j = idx[np.argmax(kappa[idx])] if kind == "constructive" else idx[np.argmin(kappa[idx])]
    else:
        j = idx[np.argmin(np.abs(kappa[idx] - 2.0 * kappa.mean()))]
    if 0 < j < n_grid - 1:
        sign = -1.0 if kind == "constructive" else 1.0
        res = minimize_scalar(
            lambda w: sign * _kappa(u, w, trap, qz)[0],
            bounds=(omegas[j - 1], omegas[j + 1]),
            method="bounded",
            options={"xatol": 1e-9 * omegas[j]},
        )
        if res.fun <= sign * kappa[j]:
            return float(res.x)
    return float(omegas[j])


# ---------------------------------------------------------------------------
# sweeps

SWEEP_PARAMETERS = ("axial_frequency", "ion_number", "saturation", "observation_angle")
OBSERVATION_MODES = ("axis", "forward", "fixed", "constructive", "destructive")


@dataclass(frozen=True)
class ObservationSpec:
    """How the detection direction is chosen for each run.

    ``axis`` detects along the chain axis; ``forward`` along the drive;
    ``fixed`` uses ``direction``. ``constructive``/``destructive`` find an
    intensity extremum, either by tuning the trap frequency with axis
    detection (``search="trap"``) or by scanning the detection cone at the
    given trap (``search="cone"``).
    """

    mode: str = "axis"
    direction: tuple[float, float, float] = (0.0, 0.0, 1.0)
    search: str = "trap"
    selection: str = "typical"
    numerical_aperture: float = constants.NUMERICAL_APERTURE
    tuning_window: tuple[float, float] = (constants.AXIAL_FREQUENCY_MIN, constants.AXIAL_FREQUENCY_MAX)

    def __post_init__(self):
        if self.mode not in OBSERVATION_MODES:
            raise DomainError(f"observation mode must be one of {OBSERVATION_MODES}")
        if self.search not in ("trap", "cone"):
            raise DomainError("search must be 'trap' or 'cone'")
        if self.selection not in ("typical", "extreme"):
            raise DomainError("selection must be 'typical' or 'extreme'")


@dataclass(frozen=True)
class SweepSpec:
    swept_parameter: str
    values: tuple
    n_ions: int = 4
    trap: TrapParams = TrapParams()
    drive: DriveParams = DriveParams.from_saturation(0.6)
    observation: ObservationSpec = ObservationSpec()
    ensemble: EnsembleConfig = EnsembleConfig()
    detection_efficiency: float = 1.0
    bin_time: float | None = None

    def __post_init__(self):
        if self.swept_parameter not in SWEEP_PARAMETERS:
            raise DomainError(f"swept_parameter must be one of {SWEEP_PARAMETERS}")
        values = tuple(float(v) for v in self.values)
        if not values:
            raise DomainError("sweep values must be non-empty")
        object.__setattr__(self, "values", values)
        if self.swept_parameter == "axial_frequency":
            if any(not 0 < v <= constants.AXIAL_FREQUENCY_MAX * (1 + 1e-12) for v in values):
                raise DomainError("axial frequencies must lie in (0, 2pi x 1.1 MHz]")
            if self.observation.mode in ("constructive", "destructive") and self.observation.search == "trap":
                raise DomainError("cannot tune the trap frequency while sweeping it; use search='cone'")
        elif self.swept_parameter == "ion_number":
            if any(v < 1 or v != int(v) for v in values):
                raise DomainError("ion numbers must be positive integers")
        elif self.swept_parameter == "saturation":
            if any(v < 0 for v in values):
                raise DomainError("saturation values must be non-negative")
        elif self.swept_parameter == "observation_angle":
            if self.observation.mode not in ("axis", "fixed"):
                raise DomainError("observation_angle sweeps need a fixed observation mode")
            if any(not 0 <= v <= math.pi for v in values):
                raise DomainError("observation angles must lie in [0, pi]")


@dataclass(frozen=True, eq=False)
class SweepRow:
    value: float
    n_ions: int
    axial_frequency: float
    saturation: float
    direction: tuple
    result: EnsembleResult | None
    noise_free_intensity: float | None = None
    noise_free_g2: float | None = None
    mandel_q: float | None = None
    eq6: float | None = None
    error: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.error is None


def resolve_setting(n_ions, trap, drive, spec: ObservationSpec, allow_tuning=True):
    """Trap and observation direction for one run according to ``spec``."""
    k = drive.wavenumber
    if spec.mode == "axis":
        return trap, ObservationGeometry((0.0, 0.0, 1.0), k)
    if spec.mode == "forward":
        return trap, ObservationGeometry.forward(drive)
    if spec.mode == "fixed":
        return trap, ObservationGeometry(spec.direction, k)
    if spec.search == "trap" and allow_tuning:
        omega = tune_axial_frequency(n_ions, trap, drive, spec.mode, spec.selection, spec.tuning_window, k)
        return replace(trap, axial_frequency=omega), ObservationGeometry((0.0, 0.0, 1.0), k)
    chain = equilibrium_positions(n_ions, trap)
    obs = find_extremal_direction(chain, drive, spec.mode, k, spec.numerical_aperture)
    return trap, obs


def _row_inputs(spec: SweepSpec, value):
    n_ions, trap, drive, obs_spec = spec.n_ions, spec.trap, spec.drive, spec.observation
    p = spec.swept_parameter
    if p == "axial_frequency":
        trap = replace(trap, axial_frequency=value)
    elif p == "ion_number":
        n_ions = int(value)
    elif p == "saturation":
        drive = replace(drive, rabi_frequency=DriveParams.from_saturation(
            value, detuning=drive.detuning, linewidth=drive.linewidth).rabi_frequency)
    elif p == "observation_angle":
        obs_spec = replace(obs_spec, mode="fixed", direction=ObservationGeometry.from_angles(value).direction)
    return n_ions, trap, drive, obs_spec


def run_point(
    n_ions: int,
    trap: TrapParams,
    drive: DriveParams,
    observation: ObservationSpec,
    ensemble: EnsembleConfig,
    detection_efficiency: float = 1.0,
    bin_time: float | None = None,
    threads: int = 1,
    key=(0,),
    value=math.nan,
) -> SweepRow:
    """Resolve the observation setting, then run the ensemble and the noise-free reference."""
    trap, obs = resolve_setting(n_ions, trap, drive, observation)
    chain = equilibrium_positions(n_ions, trap)
    result = run_ensemble(chain, drive, obs, ensemble, threads=threads, key=key)
    clean = correlation_result(chain, drive, obs, detection_efficiency, bin_time)
    n_mean = mean_photon_number(result.mean_intensity, detection_efficiency, drive.linewidth, bin_time)
    s = drive.saturation
    return SweepRow(
        value=value,
        n_ions=n_ions,
        axial_frequency=trap.axial_frequency,
        saturation=s,
        direction=obs.direction,
        result=result,
        noise_free_intensity=clean.intensity,
        noise_free_g2=clean.g2_zero,
        mandel_q=mandel_q(result.g2_zero, n_mean),
        eq6=g2_constructive_asymptotic(n_ions, s) if n_ions >= 2 and s > 0 else None,
    )


def run_sweep(spec: SweepSpec, threads: int = 1) -> list[SweepRow]:
    """One :class:`SweepRow` per swept value; failing rows carry ``error``."""
    rows = []
    for index, value in enumerate(spec.values):
        try:
            n_ions, trap, drive, obs_spec = _row_inputs(spec, value)
            rows.append(
                run_point(n_ions, trap, drive, obs_spec, spec.ensemble, spec.detection_efficiency,
                          spec.bin_time, threads=threads, key=(index,), value=value)
            )
        except IonCorrError as exc:
            log.warning("sweep row %s=%r failed: %s", spec.swept_parameter, value, exc)
            rows.append(
                SweepRow(value, spec.n_ions, spec.trap.axial_frequency, spec.drive.saturation,
                         (math.nan,) * 3, None, error=f"{exc.category}: {exc}")
            )
    return rows


__all__ = [
    "ESTIMATORS",
    "EnsembleConfig",
    "EnsembleResult",
    "ObservationSpec",
    "SWEEP_PARAMETERS",
    "SweepRow",
    "SweepSpec",
    "reduce_samples",
    "resolve_setting",
    "run_point",
    "run_ensemble",
    "run_sweep",
    "sample_moments",
    "tune_axial_frequency",
]
