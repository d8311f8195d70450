"""Run configuration: parsing, validation and canonical echo.

Configuration files are YAML mappings (JSON is accepted as well, being a
subset). Frequencies always carry a unit::

    axial_frequency: 1.1 MHz          # cyclic; converted to 2 pi x 1.1e6 rad/s
    axial_frequency: 2pi*1.1 MHz      # same value, explicit notation
    detuning: -7.5398e7 rad/s         # angular

Minimal example::

    N: 4
    s: 0.62

The resolved configuration (:func:`to_document`) writes every frequency in
rad/s with full float precision, so loading it again reproduces the run
exactly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import constants
from .emitter import DriveParams
from .errors import ConfigError, ConfigParseError, IonCorrError
from .geometry import DarkIonModel, JitterModel, TrapParams, equilibrium_positions
from .montecarlo import (
    ESTIMATORS,
    OBSERVATION_MODES,
    SWEEP_PARAMETERS,
    EnsembleConfig,
    ObservationSpec,
    SweepSpec,
)

_FREQ_UNITS = {
    "hz": (1.0, True),
    "khz": (1e3, True),
    "mhz": (1e6, True),
    "ghz": (1e9, True),
    "rad/s": (1.0, False),
    "krad/s": (1e3, False),
    "mrad/s": (1e6, False),
    "grad/s": (1e9, False),
}
_FREQ_RE = re.compile(
    r"^\s*(?P<sign>[-+]?)\s*(?P<twopi>(2\s*(pi|π)\s*[*·×x]?\s*))?"
    r"(?P<num>[0-9.]+(?:[eE][-+]?\d+)?)\s*(?P<unit>[a-zA-Z/]+)\s*$"
)
_ANGLE_RE = re.compile(r"^\s*(?P<num>[-+]?[0-9.]+(?:[eE][-+]?\d+)?)\s*(?P<unit>deg|rad)\s*$")


def parse_frequency(value, name="frequency") -> float:
    """Angular frequency in rad/s from a unit-suffixed string."""
    if isinstance(value, bool) or not isinstance(value, str):
        raise ConfigError("frequencies need an explicit unit, e.g. '1.1 MHz' or '6.9e6 rad/s'", field=name)
    m = _FREQ_RE.match(value)
    if not m:
        raise ConfigError(f"cannot parse frequency {value!r}", field=name)
    unit = m.group("unit").lower()
    if unit not in _FREQ_UNITS:
        raise ConfigError(f"unknown frequency unit {m.group('unit')!r}", field=name)
    scale, cyclic = _FREQ_UNITS[unit]
    if m.group("twopi") and not cyclic:
        raise ConfigError("'2pi' prefix only makes sense with Hz units", field=name)
    number = float(m.group("num")) * scale
    if cyclic:
        number *= constants.TWO_PI
    return -number if m.group("sign") == "-" else number


def format_frequency(value: float) -> str:
    return f"{value!r} rad/s"


def parse_angle(value, name="angle") -> float:
    """Radians from a number (radians) or a ``'<x> deg'`` / ``'<x> rad'`` string."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        m = _ANGLE_RE.match(value)
        if m:
            x = float(m.group("num"))
            return math.radians(x) if m.group("unit") == "deg" else x
    raise ConfigError(f"cannot parse angle {value!r}", field=name)


def _number(value, name, kind=float, minimum=None, maximum=None, strict_min=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field=name)
    if kind is int:
        if int(value) != value:
            raise ConfigError(f"expected an integer, got {value!r}", field=name)
        value = int(value)
    else:
        value = float(value)
    if not math.isfinite(value):
        raise ConfigError("must be finite", field=name)
    if minimum is not None and (value < minimum or (strict_min and value == minimum)):
        raise ConfigError(f"must be {'>' if strict_min else '>='} {minimum}, got {value!r}", field=name)
    if maximum is not None and value > maximum:
        raise ConfigError(f"must be <= {maximum}, got {value!r}", field=name)
    return value


def _section(doc, name, allowed):
    sec = doc.get(name, {})
    if sec is None:
        sec = {}
    if not isinstance(sec, dict):
        raise ConfigError("expected a mapping", field=name)
    unknown = sorted(set(sec) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}", field=f"{name}.{unknown[0]}")
    return sec


@dataclass(frozen=True)
class OutputSpec:
    dir: str | None = None
    name: str = "run"
    gnuplot: bool = False


@dataclass(frozen=True)
class TauSpec:
    """Delay grid ``linspace(0, stop, points)`` in seconds."""

    stop: float
    points: int = 401

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.stop, self.points)


@dataclass(frozen=True)
class RunConfig:
    n_ions: int
    trap: TrapParams
    drive: DriveParams
    observation: ObservationSpec
    ensemble: EnsembleConfig
    sweep_parameter: str | None = None
    sweep_values: tuple = ()
    tau: TauSpec | None = None
    output: OutputSpec = field(default_factory=OutputSpec)
    detection_efficiency: float = 1.0
    bin_time: float | None = None

    @property
    def mode(self) -> str:
        return "sweep" if self.sweep_parameter is not None else "single"

    def sweep_spec(self) -> SweepSpec:
        return SweepSpec(
            self.sweep_parameter,
            self.sweep_values,
            n_ions=self.n_ions,
            trap=self.trap,
            drive=self.drive,
            observation=self.observation,
            ensemble=self.ensemble,
            detection_efficiency=self.detection_efficiency,
            bin_time=self.bin_time,
        )


TOP_KEYS = ("N", "s", "trap", "drive", "observation", "ensemble", "sweep", "tau", "output", "detection")
TRAP_KEYS = ("axial_frequency", "ion_mass_kg", "ion_mass_amu", "ion_charge_e")
DRIVE_KEYS = ("saturation", "rabi_frequency", "detuning", "linewidth", "angle", "direction", "wavelength_nm")
OBS_KEYS = ("mode", "direction", "search", "selection", "numerical_aperture", "tuning_window")
ENS_KEYS = (
    "realizations", "jitter_rms_nm", "jitter_per_axis_nm", "dark_probability",
    "seed", "estimator", "block_size",
)
SWEEP_KEYS = ("parameter", "values", "start", "stop", "num")
TAU_KEYS = ("stop_s", "stop_ns", "stop_linewidths", "points")
OUT_KEYS = ("dir", "name", "gnuplot")
DET_KEYS = ("efficiency", "bin_time_ns")


def _parse_trap(doc):
    sec = _section(doc, "trap", TRAP_KEYS)
    kwargs = {}
    if "axial_frequency" in sec:
        omega = parse_frequency(sec["axial_frequency"], "trap.axial_frequency")
        if not 0 < omega <= constants.AXIAL_FREQUENCY_MAX * (1 + 1e-12):
            raise ConfigError("axial frequency must lie in (0, 2pi x 1.1 MHz]", field="trap.axial_frequency")
        kwargs["axial_frequency"] = omega
    if "ion_mass_kg" in sec and "ion_mass_amu" in sec:
        raise ConfigError("give the ion mass in kg or amu, not both", field="trap.ion_mass_kg")
    if "ion_mass_kg" in sec:
        kwargs["ion_mass"] = _number(sec["ion_mass_kg"], "trap.ion_mass_kg", minimum=0, strict_min=True)
    if "ion_mass_amu" in sec:
        from scipy.constants import atomic_mass

        amu = _number(sec["ion_mass_amu"], "trap.ion_mass_amu", minimum=0, strict_min=True)
        kwargs["ion_mass"] = amu * atomic_mass
    if "ion_charge_e" in sec:
        z = _number(sec["ion_charge_e"], "trap.ion_charge_e", minimum=0, strict_min=True)
        kwargs["ion_charge"] = z * constants.ELEMENTARY_CHARGE
    return TrapParams(**kwargs)


def _parse_drive(doc):
    sec = _section(doc, "drive", DRIVE_KEYS)
    s_top = doc.get("s")
    if s_top is not None and "saturation" in sec:
        raise ConfigError("saturation given both at top level and in drive", field="s")
    saturation = s_top if s_top is not None else sec.get("saturation")
    field_name = "s" if s_top is not None else "drive.saturation"
    if saturation is not None and "rabi_frequency" in sec:
        raise ConfigError("drive over-determined: give either s or rabi_frequency", field=field_name)
    detuning = parse_frequency(sec["detuning"], "drive.detuning") if "detuning" in sec else constants.DETUNING
    linewidth = (
        parse_frequency(sec["linewidth"], "drive.linewidth") if "linewidth" in sec else constants.LINEWIDTH
    )
    if linewidth <= 0:
        raise ConfigError("linewidth must be positive", field="drive.linewidth")
    if "angle" in sec and "direction" in sec:
        raise ConfigError("give the drive angle or direction, not both", field="drive.angle")
    if "direction" in sec:
        direction = _unit_vector(sec["direction"], "drive.direction")
    else:
        angle = parse_angle(sec["angle"], "drive.angle") if "angle" in sec else constants.DRIVE_ANGLE
        direction = (math.sin(angle), 0.0, math.cos(angle))
    wavelength = (
        _number(sec["wavelength_nm"], "drive.wavelength_nm", minimum=0, strict_min=True) * 1e-9
        if "wavelength_nm" in sec
        else constants.WAVELENGTH
    )
    common = dict(detuning=detuning, linewidth=linewidth, drive_direction=direction,
                  wavenumber=constants.TWO_PI / wavelength)
    if "rabi_frequency" in sec:
        rabi = parse_frequency(sec["rabi_frequency"], "drive.rabi_frequency")
        return DriveParams(rabi_frequency=rabi, **common)
    s = 0.6 if saturation is None else _number(saturation, field_name, minimum=0)
    return DriveParams.from_saturation(s, **common)


def _unit_vector(value, name):
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError("expected a list of three numbers", field=name)
    v = np.array([_number(x, name) for x in value])
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ConfigError("direction must be non-zero", field=name)
    return tuple(float(x) for x in v / norm)


def _parse_observation(doc):
    sec = _section(doc, "observation", OBS_KEYS)
    kwargs = {}
    if "mode" in sec:
        if sec["mode"] not in OBSERVATION_MODES:
            raise ConfigError(f"mode must be one of {OBSERVATION_MODES}", field="observation.mode")
        kwargs["mode"] = sec["mode"]
    if "direction" in sec:
        kwargs["direction"] = _unit_vector(sec["direction"], "observation.direction")
        kwargs.setdefault("mode", "fixed")
    for key, allowed in (("search", ("trap", "cone")), ("selection", ("typical", "extreme"))):
        if key in sec:
            if sec[key] not in allowed:
                raise ConfigError(f"must be one of {allowed}", field=f"observation.{key}")
            kwargs[key] = sec[key]
    if "numerical_aperture" in sec:
        kwargs["numerical_aperture"] = _number(
            sec["numerical_aperture"], "observation.numerical_aperture", minimum=0, maximum=1
        )
    if "tuning_window" in sec:
        w = sec["tuning_window"]
        if not isinstance(w, (list, tuple)) or len(w) != 2:
            raise ConfigError("expected [low, high]", field="observation.tuning_window")
        lo, hi = (parse_frequency(x, "observation.tuning_window") for x in w)
        if not 0 < lo < hi:
            raise ConfigError("need 0 < low < high", field="observation.tuning_window")
        kwargs["tuning_window"] = (lo, hi)
    return ObservationSpec(**kwargs)


def _parse_ensemble(doc):
    sec = _section(doc, "ensemble", ENS_KEYS)
    seed = _number(sec.get("seed", 0), "ensemble.seed", kind=int, minimum=0)
    rms = _number(sec.get("jitter_rms_nm", constants.JITTER_RMS * 1e9), "ensemble.jitter_rms_nm", minimum=0)
    per_axis = None
    if "jitter_per_axis_nm" in sec:
        v = sec["jitter_per_axis_nm"]
        if not isinstance(v, (list, tuple)) or len(v) != 3:
            raise ConfigError("expected three widths", field="ensemble.jitter_per_axis_nm")
        per_axis = tuple(_number(x, "ensemble.jitter_per_axis_nm", minimum=0) * 1e-9 for x in v)
    p_dark = _number(
        sec.get("dark_probability", constants.DARK_PROBABILITY), "ensemble.dark_probability", minimum=0, maximum=1
    )
    estimator = sec.get("estimator", "ratio_of_averages")
    if estimator not in ESTIMATORS:
        raise ConfigError(f"must be one of {ESTIMATORS}", field="ensemble.estimator")
    return EnsembleConfig(
        n_realizations=_number(
            sec.get("realizations", constants.N_REALIZATIONS), "ensemble.realizations", kind=int, minimum=1
        ),
        jitter=JitterModel(rms * 1e-9, seed, per_axis),
        dark=DarkIonModel(p_dark, seed),
        master_seed=seed,
        estimator=estimator,
        block_size=_number(sec.get("block_size", 256), "ensemble.block_size", kind=int, minimum=1),
    )


def _parse_sweep(doc):
    if doc.get("sweep") is None:
        return None, ()
    sec = _section(doc, "sweep", SWEEP_KEYS)
    parameter = sec.get("parameter")
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"must be one of {SWEEP_PARAMETERS}", field="sweep.parameter")
    if "values" in sec:
        if any(k in sec for k in ("start", "stop", "num")):
            raise ConfigError("give values or start/stop/num, not both", field="sweep.values")
        raw = sec["values"]
        if not isinstance(raw, (list, tuple)):
            raise ConfigError("expected a list", field="sweep.values")
    else:
        missing = [k for k in ("start", "stop", "num") if k not in sec]
        if missing:
            raise ConfigError("need values or start/stop/num", field=f"sweep.{missing[0]}")
        num = _number(sec["num"], "sweep.num", kind=int, minimum=1)
        raw = None
    conv = {
        "axial_frequency": lambda x: parse_frequency(x, "sweep.values"),
        "ion_number": lambda x: _number(x, "sweep.values", kind=int, minimum=1),
        "saturation": lambda x: _number(x, "sweep.values", minimum=0),
        "observation_angle": lambda x: parse_angle(x, "sweep.values"),
    }[parameter]
    if raw is None:
        start, stop = conv(sec["start"]), conv(sec["stop"])
        values = np.linspace(start, stop, num)
        values = [int(round(v)) for v in values] if parameter == "ion_number" else [float(v) for v in values]
    else:
        values = [conv(x) for x in raw]
    if not values:
        raise ConfigError("sweep values must be non-empty", field="sweep.values")
    return parameter, tuple(values)


def _parse_tau(doc, drive):
    if doc.get("tau") is None:
        return None
    sec = _section(doc, "tau", TAU_KEYS)
    given = [k for k in ("stop_s", "stop_ns", "stop_linewidths") if k in sec]
    if len(given) > 1:
        raise ConfigError(f"give only one of {given}", field=f"tau.{given[1]}")
    if "stop_s" in sec:
        stop = _number(sec["stop_s"], "tau.stop_s", minimum=0, strict_min=True)
    elif "stop_ns" in sec:
        stop = _number(sec["stop_ns"], "tau.stop_ns", minimum=0, strict_min=True) * 1e-9
    else:
        stop = _number(sec.get("stop_linewidths", 40), "tau.stop_linewidths", minimum=0, strict_min=True)
        stop /= drive.linewidth
    points = _number(sec.get("points", 401), "tau.points", kind=int, minimum=2)
    return TauSpec(stop, points)


def parse_config(doc: dict) -> RunConfig:
    """Validate a configuration mapping and resolve every default."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a mapping")
    unknown = sorted(set(doc) - set(TOP_KEYS))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}", field=unknown[0])
    try:
        n_ions = _number(doc.get("N", 4), "N", kind=int, minimum=1)
        trap = _parse_trap(doc)
        drive = _parse_drive(doc)
        observation = _parse_observation(doc)
        ensemble = _parse_ensemble(doc)
        parameter, values = _parse_sweep(doc)
        tau = _parse_tau(doc, drive)
        out = _section(doc, "output", OUT_KEYS)
        name = out.get("name", "run")
        if not isinstance(name, str) or not re.fullmatch(r"[A-Za-z0-9_.-]+", name):
            raise ConfigError("name must be a plain file stem", field="output.name")
        output = OutputSpec(out.get("dir"), name, bool(out.get("gnuplot", False)))
        det = _section(doc, "detection", DET_KEYS)
        efficiency = _number(det.get("efficiency", 1.0), "detection.efficiency", minimum=0, maximum=1)
        bin_time = (
            _number(det["bin_time_ns"], "detection.bin_time_ns", minimum=0, strict_min=True) * 1e-9
            if "bin_time_ns" in det
            else None
        )
        cfg = RunConfig(n_ions, trap, drive, observation, ensemble, parameter, values, tau, output,
                        efficiency, bin_time)
        if parameter is not None and tau is not None:
            raise ConfigError("tau curves are only available in single-run mode", field="tau")
        if parameter is not None:
            cfg.sweep_spec()
    except ConfigError:
        raise
    except IonCorrError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> RunConfig:
    """Read, parse and validate a configuration file.

    A reproducibility manifest written by a previous run is accepted too;
    its ``config`` section is used.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ConfigParseError(
            f"cannot parse {path}: {exc.problem}",
            line=mark.line + 1 if mark else None,
            column=mark.column + 1 if mark else None,
        ) from exc
    except yaml.YAMLError as exc:
        raise ConfigParseError(f"cannot parse {path}: {exc}") from exc
    if doc is None:
        doc = {}
    if isinstance(doc, dict) and "config" in doc and "ioncorr_version" in doc:
        doc = doc["config"]
    return parse_config(doc)


def to_document(cfg: RunConfig) -> dict:
    """Canonical, fully resolved configuration; parses back to ``cfg``."""
    d = cfg.drive
    doc = {
        "N": cfg.n_ions,
        "trap": {
            "axial_frequency": format_frequency(cfg.trap.axial_frequency),
            "ion_mass_kg": cfg.trap.ion_mass,
            "ion_charge_e": cfg.trap.ion_charge / constants.ELEMENTARY_CHARGE,
        },
        "drive": {
            "rabi_frequency": format_frequency(d.rabi_frequency),
            "detuning": format_frequency(d.detuning),
            "linewidth": format_frequency(d.linewidth),
            "direction": list(d.drive_direction),
            "wavelength_nm": constants.TWO_PI / d.wavenumber * 1e9,
        },
        "observation": {
            "mode": cfg.observation.mode,
            "direction": list(cfg.observation.direction),
            "search": cfg.observation.search,
            "selection": cfg.observation.selection,
            "numerical_aperture": cfg.observation.numerical_aperture,
            "tuning_window": [format_frequency(w) for w in cfg.observation.tuning_window],
        },
        "ensemble": {
            "realizations": cfg.ensemble.n_realizations,
            "jitter_rms_nm": cfg.ensemble.jitter.rms_width * 1e9,
            "dark_probability": cfg.ensemble.dark.dark_probability,
            "seed": cfg.ensemble.master_seed,
            "estimator": cfg.ensemble.estimator,
            "block_size": cfg.ensemble.block_size,
        },
        "output": {"dir": cfg.output.dir, "name": cfg.output.name, "gnuplot": cfg.output.gnuplot},
        "detection": {"efficiency": cfg.detection_efficiency},
    }
    if cfg.ensemble.jitter.per_axis is not None:
        doc["ensemble"]["jitter_per_axis_nm"] = [w * 1e9 for w in cfg.ensemble.jitter.per_axis]
    if cfg.bin_time is not None:
        doc["detection"]["bin_time_ns"] = cfg.bin_time * 1e9
    if cfg.sweep_parameter is not None:
        if cfg.sweep_parameter == "axial_frequency":
            values = [format_frequency(v) for v in cfg.sweep_values]
        elif cfg.sweep_parameter == "ion_number":
            values = [int(v) for v in cfg.sweep_values]
        else:
            values = [float(v) for v in cfg.sweep_values]
        doc["sweep"] = {"parameter": cfg.sweep_parameter, "values": values}
    if cfg.tau is not None:
        doc["tau"] = {"stop_s": cfg.tau.stop, "points": cfg.tau.points}
    return doc


def derived_quantities(cfg: RunConfig) -> dict:
    """Informational values echoed next to the resolved configuration."""
    chain = equilibrium_positions(cfg.n_ions, cfg.trap)
    return {
        "saturation": cfg.drive.saturation,
        "linewidth_MHz_cyclic": cfg.drive.linewidth / constants.TWO_PI / 1e6,
        "axial_frequency_MHz_cyclic": cfg.trap.axial_frequency / constants.TWO_PI / 1e6,
        "chain_length_um": chain.length() * 1e6,
        "mode": cfg.mode,
    }


def with_overrides(cfg: RunConfig, seed=None, realizations=None, out_dir=None) -> RunConfig:
    ens = cfg.ensemble
    if seed is not None:
        ens = replace(ens, master_seed=seed, jitter=replace(ens.jitter, seed=seed), dark=replace(ens.dark, seed=seed))
    if realizations is not None:
        if realizations < 1:
            raise ConfigError("must be positive", field="--realizations")
        ens = replace(ens, n_realizations=realizations)
    out = cfg.output if out_dir is None else replace(cfg.output, dir=str(out_dir))
    return replace(cfg, ensemble=ens, output=out)


__all__ = [
    "OutputSpec",
    "RunConfig",
    "TauSpec",
    "derived_quantities",
    "load_config",
    "parse_angle",
    "parse_config",
    "parse_frequency",
    "to_document",
    "with_overrides",
]
