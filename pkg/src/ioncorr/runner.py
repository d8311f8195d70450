"""Turn a :class:`RunConfig` or a figure preset into result tables."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .config import RunConfig, parse_config, to_document, with_overrides
from .correlations import ObservationGeometry, g2_constructive_asymptotic, speckle_intensity
from .errors import DomainError
from .geometry import equilibrium_positions
from .montecarlo import run_point, run_sweep
from .output import ResultTable
from .temporal import g2_tau

POINT_COLUMNS = [
    "n_ions",
    "axial_frequency_rad_s",
    "saturation",
    "direction_x",
    "direction_y",
    "direction_z",
    "mean_intensity",
    "g2_zero",
    "stderr_intensity",
    "stderr_g2",
    "mandel_q",
    "g2_ratio_of_averages",
    "g2_average_of_ratios",
    "n_used",
    "n_skipped",
    "noise_free_intensity",
    "noise_free_g2",
    "g2_constructive_asymptotic",
    "status",
]

SWEEP_VALUE_COLUMN = {
    "axial_frequency": "swept_axial_frequency_rad_s",
    "ion_number": "swept_ion_number",
    "saturation": "swept_saturation",
    "observation_angle": "swept_observation_angle_rad",
}

TAU_COLUMNS = ["tau_s", "tau_linewidths", "g2"]


def _row_cells(row) -> list:
    if not row.ok:
        return [row.n_ions, row.axial_frequency, row.saturation] + [None] * (len(POINT_COLUMNS) - 4) + [row.error]
    r = row.result
    return [
        row.n_ions,
        row.axial_frequency,
        row.saturation,
        *(float(x) for x in row.direction),
        r.mean_intensity,
        r.g2_zero,
        r.stderr_intensity,
        r.stderr_g2,
        row.mandel_q,
        r.g2_ratio_of_averages,
        r.g2_average_of_ratios,
        r.n_used,
        r.n_skipped,
        row.noise_free_intensity,
        row.noise_free_g2,
        row.eq6,
        "ok",
    ]


def _metadata(cfg: RunConfig) -> dict:
    chain = equilibrium_positions(cfg.n_ions, cfg.trap)
    return {
        "mode": cfg.mode,
        "N": cfg.n_ions,
        "saturation": cfg.drive.saturation,
        "linewidth_rad_s": cfg.drive.linewidth,
        "detuning_rad_s": cfg.drive.detuning,
        "axial_frequency_rad_s": cfg.trap.axial_frequency,
        "chain_length_m": chain.length(),
        "observation_mode": cfg.observation.mode,
        "realizations": cfg.ensemble.n_realizations,
        "jitter_rms_m": cfg.ensemble.jitter.rms_width,
        "dark_probability": cfg.ensemble.dark.dark_probability,
        "seed": cfg.ensemble.master_seed,
        "estimator": cfg.ensemble.estimator,
    }


def run_config(cfg: RunConfig, threads: int = 1) -> dict[str, ResultTable]:
    """Tables keyed by file suffix ("" for the main table, "tau" for a delay curve)."""
    meta = _metadata(cfg)
    if cfg.mode == "sweep":
        value_col = SWEEP_VALUE_COLUMN[cfg.sweep_parameter]
        table = ResultTable([value_col] + POINT_COLUMNS, metadata=meta)
        for row in run_sweep(cfg.sweep_spec(), threads=threads):
            value = int(row.value) if cfg.sweep_parameter == "ion_number" else float(row.value)
            table.add([value] + _row_cells(row))
        return {"": table}

    row = run_point(cfg.n_ions, cfg.trap, cfg.drive, cfg.observation, cfg.ensemble,
                    cfg.detection_efficiency, cfg.bin_time, threads=threads)
    table = ResultTable(list(POINT_COLUMNS), metadata=meta)
    table.add(_row_cells(row))
    tables = {"": table}
    if cfg.tau is not None:
        trap = replace(cfg.trap, axial_frequency=row.axial_frequency)
        chain = equilibrium_positions(cfg.n_ions, trap)
        obs = ObservationGeometry(row.direction, cfg.drive.wavenumber)
        curve = g2_tau(chain, cfg.drive, obs, cfg.tau.grid())
        tau_table = ResultTable(list(TAU_COLUMNS), metadata=dict(meta, axial_frequency_rad_s=trap.axial_frequency,
                                                                    curve="noise-free chain"))
        for t, g in zip(curve.tau_grid, curve.values):
            tau_table.add([float(t), float(t * cfg.drive.linewidth), float(g)])
        tables["tau"] = tau_table
    return tables


# ---------------------------------------------------------------- presets

_TWO_STATES = ("constructive", "destructive")


def _temporal_docs(n, s):
    return {
        kind: {
            "N": n,
            "s": s,
            "observation": {"mode": kind},
            "tau": {"stop_linewidths": 40, "points": 401},
        }
        for kind in _TWO_STATES
    }


def _fig3a_docs():
    return {
        f"s{s}": {
            "s": s,
            "observation": {"mode": "constructive"},
            "sweep": {"parameter": "ion_number", "values": list(range(2, 19))},
        }
        for s in (0.6, 1.2)
    }


PRESET_DOCS = {
    "fig1": lambda: _temporal_docs(18, 0.6),
    "fig2ab": lambda: _temporal_docs(4, 0.62),
    "fig2c": lambda: {
        "sweep": {
            "N": 4,
            "s": 0.62,
            "observation": {"mode": "axis"},
            "sweep": {"parameter": "axial_frequency", "start": "0.8 MHz", "stop": "1.1 MHz", "num": 121},
        }
    },
    "fig3a": _fig3a_docs,
    "fig3b": _fig3a_docs,
}
PRESETS = tuple(PRESET_DOCS)


def preset_configs(name: str, seed=None, realizations=None) -> dict[str, RunConfig]:
    if name not in PRESET_DOCS:
        raise DomainError(f"unknown preset {name!r}; choose from {PRESETS}")
    docs = PRESET_DOCS[name]()
    return {k: with_overrides(parse_config(d), seed=seed, realizations=realizations) for k, d in docs.items()}


def q_over_s2_model(n, s):
    """Analytic ``Q/s^2`` in a constructive direction with speckle intensity.

    Uses the large-N constructive ``g2(0)`` and a speckle maximum of twice
    the mean coherent background; ``<n>`` equals the intensity in units of
    ``Gamma T_bin``. The result is linear in ``n``.
    """
    ns = np.atleast_1d(n).astype(int)
    return np.array(
        [speckle_intensity(k, s) * (g2_constructive_asymptotic(k, s) - 1.0) / s**2 for k in ns]
    )


def linear_fit(x, y):
    """Least-squares line; returns slope, intercept and R^2."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def zero_crossing(s):
    """Ion number where the constructive-direction ``Q`` changes sign."""
    a = 1.0 - 1.0 / (1.0 + s / 2.0) ** 2
    b = 2.0 * s * (6.0 + s) / (2.0 + s) ** 2
    return b / a


def _merge(tables: dict[str, ResultTable], label_col: str, labels: dict[str, object]) -> ResultTable:
    first = next(iter(tables.values()))
    merged = ResultTable([label_col] + first.columns, metadata={})
    for key, t in tables.items():
        for r in t.rows:
            merged.add([labels[key]] + r)
    return merged


def run_preset(name: str, configs: dict[str, RunConfig], threads: int = 1) -> dict[str, ResultTable]:
    """Tables for a figure preset, keyed by file suffix."""
    results = {k: run_config(c, threads) for k, c in configs.items()}
    any_cfg = next(iter(configs.values()))
    base_meta = {
        "preset": name,
        "realizations": any_cfg.ensemble.n_realizations,
        "seed": any_cfg.ensemble.master_seed,
        "jitter_rms_m": any_cfg.ensemble.jitter.rms_width,
        "dark_probability": any_cfg.ensemble.dark.dark_probability,
    }

    if name in ("fig1", "fig2ab"):
        points = _merge({k: r[""] for k, r in results.items()}, "direction_kind", {k: k for k in results})
        points.metadata = dict(base_meta, N=any_cfg.n_ions, saturation=any_cfg.drive.saturation)
        cons, dest = results["constructive"]["tau"], results["destructive"]["tau"]
        tau = ResultTable(["tau_s", "tau_linewidths", "g2_constructive", "g2_destructive"],
                          metadata=dict(points.metadata, curve="noise-free chain at the resolved settings"))
        for rc, rd in zip(cons.rows, dest.rows):
            tau.add([rc[0], rc[1], rc[2], rd[2]])
        return {"": points, "tau": tau}

    if name == "fig2c":
        table = results["sweep"][""]
        table.metadata = dict(table.metadata, **base_meta)
        return {"": table}

    merged = _merge({k: r[""] for k, r in results.items()}, "s_setting", {k: k for k in results})
    merged.metadata = dict(base_meta, observation="constructive (trap tuning)")
    if name == "fig3a":
        return {"": merged}

    # fig3b: analytic Q/s^2 next to the simulated constructive values
    cols = ["n_ions", "saturation", "q_over_s2_model", "intensity_model", "g2_model",
            "q_over_s2_noise_free", "q_over_s2_ensemble"]
    table = ResultTable(cols, metadata=dict(base_meta))
    idx = {c: merged.columns.index(c) for c in merged.columns}
    for r in merged.rows:
        if r[idx["status"]] != "ok":
            continue
        n, s = r[idx["n_ions"]], r[idx["saturation"]]
        inten = speckle_intensity(n, s)
        g2m = g2_constructive_asymptotic(n, s)
        q_clean = r[idx["noise_free_intensity"]] * (r[idx["noise_free_g2"]] - 1.0) / s**2
        table.add([n, s, inten * (g2m - 1.0) / s**2, inten, g2m, q_clean, r[idx["mandel_q"]] / s**2])
    for key, cfg in configs.items():
        s = cfg.drive.saturation
        n = np.arange(2, 10)
        slope, intercept, r2 = linear_fit(n, q_over_s2_model(n, s))
        table.metadata[f"fit_{key}_slope_intercept_r2"] = [slope, intercept, r2]
        table.metadata[f"zero_crossing_{key}"] = zero_crossing(s)
    return {"": table}


def preset_document(name: str, configs: dict[str, RunConfig]) -> dict:
    return {"name": name, "configs": {k: to_document(c) for k, c in configs.items()}}


def configs_from_preset_document(doc: dict) -> tuple[str, dict[str, RunConfig]]:
    name = doc.get("name")
    if name not in PRESET_DOCS:
        raise DomainError(f"unknown preset {name!r}")
    return name, {k: parse_config(d) for k, d in doc["configs"].items()}


__all__ = [
    "POINT_COLUMNS",
    "PRESETS",
    "configs_from_preset_document",
    "linear_fit",
    "preset_configs",
    "preset_document",
    "q_over_s2_model",
    "run_config",
    "run_preset",
    "zero_crossing",
]
