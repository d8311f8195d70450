import math

import numpy as np
import pytest

from ioncorr import constants
from ioncorr.correlations import ObservationGeometry, g2_zero_closed, intensity
from ioncorr.emitter import DriveParams
from ioncorr.errors import DomainError
from ioncorr.geometry import DarkIonModel, JitterModel, TrapParams, equilibrium_positions
from ioncorr.montecarlo import (
    EnsembleConfig,
    ObservationSpec,
    SweepSpec,
    reduce_samples,
    run_ensemble,
    run_sweep,
    sample_moments,
    tune_axial_frequency,
)
from oracles import two_ion_g2

DRIVE = DriveParams.from_saturation(0.62)
AXIS = ObservationGeometry((0.0, 0.0, 1.0))
CLEAN = EnsembleConfig(1, JitterModel(0.0), DarkIonModel(0.0))


def noisy(n=1000, seed=7, estimator="ratio_of_averages", block_size=64):
    return EnsembleConfig(n, JitterModel(70e-9), DarkIonModel(0.4), seed, estimator, block_size)


# ------------------------------------------------------------ ensembles

def test_thread_count_does_not_change_samples():
    chain = equilibrium_positions(4)
    ref = sample_moments(chain, DRIVE, AXIS, noisy(), threads=1)
    for threads in (4, 8):
        out = sample_moments(chain, DRIVE, AXIS, noisy(), threads=threads)
        for a, b in zip(ref, out):
            assert np.array_equal(a, b)


def test_seed_and_key_select_streams():
    chain = equilibrium_positions(4)
    a = run_ensemble(chain, DRIVE, AXIS, noisy(seed=1))
    b = run_ensemble(chain, DRIVE, AXIS, noisy(seed=2))
    c = run_ensemble(chain, DRIVE, AXIS, noisy(seed=1), key=(3,))
    assert a.g2_zero != b.g2_zero and a.g2_zero != c.g2_zero


def test_degenerate_ensemble_equals_noise_free():
    chain = equilibrium_positions(5)
    cfg = EnsembleConfig(50, JitterModel(0.0), DarkIonModel(0.0))
    res = run_ensemble(chain, DRIVE, AXIS, cfg)
    assert res.g2_zero == pytest.approx(g2_zero_closed(chain, DRIVE, AXIS), rel=1e-12)
    assert res.mean_intensity == pytest.approx(intensity(chain, DRIVE, AXIS), rel=1e-12)
    assert res.g2_average_of_ratios == pytest.approx(res.g2_ratio_of_averages, rel=1e-12)
    assert res.n_used == 50 and res.n_skipped == 0


def test_split_halves_agree_within_three_sigma():
    chain = equilibrium_positions(4)
    a = run_ensemble(chain, DRIVE, AXIS, noisy(4000, seed=10))
    b = run_ensemble(chain, DRIVE, AXIS, noisy(4000, seed=11))
    assert abs(a.g2_zero - b.g2_zero) < 3 * math.hypot(a.stderr_g2, b.stderr_g2)
    assert abs(a.mean_intensity - b.mean_intensity) < 3 * math.hypot(a.stderr_intensity, b.stderr_intensity)


def test_stderr_scales_as_inverse_root_n():
    chain = equilibrium_positions(4)
    small = run_ensemble(chain, DRIVE, AXIS, noisy(1000, seed=3))
    large = run_ensemble(chain, DRIVE, AXIS, noisy(16000, seed=3))
    assert small.stderr_g2 / large.stderr_g2 == pytest.approx(4.0, rel=0.2)


def test_all_dark_is_domain_error():
    chain = equilibrium_positions(3)
    with pytest.raises(DomainError):
        run_ensemble(chain, DRIVE, AXIS, EnsembleConfig(20, dark=DarkIonModel(1.0)))


def test_skipped_realisations_are_counted():
    chain = equilibrium_positions(1)
    res = run_ensemble(chain, DRIVE, AXIS, EnsembleConfig(2000, dark=DarkIonModel(0.5), master_seed=4))
    assert res.n_used + res.n_skipped == 2000
    assert res.n_skipped == pytest.approx(1000, abs=150)
    assert abs(res.g2_zero) < 1e-15


def test_estimators_differ_at_dark_fringe():
    drive = DriveParams.from_saturation(0.6)
    omega = tune_axial_frequency(18, TrapParams(), drive, "destructive", "extreme")
    chain = equilibrium_positions(18, TrapParams(axial_frequency=omega))
    roa = run_ensemble(chain, drive, AXIS, noisy(2000))
    aor = run_ensemble(chain, drive, AXIS, noisy(2000, estimator="average_of_ratios"))
    assert roa.g2_ratio_of_averages == aor.g2_ratio_of_averages
    assert roa.g2_zero == roa.g2_ratio_of_averages and aor.g2_zero == aor.g2_average_of_ratios
    assert abs(roa.g2_zero - aor.g2_zero) > 3 * roa.stderr_g2


def test_reduce_samples_keeps_samples():
    res = reduce_samples(np.array([1.0, 2.0, 0.0]), np.array([1.0, 2.0, 0.0]), np.array([1, 2, 0]), keep_samples=True)
    assert res.n_skipped == 1
    assert len(res.samples["intensity"]) == 2
    assert res.g2_zero == pytest.approx(1.5 / 1.5**2)


@pytest.mark.parametrize("kw", [{"n_realizations": 0}, {"estimator": "median"}, {"block_size": 0}])
def test_ensemble_config_validation(kw):
    with pytest.raises(DomainError):
        EnsembleConfig(**kw)


# ---------------------------------------------------------------- sweeps

def test_two_ion_trap_sweep_matches_closed_form():
    omegas = np.linspace(2 * math.pi * 0.3e6, constants.AXIAL_FREQUENCY_MAX, 9)
    spec = SweepSpec("axial_frequency", omegas, n_ions=2, drive=DRIVE, ensemble=CLEAN)
    q = AXIS.scattering_vector(DRIVE)
    for row in run_sweep(spec):
        pos = equilibrium_positions(2, TrapParams(axial_frequency=row.value)).positions
        assert row.noise_free_g2 == pytest.approx(two_ion_g2(0.62, float(q @ (pos[1] - pos[0]))), rel=1e-10)


def test_trap_sweep_anticorrelates_intensity_and_g2():
    omegas = np.linspace(2 * math.pi * 0.8e6, constants.AXIAL_FREQUENCY_MAX, 41)
    spec = SweepSpec("axial_frequency", omegas, n_ions=4, drive=DRIVE, ensemble=CLEAN)
    rows = run_sweep(spec)
    g = np.array([r.noise_free_g2 for r in rows])
    i = np.array([r.noise_free_intensity for r in rows])
    assert np.corrcoef(g, i)[0, 1] < -0.5
    assert g.min() < 1.5 < g.max()


def test_saturation_sweep_approaches_incoherent_floor():
    spec = SweepSpec("saturation", [0.1, 1.0, 10.0, 1e3, 1e6], n_ions=4, ensemble=CLEAN)
    g = np.array([r.noise_free_g2 for r in run_sweep(spec)])
    gap = np.abs(g - 2 * (1 - 1 / 4))
    assert gap[-1] < 1e-3
    assert np.all(np.diff(gap[1:]) < 0)


def test_ion_number_sweep_reports_asymptote():
    spec = SweepSpec("ion_number", range(2, 8), drive=DriveParams.from_saturation(0.6),
                     observation=ObservationSpec("constructive"), ensemble=CLEAN)
    rows = run_sweep(spec)
    assert all(r.ok for r in rows)
    eq6 = [r.eq6 for r in rows]
    assert np.all(np.diff(eq6) > 0) and eq6[-1] < 1.343
    assert [r.n_ions for r in rows] == list(range(2, 8))


def test_failing_row_is_recorded_not_raised():
    spec = SweepSpec("ion_number", [3, 2], ensemble=EnsembleConfig(5, dark=DarkIonModel(1.0)))
    rows = run_sweep(spec)
    assert not any(r.ok for r in rows)
    assert rows[0].error.startswith("domain")


def test_observation_angle_sweep_fixed_directions():
    spec = SweepSpec("observation_angle", [0.0, math.pi / 2], ensemble=CLEAN)
    rows = run_sweep(spec)
    assert rows[0].direction == pytest.approx((0.0, 0.0, 1.0))
    assert rows[1].direction == pytest.approx((1.0, 0.0, 0.0), abs=1e-15)


@pytest.mark.parametrize(
    "args",
    [
        ("temperature", [1.0]),
        ("ion_number", []),
        ("ion_number", [2.5]),
        ("saturation", [-1.0]),
        ("axial_frequency", [2 * math.pi * 2e6]),
        ("observation_angle", [4.0]),
    ],
)
def test_sweep_spec_validation(args):
    with pytest.raises(DomainError):
        SweepSpec(*args)


def test_cannot_tune_trap_while_sweeping_it():
    with pytest.raises(DomainError):
        SweepSpec("axial_frequency", [1e6], observation=ObservationSpec("constructive"))
    SweepSpec("axial_frequency", [1e6], observation=ObservationSpec("constructive", search="cone"))


# ------------------------------------------------------------- tuning

def test_destructive_tuning_finds_dark_fringe():
    drive = DriveParams.from_saturation(0.6)
    omega = tune_axial_frequency(18, TrapParams(), drive, "destructive", "extreme")
    assert constants.AXIAL_FREQUENCY_MIN <= omega <= constants.AXIAL_FREQUENCY_MAX
    chain = equilibrium_positions(18, TrapParams(axial_frequency=omega))
    # elastic intensity vanishes; the spontaneous part remains
    n_sat = 18 * 0.6**2 / (2 * 1.6**2)
    assert intensity(chain, drive, AXIS) == pytest.approx(n_sat, rel=1e-6)


def test_tuning_rejects_bad_arguments():
    with pytest.raises(DomainError):
        tune_axial_frequency(4, TrapParams(), DRIVE, "sideways")
    with pytest.raises(DomainError):
        tune_axial_frequency(4, TrapParams(), DRIVE, window=(2.0, 1.0))
