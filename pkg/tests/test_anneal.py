import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from nvforge.anneal import (
    activation_energy,
    anneal_cloud,
    arrhenius_summary,
    diffusion_length,
    diffusivity_from_activation,
    displacement_diffusivity,
    radial_density,
    sample_displacements,
)
from nvforge.fabrication import DamageState, VacancyCloud, simulate_site

DT_NM2 = 9604.0


def test_radial_density_vanishes_at_origin():
    assert radial_density(0.0, DT_NM2) == 0.0


def test_radial_density_normalized():
    val, err = integrate.quad(lambda r: radial_density(r, DT_NM2), 0.0, np.inf)
    assert abs(val - 1.0) < 1e-6


def test_radial_density_mode():
    # mode of r * exp(-r^2 / 4Dt) sits at sqrt(2 Dt)
    r = np.linspace(1.0, 500.0, 200001)
    mode = r[np.argmax(radial_density(r, DT_NM2))]
    assert mode == pytest.approx(np.sqrt(2.0 * DT_NM2), abs=0.01)


def test_diffusion_length_paper_point():
    d = DT_NM2 * 1e-14 / 10800.0
    assert diffusion_length(d, 10800.0) == pytest.approx(98.0, abs=1e-9)
    assert diffusion_length(0.0, 10800.0) == 0.0


def test_sample_displacements_zero_dt():
    np.testing.assert_array_equal(sample_displacements(64, 0.0, seed=0), np.zeros((64, 3)))


def test_sample_displacements_radial_distribution():
    xyz = sample_displacements(100_000, DT_NM2, seed=20260814)
    r = np.hypot(xyz[:, 0], xyz[:, 1])
    # moment identity: E[x^2 + y^2] = 4 Dt
    mean_r2 = float(np.mean(r**2))
    se = float(np.std(r**2, ddof=1) / np.sqrt(r.size))
    assert abs(mean_r2 - 4.0 * DT_NM2) < 3.0 * se
    # chi-square goodness of fit against the radial density at the 1% level
    edges = np.linspace(0.0, 500.0, 26)
    observed, _ = np.histogram(r, bins=edges)
    probs = np.array([
        integrate.quad(lambda x: radial_density(x, DT_NM2), lo, hi)[0]
        for lo, hi in zip(edges[:-1], edges[1:])
    ])
    tail = 1.0 - probs.sum()
    observed = np.append(observed, r.size - observed.sum())
    expected = r.size * np.append(probs, tail)
    chi2 = float(np.sum((observed - expected) ** 2 / expected))
    dof = observed.size - 1
    assert chi2 < stats.chi2.ppf(0.99, dof)


def test_rms_radial_displacement_round_trip():
    xyz = sample_displacements(100_000, DT_NM2, seed=3)
    rms = float(np.sqrt(np.mean(xyz[:, 0] ** 2 + xyz[:, 1] ** 2)))
    assert rms == pytest.approx(2.0 * np.sqrt(DT_NM2), rel=0.01)


def test_activation_energy_paper_point():
    assert activation_energy(3.7e-14, 3.6e-6, 1273.15) == pytest.approx(2.018, abs=0.001)
    assert activation_energy(3.6e-6, 3.6e-6, 1273.15) == 0.0


@given(st.floats(min_value=1e-16, max_value=1e-10), st.floats(min_value=900.0, max_value=1600.0))
def test_activation_energy_round_trip(d, t_k):
    ea = activation_energy(d, 3.6e-6, t_k)
    back = diffusivity_from_activation(ea, 3.6e-6, t_k)
    assert back == pytest.approx(d, rel=1e-10)


def test_diffusivity_from_activation_points():
    assert diffusivity_from_activation(0.0, 3.6e-6, 1273.15) == 3.6e-6
    assert diffusivity_from_activation(2.0, 3.6e-6, 1273.15) == pytest.approx(4.3e-14, rel=0.05)


def test_diffusivity_approaches_prefactor_with_temperature():
    temps = [1000.0, 2000.0, 4000.0, 8000.0]
    vals = [diffusivity_from_activation(2.0, 3.6e-6, t) for t in temps]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 3.6e-6


def test_displacement_diffusivity_conventions():
    # half: Dt = (r0/2)^2; full: Dt = r0^2. the package default is half.
    assert displacement_diffusivity(196.0, 10800.0) == pytest.approx(8.892592592592592e-15, rel=1e-12)
    assert displacement_diffusivity(196.0, 10800.0, convention="full") == pytest.approx(
        4.0 * 8.892592592592592e-15, rel=1e-12
    )
    with pytest.raises(ValueError):
        displacement_diffusivity(196.0, 10800.0, convention="other")


def test_arrhenius_summary_default_recipe(default_cfg):
    res = arrhenius_summary(default_cfg.anneal)
    assert res.temperature_k == pytest.approx(1273.15)
    assert res.diffusivity_cm2_s == pytest.approx(8.892592592592592e-15, rel=1e-12)
    assert res.diffusion_length_nm == pytest.approx(98.0, abs=1e-9)
    assert res.activation_energy_ev == pytest.approx(2.174371693245501, rel=1e-12)


def test_anneal_empty_cloud(default_cfg):
    empty = VacancyCloud(site_index=(0, 0), energy_nj=10.0, positions_nm=np.zeros((0, 3)),
                         damage_state=DamageState.NONE)
    assert anneal_cloud(empty, default_cfg.anneal, seed=1) == []


def test_anneal_zero_conversion(default_cfg):
    cloud = simulate_site(30.2, default_cfg.yield_params, seed=5)
    cfg = dataclasses.replace(default_cfg.anneal, conversion_probability=0.0)
    assert anneal_cloud(cloud, cfg, seed=1) == []


@given(st.integers(min_value=0, max_value=500))
def test_nv_count_never_exceeds_vacancy_count(seed):
    from nvforge import paper_default

    cfg = paper_default()
    cloud = simulate_site(30.2, cfg.yield_params, seed=seed)
    nvs = anneal_cloud(cloud, cfg.anneal, seed=seed + 1)
    assert len(nvs) <= len(cloud.positions_nm)


def test_anneal_determinism(default_cfg):
    cloud = simulate_site(30.2, default_cfg.yield_params, seed=21)
    a = anneal_cloud(cloud, default_cfg.anneal, seed=2)
    b = anneal_cloud(cloud, default_cfg.anneal, seed=2)
    assert len(a) == len(b)
    for ra, rb in zip(a, b):
        np.testing.assert_array_equal(ra.position_nm, rb.position_nm)


def test_anneal_displacement_scale(default_cfg):
    # NV ends up at vacancy position + diffusion displacement; in-plane RMS
    # of the displacement alone is 2 sqrt(Dt) = 196 nm
    deltas = []
    for seed in range(2500):
        # 23.6 nJ leaves the two-trap binomial unsaturated, so single-vacancy
        # clouds (the only ones where the pairing is unambiguous) are common
        cloud = simulate_site(23.6, default_cfg.yield_params, seed=seed)
        nvs = anneal_cloud(cloud, default_cfg.anneal, seed=10_000 + seed)
        if len(cloud.positions_nm) == 1 and len(nvs) == 1:
            deltas.append(np.asarray(nvs[0].position_nm) - np.asarray(cloud.positions_nm[0]))
    d = np.array(deltas)
    assert d.shape[0] > 300
    rms = float(np.sqrt(np.mean(d[:, 0] ** 2 + d[:, 1] ** 2)))
    assert rms == pytest.approx(196.0, rel=0.05)
