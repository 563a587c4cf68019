import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nvforge import constants
from nvforge.fabrication import (
    DamageState,
    PulseGridSpec,
    YieldModelParams,
    damage_state_for_energy,
    energy_after_objective,
    mean_vacancy_yield,
    simulate_grid,
    simulate_site,
)


@pytest.fixture(scope="module")
def yp(default_cfg=None):
    from nvforge import paper_default

    return paper_default().yield_params


def test_energy_after_objective_table_endpoints():
    assert energy_after_objective(118.0) == pytest.approx(82.6, abs=1e-9)
    assert energy_after_objective(16.0) == pytest.approx(11.2, abs=1e-9)
    assert energy_after_objective(0.0) == 0.0


def test_energy_after_objective_rejects_negative():
    with pytest.raises(ValueError):
        energy_after_objective(-1.0)


def test_energy_after_objective_vectorized():
    before = np.array([118.0, 16.0, 0.0])
    out = energy_after_objective(before)
    np.testing.assert_allclose(out, 0.7 * before)


def test_mean_yield_zero_at_threshold(yp):
    assert mean_vacancy_yield(yp.e_th_nj, yp) == 0.0
    assert mean_vacancy_yield(0.5 * yp.e_th_nj, yp) == 0.0


def test_mean_yield_unit_reduced_energy(yp):
    p = dataclasses.replace(yp, e_th_nj=16.0, gamma=2.0, scale=3.0)
    assert mean_vacancy_yield(32.0, p) == pytest.approx(3.0, rel=1e-12)


@given(st.floats(min_value=16.0, max_value=36.0), st.floats(min_value=16.0, max_value=36.0))
def test_mean_yield_monotone_in_energy(e_lo, e_hi):
    from nvforge import paper_default

    p = paper_default().yield_params
    if e_lo > e_hi:
        e_lo, e_hi = e_hi, e_lo
    assert mean_vacancy_yield(e_lo, p) <= mean_vacancy_yield(e_hi, p)


def test_damage_states_by_energy(yp):
    assert damage_state_for_energy(10.0, yp) is DamageState.NONE
    assert damage_state_for_energy(25.7, yp) is DamageState.VACANCIES
    assert damage_state_for_energy(40.0, yp) is DamageState.GRAPHITIZED


def test_site_below_threshold_is_empty(yp):
    cloud = simulate_site(10.0, yp, seed=7)
    assert cloud.damage_state is DamageState.NONE
    assert len(cloud.positions_nm) == 0


def test_site_above_e2_is_graphitized(yp):
    cloud = simulate_site(40.0, yp, seed=7)
    assert cloud.damage_state is DamageState.GRAPHITIZED


def test_site_determinism(yp):
    a = simulate_site(25.7, yp, seed=11)
    b = simulate_site(25.7, yp, seed=11)
    assert a.damage_state is b.damage_state
    np.testing.assert_array_equal(a.positions_nm, b.positions_nm)


def test_site_positions_scatter_matches_focal_volume(yp):
    # focal FWHM 350 nm in xy, 2 um in z; pooled sample std must sit near
    # sigma = fwhm / 2.3548 for each axis
    pos = []
    for seed in range(400):
        c = simulate_site(30.2, yp, seed=seed)
        if len(c.positions_nm):
            pos.append(np.asarray(c.positions_nm))
    xyz = np.concatenate(pos)
    assert xyz.shape[1] == 3
    sig_xy = yp.focal_fwhm_xy_nm / (2.0 * np.sqrt(2.0 * np.log(2.0)))
    sig_z = 1e3 * yp.focal_fwhm_z_um / (2.0 * np.sqrt(2.0 * np.log(2.0)))
    for axis, sig in ((0, sig_xy), (1, sig_xy), (2, sig_z)):
        assert np.std(xyz[:, axis]) == pytest.approx(sig, rel=0.12)


def test_grid_has_one_cloud_per_site(default_cfg):
    clouds = simulate_grid(default_cfg.grid, default_cfg.yield_params, master_seed=1)
    assert len(clouds) == 25 * 20
    assert sorted(c.site_index for c in clouds) == [
        (r, c) for r in range(25) for c in range(20)
    ]


def test_grid_same_row_iid_but_not_identical(default_cfg):
    clouds = simulate_grid(default_cfg.grid, default_cfg.yield_params, master_seed=1)
    row5 = [c for c in clouds if c.site_index[0] == 5]
    assert len({len(c.positions_nm) for c in row5}) > 1 or any(
        not np.array_equal(row5[0].positions_nm, c.positions_nm) for c in row5[1:]
    )
    assert all(c.energy_nj == row5[0].energy_nj for c in row5)


def test_grid_order_independence(default_cfg):
    spec = dataclasses.replace(default_cfg.grid, rows=3, cols=4,
                               energies_nj_per_row=[30.2, 25.7, 20.5])
    base = simulate_grid(spec, default_cfg.yield_params, master_seed=9)
    order = [(r, c) for r in range(3) for c in range(4)][::-1]
    perm = simulate_grid(spec, default_cfg.yield_params, master_seed=9, site_order=order)
    by_site = {c.site_index: c for c in perm}
    for cloud in base:
        np.testing.assert_array_equal(cloud.positions_nm, by_site[cloud.site_index].positions_nm)


def test_grid_rejects_bad_order(default_cfg):
    spec = dataclasses.replace(default_cfg.grid, rows=2, cols=2,
                               energies_nj_per_row=[30.2, 25.7])
    with pytest.raises(ValueError):
        simulate_grid(spec, default_cfg.yield_params, master_seed=9,
                      site_order=[(0, 0), (0, 1), (1, 0), (0, 0)])


def test_default_energy_ladder_matches_calibration_table(default_cfg):
    assert default_cfg.grid.energies_nj_per_row == constants.FABRICATION_ENERGIES_NJ
    assert len(constants.PULSE_ENERGY_TABLE_NJ) == 26
