import dataclasses

import numpy as np
import pytest
from scipy.linalg import null_space

from nvforge.photophysics import (
    EmitterRates,
    PhotonStream,
    background_stream,
    beamsplit,
    echo_ideal,
    expected_detection_rate_cps,
    gaussian_irf,
    jitter_sigma_for_aggregate_fwhm,
    merge_streams,
    simulate_echo_curve,
    simulate_photon_stream,
    simulate_ple_stack,
    simulate_trpl,
    steady_state_occupancy,
)

FAST = EmitterRates(k_exc=0.5, k_rad=0.5, k_isc=0.05, k_deshelve=0.02,
                    detection_efficiency=0.3)


def occupancy_oracle(rates):
    """Stationary distribution from the generator's null space (scipy)."""
    q = np.array([
        [-rates.k_exc, rates.k_rad, rates.k_deshelve],
        [rates.k_exc, -(rates.k_rad + rates.k_isc), 0.0],
        [0.0, rates.k_isc, -rates.k_deshelve],
    ])
    vec = null_space(q)[:, 0]
    vec = vec / vec.sum()
    return {"ground": vec[0], "excited": vec[1], "shelved": vec[2]}


@pytest.mark.parametrize("rates", [
    FAST,
    EmitterRates(0.06796875, 0.078125, 0.0015, 1.0 / 300.0, 0.1),
    EmitterRates(0.2, 0.1, 0.0, 0.01, 1.0),
])
def test_steady_state_matches_null_space(rates):
    got = steady_state_occupancy(rates)
    want = occupancy_oracle(rates)
    for k in ("ground", "excited", "shelved"):
        assert got[k] == pytest.approx(want[k], abs=1e-12)
    assert sum(got.values()) == pytest.approx(1.0, abs=1e-12)


def test_rates_validation():
    with pytest.raises(ValueError):
        EmitterRates(-0.1, 0.1, 0.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        EmitterRates(0.1, 0.0, 0.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        EmitterRates(0.1, 0.1, 0.0, 0.0, 1.5)


def test_zero_efficiency_zero_background_is_empty():
    rates = dataclasses.replace(FAST, detection_efficiency=0.0)
    s = simulate_photon_stream(rates, duration_ps=10_000_000, seed=4)
    assert s.timestamps_ps.size == 0
    assert s.duration_ps == 10_000_000


def test_count_rate_matches_steady_state():
    duration_ps = 400_000_000
    s = simulate_photon_stream(FAST, duration_ps, seed=11)
    expected = expected_detection_rate_cps(FAST) * duration_ps * 1e-12
    assert abs(s.timestamps_ps.size - expected) < 3.0 * np.sqrt(expected)
    # and the analytic rate is occupancy * k_rad * efficiency
    occ = steady_state_occupancy(FAST)
    analytic = occ["excited"] * FAST.k_rad * 1e9 * FAST.detection_efficiency
    assert expected_detection_rate_cps(FAST) == pytest.approx(analytic, rel=1e-12)


def test_stream_determinism_and_ordering():
    a = simulate_photon_stream(FAST, 50_000_000, seed=9)
    b = simulate_photon_stream(FAST, 50_000_000, seed=9)
    np.testing.assert_array_equal(a.timestamps_ps, b.timestamps_ps)
    assert np.all(np.diff(a.timestamps_ps) > 0)
    assert a.timestamps_ps[0] >= 0 and a.timestamps_ps[-1] <= 50_000_000


def test_occupancy_fractions_match_analytic():
    _, occ = simulate_photon_stream(FAST, 500_000_000, seed=2, return_occupancy=True)
    want = occupancy_oracle(FAST)
    for k in ("ground", "excited", "shelved"):
        assert abs(occ[k] - want[k]) < 0.01


def test_background_stream_rate():
    s = background_stream(100_000_000, 1e6, seed=3)
    assert abs(s.timestamps_ps.size - 100.0) < 3.0 * 10.0
    assert np.all(np.diff(s.timestamps_ps) > 0)


def test_merge_identity_and_commutativity():
    a = simulate_photon_stream(FAST, 10_000_000, seed=1)
    b = simulate_photon_stream(FAST, 10_000_000, seed=2, channel=1)
    assert np.array_equal(merge_streams([a]).timestamps_ps, a.timestamps_ps)
    ab = merge_streams([a, b])
    ba = merge_streams([b, a])
    np.testing.assert_array_equal(ab.timestamps_ps, ba.timestamps_ps)
    assert np.all(np.diff(ab.timestamps_ps) > 0)
    # merging only deduplicates coincident ticks
    assert ab.timestamps_ps.size <= a.timestamps_ps.size + b.timestamps_ps.size
    assert ab.timestamps_ps.size >= max(a.timestamps_ps.size, b.timestamps_ps.size)


def test_beamsplit_conserves_and_balances():
    s = simulate_photon_stream(FAST, 200_000_000, seed=5)
    a, b = beamsplit(s, seed=6)
    assert a.timestamps_ps.size + b.timestamps_ps.size == s.timestamps_ps.size
    assert (a.channel, b.channel) == (0, 1)
    n = s.timestamps_ps.size
    assert abs(a.timestamps_ps.size - n / 2) < 4.0 * np.sqrt(n * 0.25)
    a2, b2 = beamsplit(s, seed=6)
    np.testing.assert_array_equal(a.timestamps_ps, a2.timestamps_ps)
    np.testing.assert_array_equal(b.timestamps_ps, b2.timestamps_ps)


def test_single_emitter_antibunching(default_cfg):
    from nvforge.analysis import correlate, fit_g2

    s = simulate_photon_stream(default_cfg.rates, 30_000_000_000, seed=12)
    a, b = beamsplit(s, seed=13)
    hist = correlate(a, b, bin_width_ns=1.0, window_ns=500.0)
    res = fit_g2(hist)
    assert res.converged
    assert res.params[0] < 0.1
    # the central normalized bin itself already dips well below 0.5
    mid = hist.counts.size // 2
    assert hist.normalized_values[mid] < 0.5


def test_ple_stack_shapes_and_centers(default_cfg):
    st = simulate_ple_stack(default_cfg.ple, seed=21)
    assert st.counts.shape == (70, 121)
    assert st.detunings_mhz.shape == (121,)
    assert st.centers_mhz.shape == (70,)


def test_ple_no_jitter_aggregate_equals_homogeneous(default_cfg):
    from nvforge.analysis import aggregate_scans

    cfg = dataclasses.replace(default_cfg.ple, jitter_sigma_mhz=0.0,
                              jump_probability=0.0, peak_counts=2000.0)
    st = simulate_ple_stack(cfg, seed=8)
    assert np.allclose(st.centers_mhz, 0.0)
    _, _, fit = aggregate_scans(st)
    assert fit.converged
    fwhm = fit.params[list(fit.param_names).index("fwhm")]
    assert fwhm == pytest.approx(13.5, abs=0.3)


def test_ple_forced_jump_shifts_centers(default_cfg):
    cfg = dataclasses.replace(default_cfg.ple, jitter_sigma_mhz=0.0, jump_probability=0.0)
    st = simulate_ple_stack(cfg, seed=8, forced_jumps=[(35, 70.0)])
    assert np.allclose(st.centers_mhz[:35], 0.0)
    assert np.allclose(st.centers_mhz[35:], 70.0)


def test_echo_ideal_limits(default_cfg):
    cfg = default_cfg.echo
    assert echo_ideal(cfg, [1e-12])[0] == pytest.approx(cfg.y0 + cfg.y1, rel=1e-9)
    assert echo_ideal(cfg, [48.0])[0] == pytest.approx(0.5 + 0.5 / np.e, rel=1e-12)
    tau = np.linspace(0.1, 200.0, 400)
    vals = echo_ideal(cfg, tau)
    assert np.all(np.diff(vals) <= 0)


def test_echo_curve_noise_scale(default_cfg):
    tau, y = simulate_echo_curve(default_cfg.echo, seed=31)
    ideal = echo_ideal(default_cfg.echo, tau)
    np.testing.assert_array_equal(tau, np.asarray(default_cfg.echo.tau_grid_us))
    # shot noise at ~3500 counts/point keeps every point within ~5 sigma
    sig = np.sqrt(ideal / default_cfg.echo.counts_per_point)
    assert np.all(np.abs(y - ideal) < 5.0 * sig)
    tau2, y2 = simulate_echo_curve(default_cfg.echo, seed=31)
    np.testing.assert_array_equal(y, y2)


def test_gaussian_irf_shape():
    irf = gaussian_irf(350.0, 0.05)
    assert irf.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(irf, irf[::-1], rtol=1e-12)
    # FWHM of the sampled kernel is 350 ps = 7 bins of 50 ps
    above = np.flatnonzero(irf >= 0.5 * irf.max())
    assert 6 <= above.size <= 8


def test_trpl_total_counts_and_delta_irf():
    h = simulate_trpl(12.8, gaussian_irf(350.0, 0.05), 1e5, seed=17)
    assert abs(h.counts.sum() - 1e5) < 3.0 * np.sqrt(1e5)
    # delta kernel: log-linear decay with slope -1/T1
    hd = simulate_trpl(12.8, np.array([1.0]), 1e6, seed=18)
    t = hd.bin_centers_ns
    good = hd.counts > 200
    slope = np.polyfit(t[good], np.log(hd.counts[good]), 1)[0]
    assert -1.0 / slope == pytest.approx(12.8, rel=0.02)


def test_trpl_validation():
    with pytest.raises(ValueError):
        simulate_trpl(0.0, np.array([1.0]), 1e5, seed=1)
    with pytest.raises(ValueError):
        simulate_trpl(12.8, np.array([0.5, 0.2]), 1e5, seed=1)
    with pytest.raises(ValueError):
        simulate_trpl(12.8, np.array([1.0]), 0.0, seed=1)


def test_jitter_sigma_search_frozen_default(default_cfg):
    sigma = jitter_sigma_for_aggregate_fwhm(13.5, 16.1)
    assert sigma == pytest.approx(2.665033791495458, rel=1e-9)
    assert default_cfg.ple.jitter_sigma_mhz == pytest.approx(sigma, rel=1e-12)


def test_stream_validation():
    with pytest.raises(ValueError):
        PhotonStream(0, np.array([5, 4], dtype=np.int64), 10)
    with pytest.raises(ValueError):
        PhotonStream(0, np.array([5, 11], dtype=np.int64), 10)
    with pytest.raises(ValueError):
        PhotonStream(300, np.array([5], dtype=np.int64), 10)
