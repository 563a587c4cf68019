import dataclasses
import json

import numpy as np
import pytest

from nvforge import load_config, paper_default
from nvforge.cli import main
from nvforge.io import read_csv_columns, write_csv_columns, write_streams
from nvforge.photophysics import beamsplit, simulate_echo_curve, simulate_photon_stream
from nvforge.seeds import derive_seed


@pytest.fixture()
def config_path(tmp_path, small_config_dict):
    p = tmp_path / "config.json"
    p.write_text(json.dumps(small_config_dict))
    return p


class TestExitCodes:
    def test_success_is_zero(self, tmp_path, capsys):
        rc = main(["arrhenius", "--out", str(tmp_path / "a.json")])
        assert rc == 0

    def test_config_error_is_two(self, tmp_path, capsys):
        rc = main(["report", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)])
        assert rc == 2
        assert "cannot read config" in capsys.readouterr().err

    def test_schema_violation_is_two_with_field_path(self, tmp_path, capsys, small_config_dict):
        bad = json.loads(json.dumps(small_config_dict))
        bad["hbt"] = {"duration_s": -2.0}
        p = tmp_path / "bad.json"
        p.write_text(json.dumps(bad))
        rc = main(["simulate", "--config", str(p), "--out", str(tmp_path)])
        assert rc == 2
        assert "$.hbt.duration_s" in capsys.readouterr().err

    def test_validation_error_is_two(self, tmp_path, capsys):
        p = tmp_path / "one_bin.csv"
        p.write_text("bin_center_ns,counts,normalization\n0.5,10,100.0\n")
        rc = main(["fit", "g2", str(p)])
        assert rc == 2
        assert "two bins" in capsys.readouterr().err

    def test_nonconvergence_is_three_but_writes_artifact(self, tmp_path, capsys):
        rng = np.random.default_rng(4)
        f = np.linspace(-30.0, 30.0, 121)
        p = tmp_path / "flat.csv"
        write_csv_columns(p, ["frequency_mhz", "counts"],
                          [f, rng.poisson(100.0, f.size).astype(float)])
        out = tmp_path / "ple_fit.json"
        rc = main(["fit", "ple", str(p), "--out", str(out)])
        assert rc == 3
        assert "no significant peak" in capsys.readouterr().err
        assert json.loads(out.read_text())["converged"] is False

    def test_io_error_is_four(self, tmp_path, capsys):
        rc = main(["fit", "ple", str(tmp_path / "nowhere.csv")])
        assert rc == 4


class TestArrhenius:
    def test_default_summary(self, capsys):
        rc = main(["arrhenius"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["diffusion_length_nm"] == pytest.approx(98.0, abs=1e-9)
        assert payload["displacement_scale_r0_nm"] == pytest.approx(196.0, abs=1e-9)
        assert payload["diffusivity_cm2_s"] == pytest.approx(8.892592592592592e-15, rel=1e-12)
        assert payload["activation_energy_ev"] == pytest.approx(2.174371693245501, abs=1e-9)

    def test_activation_override(self, capsys):
        rc = main(["arrhenius", "--activation-energy-ev", "2.0179559753794276"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["diffusivity_cm2_s"] == pytest.approx(8.892592592592592e-15, rel=1e-9)

    def test_conflicting_overrides_rejected(self, capsys):
        rc = main(["arrhenius", "--activation-energy-ev", "2.0", "--diffusivity-cm2-s", "1e-14"])
        assert rc == 2
        assert "not both" in capsys.readouterr().err


class TestDecomposedPipeline:
    def test_matches_end_to_end_campaign(self, tmp_path, capsys, config_path, small_config_dict):
        out = tmp_path / "stages"
        assert main(["simulate", "--config", str(config_path), "--out", str(out)]) == 0
        assert main(["anneal", "--config", str(config_path), "--out", str(out),
                     str(out / "vacancies.json")]) == 0
        assert main(["characterize", "--config", str(config_path), "--out", str(out),
                     str(out / "nvs.json")]) == 0
        assert main(["stats", "--config", str(config_path), "--out", str(out),
                     str(out / "characterization.csv")]) == 0

        from nvforge import run_campaign

        report = run_campaign(load_config(small_config_dict), out_dir=tmp_path / "direct")
        staged = json.loads((out / "characterization.json").read_text())
        assert staged["config_hash"] == report.config_hash
        by_site = {(s["row"], s["col"]): s for s in staged["sites"]}
        for site in report.sites:
            rec = by_site[(site.row, site.col)]
            assert rec["emitter_class"] == site.emitter_class
            assert rec["n_nvs"] == site.n_nvs
        assert (out / "rows.csv").read_bytes() == (tmp_path / "direct" / "rows.csv").read_bytes()

    def test_config_mismatch_warns_but_runs(self, tmp_path, capsys, config_path):
        out = tmp_path / "stages"
        assert main(["simulate", "--config", str(config_path), "--out", str(out)]) == 0
        capsys.readouterr()
        rc = main(["anneal", "--config", str(config_path), "--seed", "777",
                   "--out", str(out), str(out / "vacancies.json")])
        assert rc == 0
        assert "different configuration" in capsys.readouterr().err


class TestFitSubcommands:
    def test_echo_recovers_t2(self, tmp_path, capsys, default_cfg):
        cfg = dataclasses.replace(default_cfg.echo,
                                  tau_grid_us=list(np.linspace(2.0, 120.0, 1000)))
        tau, y = simulate_echo_curve(cfg, seed=12)
        p = tmp_path / "echo.csv"
        write_csv_columns(p, ["tau_us", "intensity"], [tau, y])
        out = tmp_path / "echo_fit.json"
        assert main(["fit", "echo", str(p), "--out", str(out)]) == 0
        result = json.loads(out.read_text())
        assert result["model"] == "echo"
        assert result["params"]["t2_us"] == pytest.approx(48.0, abs=2.0)

    def test_displacement_on_campaign_singles(self, tmp_path, default_report):
        report, _ = default_report
        radii = [s.displacement_nm for s in report.sites
                 if s.emitter_class == "one" and s.displacement_nm is not None]
        assert len(radii) >= 20
        p = tmp_path / "radii.csv"
        write_csv_columns(p, ["radius_nm"], [np.array(radii)])
        out = tmp_path / "disp_fit.json"
        assert main(["fit", "displacement", str(p), "--out", str(out)]) == 0
        result = json.loads(out.read_text())
        # r0^2 = 4 Dt + 2 sigma_f^2 with Dt = (98 nm)^2 and FWHM 350 nm focus
        cfg = paper_default()
        sigma_f = cfg.yield_params.focal_fwhm_xy_nm / (2.0 * np.sqrt(2.0 * np.log(2.0)))
        expected = np.sqrt(4.0 * 98.0**2 + 2.0 * sigma_f**2)
        assert result["params"]["r0_nm"] == pytest.approx(expected, abs=25.0)

    def test_trpl_with_flags(self, tmp_path, default_cfg):
        from nvforge.photophysics import gaussian_irf, simulate_trpl

        irf = gaussian_irf(350.0, 0.05)
        hist = simulate_trpl(12.8, irf, 1e5, seed=3)
        p = tmp_path / "trpl.csv"
        write_csv_columns(p, ["time_ns", "counts"], [hist.bin_centers_ns, hist.counts])
        out = tmp_path / "trpl_fit.json"
        assert main(["fit", "trpl", str(p), "--irf-fwhm-ps", "350", "--out", str(out)]) == 0
        result = json.loads(out.read_text())
        assert result["params"]["t1_ns"] == pytest.approx(12.8, abs=0.1)
        assert result["extras"]["irf_fwhm_ps"] == 350.0

    def test_localize_headerless_matrix(self, tmp_path):
        from nvforge.analysis.models import gaussian2d

        yy, xx = np.indices((15, 15))
        img = gaussian2d((xx.ravel() * 100.0, yy.ravel() * 100.0),
                         np.array([700.0, 800.0, 212.0, 900.0, 10.0])).reshape(15, 15)
        p = tmp_path / "image.csv"
        np.savetxt(p, img, delimiter=",")
        out = tmp_path / "loc.json"
        assert main(["fit", "localize", str(p), "--pixel-size-nm", "100", "--out", str(out)]) == 0
        result = json.loads(out.read_text())
        assert result["x_nm"] == pytest.approx(700.0, abs=1e-3)
        assert result["y_nm"] == pytest.approx(800.0, abs=1e-3)

    def test_localize_requires_pixel_size(self, tmp_path, capsys):
        p = tmp_path / "image.csv"
        np.savetxt(p, np.ones((5, 5)), delimiter=",")
        assert main(["fit", "localize", str(p)]) == 2
        assert "--pixel-size-nm" in capsys.readouterr().err


class TestStreamCharacterize:
    def test_single_emitter_classified_one(self, tmp_path, capsys, default_cfg):
        dur_ps = 10_000_000_000  # 10 ms
        stream = simulate_photon_stream(default_cfg.rates, dur_ps, 0.0,
                                        derive_seed(1, 0, 0, 2, 0))
        a, b = beamsplit(stream, derive_seed(1, 0, 0, 3))
        pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
        write_streams(pa, a)
        write_streams(pb, b)
        rc = main(["characterize", "--stream-a", str(pa), "--stream-b", str(pb),
                   "--duration-ps", str(dur_ps), "--out", str(tmp_path)])
        assert rc == 0
        fitted = json.loads((tmp_path / "hbt_fit.json").read_text())
        assert fitted["emitter_class"] == "one"
        assert fitted["params"]["g2_0"] < 0.32
        hist_cols = read_csv_columns(tmp_path / "hbt_hist.csv",
                                     required=["bin_center_ns", "counts", "normalization"])
        assert hist_cols["counts"].sum() > 0

    def test_stream_mode_needs_both_files(self, tmp_path, capsys):
        rc = main(["characterize", "--stream-a", str(tmp_path / "a.csv")])
        assert rc == 2
        assert "both" in capsys.readouterr().err

    def test_no_input_at_all(self, capsys):
        assert main(["characterize"]) == 2


class TestReportAndPlot:
    def test_report_writes_figures(self, tmp_path, capsys, config_path):
        out = tmp_path / "rep"
        assert main(["report", "--config", str(config_path), "--out", str(out)]) == 0
        for name in ("report.json", "rows.csv", "sites.csv",
                     "fig_row_stats.svg", "fig_row_stats.csv",
                     "fig_classes.svg", "fig_classes.csv"):
            assert (out / name).exists(), name

    def test_plot_from_report_json(self, tmp_path, default_report, capsys):
        _, campaign_out = default_report
        out = tmp_path / "figs"
        rc = main(["plot", str(campaign_out / "report.json"), "--out", str(out)])
        assert rc == 0
        assert (out / "fig_row_stats.svg").exists()
        assert (out / "fig_displacement.csv").exists()

    def test_plot_fit_artifact_needs_data(self, tmp_path, capsys, default_cfg):
        cfg = dataclasses.replace(default_cfg.echo,
                                  tau_grid_us=list(np.linspace(2.0, 120.0, 200)))
        tau, y = simulate_echo_curve(cfg, seed=5)
        data = tmp_path / "echo.csv"
        write_csv_columns(data, ["tau_us", "intensity"], [tau, y])
        fit_json = tmp_path / "echo_fit.json"
        assert main(["fit", "echo", str(data), "--out", str(fit_json)]) == 0

        rc = main(["plot", str(fit_json)])
        assert rc == 2
        assert "--data" in capsys.readouterr().err

        base = tmp_path / "echo_plot"
        rc = main(["plot", str(fit_json), "--data", str(data), "--out", str(base)])
        assert rc == 0
        cols = read_csv_columns(tmp_path / "echo_plot.csv",
                                required=["tau_us", "intensity", "model"])
        assert cols["model"].min() > 0.4
