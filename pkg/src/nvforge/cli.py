"""Command-line front end.

Subcommands decompose the pipeline (simulate -> anneal -> characterize ->
stats) or run it end to end (report); fit/plot/arrhenius work on standalone
files. Global flags: --config (run configuration JSON, defaults to the
built-in grid), --seed (master_seed override), --out, --format.

Exit codes: 0 success, 2 configuration or input validation error, 3 fit
non-convergence, 4 I/O error.

Input file contracts (documented here because no external standard exists):

* ``fit g2``: CSV ``bin_center_ns,counts,normalization`` (uniform bins, one
  normalization constant repeated per row);
* ``fit ple``: CSV ``frequency_mhz,counts``;
* ``fit echo``: CSV ``tau_us,intensity[,sigma]``;
* ``fit trpl``: CSV ``time_ns,counts`` plus ``--irf-fwhm-ps``/``--background``;
* ``fit displacement``: CSV ``radius_nm`` plus ``--bin-width-nm``;
* ``fit localize``: headerless count matrix CSV plus ``--pixel-size-nm``;
* timestamp streams (characterize --stream-a/--stream-b): see the io module.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import (
    CorrelationHistogram,
    SiteClassification,
    classify_emitter_count,
    correlate,
    fit_displacement,
    fit_echo,
    fit_g2,
    fit_lorentzian,
    fit_trpl,
    localize_emitter,
    row_statistics,
)
from .anneal import AnnealConfig, anneal_cloud, arrhenius_summary
from .campaign import (
    STAGE_ANNEAL,
    characterize_site,
    run_campaign,
    write_row_stats_csv,
)
from .config import ConfigError, RunConfig, load_config, paper_default
from .fabrication import DamageState, VacancyCloud, simulate_grid
from .io import ingest_timestamps, read_csv_columns, write_csv_columns, write_json
from .photophysics import DecayHistogram, PhotonStream, gaussian_irf
from .plots import emit_plot_data, render_report_figures
from .seeds import derive_seed

__all__ = ["main"]

FIT_KINDS = ("g2", "ple", "echo", "trpl", "displacement", "localize")


class FitNonConvergence(Exception):
    """Raised after artifacts are written when a requested fit failed."""


def _load_cfg(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else paper_default()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, master_seed=int(args.seed))
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out) if args.out else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _out_file(args, default_name: str) -> Path:
    """Resolve --out as a file path; a directory (or no --out) gets a default name."""
    if args.out is None:
        return Path(default_name)
    out = Path(args.out)
    if out.is_dir() or str(args.out).endswith("/"):
        out.mkdir(parents=True, exist_ok=True)
        return out / default_name
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def _read_artifact(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: not valid JSON ({e})") from None


# ---------------------------------------------------------------- simulate


def cmd_simulate(args) -> None:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    clouds = simulate_grid(cfg.grid, cfg.yield_params, cfg.master_seed)
    artifact = {
        "config_hash": cfg.config_hash(),
        "master_seed": cfg.master_seed,
        "sites": [
            {
                "row": c.site_index[0],
                "col": c.site_index[1],
                "energy_nj": c.energy_nj,
                "damage_state": c.damage_state.value,
                "positions_nm": c.positions_nm.tolist(),
            }
            for c in clouds
        ],
    }
    write_json(out / "vacancies.json", artifact)
    write_csv_columns(
        out / "vacancy_sites.csv",
        ["row", "col", "energy_nj", "damage_state", "n_vacancies"],
        [
            [c.site_index[0] for c in clouds],
            [c.site_index[1] for c in clouds],
            [c.energy_nj for c in clouds],
            [c.damage_state.value for c in clouds],
            [c.n_vacancies for c in clouds],
        ],
    )
    total = sum(c.n_vacancies for c in clouds)
    print(f"simulate: {len(clouds)} sites, {total} vacancies -> {out / 'vacancies.json'}")


# ------------------------------------------------------------------ anneal


def cmd_anneal(args) -> None:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    artifact = _read_artifact(args.input)
    _check_hash(artifact, cfg, args.input)
    sites_out = []
    csv_rows = []
    total = 0
    for site in artifact["sites"]:
        row, col = int(site["row"]), int(site["col"])
        cloud = VacancyCloud(
            site_index=(row, col),
            energy_nj=float(site["energy_nj"]),
            positions_nm=np.array(site["positions_nm"], dtype=float).reshape(-1, 3),
            damage_state=DamageState(site["damage_state"]),
        )
        nvs = anneal_cloud(cloud, cfg.anneal, derive_seed(cfg.master_seed, row, col, STAGE_ANNEAL))
        total += len(nvs)
        sites_out.append(
            {
                "row": row,
                "col": col,
                "energy_nj": cloud.energy_nj,
                "damage_state": cloud.damage_state.value,
                "n_vacancies": cloud.n_vacancies,
                "nv_positions_nm": [nv.position_nm.tolist() for nv in nvs],
            }
        )
        csv_rows.append((row, col, cloud.energy_nj, cloud.damage_state.value, cloud.n_vacancies, len(nvs)))
    write_json(
        out / "nvs.json",
        {"config_hash": cfg.config_hash(), "master_seed": cfg.master_seed, "sites": sites_out},
    )
    write_csv_columns(
        out / "nv_sites.csv",
        ["row", "col", "energy_nj", "damage_state", "n_vacancies", "n_nvs"],
        [list(col) for col in zip(*csv_rows)] if csv_rows else [[]] * 6,
    )
    print(f"anneal: {len(sites_out)} sites, {total} NV centres -> {out / 'nvs.json'}")


def _check_hash(artifact: dict, cfg: RunConfig, path) -> None:
    got = artifact.get("config_hash")
    if got and got != cfg.config_hash():
        print(
            f"warning: {path} was produced under a different configuration "
            f"({got[:12]}.. vs {cfg.config_hash()[:12]}..)",
            file=sys.stderr,
        )


# ------------------------------------------------------------ characterize


def cmd_characterize(args) -> None:
    cfg = _load_cfg(args)
    if args.stream_a or args.stream_b:
        if not (args.stream_a and args.stream_b):
            raise ValueError("measured mode needs both --stream-a and --stream-b")
        _characterize_streams(args, cfg)
        return
    if not args.input:
        raise ValueError("pass an nvs.json artifact or --stream-a/--stream-b files")
    out = _out_dir(args)
    artifact = _read_artifact(args.input)
    _check_hash(artifact, cfg, args.input)
    results = []
    for site in artifact["sites"]:
        row, col = int(site["row"]), int(site["col"])
        positions = np.array(site["nv_positions_nm"], dtype=float).reshape(-1, 3)
        n_nvs = positions.shape[0]
        displacement = separation = None
        if n_nvs:
            image = positions[:, :2]
            displacement = float(np.linalg.norm(image.mean(axis=0)))
            if n_nvs >= 2:
                diffs = image[:, None, :] - image[None, :, :]
                separation = float(np.sqrt((diffs**2).sum(axis=2)).max())
        if site["damage_state"] == DamageState.GRAPHITIZED.value:
            cls, g2_0, g2_err, conv = "graphitized", None, None, None
        elif n_nvs == 0:
            cls, g2_0, g2_err, conv = "empty", None, None, None
        else:
            cls, g2_0, g2_err, conv = characterize_site(cfg, row, col, n_nvs)
        results.append(
            {
                "row": row,
                "col": col,
                "n_nvs": n_nvs,
                "emitter_class": cls,
                "displacement_nm": displacement,
                "separation_nm": separation,
                "g2_0": g2_0,
                "g2_0_stderr": g2_err,
                "g2_converged": conv,
            }
        )
    write_json(
        out / "characterization.json",
        {"config_hash": cfg.config_hash(), "master_seed": cfg.master_seed, "sites": results},
    )
    write_csv_columns(
        out / "characterization.csv",
        ["row", "col", "n_nvs", "emitter_class", "displacement_nm", "separation_nm",
         "g2_0", "g2_0_stderr", "g2_converged"],
        [
            [r["row"] for r in results],
            [r["col"] for r in results],
            [r["n_nvs"] for r in results],
            [r["emitter_class"] for r in results],
            ["" if r["displacement_nm"] is None else r["displacement_nm"] for r in results],
            ["" if r["separation_nm"] is None else r["separation_nm"] for r in results],
            ["" if r["g2_0"] is None else r["g2_0"] for r in results],
            ["" if r["g2_0_stderr"] is None else r["g2_0_stderr"] for r in results],
            ["" if r["g2_converged"] is None else r["g2_converged"] for r in results],
        ],
    )
    counted = sum(1 for r in results if r["emitter_class"] in ("one", "two", "three"))
    print(f"characterize: {len(results)} sites, {counted} classified emitters -> {out}")


def _characterize_streams(args, cfg: RunConfig) -> None:
    out = _out_dir(args)
    a = ingest_timestamps(args.stream_a, args.format, duration_ps=args.duration_ps)
    b = ingest_timestamps(args.stream_b, args.format, duration_ps=args.duration_ps)
    if a.duration_ps != b.duration_ps:
        # two files from one acquisition: give both the longer span
        shared = max(a.duration_ps, b.duration_ps)
        a = PhotonStream(a.channel, a.timestamps_ps, shared)
        b = PhotonStream(b.channel, b.timestamps_ps, shared)
    hist = correlate(a, b, cfg.hbt.bin_width_ns, cfg.hbt.window_ns)
    fit = fit_g2(hist)
    write_csv_columns(
        out / "hbt_hist.csv",
        ["bin_center_ns", "counts", "normalization"],
        [hist.bin_centers_ns, hist.counts, np.full(hist.counts.size, hist.normalization)],
    )
    result = {"model": "g2", **fit.as_dict()}
    if fit.converged:
        cls = classify_emitter_count(max(fit.param("g2_0"), 0.0), cfg.analysis.class_boundaries)
        result["emitter_class"] = cls.value
    else:
        result["emitter_class"] = "indeterminate"
    write_json(out / "hbt_fit.json", result)
    print(
        f"characterize: g2(0) = {fit.param('g2_0'):.4f} +- {fit.stderr_of('g2_0'):.4f}, "
        f"class {result['emitter_class']} -> {out / 'hbt_fit.json'}"
    )
    if not fit.converged:
        raise FitNonConvergence(fit.message or "g2 fit did not converge")


# --------------------------------------------------------------------- fit


def _hist_from_centers(centers: np.ndarray, what: str) -> np.ndarray:
    """Uniform bin edges from bin centers; rejects ragged grids."""
    if centers.size < 2:
        raise ValueError(f"{what}: need at least two bins")
    widths = np.diff(centers)
    bw = widths[0]
    if bw <= 0 or not np.allclose(widths, bw, rtol=1e-6, atol=0.0):
        raise ValueError(f"{what}: bin centers must be uniformly increasing")
    return np.concatenate((centers - 0.5 * bw, [centers[-1] + 0.5 * bw]))


def _fit_g2_file(args):
    data = read_csv_columns(args.input, required=["bin_center_ns", "counts", "normalization"])
    edges = _hist_from_centers(data["bin_center_ns"], str(args.input))
    norm = data["normalization"]
    if not np.all(norm == norm[0]):
        raise ValueError(f"{args.input}: normalization must be one constant")
    hist = CorrelationHistogram(
        bin_edges_ns=edges,
        counts=np.rint(data["counts"]).astype(np.int64),
        normalization=float(norm[0]),
    )
    return fit_g2(hist), {}


def _fit_ple_file(args):
    data = read_csv_columns(args.input, required=["frequency_mhz", "counts"])
    return fit_lorentzian(data["frequency_mhz"], data["counts"]), {}


def _fit_echo_file(args):
    data = read_csv_columns(args.input, required=["tau_us", "intensity"])
    return fit_echo(data["tau_us"], data["intensity"], data.get("sigma")), {}


def _fit_trpl_file(args):
    data = read_csv_columns(args.input, required=["time_ns", "counts"])
    edges = _hist_from_centers(data["time_ns"], str(args.input))
    bw = float(edges[1] - edges[0])
    hist = DecayHistogram(bin_edges_ns=edges, counts=np.rint(data["counts"]).astype(np.int64))
    irf = gaussian_irf(args.irf_fwhm_ps, bw)
    fit = fit_trpl(hist, irf, background=args.background)
    extras = {"irf_fwhm_ps": args.irf_fwhm_ps, "bin_width_ns": bw, "background": args.background}
    return fit, extras


def _fit_displacement_file(args):
    data = read_csv_columns(args.input, required=["radius_nm"])
    fit = fit_displacement(data["radius_nm"], args.bin_width_nm)
    return fit, {"bin_width_nm": args.bin_width_nm}


def _fit_localize_file(args):
    if args.pixel_size_nm is None:
        raise ValueError("fit localize requires --pixel-size-nm")
    image = np.loadtxt(args.input, delimiter=",", ndmin=2)
    loc = localize_emitter(image, args.pixel_size_nm, args.saturation_level)
    extras = {"pixel_size_nm": args.pixel_size_nm}
    if args.saturation_level is not None:
        extras["saturation_level"] = args.saturation_level
    result = {
        "model": "localize",
        "x_nm": loc.x_nm,
        "y_nm": loc.y_nm,
        "stderr_x_nm": loc.stderr_x_nm,
        "stderr_y_nm": loc.stderr_y_nm,
        "extras": extras,
        **loc.fit.as_dict(),
    }
    return loc.fit, extras, result


def cmd_fit(args) -> None:
    handlers = {
        "g2": _fit_g2_file,
        "ple": _fit_ple_file,
        "echo": _fit_echo_file,
        "trpl": _fit_trpl_file,
        "displacement": _fit_displacement_file,
        "localize": _fit_localize_file,
    }
    res = handlers[args.kind](args)
    if len(res) == 3:
        fit, extras, result = res
    else:
        fit, extras = res
        result = {"model": args.kind, **fit.as_dict()}
        if extras:
            result["extras"] = extras
    out = _out_file(args, f"{args.kind}_fit.json")
    write_json(out, result)
    names = result["param_names"]
    summary = ", ".join(f"{n} = {result['params'][n]:.6g}" for n in names)
    print(f"fit {args.kind}: {summary} -> {out}")
    if not fit.converged:
        raise FitNonConvergence(fit.message or f"{args.kind} fit did not converge")


# ------------------------------------------------------------------- stats


def _read_classifications(path) -> list[SiteClassification]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file")
        needed = {"row", "col", "emitter_class"}
        missing = needed - set(reader.fieldnames)
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        out = []
        for i, rec in enumerate(reader, start=1):
            try:
                sep = rec.get("separation_nm") or None
                out.append(
                    SiteClassification(
                        site_index=(int(rec["row"]), int(rec["col"])),
                        emitter_class=rec["emitter_class"],
                        separation_nm=None if sep is None else float(sep),
                    )
                )
            except (TypeError, ValueError) as e:
                raise ValueError(f"{path}: row {i}: {e}") from None
    if not out:
        raise ValueError(f"{path}: no data rows")
    return out


def cmd_stats(args) -> None:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    classifications = _read_classifications(args.input)
    rows = row_statistics(classifications, cfg.grid, cfg.analysis.resolution_nm)
    write_row_stats_csv(out / "rows.csv", rows)
    write_json(out / "rows.json", [dataclasses.asdict(r) for r in rows])
    best = max(rows, key=lambda r: r.single_probability)
    print(
        f"stats: {len(rows)} rows; best single-NV row {best.row} "
        f"({best.pulse_energy_nj} nJ) at {best.single_probability:.3f} "
        f"[{best.single_ci_low:.3f}, {best.single_ci_high:.3f}] -> {out / 'rows.csv'}"
    )


# --------------------------------------------------------------- arrhenius


def cmd_arrhenius(args) -> None:
    cfg = _load_cfg(args)
    base = cfg.anneal
    overrides = {
        "temperature_c": args.temperature_c,
        "duration_s": args.duration_s,
        "d0_cm2_s": args.d0_cm2_s,
    }
    fields = {k: v for k, v in overrides.items() if v is not None}
    if args.diffusivity_cm2_s is not None and args.activation_energy_ev is not None:
        raise ValueError("give either --diffusivity-cm2-s or --activation-energy-ev, not both")
    if args.diffusivity_cm2_s is not None:
        fields["diffusivity_cm2_s"] = args.diffusivity_cm2_s
        fields["activation_energy_ev"] = None
    elif args.activation_energy_ev is not None:
        fields["diffusivity_cm2_s"] = None
        fields["activation_energy_ev"] = args.activation_energy_ev
    acfg = dataclasses.replace(base, **fields)
    res = arrhenius_summary(acfg)
    payload = dataclasses.asdict(res)
    payload["dt_nm2"] = acfg.dt_nm2()
    payload["displacement_scale_r0_nm"] = 2.0 * float(np.sqrt(acfg.dt_nm2()))
    text = json.dumps(payload, sort_keys=True, indent=2)
    if args.out:
        write_json(_out_file(args, "arrhenius.json"), payload)
    print(text)


# ------------------------------------------------------------------ report


def cmd_report(args) -> None:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    report = run_campaign(cfg, out_dir=out)
    figures = render_report_figures(report, out)
    n_nvs = sum(s.n_nvs for s in report.sites)
    singles = sum(1 for s in report.sites if s.emitter_class == "one")
    print(
        f"report: {len(report.sites)} sites, {n_nvs} NV centres, {singles} single emitters"
    )
    print(f"report: wrote report.json, rows.csv, sites.csv and {len(figures)} figure files in {out}")


# -------------------------------------------------------------------- plot


def cmd_plot(args) -> None:
    artifact = _read_artifact(args.input)
    if "sites" in artifact and "row_stats" in artifact:
        paths = emit_plot_data(artifact, _out_dir(args))
    else:
        if not args.data:
            raise ValueError("plotting a fit result needs --data with the fitted columns")
        if artifact.get("model") == "localize":
            data = {"image": np.loadtxt(args.data, delimiter=",", ndmin=2)}
        else:
            data = read_csv_columns(args.data)
        base = _out_file(args, f"{artifact.get('model', 'fit')}_plot")
        paths = emit_plot_data(artifact, base, data)
    for p in paths:
        print(f"plot: wrote {p}")


# -------------------------------------------------------------------- main


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration JSON; omit for the built-in default")
    common.add_argument("--seed", type=int, help="override the configuration's master_seed")
    common.add_argument("--out", help="output directory (or file, where a single file is written)")
    common.add_argument(
        "--format", choices=["csv", "nvps"], default="csv", help="timestamp stream format"
    )

    parser = argparse.ArgumentParser(
        prog="nvforge",
        description="Deterministic digital twin of laser-written NV centre fabrication.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="fabricate the vacancy grid")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("anneal", parents=[common], help="anneal a vacancies.json artifact")
    p.add_argument("input", help="vacancies.json from `simulate`")
    p.set_defaults(handler=cmd_anneal)

    p = sub.add_parser(
        "characterize", parents=[common],
        help="classify emitters per site (simulated) or from two timestamp files",
    )
    p.add_argument("input", nargs="?", help="nvs.json from `anneal`")
    p.add_argument("--stream-a", help="detector-arm timestamp file")
    p.add_argument("--stream-b", help="other detector-arm timestamp file")
    p.add_argument("--duration-ps", type=int, help="acquisition length override for both streams")
    p.set_defaults(handler=cmd_characterize)

    p = sub.add_parser("fit", parents=[common], help="fit a model to a data file")
    p.add_argument("kind", choices=list(FIT_KINDS))
    p.add_argument("input", help="data file (see module docstring for the per-kind columns)")
    p.add_argument("--irf-fwhm-ps", type=float, default=350.0, help="trpl: IRF width")
    p.add_argument("--background", type=float, default=0.0, help="trpl: flat background per bin")
    p.add_argument("--bin-width-nm", type=float, default=40.0, help="displacement: histogram bin")
    p.add_argument("--pixel-size-nm", type=float, help="localize: image pixel pitch")
    p.add_argument("--saturation-level", type=float, help="localize: reject images at this level")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("stats", parents=[common], help="per-row statistics from classifications")
    p.add_argument("input", help="CSV with row,col,emitter_class[,separation_nm]")
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("arrhenius", parents=[common], help="diffusion one-shots")
    p.add_argument("--temperature-c", type=float)
    p.add_argument("--duration-s", type=float)
    p.add_argument("--d0-cm2-s", type=float)
    p.add_argument("--diffusivity-cm2-s", type=float)
    p.add_argument("--activation-energy-ev", type=float)
    p.set_defaults(handler=cmd_arrhenius)

    p = sub.add_parser("report", parents=[common], help="full campaign with figures")
    p.set_defaults(handler=cmd_report)

    p = sub.add_parser("plot", parents=[common], help="SVG + CSV from a report or fit JSON")
    p.add_argument("input", help="report.json or a fit-result JSON")
    p.add_argument("--data", help="data CSV the fit was made from (fit artifacts only)")
    p.set_defaults(handler=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        args.handler(args)
    except FitNonConvergence as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
