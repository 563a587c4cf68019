"""End-to-end campaign: fabricate, anneal, characterize, analyze, report.

Every site gets its own seed chain derived from the master seed and its
(row, col) index with a per-stage tag (0 fabrication, 1 anneal, 2 photon
streams with an extra per-emitter index, 3 beamsplitter, 4 background), so
the execution order of sites cannot change any byte of the report. The
timestamp is the single nondeterministic field and lives alone in
``generated_at``.

Expected displacement scale: a single NV's image offset combines the focal
placement scatter (per-axis sigma_f) with the anneal diffusion (per-axis
variance 2 Dt), so the fitted radial parameter satisfies
r0^2 = 2 sigma_f^2 + 4 Dt.
"""

from __future__ import annotations

import datetime
import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ._version import __version__
from .analysis import (
    SiteClassification,
    classify_emitter_count,
    correlate,
    fit_displacement,
    fit_g2,
    row_statistics,
)
from .anneal import anneal_cloud
from .config import RunConfig, load_config
from .fabrication import DamageState, simulate_site
from .io import write_csv_columns, write_json
from .photophysics import background_stream, beamsplit, merge_streams, simulate_photon_stream
from .seeds import derive_seed

__all__ = [
    "SiteRecord",
    "GridReport",
    "characterize_site",
    "run_campaign",
    "write_row_stats_csv",
]

STAGE_FABRICATION = 0
STAGE_ANNEAL = 1
STAGE_PHOTONS = 2
STAGE_BEAMSPLIT = 3
STAGE_BACKGROUND = 4


@dataclass
class SiteRecord:
    """Everything the campaign learned about one grid site."""

    row: int
    col: int
    energy_nj: float
    damage_state: str
    n_vacancies: int
    n_nvs: int
    nv_offsets_nm: list
    displacement_nm: float | None
    separation_nm: float | None
    emitter_class: str
    g2_0: float | None
    g2_0_stderr: float | None
    g2_converged: bool | None

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class GridReport:
    """Campaign output: per-site records, per-row statistics, provenance."""

    version: str
    config_hash: str
    master_seed: int
    config: dict
    sites: list
    row_stats: list
    displacement_fit: dict | None
    displacement_samples: int
    generated_at: str

    def as_dict(self, include_timestamp: bool = True) -> dict:
        out = {
            "version": self.version,
            "config_hash": self.config_hash,
            "master_seed": self.master_seed,
            "config": self.config,
            "sites": [s.as_dict() for s in self.sites],
            "row_stats": [asdict(r) for r in self.row_stats],
            "displacement_fit": self.displacement_fit,
            "displacement_samples": self.displacement_samples,
        }
        if include_timestamp:
            out["generated_at"] = self.generated_at
        return out


def characterize_site(cfg: RunConfig, row: int, col: int, n_nvs: int):
    """Simulate the HBT measurement of one occupied site and classify it.

    Returns (class name, fitted g2_0, its stderr, convergence flag); the
    class falls back to "indeterminate" when a detector arm stays dark or
    the fit does not converge.
    """
    seed = cfg.master_seed
    dur_ps = cfg.hbt.duration_ps
    streams = [
        simulate_photon_stream(
            cfg.rates, dur_ps, 0.0, derive_seed(seed, row, col, STAGE_PHOTONS, i)
        )
        for i in range(n_nvs)
    ]
    streams.append(
        background_stream(
            dur_ps, cfg.hbt.background_rate_cps, derive_seed(seed, row, col, STAGE_BACKGROUND)
        )
    )
    merged = merge_streams(streams)
    ch_a, ch_b = beamsplit(merged, derive_seed(seed, row, col, STAGE_BEAMSPLIT))
    if ch_a.n_photons == 0 or ch_b.n_photons == 0:
        return "indeterminate", None, None, None
    hist = correlate(ch_a, ch_b, cfg.hbt.bin_width_ns, cfg.hbt.window_ns)
    fit = fit_g2(hist)
    g2_0 = fit.param("g2_0")
    stderr = fit.stderr_of("g2_0")
    if not fit.converged:
        return "indeterminate", g2_0, stderr, False
    cls = classify_emitter_count(g2_0, cfg.analysis.class_boundaries)
    return cls.value, g2_0, stderr, True


def run_campaign(config, out_dir=None, site_order=None) -> GridReport:
    """Run the full pipeline for one configuration.

    Parameters
    ----------
    config : RunConfig, dict or path
    out_dir : path, optional
        Where to write report.json, rows.csv and sites.csv. Files appear
        only after the whole campaign succeeded, each written atomically.
    site_order : list of (row, col), optional
        Execution order; must be a permutation of the full grid. Results
        are independent of it by construction.
    """
    cfg = config if isinstance(config, RunConfig) else load_config(config)
    spec = cfg.grid
    all_sites = [(r, c) for r in range(spec.rows) for c in range(spec.cols)]
    if site_order is None:
        site_order = all_sites
    else:
        site_order = [(int(r), int(c)) for r, c in site_order]
        if sorted(site_order) != all_sites:
            raise ValueError("site_order must be a permutation of the grid sites")

    records: dict[tuple, SiteRecord] = {}
    for row, col in site_order:
        energy = spec.energies_nj_per_row[row]
        cloud = simulate_site(
            energy, cfg.yield_params, derive_seed(cfg.master_seed, row, col, STAGE_FABRICATION)
        )
        nvs = anneal_cloud(cloud, cfg.anneal, derive_seed(cfg.master_seed, row, col, STAGE_ANNEAL))

        offsets = [nv.position_nm.tolist() for nv in nvs]
        displacement = None
        separation = None
        if nvs:
            image = np.array([nv.image_xy_nm for nv in nvs])
            displacement = float(np.linalg.norm(image.mean(axis=0)))
            if len(nvs) >= 2:
                diffs = image[:, None, :] - image[None, :, :]
                separation = float(np.sqrt((diffs**2).sum(axis=2)).max())

        if cloud.damage_state == DamageState.GRAPHITIZED:
            cls, g2_0, g2_err, g2_conv = "graphitized", None, None, None
        elif not nvs:
            cls, g2_0, g2_err, g2_conv = "empty", None, None, None
        else:
            cls, g2_0, g2_err, g2_conv = characterize_site(cfg, row, col, len(nvs))

        records[(row, col)] = SiteRecord(
            row=row,
            col=col,
            energy_nj=float(energy),
            damage_state=cloud.damage_state.value,
            n_vacancies=int(cloud.positions_nm.shape[0]),
            n_nvs=len(nvs),
            nv_offsets_nm=offsets,
            displacement_nm=displacement,
            separation_nm=separation,
            emitter_class=cls,
            g2_0=g2_0,
            g2_0_stderr=g2_err,
            g2_converged=g2_conv,
        )

    sites = [records[s] for s in all_sites]
    classifications = [
        SiteClassification((s.row, s.col), s.emitter_class, s.separation_nm) for s in sites
    ]
    rows = row_statistics(classifications, spec, cfg.analysis.resolution_nm)

    single_radii = [
        s.displacement_nm for s in sites if s.emitter_class == "one" and s.displacement_nm is not None
    ]
    disp_fit = None
    if len(single_radii) >= 20:
        fit = fit_displacement(np.array(single_radii), cfg.analysis.displacement_bin_nm)
        disp_fit = fit.as_dict()
        disp_fit["sqrt_dt_nm"] = fit.param("r0_nm") / 2.0

    report = GridReport(
        version=__version__,
        config_hash=cfg.config_hash(),
        master_seed=cfg.master_seed,
        config=cfg.canonical_dict(),
        sites=sites,
        row_stats=rows,
        displacement_fit=disp_fit,
        displacement_samples=len(single_radii),
        generated_at=datetime.datetime.now(datetime.timezone.utc).isoformat(),
    )
    if out_dir is not None:
        _write_artifacts(report, Path(out_dir))
    return report


def _atomic(path: Path, write_fn) -> None:
    """Write via a sibling temp file so a crash never leaves a partial file."""
    tmp = path.with_name(path.name + ".tmp")
    write_fn(tmp)
    os.replace(tmp, path)


def write_row_stats_csv(path, rows) -> None:
    """Per-row statistics table; one line per grid row."""
    write_csv_columns(
        path,
        [
            "row", "pulse_energy_nj", "sites", "singles", "doubles", "pairs",
            "triples", "total_nvs", "single_probability", "single_ci_low", "single_ci_high",
        ],
        [
            [r.row for r in rows],
            [r.pulse_energy_nj for r in rows],
            [r.sites for r in rows],
            [r.singles for r in rows],
            [r.doubles for r in rows],
            [r.pairs for r in rows],
            [r.triples for r in rows],
            [r.total_nvs for r in rows],
            [r.single_probability for r in rows],
            [r.single_ci_low for r in rows],
            [r.single_ci_high for r in rows],
        ],
    )


def _write_artifacts(report: GridReport, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic(
        out_dir / "report.json",
        lambda p: p.write_text(json.dumps(report.as_dict(), sort_keys=True, indent=2) + "\n"),
    )
    _atomic(out_dir / "rows.csv", lambda p: write_row_stats_csv(p, report.row_stats))

    sites = report.sites
    _atomic(out_dir / "sites.csv", lambda p: write_csv_columns(
        p,
        [
            "row", "col", "energy_nj", "damage_state", "n_vacancies", "n_nvs",
            "emitter_class", "displacement_nm", "separation_nm", "g2_0",
        ],
        [
            [s.row for s in sites],
            [s.col for s in sites],
            [s.energy_nj for s in sites],
            [s.damage_state for s in sites],
            [s.n_vacancies for s in sites],
            [s.n_nvs for s in sites],
            [s.emitter_class for s in sites],
            ["" if s.displacement_nm is None else s.displacement_nm for s in sites],
            ["" if s.separation_nm is None else s.separation_nm for s in sites],
            ["" if s.g2_0 is None else s.g2_0 for s in sites],
        ],
    ))
