"""Plot-data emission: every figure is an SVG next to a CSV of its series.

The CSV always carries the plotted data (and the fitted model sampled at the
same abscissae), so figures are verifiable without parsing SVG. Rendering is
deterministic: fixed hash salt, no embedded date, Agg backend only.

CSV column contracts (stable across versions):

* series plots: ``x, y[, sigma][, model]`` with kind-specific x/y names;
* row statistics: ``row, pulse_energy_nj, sites, singles, single_probability,
  single_ci_low, single_ci_high``;
* displacement histogram: ``bin_center_nm, count[, model]``;
* site class map: ``row, col, class_code, emitter_class``.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis.models import MODELS  # noqa: E402
from .io import write_csv_columns  # noqa: E402

__all__ = [
    "plot_series",
    "plot_row_stats",
    "plot_displacement_hist",
    "plot_class_map",
    "emit_plot_data",
    "render_report_figures",
]

plt.rcParams["svg.hashsalt"] = "nvforge"

CLASS_CODES = {
    "empty": 0,
    "one": 1,
    "two": 2,
    "three": 3,
    "indeterminate": 4,
    "graphitized": 5,
}


def _paths(base) -> tuple[Path, Path]:
    base = Path(base)
    return Path(str(base) + ".csv"), Path(str(base) + ".svg")


def _save(fig, svg: Path) -> None:
    fig.savefig(svg, format="svg", metadata={"Date": None})
    plt.close(fig)


def _dense(x: np.ndarray, factor: int = 8) -> np.ndarray:
    if x.size < 2:
        return x
    return np.linspace(x.min(), x.max(), (x.size - 1) * factor + 1)


def plot_series(
    base,
    x,
    y,
    *,
    sigma=None,
    model=None,
    x_name: str = "x",
    y_name: str = "y",
    xlabel: str | None = None,
    ylabel: str | None = None,
    title: str = "",
    logy: bool = False,
) -> list[Path]:
    """Scatter/errorbar of (x, y) with an optional fitted-curve overlay.

    ``model`` is a callable y = f(x); the CSV holds it at the data abscissae,
    the SVG overlays it on an 8x refined grid.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    csv_path, svg_path = _paths(base)

    header = [x_name, y_name]
    columns = [x, y]
    if sigma is not None:
        header.append("sigma")
        columns.append(np.asarray(sigma, dtype=float))
    if model is not None:
        header.append("model")
        columns.append(np.asarray(model(x), dtype=float))
    write_csv_columns(csv_path, header, columns)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if sigma is not None:
        ax.errorbar(x, y, yerr=sigma, fmt="o", ms=3, lw=1, capsize=2, label="data")
    else:
        ax.plot(x, y, "o", ms=3, label="data")
    if model is not None:
        xd = _dense(x)
        ax.plot(xd, model(xd), "-", lw=1.5, label="fit")
        ax.legend(loc="best")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel or x_name)
    ax.set_ylabel(ylabel or y_name)
    if title:
        ax.set_title(title)
    _save(fig, svg_path)
    return [csv_path, svg_path]


def plot_row_stats(rows, base) -> list[Path]:
    """Single-NV probability vs pulse energy with Wilson error bars.

    An empty row list still yields the header-only CSV and an SVG with empty
    axes.
    """
    csv_path, svg_path = _paths(base)
    energy = np.array([r.pulse_energy_nj for r in rows], dtype=float)
    prob = np.array([r.single_probability for r in rows], dtype=float)
    lo = np.array([r.single_ci_low for r in rows], dtype=float)
    hi = np.array([r.single_ci_high for r in rows], dtype=float)
    write_csv_columns(
        csv_path,
        [
            "row", "pulse_energy_nj", "sites", "singles", "single_probability",
            "single_ci_low", "single_ci_high",
        ],
        [
            [r.row for r in rows],
            energy,
            [r.sites for r in rows],
            [r.singles for r in rows],
            prob,
            lo,
            hi,
        ],
    )
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if len(rows):
        yerr = np.vstack([np.clip(prob - lo, 0, None), np.clip(hi - prob, 0, None)])
        ax.errorbar(energy, prob, yerr=yerr, fmt="o", ms=4, lw=1, capsize=2)
    ax.set_xlabel("pulse energy (nJ)")
    ax.set_ylabel("single-NV probability")
    ax.set_ylim(0.0, 1.0)
    _save(fig, svg_path)
    return [csv_path, svg_path]


def plot_displacement_hist(radii_nm, bin_width_nm: float, base, model=None) -> list[Path]:
    """Histogram of NV displacement radii with an optional fitted overlay."""
    csv_path, svg_path = _paths(base)
    r = np.asarray(radii_nm, dtype=float)
    if r.size:
        n_bins = max(int(np.ceil(r.max() * 1.05 / bin_width_nm)), 1)
    else:
        n_bins = 1
    edges = np.arange(n_bins + 1) * bin_width_nm
    counts, _ = np.histogram(r, bins=edges)
    centers = 0.5 * (edges[:-1] + edges[1:])

    header = ["bin_center_nm", "count"]
    columns = [centers, counts]
    if model is not None:
        header.append("model")
        columns.append(np.asarray(model(centers), dtype=float))
    write_csv_columns(csv_path, header, columns)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.bar(centers, counts, width=bin_width_nm * 0.9, label="data")
    if model is not None:
        xd = _dense(centers)
        ax.plot(xd, model(xd), "-", lw=1.5, color="C3", label="fit")
        ax.legend(loc="best")
    ax.set_xlabel("displacement (nm)")
    ax.set_ylabel("NV count")
    _save(fig, svg_path)
    return [csv_path, svg_path]


def plot_class_map(sites, n_rows: int, n_cols: int, base) -> list[Path]:
    """Map of per-site emitter classes over the writing grid.

    ``sites`` is an iterable of dicts or objects exposing row, col and
    emitter_class.
    """
    csv_path, svg_path = _paths(base)

    def get(s, name):
        return s[name] if isinstance(s, dict) else getattr(s, name)

    grid = np.full((n_rows, n_cols), -1, dtype=int)
    rows_, cols_, codes_, names_ = [], [], [], []
    for s in sites:
        r, c, cls = int(get(s, "row")), int(get(s, "col")), str(get(s, "emitter_class"))
        code = CLASS_CODES[cls]
        grid[r, c] = code
        rows_.append(r)
        cols_.append(c)
        codes_.append(code)
        names_.append(cls)
    write_csv_columns(
        csv_path, ["row", "col", "class_code", "emitter_class"], [rows_, cols_, codes_, names_]
    )
    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    im = ax.imshow(grid, cmap=plt.get_cmap("viridis", len(CLASS_CODES)), vmin=-0.5, vmax=5.5)
    cbar = fig.colorbar(im, ax=ax, ticks=sorted(CLASS_CODES.values()), shrink=0.8)
    cbar.ax.set_yticklabels(list(CLASS_CODES))
    ax.set_xlabel("column")
    ax.set_ylabel("row")
    _save(fig, svg_path)
    return [csv_path, svg_path]


class _RowView:
    """Attribute view over a row-stats dict loaded from report JSON."""

    def __init__(self, d: dict):
        self.__dict__.update(d)


def render_report_figures(report, out_dir) -> list[Path]:
    """Render the standard campaign figures next to the report artifacts.

    Accepts a GridReport or its JSON dict. Writes fig_row_stats, fig_classes
    and, when single-emitter sites exist, fig_displacement (each .csv + .svg).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not isinstance(report, dict):
        report = report.as_dict()
    rows = [_RowView(r) for r in report["row_stats"]]
    paths = plot_row_stats(rows, out_dir / "fig_row_stats")

    grid_cfg = report["config"]["grid"]
    paths += plot_class_map(
        report["sites"], grid_cfg["rows"], grid_cfg["cols"], out_dir / "fig_classes"
    )

    radii = [
        s["displacement_nm"]
        for s in report["sites"]
        if s["emitter_class"] == "one" and s["displacement_nm"] is not None
    ]
    if radii:
        model = None
        fit = report.get("displacement_fit")
        if fit:
            vals = np.array([fit["params"]["r0_nm"], fit["params"]["amplitude"]])
            disp = MODELS["displacement"][0]

            def model(r, _v=vals, _f=disp):
                return _f(np.asarray(r, dtype=float), _v)

        bin_nm = report["config"]["analysis"]["displacement_bin_nm"]
        paths += plot_displacement_hist(radii, bin_nm, out_dir / "fig_displacement", model)
    return paths


_SERIES_COLUMNS = {
    # kind -> (x column, y column, log y axis)
    "g2": ("bin_center_ns", "normalized", False),
    "ple": ("frequency_mhz", "counts", False),
    "lorentzian": ("frequency_mhz", "counts", False),
    "echo": ("tau_us", "intensity", False),
    "trpl": ("time_ns", "counts", True),
}


_MODEL_FOR_KIND = {
    "g2": "g2",
    "ple": "lorentzian",
    "lorentzian": "lorentzian",
    "echo": "echo",
    "displacement": "displacement",
    "localize": "gaussian2d",
}


def _model_from_fit(fit: dict, x, data):
    """Callable y = f(x) reconstructed from a fit-result JSON dict."""
    kind = fit.get("model")
    params = fit["params"]
    name = _MODEL_FOR_KIND.get(kind, kind)
    if name in MODELS:
        fn, _, names = MODELS[name]
        vals = np.array([params[n] for n in names], dtype=float)
        return lambda t: fn(np.asarray(t, dtype=float), vals)
    if kind == "trpl":
        from .photophysics import gaussian_irf
        from .analysis.models import make_trpl_model

        extras = fit.get("extras", {})
        bw = float(extras.get("bin_width_ns", float(np.median(np.diff(x)))))
        irf = gaussian_irf(float(extras.get("irf_fwhm_ps", 350.0)), bw)
        trpl, _ = make_trpl_model(irf)
        vals = np.array([params["t1_ns"], params["amplitude"]])
        background = float(extras.get("background", 0.0))

        def model(t, _x=np.asarray(x, dtype=float)):
            t = np.asarray(t, dtype=float)
            # the convolution model is defined on the data grid only
            full = trpl(_x, vals) + background
            return np.interp(t, _x, full)

        return model
    raise ValueError(f"cannot rebuild a curve for fit kind {kind!r}")


def emit_plot_data(artifact, target, data: dict | None = None) -> list[Path]:
    """Write the CSV + SVG pair(s) for a report or a fit result.

    Parameters
    ----------
    artifact : dict
        Either a campaign report (dispatched on its "sites" key; ``target``
        is then a directory) or a fit-result dict carrying "model" and
        "params" (``target`` is the output base path, no extension).
    data : dict, optional
        Column arrays the fit was made from (as read by read_csv_columns).
        Required for fit artifacts.
    """
    if "sites" in artifact and "row_stats" in artifact:
        return render_report_figures(artifact, target)
    if "params" not in artifact:
        raise ValueError("artifact is neither a campaign report nor a fit result")
    kind = artifact.get("model")
    if data is None:
        raise ValueError("fit artifacts need the data columns they were fitted to")

    if kind == "displacement":
        bin_nm = float(artifact.get("extras", {}).get("bin_width_nm", 40.0))
        vals = np.array([artifact["params"]["r0_nm"], artifact["params"]["amplitude"]])
        fn = MODELS["displacement"][0]
        return plot_displacement_hist(
            data["radius_nm"], bin_nm, target,
            lambda r: fn(np.asarray(r, dtype=float), vals),
        )
    if kind == "localize":
        return _plot_localization(artifact, data, target)
    if kind not in _SERIES_COLUMNS:
        raise ValueError(f"unknown fit kind {kind!r}")
    x_name, y_name, logy = _SERIES_COLUMNS[kind]
    x = data[x_name]
    if kind == "g2":
        # raw histogram columns: normalize for display, Poisson error bars
        norm = data["normalization"]
        counts = data["counts"]
        y = counts / norm
        sigma = np.sqrt(np.maximum(counts, 1.0)) / norm
    else:
        y = data[y_name]
        sigma = data.get("sigma")
    model = _model_from_fit(artifact, x, data)
    return plot_series(
        target, x, y, sigma=sigma, model=model, x_name=x_name, y_name=y_name, logy=logy
    )


def _plot_localization(fit: dict, data: dict, base) -> list[Path]:
    """Image heat map with the fitted emitter position marked."""
    csv_path, svg_path = _paths(base)
    image = np.asarray(data["image"], dtype=float)
    pixel = float(fit.get("extras", {}).get("pixel_size_nm", 1.0))
    p = fit["params"]
    ny, nx = image.shape
    rows_idx = np.repeat(np.arange(ny), nx)
    cols_idx = np.tile(np.arange(nx), ny)
    write_csv_columns(
        csv_path, ["row", "col", "count"], [rows_idx, cols_idx, image.ravel()]
    )
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    extent = (-0.5 * pixel, (nx - 0.5) * pixel, (ny - 0.5) * pixel, -0.5 * pixel)
    im = ax.imshow(image, cmap="magma", extent=extent)
    ax.plot([p["x0"]], [p["y0"]], "c+", ms=12, mew=2)
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_xlabel("x (nm)")
    ax.set_ylabel("y (nm)")
    _save(fig, svg_path)
    return [csv_path, svg_path]
