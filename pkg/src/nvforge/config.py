"""Run configuration: schema-validated JSON in, typed sub-configs out.

Every physical quantity carries its unit in the key name (duration_s,
temperature_c, k_exc_per_ns, ...) because the pipeline mixes nJ, ns, us, nm
and ps and silent unit mismatches are the main failure mode. A master seed
is mandatory; nothing in the pipeline draws randomness outside it.

The config hash is the SHA-256 of the fully expanded canonical form (all
defaults filled in, keys sorted), so two configs hash equal exactly when
every effective setting matches.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .anneal import AnnealConfig
from .constants import DEFAULT_CLASS_BOUNDARIES
from .fabrication import PulseGridSpec, YieldModelParams
from .photophysics import EchoConfig, EmitterRates, PLEScanConfig

__all__ = [
    "ConfigError",
    "HBTConfig",
    "TRPLConfig",
    "AnalysisConfig",
    "RunConfig",
    "load_config",
    "paper_default",
    "config_schema",
]


class ConfigError(Exception):
    """Invalid configuration: schema violation or inconsistent values."""


@dataclass
class HBTConfig:
    """Per-site correlation measurement settings."""

    duration_s: float = 0.01
    background_rate_cps: float = 50000.0
    bin_width_ns: float = 1.0
    window_ns: float = 500.0

    def __post_init__(self) -> None:
        if self.duration_s <= 0 or self.bin_width_ns <= 0 or self.window_ns <= 0:
            raise ValueError("duration_s, bin_width_ns and window_ns must be > 0")
        if self.background_rate_cps < 0:
            raise ValueError("background_rate_cps must be >= 0")

    @property
    def duration_ps(self) -> int:
        return int(round(self.duration_s * 1e12))


@dataclass
class TRPLConfig:
    """Synthetic lifetime-histogram settings; T1 itself comes from the rates."""

    irf_fwhm_ps: float = 350.0
    total_counts: float = 1e5
    bin_width_ns: float = 0.05
    n_bins: int = 1600

    def __post_init__(self) -> None:
        if self.irf_fwhm_ps <= 0 or self.total_counts <= 0 or self.bin_width_ns <= 0:
            raise ValueError("irf_fwhm_ps, total_counts and bin_width_ns must be > 0")
        if self.n_bins < 10:
            raise ValueError("n_bins must be >= 10")


@dataclass
class AnalysisConfig:
    """Classification and statistics constants."""

    class_boundaries: tuple = DEFAULT_CLASS_BOUNDARIES
    resolution_nm: float = 500.0
    displacement_bin_nm: float = 40.0

    def __post_init__(self) -> None:
        b = tuple(float(x) for x in self.class_boundaries)
        if len(b) != 3 or not (0 < b[0] < b[1] < b[2]):
            raise ValueError("class_boundaries must be three increasing positive values")
        self.class_boundaries = b
        if self.resolution_nm <= 0 or self.displacement_bin_nm <= 0:
            raise ValueError("resolution_nm and displacement_bin_nm must be > 0")


_SECTION_KEYS = ("grid", "yield", "anneal", "rates", "ple", "echo", "hbt", "trpl", "analysis")


@dataclass
class RunConfig:
    """One fully resolved pipeline configuration."""

    master_seed: int
    grid: PulseGridSpec
    yield_params: YieldModelParams
    anneal: AnnealConfig
    rates: EmitterRates
    ple: PLEScanConfig
    echo: EchoConfig
    hbt: HBTConfig
    trpl: TRPLConfig
    analysis: AnalysisConfig

    def canonical_dict(self) -> dict:
        out = {
            "master_seed": int(self.master_seed),
            "grid": asdict(self.grid),
            "yield": asdict(self.yield_params),
            "anneal": asdict(self.anneal),
            "rates": {
                "k_exc_per_ns": self.rates.k_exc,
                "k_rad_per_ns": self.rates.k_rad,
                "k_isc_per_ns": self.rates.k_isc,
                "k_deshelve_per_ns": self.rates.k_deshelve,
                "detection_efficiency": self.rates.detection_efficiency,
            },
            "ple": asdict(self.ple),
            "echo": asdict(self.echo),
            "hbt": asdict(self.hbt),
            "trpl": asdict(self.trpl),
            "analysis": asdict(self.analysis),
        }
        out["analysis"]["class_boundaries"] = list(self.analysis.class_boundaries)
        out["echo"]["tau_grid_us"] = [float(t) for t in self.echo.tau_grid_us]
        out["grid"]["energies_nj_per_row"] = [float(e) for e in self.grid.energies_nj_per_row]
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def config_schema() -> dict:
    with resources.files("nvforge.data").joinpath("config.schema.json").open() as fh:
        return json.load(fh)


def _schema_errors(cfg: dict) -> list[str]:
    validator = jsonschema.Draft202012Validator(config_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    out = []
    for e in errors:
        loc = "$" + "".join(
            f"[{p}]" if isinstance(p, int) else f".{p}" for p in e.absolute_path
        )
        out.append(f"{loc}: {e.message}")
    return out


_RATE_KEY_MAP = {
    "k_exc_per_ns": "k_exc",
    "k_rad_per_ns": "k_rad",
    "k_isc_per_ns": "k_isc",
    "k_deshelve_per_ns": "k_deshelve",
    "detection_efficiency": "detection_efficiency",
}


def load_config(source) -> RunConfig:
    """Load and validate a run configuration.

    ``source`` is a JSON file path or an already parsed dict. Schema
    violations raise ConfigError listing every offending field path;
    cross-field inconsistencies (energy list length, threshold ordering)
    raise ConfigError naming the section.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON: {e}") from e
    elif isinstance(source, dict):
        cfg = json.loads(json.dumps(source))
    else:
        raise ConfigError(f"config source must be a path or dict, not {type(source).__name__}")

    if not isinstance(cfg, dict):
        raise ConfigError("top-level config must be a JSON object")
    errors = _schema_errors(cfg)
    if errors:
        raise ConfigError("config schema violations:\n  " + "\n  ".join(errors))

    def build(name, cls, key_map=None):
        section = dict(cfg.get(name, {}))
        if key_map:
            section = {key_map[k]: v for k, v in section.items()}
        try:
            return cls(**section)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"config section '{name}': {e}") from e

    return RunConfig(
        master_seed=int(cfg["master_seed"]),
        grid=build("grid", PulseGridSpec),
        yield_params=build("yield", YieldModelParams),
        anneal=build("anneal", AnnealConfig),
        rates=build("rates", EmitterRates, _RATE_KEY_MAP),
        ple=build("ple", PLEScanConfig),
        echo=build("echo", EchoConfig),
        hbt=build("hbt", HBTConfig),
        trpl=build("trpl", TRPLConfig),
        analysis=build("analysis", AnalysisConfig),
    )


def paper_default() -> RunConfig:
    """The shipped default configuration (grid, recipe and thresholds as published)."""
    with resources.files("nvforge.data").joinpath("paper_default.json").open() as fh:
        return load_config(json.load(fh))
