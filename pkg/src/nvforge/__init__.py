"""Deterministic digital twin of laser-written NV centre fabrication in diamond.

Pipeline: pulse-grid vacancy generation (fabrication) -> thermal anneal and
NV formation (anneal) -> photon-stream simulation and optical measurements
(photophysics) -> fitting and statistics (analysis) -> campaign reports
(campaign, cli). Every random draw is keyed off one master seed, so whole
reports regenerate bit-identically.

The plots module (matplotlib) is imported lazily by the CLI and on demand;
importing nvforge itself stays light.
"""

from ._version import __version__
from . import analysis
from .anneal import (
    AnnealConfig,
    ArrheniusResult,
    NVRecord,
    activation_energy,
    anneal_cloud,
    arrhenius_summary,
    diffusion_length,
    diffusivity_from_activation,
    displacement_diffusivity,
    radial_density,
    sample_displacements,
)
from .campaign import GridReport, SiteRecord, characterize_site, run_campaign
from .config import (
    AnalysisConfig,
    ConfigError,
    HBTConfig,
    RunConfig,
    TRPLConfig,
    config_schema,
    load_config,
    paper_default,
)
from .fabrication import (
    DamageState,
    PulseGridSpec,
    VacancyCloud,
    YieldModelParams,
    damage_state_for_energy,
    energy_after_objective,
    mean_vacancy_yield,
    simulate_grid,
    simulate_site,
)
from .io import ingest_timestamps, read_csv_columns, write_csv_columns, write_json, write_streams
from .photophysics import (
    DecayHistogram,
    EchoConfig,
    EmitterRates,
    PhotonStream,
    PLEScanConfig,
    PLEStack,
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
from .seeds import derive_seed, rng_from

__all__ = [
    "__version__",
    "analysis",
    # fabrication
    "DamageState",
    "PulseGridSpec",
    "YieldModelParams",
    "VacancyCloud",
    "energy_after_objective",
    "mean_vacancy_yield",
    "damage_state_for_energy",
    "simulate_site",
    "simulate_grid",
    # anneal
    "AnnealConfig",
    "ArrheniusResult",
    "NVRecord",
    "radial_density",
    "diffusion_length",
    "activation_energy",
    "diffusivity_from_activation",
    "displacement_diffusivity",
    "sample_displacements",
    "anneal_cloud",
    "arrhenius_summary",
    # photophysics
    "EmitterRates",
    "PhotonStream",
    "PLEScanConfig",
    "PLEStack",
    "EchoConfig",
    "DecayHistogram",
    "simulate_photon_stream",
    "background_stream",
    "merge_streams",
    "beamsplit",
    "steady_state_occupancy",
    "expected_detection_rate_cps",
    "simulate_ple_stack",
    "jitter_sigma_for_aggregate_fwhm",
    "echo_ideal",
    "simulate_echo_curve",
    "gaussian_irf",
    "simulate_trpl",
    # config / campaign / io
    "ConfigError",
    "RunConfig",
    "HBTConfig",
    "TRPLConfig",
    "AnalysisConfig",
    "load_config",
    "paper_default",
    "config_schema",
    "GridReport",
    "SiteRecord",
    "characterize_site",
    "run_campaign",
    "ingest_timestamps",
    "write_streams",
    "read_csv_columns",
    "write_csv_columns",
    "write_json",
    # seeds
    "derive_seed",
    "rng_from",
]
