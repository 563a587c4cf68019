"""Single-pulse vacancy generation on a writing grid.

A femtosecond pulse focused into diamond generates a cloud of lattice
vacancies once its energy exceeds a breakdown threshold. This module models
one site as a draw from a count distribution whose mean follows a thresholded
power law of pulse energy, with vacancy positions scattered over the focal
volume. Damage regimes (nothing / vacancies / graphitized) are classified
from the pulse energy alone.

All pulse energies are before-objective nJ; use :func:`energy_after_objective`
to convert to delivered energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .constants import (
    DEFAULT_E1_NJ,
    DEFAULT_E2_NJ,
    DEFAULT_E_TH_NJ,
    FABRICATION_ENERGIES_NJ,
    OBJECTIVE_TRANSMISSION,
)
from .seeds import derive_seed, rng_from

__all__ = [
    "DamageState",
    "PulseGridSpec",
    "YieldModelParams",
    "VacancyCloud",
    "energy_after_objective",
    "mean_vacancy_yield",
    "damage_state_for_energy",
    "simulate_site",
    "simulate_grid",
]

_FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))


class DamageState(str, Enum):
    """Site damage regime, a pure function of pulse energy vs thresholds."""

    NONE = "none"
    VACANCIES = "vacancies"
    GRAPHITIZED = "graphitized"


@dataclass
class PulseGridSpec:
    """Geometry and per-row energies of a writing grid.

    Rows share one pulse energy; row 0 is written first. Energies of zero are
    allowed and mean "no pulse delivered" (the site stays pristine).
    """

    rows: int = 25
    cols: int = 20
    spacing_um: float = 5.0
    depth_um: float = 50.0
    energies_nj_per_row: list[float] = field(
        default_factory=lambda: list(FABRICATION_ENERGIES_NJ)
    )

    def __post_init__(self) -> None:
        if self.rows <= 0 or self.cols <= 0:
            raise ValueError("grid must have positive rows and cols")
        if self.spacing_um <= 0:
            raise ValueError("spacing_um must be positive")
        if len(self.energies_nj_per_row) != self.rows:
            raise ValueError(
                f"energies_nj_per_row has {len(self.energies_nj_per_row)} entries "
                f"for {self.rows} rows"
            )
        if any(e < 0 for e in self.energies_nj_per_row):
            raise ValueError("pulse energies must be non-negative")

    def site_position_um(self, row: int, col: int) -> tuple[float, float]:
        """Nominal in-plane target of a site, in micrometres."""
        return (col * self.spacing_um, row * self.spacing_um)


@dataclass
class YieldModelParams:
    """Vacancy yield model.

    Mean yield is zero at or below ``e_th_nj`` and
    ``scale * ((E - e_th) / e_th) ** gamma`` above it. Counts are drawn from
    a Poisson distribution by default, or from binomial(n_traps, p) with
    p = mean / n_traps when ``count_distribution == "binomial"``. The binomial
    mode exists because per-site single-NV probabilities above 1/e are
    impossible under Poisson statistics; with mean > n_traps, p is clamped to
    1 (counts saturate at n_traps).

    Vacancy positions are drawn from an isotropic Gaussian focal volume with
    the given FWHMs, relative to the focal centre.
    """

    e_th_nj: float = DEFAULT_E_TH_NJ
    gamma: float = 2.0
    scale: float = 5.45
    e1_nj: float = DEFAULT_E1_NJ
    e2_nj: float = DEFAULT_E2_NJ
    focal_fwhm_xy_nm: float = 350.0
    focal_fwhm_z_um: float = 2.0
    count_distribution: str = "poisson"
    n_traps: int = 2

    def __post_init__(self) -> None:
        if not (0 < self.e_th_nj <= self.e1_nj <= self.e2_nj):
            raise ValueError("thresholds must satisfy 0 < e_th <= e1 <= e2")
        if self.gamma <= 0 or self.scale <= 0:
            raise ValueError("gamma and scale must be positive")
        if self.focal_fwhm_xy_nm <= 0 or self.focal_fwhm_z_um <= 0:
            raise ValueError("focal FWHMs must be positive")
        if self.count_distribution not in ("poisson", "binomial"):
            raise ValueError(
                f"unknown count_distribution {self.count_distribution!r}"
            )
        if self.count_distribution == "binomial" and self.n_traps < 1:
            raise ValueError("n_traps must be >= 1 in binomial mode")


@dataclass
class VacancyCloud:
    """Vacancies generated at one site.

    ``positions_nm`` has shape (n, 3), relative to the focal centre.
    ``damage_state`` is classified from energy alone, so a site in the vacancy
    regime whose count draw is zero keeps state "vacancies" with an empty
    position list; a state of "none" always implies an empty list, and a
    non-empty list implies a damaged state.
    """

    site_index: tuple[int, int]
    energy_nj: float
    positions_nm: np.ndarray
    damage_state: DamageState

    def __post_init__(self) -> None:
        self.positions_nm = np.asarray(self.positions_nm, dtype=float).reshape(-1, 3)
        if self.damage_state == DamageState.NONE and len(self.positions_nm):
            raise ValueError("undamaged site cannot hold vacancies")

    @property
    def n_vacancies(self) -> int:
        return len(self.positions_nm)


def energy_after_objective(energy_before_nj: float) -> float:
    """Pulse energy delivered to the focus, in nJ.

    The objective transmits a constant fraction of 0.7.

    Raises
    ------
    ValueError
        If the input energy is negative.
    """
    e = np.asarray(energy_before_nj, dtype=float)
    if np.any(e < 0):
        raise ValueError("pulse energy must be non-negative")
    out = OBJECTIVE_TRANSMISSION * e
    return float(out) if np.ndim(energy_before_nj) == 0 else out


def mean_vacancy_yield(energy_nj: float, params: YieldModelParams) -> float:
    """Mean vacancy count at one site for a given pulse energy.

    Zero at or below threshold, strictly increasing above it.
    """
    e = np.asarray(energy_nj, dtype=float)
    if np.any(e < 0):
        raise ValueError("pulse energy must be non-negative")
    over = np.clip((e - params.e_th_nj) / params.e_th_nj, 0.0, None)
    out = params.scale * over**params.gamma
    return float(out) if np.ndim(energy_nj) == 0 else out


def damage_state_for_energy(energy_nj: float, params: YieldModelParams) -> DamageState:
    """Classify the damage regime from pulse energy alone."""
    if energy_nj < 0:
        raise ValueError("pulse energy must be non-negative")
    if energy_nj <= params.e_th_nj:
        return DamageState.NONE
    if energy_nj > params.e2_nj:
        return DamageState.GRAPHITIZED
    return DamageState.VACANCIES


def _draw_count(rng: np.random.Generator, mean: float, params: YieldModelParams) -> int:
    if mean <= 0:
        return 0
    if params.count_distribution == "poisson":
        return int(rng.poisson(mean))
    p = min(1.0, mean / params.n_traps)
    return int(rng.binomial(params.n_traps, p))


def simulate_site(
    energy_nj: float, params: YieldModelParams, seed
) -> VacancyCloud:
    """Generate the vacancy cloud of a single site.

    Parameters
    ----------
    energy_nj : float
        Pulse energy before the objective, nJ.
    params : YieldModelParams
    seed : int or numpy.random.SeedSequence
        Same (energy, params, seed) always yields a bit-identical cloud.

    Returns
    -------
    VacancyCloud
        Graphitized sites draw at least one vacancy: graphitic breakdown
        implies disrupted lattice, and downstream stages rely on the damage
        flag rather than the count.
    """
    rng = rng_from(seed)
    state = damage_state_for_energy(energy_nj, params)
    count = _draw_count(rng, mean_vacancy_yield(energy_nj, params), params)
    if state == DamageState.GRAPHITIZED and count == 0:
        count = 1
    if state == DamageState.NONE:
        count = 0
    sigma_xy = params.focal_fwhm_xy_nm * _FWHM_TO_SIGMA
    sigma_z = params.focal_fwhm_z_um * 1000.0 * _FWHM_TO_SIGMA
    positions = rng.normal(0.0, 1.0, size=(count, 3))
    positions[:, :2] *= sigma_xy
    positions[:, 2] *= sigma_z
    return VacancyCloud(
        site_index=(-1, -1),
        energy_nj=float(energy_nj),
        positions_nm=positions,
        damage_state=state,
    )


def simulate_grid(
    spec: PulseGridSpec,
    params: YieldModelParams,
    master_seed: int,
    site_order: list[tuple[int, int]] | None = None,
) -> list[VacancyCloud]:
    """Simulate every site of a grid.

    Per-site seeds come from ``derive_seed(master_seed, row, col, 0)``, so the
    result for a site depends only on (master_seed, row, col, energy) and the
    returned list, sorted by (row, col), is independent of ``site_order``,
    which only sets the evaluation sequence.
    """
    all_sites = [(r, c) for r in range(spec.rows) for c in range(spec.cols)]
    if site_order is None:
        site_order = all_sites
    elif sorted(site_order) != all_sites:
        raise ValueError("site_order must be a permutation of every (row, col) site")
    clouds: dict[tuple[int, int], VacancyCloud] = {}
    for row, col in site_order:
        cloud = simulate_site(
            spec.energies_nj_per_row[row], params, derive_seed(master_seed, row, col, 0)
        )
        cloud.site_index = (row, col)
        clouds[(row, col)] = cloud
    return [clouds[k] for k in sorted(clouds)]
