"""Per-row yield statistics and probability helpers."""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, sqrt

from ..fabrication import PulseGridSpec

__all__ = [
    "SiteClassification",
    "RowStats",
    "wilson_interval",
    "row_statistics",
    "poisson_single_probability",
]

# two-sided 95%
_Z95 = 1.959963984540054

SITE_CLASSES = ("empty", "one", "two", "three", "indeterminate", "graphitized")


@dataclass
class SiteClassification:
    """Outcome of one site's characterization.

    separation_nm is the largest in-plane distance between the site's NVs
    (None with fewer than two); it decides double vs spatially resolved pair.
    """

    site_index: tuple
    emitter_class: str
    separation_nm: float | None = None

    def __post_init__(self) -> None:
        self.site_index = (int(self.site_index[0]), int(self.site_index[1]))
        cls = str(self.emitter_class)
        if cls not in SITE_CLASSES:
            raise ValueError(f"unknown emitter class {cls!r}")
        self.emitter_class = cls


@dataclass
class RowStats:
    """Counts of emitter classes in one grid row of `sites` sites."""

    row: int
    pulse_energy_nj: float
    sites: int
    singles: int
    doubles: int
    pairs: int
    triples: int
    total_nvs: int
    single_probability: float
    single_ci_low: float
    single_ci_high: float


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be > 0")
    if not 0 <= successes <= trials:
        raise ValueError("successes must be in [0, trials]")
    p = successes / trials
    denom = 1.0 + z**2 / trials
    center = (p + z**2 / (2.0 * trials)) / denom
    half = z * sqrt(p * (1.0 - p) / trials + z**2 / (4.0 * trials**2)) / denom
    return center - half, center + half


def row_statistics(
    classifications: list,
    spec: PulseGridSpec,
    resolution_nm: float = 500.0,
) -> list[RowStats]:
    """Aggregate per-site classes into per-row yield statistics.

    A two-emitter site whose NV separation exceeds the optical resolution
    counts as a resolved "pair", otherwise as a "double"; both contribute
    two NVs to the row total, triples three. Row order follows the spec.
    """
    if len(classifications) != spec.rows * spec.cols:
        raise ValueError("need exactly one classification per site")
    by_row: dict[int, list[SiteClassification]] = {r: [] for r in range(spec.rows)}
    for sc in classifications:
        row = sc.site_index[0]
        if row not in by_row:
            raise ValueError(f"site row {row} outside the grid")
        by_row[row].append(sc)

    out = []
    for row in range(spec.rows):
        sites = by_row[row]
        if len(sites) != spec.cols:
            raise ValueError(f"row {row} has {len(sites)} sites, expected {spec.cols}")
        singles = sum(1 for s in sites if s.emitter_class == "one")
        two_sites = [s for s in sites if s.emitter_class == "two"]
        pairs = sum(
            1 for s in two_sites if s.separation_nm is not None and s.separation_nm > resolution_nm
        )
        doubles = len(two_sites) - pairs
        triples = sum(1 for s in sites if s.emitter_class == "three")
        total = singles + 2 * (doubles + pairs) + 3 * triples
        lo, hi = wilson_interval(singles, len(sites))
        out.append(
            RowStats(
                row=row,
                pulse_energy_nj=spec.energies_nj_per_row[row],
                sites=len(sites),
                singles=singles,
                doubles=doubles,
                pairs=pairs,
                triples=triples,
                total_nvs=total,
                single_probability=singles / len(sites),
                single_ci_low=lo,
                single_ci_high=hi,
            )
        )
    return out


def poisson_single_probability(mu: float) -> float:
    """P(exactly one) under Poisson(mu): mu * exp(-mu), maximal e^-1 at mu=1."""
    if mu < 0:
        raise ValueError("mu must be >= 0")
    return mu * exp(-mu)
