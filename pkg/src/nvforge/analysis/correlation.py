"""Photon-pair correlation histograms, g2 fitting, emitter counting.

correlate() builds the histogram of all pairwise delays t_b - t_a within a
window. Both streams are already sorted, so for every photon in `a` the
matching span of `b` is found with two binary searches and the pairs are
gathered vectorized, block by block; this is the two-pointer sweep in array
form, exact at any bin width. Normalization is the uncorrelated-pair
expectation rate_a * rate_b * bin_width * duration, and no background
correction is applied anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..constants import DEFAULT_CLASS_BOUNDARIES, PS_PER_NS
from ..photophysics import PhotonStream
from .engine import FitParameter, FitResult, nlls_fit
from .models import g2_jacobian, g2_model

__all__ = [
    "CorrelationHistogram",
    "G2Params",
    "EmitterClass",
    "correlate",
    "fit_g2",
    "classify_emitter_count",
]

_BLOCK = 1 << 18


@dataclass
class CorrelationHistogram:
    """Binned delay histogram with its uncorrelated normalization.

    ``normalization`` is the expected count per bin for two independent
    streams of the same rates, so counts/normalization estimates g2 per bin.
    """

    bin_edges_ns: np.ndarray
    counts: np.ndarray
    normalization: float

    def __post_init__(self) -> None:
        self.bin_edges_ns = np.asarray(self.bin_edges_ns, dtype=float)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.bin_edges_ns.size != self.counts.size + 1:
            raise ValueError("need one more edge than counts")
        if np.any(np.diff(self.bin_edges_ns) <= 0):
            raise ValueError("bin edges must increase")
        if not self.normalization > 0:
            raise ValueError("normalization must be > 0")
        if np.any(self.counts < 0):
            raise ValueError("counts must be >= 0")

    @property
    def bin_centers_ns(self) -> np.ndarray:
        return 0.5 * (self.bin_edges_ns[:-1] + self.bin_edges_ns[1:])

    @property
    def normalized_values(self) -> np.ndarray:
        return self.counts / self.normalization

    @property
    def normalized_sigma(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.counts, 1)) / self.normalization


@dataclass
class G2Params:
    """Parameters of the three-level correlation model."""

    g2_0: float
    c: float
    tau2_ns: float
    tau3_ns: float

    def __post_init__(self) -> None:
        if self.tau2_ns <= 0 or self.tau3_ns <= 0:
            raise ValueError("tau2_ns and tau3_ns must be > 0")
        if self.g2_0 < 0:
            raise ValueError("g2_0 must be >= 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.g2_0, self.c, self.tau2_ns, self.tau3_ns])

    @classmethod
    def from_fit(cls, fit: FitResult) -> "G2Params":
        return cls(*(fit.param(n) for n in ("g2_0", "c", "tau2_ns", "tau3_ns")))


class EmitterClass(str, Enum):
    ONE = "one"
    TWO = "two"
    THREE = "three"
    INDETERMINATE = "indeterminate"


def correlate(
    a: PhotonStream,
    b: PhotonStream,
    bin_width_ns: float = 1.0,
    window_ns: float = 500.0,
) -> CorrelationHistogram:
    """Histogram of delays t_b - t_a over +-window, in uniform bins.

    Bins are centred on multiples of the bin width, so the central bin
    straddles zero delay. Durations must match; empty streams are rejected
    because the normalization would vanish.
    """
    if a.duration_ps != b.duration_ps:
        raise ValueError("streams must share one acquisition duration")
    if a.n_photons == 0 or b.n_photons == 0:
        raise ValueError("cannot correlate an empty stream")
    if bin_width_ns <= 0 or window_ns <= 0:
        raise ValueError("bin_width_ns and window_ns must be > 0")
    k = int(round(window_ns / bin_width_ns))
    if k < 1:
        raise ValueError("window must span at least one bin width")

    bw_ps = bin_width_ns * PS_PER_NS
    half_ps = (k + 0.5) * bw_ps
    ta = a.timestamps_ps
    tb = b.timestamps_ps
    counts = np.zeros(2 * k + 1, dtype=np.int64)
    for start in range(0, ta.size, _BLOCK):
        blk = ta[start : start + _BLOCK]
        lo = np.searchsorted(tb, blk - half_ps, side="left")
        hi = np.searchsorted(tb, blk + half_ps, side="right")
        n = hi - lo
        total = int(n.sum())
        if total == 0:
            continue
        cum = np.cumsum(n)
        flat = np.arange(total) + np.repeat(lo - np.concatenate(([0], cum[:-1])), n)
        delays = tb[flat] - np.repeat(blk, n)
        idx = np.rint(delays / bw_ps).astype(np.int64)
        inside = np.abs(idx) <= k
        counts += np.bincount(idx[inside] + k, minlength=2 * k + 1)

    edges = (np.arange(-k, k + 2) - 0.5) * bin_width_ns
    norm = a.n_photons * b.n_photons * bw_ps / a.duration_ps
    return CorrelationHistogram(edges, counts, norm)


def _default_inits(hist: CorrelationHistogram) -> list[G2Params]:
    """Two starting points, one per chi2 basin of the tau3 direction.

    The model's bunching term can either decay inside the window (real
    bunching) or act as a near-constant baseline carrier (tau3 far beyond
    the window). Which basin is global depends on the data, and a local
    optimizer cannot cross between them, so the fit is started in both.
    """
    v = hist.normalized_values
    t = hist.bin_centers_ns
    i0 = int(np.argmin(np.abs(t)))
    center = float(v[i0])
    span = float(np.abs(t).max())
    outer_mask = np.abs(t) >= 0.8 * span
    outer = float(v[outer_mask].mean())
    g2_0 = min(max(center, 1e-3), 3.0)
    c = min(max(outer - center, 0.1), 5.0)
    above = np.abs(t)[v >= 0.5 * (center + outer)]
    tau2 = float(above.min()) if above.size else 0.0
    bw = float(t[1] - t[0])
    tau2 = min(max(tau2, 2.0 * bw), 0.5 * span)

    # bunching start: raise c by the mid-window baseline excess so the
    # in-window tail has something to decay from
    inner_mask = (np.abs(t) >= 0.25 * span) & (np.abs(t) <= 0.5 * span)
    excess = float(v[inner_mask].mean()) - outer if inner_mask.any() else 0.0
    c_bunch = min(c + max(2.0 * excess, 0.1), 5.0)
    return [
        G2Params(g2_0, c, tau2, 10.0 * span),
        G2Params(g2_0, c_bunch, tau2, 0.25 * span),
    ]


def fit_g2(hist: CorrelationHistogram, init: G2Params | None = None) -> FitResult:
    """Weighted fit of the three-level g2 model to a normalized histogram.

    Per-bin sigma is sqrt(max(counts, 1))/normalization. When no initial
    guess is supplied the fit runs from both default starts (plateau-like
    and in-window bunching) and keeps the lower-chi2 converged result;
    an explicit ``init`` runs exactly once.
    """
    inits = [init] if init is not None else _default_inits(hist)
    span = float(np.abs(hist.bin_centers_ns).max())
    bw = float(hist.bin_edges_ns[1] - hist.bin_edges_ns[0])
    best = None
    for start in inits:
        params = [
            FitParameter("g2_0", start.g2_0, 0.0, 10.0),
            FitParameter("c", start.c, 1e-4, 20.0),
            FitParameter("tau2_ns", start.tau2_ns, 0.1 * bw, 10.0 * span),
            FitParameter("tau3_ns", start.tau3_ns, 0.1 * bw, 1000.0 * span),
        ]
        res = nlls_fit(
            g2_model,
            hist.bin_centers_ns,
            hist.normalized_values,
            hist.normalized_sigma,
            params,
            jacobian=g2_jacobian,
        )
        if (
            best is None
            or (res.converged and not best.converged)
            or (res.converged == best.converged and res.chi2 < best.chi2)
        ):
            best = res
    return best


def classify_emitter_count(
    g2_0: float, boundaries: tuple = DEFAULT_CLASS_BOUNDARIES
) -> EmitterClass:
    """Map a fitted g2(0) to an emitter count class.

    Half-open intervals: one below boundaries[0]; two in [b0, b1); three in
    [b1, b2); indeterminate at or above b2.
    """
    if g2_0 < 0:
        raise ValueError("g2_0 must be >= 0")
    b0, b1, b2 = boundaries
    if not b0 < b1 < b2:
        raise ValueError("boundaries must increase")
    if g2_0 < b0:
        return EmitterClass.ONE
    if g2_0 < b1:
        return EmitterClass.TWO
    if g2_0 < b2:
        return EmitterClass.THREE
    return EmitterClass.INDETERMINATE
