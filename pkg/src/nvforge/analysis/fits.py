"""Measurement-specific fit wrappers around the least-squares engine.

Each wrapper owns its initial-guess heuristic and its uncertainty model.
Count data get per-point sigma sqrt(max(counts, 1)); normalized intensities
(echo) are fitted unweighted, relying on the chi-square-scaled covariance
for realistic errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..photophysics import DecayHistogram, PLEStack
from .engine import FitParameter, FitResult, nlls_fit
from .models import (
    displacement_jacobian,
    displacement_model,
    echo_jacobian,
    echo_model,
    gaussian2d,
    gaussian2d_jacobian,
    lorentzian,
    lorentzian_jacobian,
    make_trpl_model,
)

__all__ = [
    "DisplacementParams",
    "EchoParams",
    "Localization",
    "fit_displacement",
    "fit_lorentzian",
    "aggregate_scans",
    "fit_echo",
    "fit_trpl",
    "fourier_limit_linewidth",
    "localize_emitter",
]


@dataclass
class DisplacementParams:
    r0_nm: float
    amplitude: float

    @classmethod
    def from_fit(cls, fit: FitResult) -> "DisplacementParams":
        return cls(fit.param("r0_nm"), fit.param("amplitude"))


@dataclass
class EchoParams:
    t2_us: float
    exponent: float
    y1: float
    y0: float

    @classmethod
    def from_fit(cls, fit: FitResult) -> "EchoParams":
        return cls(*(fit.param(n) for n in ("t2_us", "exponent", "amplitude", "offset")))


@dataclass
class Localization:
    x_nm: float
    y_nm: float
    stderr_x_nm: float
    stderr_y_nm: float
    fit: FitResult


def _count_sigma(counts) -> np.ndarray:
    return np.sqrt(np.maximum(np.asarray(counts, dtype=float), 1.0))


def fit_displacement(radii_nm, bin_width_nm: float = 40.0) -> FitResult:
    """Histogram radial displacements and fit A * r * exp(-r^2/r0^2).

    Needs at least 20 samples; the all-zero case is degenerate (r0
    unidentifiable) and rejected. Initial r0 is the histogram mode times
    sqrt(2), since the model peaks at r0/sqrt(2).

    The histogram extends past the largest radius to 2.5x the rms radius
    so the empty tail bins constrain the normalization, and after the
    first count-weighted pass the weights are rebuilt from the model and
    the fit repeated until r0 settles. Stopping at the count-weighted
    pass would leave the low bias Neyman weights give sparsely filled
    bins; the reweighted fixpoint matches the Poisson maximum-likelihood
    estimate to within a few percent of its variance bound.
    """
    r = np.asarray(radii_nm, dtype=float)
    if r.size < 20:
        raise ValueError("need at least 20 displacement samples")
    if np.any(r < 0):
        raise ValueError("radii must be >= 0")
    if not np.any(r > 0):
        raise ValueError("all radii are zero; r0 is unidentifiable")
    if bin_width_nm <= 0:
        raise ValueError("bin_width_nm must be > 0")
    rms = float(np.sqrt(np.mean(r**2)))
    top = max(r.max() * 1.05, 2.5 * rms)
    n_bins = max(6, int(np.ceil(top / bin_width_nm)))
    edges = np.arange(n_bins + 1) * bin_width_nm
    counts, _ = np.histogram(r, bins=edges)
    centers = 0.5 * (edges[:-1] + edges[1:])

    mode = centers[int(np.argmax(counts))]
    r0_init = max(np.sqrt(2.0) * mode, bin_width_nm)
    peak = max(float(counts.max()), 1.0)
    # model peak height is A * r0/sqrt(2) * exp(-1/2)
    a_init = peak / (r0_init / np.sqrt(2.0) * np.exp(-0.5))
    bounds = [(1e-3 * bin_width_nm, 1e4 * r.max()), (0.0, np.inf)]
    params = [
        FitParameter("r0_nm", r0_init, *bounds[0]),
        FitParameter("amplitude", a_init, *bounds[1]),
    ]
    fit = nlls_fit(
        displacement_model, centers, counts, _count_sigma(counts), params,
        jacobian=displacement_jacobian,
    )
    for _ in range(8):
        prev_r0 = fit.params[0]
        model = displacement_model(centers, fit.params)
        # half-count sigma floor keeps empty tail bins from dominating
        sigma = np.sqrt(np.maximum(model, 0.25))
        params = [
            FitParameter("r0_nm", fit.params[0], *bounds[0]),
            FitParameter("amplitude", fit.params[1], *bounds[1]),
        ]
        fit = nlls_fit(
            displacement_model, centers, counts, sigma, params,
            jacobian=displacement_jacobian,
        )
        if fit.converged and abs(fit.params[0] - prev_r0) < 1e-9 * max(prev_r0, 1.0):
            break
    return fit


def _lorentzian_init(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    offset = float(np.median(y))
    ipk = int(np.argmax(y))
    amplitude = float(y[ipk] - offset)
    center = float(x[ipk])
    half = offset + 0.5 * amplitude
    above = x[y >= half]
    fwhm = float(above.max() - above.min()) if above.size >= 2 else 0.0
    step = float(np.median(np.abs(np.diff(x))))
    fwhm = max(fwhm, 2.0 * step)
    return center, fwhm, amplitude, offset


def fit_lorentzian(frequency_mhz, counts, sigma=None) -> FitResult:
    """Lorentzian-plus-offset line fit with Poisson weighting.

    A result whose fitted amplitude is below twice its own standard error
    is downgraded to converged=False: the data contain no significant peak,
    and the width from such a fit is meaningless.
    """
    x = np.asarray(frequency_mhz, dtype=float)
    y = np.asarray(counts, dtype=float)
    if x.size != y.size or x.size < 5:
        raise ValueError("need matching frequency/count arrays of >= 5 points")
    if sigma is None:
        sigma = _count_sigma(y)
    center, fwhm, amplitude, offset = _lorentzian_init(x, y)
    span = float(x.max() - x.min())
    # a line centred outside the scanned range is not a measurement of it
    params = [
        FitParameter("center", center, float(x.min()) - span, float(x.max()) + span),
        FitParameter("fwhm", max(fwhm, 1e-6), 1e-6, 100.0 * span),
        FitParameter("amplitude", max(amplitude, 1e-9)),
        FitParameter("offset", offset),
    ]
    fit = nlls_fit(lorentzian, x, y, sigma, params, jacobian=lorentzian_jacobian)
    if fit.converged and abs(fit.param("amplitude")) < 2.0 * fit.stderr_of("amplitude"):
        fit.converged = False
        fit.message = "no significant peak (amplitude below 2 sigma)"
    return fit


def aggregate_scans(stack) -> tuple[np.ndarray, np.ndarray, FitResult]:
    """Sum a sweep stack pointwise and fit the aggregate line.

    Accepts a PLEStack or a list of (frequency, counts) sweeps sharing one
    frequency grid. Returns (frequencies, summed counts, Lorentzian fit).
    """
    if isinstance(stack, PLEStack):
        if stack.n_sweeps < 2:
            raise ValueError("need at least 2 sweeps to aggregate")
        freq = stack.detunings_mhz
        total = stack.counts.sum(axis=0)
    else:
        sweeps = list(stack)
        if len(sweeps) < 2:
            raise ValueError("need at least 2 sweeps to aggregate")
        freq = np.asarray(sweeps[0][0], dtype=float)
        for f, _ in sweeps[1:]:
            if not np.array_equal(np.asarray(f, dtype=float), freq):
                raise ValueError("sweeps are not on a common frequency grid")
        total = np.sum([np.asarray(c, dtype=float) for _, c in sweeps], axis=0)
    return freq, total, fit_lorentzian(freq, total)


def fit_echo(tau_us, intensity, sigma=None) -> FitResult:
    """Fit y1 * exp(-(tau/T2)^n) + y0 with the exponent free.

    Unweighted by default: echo points are normalized intensities whose
    absolute scale is already divided out, so errors come from the residual
    scatter via the chi-square-scaled covariance. The decay-rate initial
    guess is a log-linear regression of the above-baseline tail.
    """
    tau = np.asarray(tau_us, dtype=float)
    y = np.asarray(intensity, dtype=float)
    if tau.size != y.size or tau.size < 6:
        raise ValueError("need matching tau/intensity arrays of >= 6 points")
    if np.any(tau <= 0):
        raise ValueError("tau values must be > 0")
    if sigma is None:
        sigma = np.ones_like(y)

    tail = max(2, tau.size // 5)
    y0_init = float(np.mean(y[-tail:]))
    y1_init = max(float(y[0] - y0_init), 1e-3)
    excess = y - y0_init
    usable = excess > 0.05 * y1_init
    if np.count_nonzero(usable) >= 2:
        slope = np.polyfit(tau[usable], np.log(excess[usable]), 1)[0]
        t2_init = -1.0 / slope if slope < 0 else float(tau[-1])
    else:
        t2_init = float(np.median(tau))
    t2_init = min(max(t2_init, float(tau[0])), 10.0 * float(tau[-1]))
    params = [
        FitParameter("t2_us", t2_init, 1e-2 * tau[0], 1e3 * tau[-1]),
        FitParameter("exponent", 1.0, 0.2, 5.0),
        FitParameter("amplitude", y1_init, 0.0, np.inf),
        FitParameter("offset", y0_init),
    ]
    return nlls_fit(echo_model, tau, y, sigma, params, jacobian=echo_jacobian)


def fit_trpl(hist: DecayHistogram, irf, background: float = 0.0) -> FitResult:
    """Fit (T1, amplitude) of an IRF-convolved exponential to a histogram.

    ``background`` is a flat level subtracted from the counts first (the
    separate nearby-region estimate). Counting scatter tracks the expected
    rate, not the observed count: weighting by observed counts drags T1 low
    because downward-fluctuating tail bins get the tightest error bars. So
    after a first pass the sigmas are recomputed from the fitted curve and
    the fit repeated; two passes settle the weights.
    """
    t = hist.bin_centers_ns
    y = np.asarray(hist.counts, dtype=float) - background
    sigma = _count_sigma(hist.counts)
    model, jacobian = make_trpl_model(irf)

    ipk = int(np.argmax(y))
    peak = max(float(y[ipk]), 1.0)
    tail = (np.arange(y.size) > ipk) & (y > 0.02 * peak)
    if np.count_nonzero(tail) >= 2:
        slope = np.polyfit(t[tail], np.log(np.maximum(y[tail], 1e-9)), 1)[0]
        t1_init = -1.0 / slope if slope < 0 else float(t[-1] - t[0])
    else:
        t1_init = float(t[-1] - t[0]) / 4.0
    span = float(t[-1] - t[0])
    t1_init = min(max(t1_init, 4.0 * (t[1] - t[0])), 2.0 * span)
    unit_peak = float(model(t, np.array([t1_init, 1.0]))[ipk])
    a_init = peak / max(unit_peak, 1e-12)
    params = [
        FitParameter("t1_ns", t1_init, 0.1 * (t[1] - t[0]), 100.0 * span),
        FitParameter("amplitude", a_init, 0.0, np.inf),
    ]
    res = nlls_fit(model, t, y, sigma, params, jacobian=jacobian)
    for _ in range(2):
        mu = model(t, res.params) + background
        sigma = np.sqrt(np.maximum(mu, 1.0))
        warm = [
            FitParameter("t1_ns", float(res.params[0]), 0.1 * (t[1] - t[0]), 100.0 * span),
            FitParameter("amplitude", float(res.params[1]), 0.0, np.inf),
        ]
        res = nlls_fit(model, t, y, sigma, warm, jacobian=jacobian)
    return res


def fourier_limit_linewidth(t1_ns: float) -> float:
    """Lifetime-limited linewidth 1/(2 pi T1), in MHz for T1 in ns."""
    if t1_ns <= 0:
        raise ValueError("t1_ns must be > 0")
    return 1e3 / (2.0 * np.pi * t1_ns)


def localize_emitter(image, pixel_size_nm: float, saturation_level: float | None = None) -> Localization:
    """Fit a 2-D Gaussian spot to a PL image; centre and errors in nm.

    Pixel (row i, col j) is taken at (x, y) = (j, i) * pixel_size_nm.
    Empty images (no signal above a flat level) are rejected, as are
    saturated ones: any pixel at/above saturation_level when given,
    otherwise a plateau of more than max(4, 1%) pixels at the exact maximum.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim != 2 or img.shape[0] < 3 or img.shape[1] < 3:
        raise ValueError("image must be 2-D, at least 3x3")
    if pixel_size_nm <= 0:
        raise ValueError("pixel_size_nm must be > 0")
    if np.all(img == img.flat[0]):
        raise ValueError("empty image: no peak to localize")
    if saturation_level is not None:
        if np.any(img >= saturation_level):
            raise ValueError("saturated image: counts at or above saturation_level")
    else:
        at_max = int(np.count_nonzero(img == img.max()))
        if at_max > max(4, img.size // 100):
            raise ValueError("saturated image: flat-topped maximum")

    ny, nx = img.shape
    xg, yg = np.meshgrid(np.arange(nx) * pixel_size_nm, np.arange(ny) * pixel_size_nm)
    x = xg.ravel()
    y = yg.ravel()
    z = img.ravel()

    offset = float(np.median(z))
    amplitude = float(z.max() - offset)
    iy, ix = np.unravel_index(int(np.argmax(img)), img.shape)
    x0, y0 = ix * pixel_size_nm, iy * pixel_size_nm
    bright = z >= offset + 0.5 * amplitude
    if np.count_nonzero(bright) >= 3:
        w = z[bright] - offset
        sig = np.sqrt(np.sum(w * ((x[bright] - x0) ** 2 + (y[bright] - y0) ** 2)) / (2.0 * w.sum()))
    else:
        sig = pixel_size_nm
    sig = max(float(sig), 0.25 * pixel_size_nm)

    params = [
        FitParameter("x0", x0),
        FitParameter("y0", y0),
        FitParameter("sigma", sig, 0.05 * pixel_size_nm, 100.0 * max(nx, ny) * pixel_size_nm),
        FitParameter("amplitude", max(amplitude, 1e-9), 0.0, np.inf),
        FitParameter("offset", offset),
    ]
    fit = nlls_fit(gaussian2d, (x, y), z, _count_sigma(z), params, jacobian=gaussian2d_jacobian)
    return Localization(
        fit.param("x0"), fit.param("y0"), fit.stderr_of("x0"), fit.stderr_of("y0"), fit
    )
