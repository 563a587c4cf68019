"""Fit model functions and their analytic Jacobians.

Every model takes ``(x, p)`` with ``p`` an array in the documented parameter
order and returns predictions as a 1-D array; the matching ``*_jacobian``
returns shape ``(n, k)``. The MODELS registry maps a model name to
``(model, jacobian, param_names)`` so generic code (and the finite-difference
cross-checks in the tests) can iterate over all of them.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "g2_model",
    "g2_jacobian",
    "lorentzian",
    "lorentzian_jacobian",
    "echo_model",
    "echo_jacobian",
    "displacement_model",
    "displacement_jacobian",
    "gaussian2d",
    "gaussian2d_jacobian",
    "make_trpl_model",
    "MODELS",
]


def g2_model(delay_ns, p):
    """Second-order correlation with antibunching dip and shelving bunching.

    p = (g2_0, c, tau2_ns, tau3_ns). The dip term always spans a unit depth
    below the bunching envelope; the long-delay asymptote is g2_0 + 1, not 1.
    The two exponential terms are grouped so the model is exactly g2_0 at
    zero delay in floating point.
    """
    g2_0, c, tau2, tau3 = p
    t = np.abs(np.asarray(delay_ns, dtype=float))
    e2 = np.exp(-t / tau2)
    e3 = np.exp(-t / tau3)
    tail = (1.0 - c * e2) + (c - 1.0) * e3
    return g2_0 + tail


def g2_jacobian(delay_ns, p):
    g2_0, c, tau2, tau3 = p
    t = np.abs(np.asarray(delay_ns, dtype=float))
    e2 = np.exp(-t / tau2)
    e3 = np.exp(-t / tau3)
    jac = np.empty((t.size, 4))
    jac[:, 0] = 1.0
    jac[:, 1] = e3 - e2
    jac[:, 2] = -c * e2 * t / tau2**2
    jac[:, 3] = (c - 1.0) * e3 * t / tau3**2
    return jac


def lorentzian(x, p):
    """Lorentzian line on a flat offset. p = (center, fwhm, amplitude, offset).

    ``amplitude`` is the peak height above the offset, in the units of the
    data; ``fwhm`` shares the units of ``x``.
    """
    center, fwhm, amplitude, offset = p
    h = 0.5 * fwhm
    u = np.asarray(x, dtype=float) - center
    return amplitude * h**2 / (u**2 + h**2) + offset


def lorentzian_jacobian(x, p):
    center, fwhm, amplitude, offset = p
    h = 0.5 * fwhm
    u = np.asarray(x, dtype=float) - center
    den = u**2 + h**2
    jac = np.empty((u.size, 4))
    jac[:, 0] = amplitude * h**2 * 2.0 * u / den**2
    jac[:, 1] = amplitude * h * u**2 / den**2
    jac[:, 2] = h**2 / den
    jac[:, 3] = 1.0
    return jac


def echo_model(tau_us, p):
    """Stretched-exponential coherence decay. p = (t2_us, exponent, amplitude, offset)."""
    t2, n, amplitude, offset = p
    tau = np.asarray(tau_us, dtype=float)
    z = (tau / t2) ** n
    return amplitude * np.exp(-z) + offset


def echo_jacobian(tau_us, p):
    t2, n, amplitude, offset = p
    tau = np.asarray(tau_us, dtype=float)
    z = (tau / t2) ** n
    e = np.exp(-z)
    jac = np.empty((tau.size, 4))
    jac[:, 0] = amplitude * e * n * z / t2
    # z*log(tau/t2) -> 0 as tau -> 0 for n > 0, but the log itself diverges
    dn = np.zeros_like(tau)
    pos = tau > 0
    dn[pos] = -amplitude * e[pos] * z[pos] * np.log(tau[pos] / t2)
    jac[:, 1] = dn
    jac[:, 2] = e
    jac[:, 3] = 1.0
    return jac


def displacement_model(r_nm, p):
    """In-plane radial displacement distribution, A * r * exp(-r^2 / r0^2).

    p = (r0_nm, amplitude). The mode sits at r0 / sqrt(2); the underlying
    per-axis Gaussian has variance r0^2 / 2, so r0 = 2 sqrt(Dt) for a
    diffusion displacement with in-plane variance 2 Dt per axis.
    """
    r0, amplitude = p
    r = np.asarray(r_nm, dtype=float)
    return amplitude * r * np.exp(-(r**2) / r0**2)


def displacement_jacobian(r_nm, p):
    r0, amplitude = p
    r = np.asarray(r_nm, dtype=float)
    e = np.exp(-(r**2) / r0**2)
    jac = np.empty((r.size, 2))
    jac[:, 0] = amplitude * r * e * 2.0 * r**2 / r0**3
    jac[:, 1] = r * e
    return jac


def gaussian2d(xy, p):
    """Isotropic 2-D Gaussian spot. xy = (x, y) arrays, p = (x0, y0, sigma, amplitude, offset)."""
    x0, y0, sigma, amplitude, offset = p
    x, y = xy
    rho2 = (np.asarray(x, dtype=float) - x0) ** 2 + (np.asarray(y, dtype=float) - y0) ** 2
    return amplitude * np.exp(-rho2 / (2.0 * sigma**2)) + offset


def gaussian2d_jacobian(xy, p):
    x0, y0, sigma, amplitude, offset = p
    x, y = xy
    dx = np.asarray(x, dtype=float) - x0
    dy = np.asarray(y, dtype=float) - y0
    e = np.exp(-(dx**2 + dy**2) / (2.0 * sigma**2))
    jac = np.empty((dx.size, 5))
    jac[:, 0] = amplitude * e * dx / sigma**2
    jac[:, 1] = amplitude * e * dy / sigma**2
    jac[:, 2] = amplitude * e * (dx**2 + dy**2) / sigma**3
    jac[:, 3] = e
    jac[:, 4] = 1.0
    return jac


def make_trpl_model(irf: np.ndarray):
    """Build a lifetime-decay model convolved with a fixed instrument response.

    ``irf`` is a non-negative kernel on the same bin grid as the data, summing
    to 1 within 1e-6. The returned pair ``(model, jacobian)`` takes bin times
    in ns and p = (t1_ns, amplitude); the decay starts at the first bin and is
    convolved causally, so the rising edge follows the kernel shape.
    """
    irf = np.asarray(irf, dtype=float)
    if irf.ndim != 1 or irf.size == 0:
        raise ValueError("irf must be a non-empty 1-D array")
    if np.any(irf < 0):
        raise ValueError("irf must be non-negative")
    if abs(irf.sum() - 1.0) > 1e-6:
        raise ValueError("irf must sum to 1 within 1e-6")

    def model(t_ns, p):
        t1, amplitude = p
        t = np.asarray(t_ns, dtype=float)
        decay = np.exp(-(t - t[0]) / t1)
        return amplitude * np.convolve(irf, decay)[: t.size]

    def jacobian(t_ns, p):
        t1, amplitude = p
        t = np.asarray(t_ns, dtype=float)
        rel = t - t[0]
        decay = np.exp(-rel / t1)
        conv = np.convolve(irf, decay)[: t.size]
        dconv = np.convolve(irf, decay * rel / t1**2)[: t.size]
        jac = np.empty((t.size, 2))
        jac[:, 0] = amplitude * dconv
        jac[:, 1] = conv
        return jac

    return model, jacobian


MODELS = {
    "g2": (g2_model, g2_jacobian, ["g2_0", "c", "tau2_ns", "tau3_ns"]),
    "lorentzian": (lorentzian, lorentzian_jacobian, ["center", "fwhm", "amplitude", "offset"]),
    "echo": (echo_model, echo_jacobian, ["t2_us", "exponent", "amplitude", "offset"]),
    "displacement": (displacement_model, displacement_jacobian, ["r0_nm", "amplitude"]),
    "gaussian2d": (gaussian2d, gaussian2d_jacobian, ["x0", "y0", "sigma", "amplitude", "offset"]),
}
