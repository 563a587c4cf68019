"""Quadratic field-distortion fitting and correction.

The imaging distortion is modeled per axis as a full 2-D quadratic,
x' = c0 + c1 x + c2 y + c3 x^2 + c4 xy + c5 y^2, fitted by linear least
squares from reference positions to measured ones. Correction subtracts the
mapped reference from the measurement, leaving physical displacements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["QuadraticMap", "fit_field_distortion", "correct_field_distortion"]


def _design_matrix(points: np.ndarray) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    return np.column_stack([np.ones_like(x), x, y, x**2, x * y, y**2])


@dataclass
class QuadraticMap:
    """Six polynomial coefficients per axis, basis [1, x, y, x^2, xy, y^2]."""

    coeff_x: np.ndarray
    coeff_y: np.ndarray

    def __post_init__(self) -> None:
        self.coeff_x = np.asarray(self.coeff_x, dtype=float)
        self.coeff_y = np.asarray(self.coeff_y, dtype=float)
        if self.coeff_x.shape != (6,) or self.coeff_y.shape != (6,):
            raise ValueError("each axis needs exactly 6 coefficients")

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        dm = _design_matrix(pts)
        return np.column_stack([dm @ self.coeff_x, dm @ self.coeff_y])


def fit_field_distortion(reference, measured) -> QuadraticMap:
    """Least-squares quadratic map taking reference positions to measured.

    Needs at least 12 matched pairs and a geometry that spans all six basis
    functions; degenerate layouts (e.g. collinear points) are rejected.
    """
    ref = np.asarray(reference, dtype=float).reshape(-1, 2)
    mea = np.asarray(measured, dtype=float).reshape(-1, 2)
    if ref.shape != mea.shape:
        raise ValueError("reference and measured must pair up one-to-one")
    if ref.shape[0] < 12:
        raise ValueError("need at least 12 matched point pairs")
    dm = _design_matrix(ref)
    # scale columns so rank detection is not thrown off by unit magnitudes
    scale = np.linalg.norm(dm, axis=0)
    sol, _, rank, _ = np.linalg.lstsq(dm / scale, mea, rcond=None)
    if rank < 6:
        raise ValueError("degenerate reference geometry: quadratic map is underdetermined")
    sol /= scale[:, None]
    return QuadraticMap(sol[:, 0], sol[:, 1])


def correct_field_distortion(measured, reference, distortion_map: QuadraticMap | None = None) -> np.ndarray:
    """Residual displacements after removing the quadratic distortion.

    When no map is supplied it is fitted from these same pairs; passing a
    map calibrated on fiducial markers avoids absorbing part of the physical
    scatter into the fit. Returns measured - map(reference), shape (n, 2).
    """
    mea = np.asarray(measured, dtype=float).reshape(-1, 2)
    ref = np.asarray(reference, dtype=float).reshape(-1, 2)
    if mea.shape != ref.shape:
        raise ValueError("measured and reference must pair up one-to-one")
    if distortion_map is None:
        distortion_map = fit_field_distortion(ref, mea)
    return mea - distortion_map.apply(ref)
