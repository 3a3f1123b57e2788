"""Signed distance and closest-point projection for marker curves on a grid.

The signed distance s is positive outside the enclosed region and negative
inside (so grad s is the exterior normal at the foot point). Inside a
tubular band the foot of the perpendicular is found per grid point by a
coarse nearest-node scan on an upsampled spline followed by Newton on the
spline parameter; outside the band the nearest-node distance is used as a
smooth monotone continuation (only the tube matters downstream).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import shapely
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from .curves import CurveState, _geometry_arrays
from .fields import PeriodicGrid, ScalarField, VectorField


class TubeTooThin(RuntimeError):
    """The tubular radius is not resolved by enough grid cells."""


class PeriodicCurveSpline:
    """Periodic cubic spline through markers, parameter alpha in [0, 2pi)."""

    def __init__(self, markers: np.ndarray):
        m = markers.shape[0]
        alpha = np.linspace(0.0, 2.0 * np.pi, m + 1)
        closed = np.vstack([markers, markers[:1]])
        self._spline = CubicSpline(alpha, closed, axis=0, bc_type="periodic")
        self.m = m

    def __call__(self, alpha, nu: int = 0) -> np.ndarray:
        return self._spline(np.mod(alpha, 2.0 * np.pi), nu)

    def tangent(self, alpha) -> np.ndarray:
        xp = self(alpha, 1)
        return xp / np.linalg.norm(xp, axis=-1, keepdims=True)

    def normal(self, alpha) -> np.ndarray:
        t = self.tangent(alpha)
        return np.stack([t[..., 1], -t[..., 0]], axis=-1)

    def curvature(self, alpha) -> np.ndarray:
        xp = self(alpha, 1)
        xpp = self(alpha, 2)
        g = np.linalg.norm(xp, axis=-1)
        return (xp[..., 0] * xpp[..., 1] - xp[..., 1] * xpp[..., 0]) / g ** 3


@dataclass
class SignedDistanceField:
    """s, closest points, and foot parameters of one curve on one grid."""

    grid: PeriodicGrid
    s: ScalarField
    grad_s: VectorField        # exterior-normal direction field (p - cp)/s
    closest_point: VectorField
    closest_alpha: np.ndarray  # (nx, ny) spline parameter of the foot
    tube: np.ndarray           # (nx, ny) bool, where the Newton projection ran
    delta: float               # tubular radius
    band: float                # radius of the Newton band (> 2*delta)
    spline: PeriodicCurveSpline
    curve: CurveState


def min_self_distance(markers: np.ndarray) -> float:
    """Minimum distance between curve points far apart along the curve.

    Pairs closer than 1/8 of the curve (by index) are excluded; this is a
    proxy for the 'far' part of the reach, guarding necks of nonconvex
    curves. Adjacent-arc geometry is covered by the 1/max|H| term instead.
    """
    m = markers.shape[0]
    window = max(3, m // 8)
    d2 = np.sum((markers[:, None, :] - markers[None, :, :]) ** 2, axis=-1)
    idx = np.arange(m)
    sep = np.abs(idx[:, None] - idx[None, :])
    sep = np.minimum(sep, m - sep)
    d2[sep <= window] = np.inf
    return float(np.sqrt(d2.min()))


def seam_distance(markers: np.ndarray, box) -> float:
    """Distance from the curve to the periodic box boundary."""
    lx, ly = (box.lx, box.ly) if isinstance(box, PeriodicGrid) else box
    x, y = markers[:, 0], markers[:, 1]
    return float(min(x.min(), lx - x.max(), y.min(), ly - y.max()))


def estimate_delta(curve: CurveState, box) -> float:
    """Tubular radius: closest-point map must stay single-valued on the
    2*delta band (inward reach ~ 1/max|H|) and all cutoffs must close
    before the periodic seam. ``box`` is a PeriodicGrid or an (lx, ly) pair."""
    geom = _geometry_arrays(curve.markers)
    reach = 1.0 / np.max(np.abs(geom.curvature))
    return 0.45 * min(reach, min_self_distance(curve.markers),
                      seam_distance(curve.markers, box))


def signed_distance(curve: CurveState, grid: PeriodicGrid,
                    delta: float | None = None,
                    newton_iters: int = 12) -> SignedDistanceField:
    """Signed distance, foot points, and foot parameters on the grid.

    Raises
    ------
    TubeTooThin
        If delta < 8 * max(hx, hy): the tube is unresolved on this grid.
    """
    if delta is None:
        delta = estimate_delta(curve, grid)
    if delta < 8.0 * grid.h_max:
        raise TubeTooThin(
            f"tubular radius {delta:.4g} under-resolved: needs >= 8 cells, "
            f"grid spacing is {grid.h_max:.4g}")

    spline = PeriodicCurveSpline(curve.markers)
    m = curve.m
    up = 4 * m
    alpha_up = 2.0 * np.pi * np.arange(up) / up
    nodes = spline(alpha_up)

    pts = grid.points()
    dist0, idx0 = cKDTree(nodes).query(pts)
    alpha = alpha_up[idx0]

    band = 2.2 * delta
    in_band = dist0 <= band + 2.0 * np.pi / up

    # Newton on f(a) = (p - x(a)) . x'(a) = 0, clamped to one marker spacing
    a = alpha[in_band].copy()
    p = pts[in_band]
    max_step = 2.0 * np.pi / m
    for _ in range(newton_iters):
        e = p - spline(a)
        xp = spline(a, 1)
        xpp = spline(a, 2)
        f = np.einsum("ij,ij->i", e, xp)
        fp = np.einsum("ij,ij->i", xp, xp) - np.einsum("ij,ij->i", e, xpp)
        da = np.clip(f / fp, -max_step, max_step)
        a = a + da
    alpha[in_band] = np.mod(a, 2.0 * np.pi)

    cp = nodes[idx0].copy()
    cp[in_band] = spline(a)
    dist = dist0.copy()
    dist[in_band] = np.linalg.norm(p - cp[in_band], axis=1)

    # sign: outside the band by point-in-polygon on the densely sampled
    # spline; inside by the side of the foot's normal. The two agree except
    # in the O((P/4M)^2 max|H|) sliver between polygon and spline, where the
    # projection side is the smooth choice (a winding sign there would flip
    # grad s by 180 degrees for points essentially on the curve).
    polygon = shapely.Polygon(nodes)
    inside = shapely.contains_xy(polygon, pts[:, 0], pts[:, 1])
    s = np.where(inside, -dist, dist)
    side = np.einsum("ij,ij->i", p - cp[in_band], spline.normal(a))
    s[in_band] = np.where(side >= 0, dist[in_band], -dist[in_band])

    # grad s = (p - cp)/s away from the curve; at the curve itself (and in
    # the tiny polygon-vs-spline sliver where the sign is ambiguous) use the
    # spline normal at the foot, which is the same vector up to roundoff.
    gvec = np.zeros_like(pts)
    safe = np.abs(s) > 1e-9 * grid.h_max
    gvec[safe] = (pts[safe] - cp[safe]) / s[safe, None]
    gvec[~safe] = spline.normal(alpha[~safe])
    norms = np.linalg.norm(gvec, axis=1)
    gvec /= np.where(norms > 0, norms, 1.0)[:, None]

    shape = (grid.nx, grid.ny)
    return SignedDistanceField(
        grid=grid,
        s=ScalarField(grid, s.reshape(shape)),
        grad_s=VectorField(grid, gvec.reshape(shape + (2,))),
        closest_point=VectorField(grid, cp.reshape(shape + (2,))),
        closest_alpha=alpha.reshape(shape),
        tube=in_band.reshape(shape),
        delta=float(delta),
        band=float(band),
        spline=spline,
        curve=curve,
    )
