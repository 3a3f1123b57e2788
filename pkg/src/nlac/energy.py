"""Relative energy, bulk error functional, coercivity checks, Gronwall monitor.

The relative energy is computed in its decomposed nonnegative form

    E_rel = int ( eps/2 |grad u|^2 + W(u)/eps - |grad psi| ) dx      (discrepancy)
          + int ( 1 - xi . nu_eps ) |grad psi| dx                    (tilt excess)

rather than as Cahn-Hilliard energy plus int xi . grad psi: both integrands
are pointwise nonnegative (equipartition inequality; |xi| <= 1) and vanish
identically on exact optimal profiles, so the decomposed quadrature is
accurate at the O(eps^2) level the convergence study needs, where the
difference of the two large quantities would drown in aliasing error.

nu_eps = -grad psi / |grad psi| where the gradient is nonzero, an arbitrary
fixed unit vector e = (1, 0) elsewhere (the tilt integrand carries a factor
|grad psi| and does not care).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import shapely

from . import fields as F
from .curves import CurveState
from .potential import DEFAULT_WELL
from .solver import PhaseState

DEGENERATE_GRAD = 1e-14


class SignIncoherenceWarning(UserWarning):
    """Signed and absolute bulk-error evaluations disagree by > 5%."""


@dataclass
class RelativeEnergyBreakdown:
    t: float
    eps: float
    e_rel: float
    discrepancy: float        # int (eps/2 |grad u|^2 + W/eps - |grad psi|)
    tilt: float               # int (1 - xi.nu_eps) |grad psi|
    q1: float                 # int (sqrt(eps)|grad u| - sqrt(2W/eps))^2
    q2: float                 # int |nu_eps - xi|^2 |grad psi|
    q3: float                 # int |nu_eps - xi|^2 eps |grad u|^2
    q4: float                 # int min(s^2, 2 delta^2) energy density
    q4_cap: float             # the 2 delta^2 cap used in q4
    degenerate_points: int    # cells on the |grad psi| = 0 convention branch
    f_bulk: float | None = None
    f_bulk_abs: float | None = None
    l1_error: float | None = None
    sign_coherent: bool | None = None


def relative_energy(state: PhaseState, cal, well=DEFAULT_WELL,
                    backend: str = "spectral") -> RelativeEnergyBreakdown:
    """Relative energy and the Lemma-type coercivity quantities Q1..Q4.

    ``cal`` must carry xi (VectorField), sd (signed distance) and delta for
    the same time instant as ``state``.
    """
    grid = state.u.grid
    if cal.grid is not grid and (cal.grid.nx, cal.grid.ny) != (grid.nx, grid.ny):
        raise ValueError("state and calibration live on different grids")
    eps = state.eps
    u = state.u.values

    gu = F.gradient_values(u, grid, backend)
    gu_norm = np.hypot(gu[..., 0], gu[..., 1])
    w = well.W(u)
    e_density = 0.5 * eps * gu_norm ** 2 + w / eps
    gpsi_norm = well.phiprime(u) * gu_norm

    degenerate = gpsi_norm <= DEGENERATE_GRAD
    nu = np.empty_like(gu)
    scale = well.phiprime(u) / np.where(degenerate, 1.0, gpsi_norm)
    nu[..., 0] = -scale * gu[..., 0]
    nu[..., 1] = -scale * gu[..., 1]
    nu[degenerate, 0] = 1.0
    nu[degenerate, 1] = 0.0

    xi = cal.xi.values
    discrepancy_density = e_density - gpsi_norm
    tilt_density = (1.0 - (xi[..., 0] * nu[..., 0] + xi[..., 1] * nu[..., 1])) \
        * gpsi_norm

    sqrt_eps = np.sqrt(eps)
    q1_density = (sqrt_eps * gu_norm - well.sqrt2W(u) / sqrt_eps) ** 2
    dn = np.hypot(nu[..., 0] - xi[..., 0], nu[..., 1] - xi[..., 1])
    q2_density = dn ** 2 * gpsi_norm
    q3_density = dn ** 2 * eps * gu_norm ** 2
    cap = 2.0 * cal.delta ** 2
    q4_density = np.minimum(cal.sd.s.values ** 2, cap) * e_density

    I = lambda d: F.integrate_values(d, grid)  # noqa: E731
    discrepancy = I(discrepancy_density)
    tilt = I(tilt_density)
    return RelativeEnergyBreakdown(
        t=state.t, eps=eps,
        e_rel=discrepancy + tilt, discrepancy=discrepancy, tilt=tilt,
        q1=I(q1_density), q2=I(q2_density), q3=I(q3_density), q4=I(q4_density),
        q4_cap=cap, degenerate_points=int(degenerate.sum()))


@dataclass
class IndicatorData:
    """chi_Omega with the exact-clipping data behind the crossed cells."""

    chi: F.ScalarField
    area: float                  # polygon area (the exact |Omega| quadrature)
    crossed: np.ndarray          # (k, 2) cell indices the curve may cross
    clip_area: np.ndarray        # clipped areas (subcell resolution)
    clip_centroid: np.ndarray    # centroids of the clipped subregions
    clip_owner: np.ndarray       # crossed-cell index each clip belongs to


def indicator_data(curve: CurveState, grid: F.PeriodicGrid,
                   s_values: np.ndarray | None = None,
                   subcells: int = 4) -> IndicatorData:
    """chi_Omega rasterized with exact subcell polygon clipping.

    Cells away from the curve get 0/1 by point-in-polygon of their center;
    cells the curve may cross (|s| at the center below one cell diagonal)
    get the exact area fraction of cell-intersect-polygon, and the clipped
    region's area and centroid are kept so that integrals over Omega can be
    evaluated by the centroid rule (second order per cell, without the
    O(h^2 |grad psi|) kink error a pointwise |psi - chi| quadrature has).
    ``s_values`` (a signed-distance sample, e.g. from a calibration) selects
    the crossed band; without it, distance to a dense polygon is used.
    """
    dense = _dense_polygon_nodes(curve)
    polygon = shapely.Polygon(dense)
    pts = grid.points()
    inside = shapely.contains_xy(polygon, pts[:, 0], pts[:, 1])
    chi = inside.astype(float).reshape(grid.nx, grid.ny)

    if s_values is None:
        from scipy.spatial import cKDTree
        dist = cKDTree(dense).query(pts)[0].reshape(grid.nx, grid.ny)
    else:
        dist = np.abs(s_values)
    # a cell can only be crossed if its center is within half the cell
    # diagonal of the curve (plus slack for the distance sample itself)
    band = dist <= 0.72 * np.hypot(grid.hx, grid.hy)
    ii, jj = np.nonzero(band)
    x0 = ii * grid.hx
    y0 = jj * grid.hy
    # clip on a subcells x subcells refinement of each crossed cell: the
    # centroid rule's second-moment error on profile-steep integrands drops
    # by subcells^4; everything runs through shapely's vectorized ufuncs
    sub = max(1, subcells)
    hx_s, hy_s = grid.hx / sub, grid.hy / sub
    a_off, b_off = np.meshgrid(np.arange(sub), np.arange(sub), indexing="ij")
    a_off = a_off.ravel()
    b_off = b_off.ravel()
    sx0 = (x0[:, None] + a_off[None, :] * hx_s).ravel()
    sy0 = (y0[:, None] + b_off[None, :] * hy_s).ravel()
    owner_all = np.repeat(np.arange(ii.size), sub * sub)
    boxes = shapely.box(sx0, sy0, sx0 + hx_s, sy0 + hy_s)
    clips = shapely.intersection(boxes, polygon)
    all_areas = shapely.area(clips)
    keep = all_areas > 0.0
    areas = all_areas[keep]
    centroids = shapely.get_coordinates(shapely.centroid(clips[keep]))
    owner = owner_all[keep]
    frac = np.zeros(ii.size)
    np.add.at(frac, owner, areas)
    chi[ii, jj] = frac / grid.cell_area
    return IndicatorData(chi=F.ScalarField(grid, chi), area=polygon.area,
                         crossed=np.column_stack([ii, jj]),
                         clip_area=areas, clip_centroid=centroids,
                         clip_owner=owner)


def indicator_field(curve: CurveState, grid: F.PeriodicGrid,
                    s_values: np.ndarray | None = None) -> F.ScalarField:
    return indicator_data(curve, grid, s_values).chi


def _dense_polygon_nodes(curve: CurveState, factor: int = 8) -> np.ndarray:
    from .distance import PeriodicCurveSpline
    spline = PeriodicCurveSpline(curve.markers)
    alpha = 2.0 * np.pi * np.arange(factor * curve.m) / (factor * curve.m)
    return spline(alpha)


@dataclass
class BulkError:
    f_bulk: float        # int (psi - chi) theta dx (the Gronwall-side form)
    f_bulk_abs: float    # int |psi - chi| |theta| dx, evaluated independently
    l1_error: float      # int |psi - chi| dx
    sign_coherent: bool


def _bilinear(values: np.ndarray, grid: F.PeriodicGrid, pts: np.ndarray):
    """Periodic bilinear lookup at arbitrary points (cell-centered data)."""
    fx = pts[:, 0] / grid.hx - 0.5
    fy = pts[:, 1] / grid.hy - 0.5
    i0 = np.floor(fx).astype(int)
    j0 = np.floor(fy).astype(int)
    tx = fx - i0
    ty = fy - j0
    i0 %= grid.nx
    j0 %= grid.ny
    i1 = (i0 + 1) % grid.nx
    j1 = (j0 + 1) % grid.ny
    return ((1 - tx) * (1 - ty) * values[i0, j0]
            + tx * (1 - ty) * values[i1, j0]
            + (1 - tx) * ty * values[i0, j1]
            + tx * ty * values[i1, j1])


def _integral_over_region(values: np.ndarray, grid: F.PeriodicGrid,
                          ind: IndicatorData, point_values=None) -> float:
    """int_Omega f dx: full interior cells by corrected midpoint, crossed
    cells by the centroid rule on the exactly clipped areas.

    The per-cell midpoint correction h^2/24 (f_xx + f_yy) removes the
    composite O(h^2) boundary term, which for profile-scale integrands
    carries an (h/eps)^2-size relative error."""
    full = ind.chi.values.copy()
    full[ind.crossed[:, 0], ind.crossed[:, 1]] = 0.0
    vxx = (np.roll(values, -1, 0) - 2.0 * values + np.roll(values, 1, 0))
    vyy = (np.roll(values, -1, 1) - 2.0 * values + np.roll(values, 1, 1))
    corrected = values + vxx / 24.0 + vyy / 24.0
    total = float(grid.cell_area * (corrected * full).sum())
    if point_values is None:
        point_values = _bilinear(values, grid, ind.clip_centroid)
    return total + float((point_values * ind.clip_area).sum())


def bulk_error(state: PhaseState, curve: CurveState, cal,
               well=DEFAULT_WELL, chi=None) -> BulkError:
    """Volume error functional and the L1 phase error.

    With psi in [0, 1] and chi in {0, 1}, |psi - chi| = psi + chi - 2 psi chi
    pointwise, so the L1 error and the signed bulk functional reduce to
    integrals of smooth fields plus integrals over Omega, which the exactly
    clipped indicator evaluates by the centroid rule -- without the
    O(h^2 |grad psi|) kink error of a raw |psi - chi| midpoint sum. The
    absolute-value form of the bulk functional stays the direct, independent
    quadrature; the two must agree, and a discrepancy > 5% warns
    (SignIncoherenceWarning, diagnostic rather than fatal).
    """
    grid = state.u.grid
    if isinstance(chi, F.ScalarField):
        ind = None
        chi_field = chi
    else:
        ind = chi if isinstance(chi, IndicatorData) \
            else indicator_data(curve, grid, cal.sd.s.values)
        chi_field = ind.chi
    psi = well.phi(state.u.values)
    theta = cal.theta.values
    diff = psi - chi_field.values
    f_abs = F.integrate_values(np.abs(diff) * np.abs(theta), grid)

    if ind is None:
        # direct path for a caller-supplied plain chi field
        f_signed = F.integrate_values(diff * theta, grid)
        l1 = F.integrate_values(np.abs(diff), grid)
    else:
        # psi at the clipped centroids comes from a 4x Fourier-refined field:
        # native-grid bilinear lookups would reintroduce an (h/eps)^2 bias
        # exactly where the profile is steep
        u_fine, grid_fine = F.spectral_refine(state.u.values, grid, 4)
        psi_at_centroids = well.phi(_bilinear(u_fine, grid_fine,
                                              ind.clip_centroid))
        inner_psi = _integral_over_region(psi, grid, ind, psi_at_centroids)
        inner_theta = _integral_over_region(theta, grid, ind)
        l1 = F.integrate_values(psi, grid) + ind.area - 2.0 * inner_psi
        f_signed = F.integrate_values(psi * theta, grid) - inner_theta

    coherent = abs(f_signed - f_abs) <= 0.05 * f_abs or f_abs <= 1e-15
    if not coherent:
        warnings.warn(
            f"bulk error sign incoherence: signed={f_signed:.3e} "
            f"abs={f_abs:.3e} (diffuse interface drifted across the curve?)",
            SignIncoherenceWarning, stacklevel=2)
    return BulkError(f_bulk=f_signed, f_bulk_abs=f_abs, l1_error=l1,
                     sign_coherent=coherent)


def tube_l1_error(state: PhaseState, cal, well=DEFAULT_WELL,
                  chi: F.ScalarField | None = None, radius: float | None = None):
    """int over {|s| < radius} of |psi - chi|, for the interpolation bound
    (L1 tube error)^2 <= C * F_bulk."""
    grid = state.u.grid
    if chi is None:
        chi = indicator_field(cal.sd.curve, grid, cal.sd.s.values)
    radius = cal.delta if radius is None else radius
    mask = np.abs(cal.sd.s.values) < radius
    diff = np.abs(well.phi(state.u.values) - chi.values)
    return float(grid.cell_area * diff[mask].sum())


def fit_gronwall_constant(records) -> float:
    """Minimal C with log(E+F)(t) - log(E+F)(0) <= C t over the records.

    ``records`` is a sequence of (t, value) pairs, the first one being the
    initial time; values are floored at 1e-16.
    """
    records = list(records)
    if len(records) < 2:
        raise ValueError("need at least two records")
    t0, v0 = records[0]
    base = np.log(max(v0, 1e-16))
    c = 0.0
    for t, v in records[1:]:
        if t <= t0:
            raise ValueError("records must advance in time")
        c = max(c, (np.log(max(v, 1e-16)) - base) / (t - t0))
    return float(c)


@dataclass
class GronwallReport:
    c_fits: dict            # eps -> fitted constant
    c_floor: float
    spread: float           # max/min of floored constants
    passed: bool


def gronwall_monitor(runs, c_floor: float = 1.0) -> GronwallReport:
    """Fit per-run Gronwall constants and test their eps-uniformity.

    ``runs`` maps eps -> sequence of (t, E_rel + F_bulk) records. The pass
    criterion is a < 2x spread of the fitted constants across the sweep;
    constants are floored at ``c_floor`` first, since runs whose E+F decays
    or wobbles at the percent level fit C near (or below) zero and any
    ratio against those is noise. The unit floor is small against the
    theory-side constant (norms of grad B, curvature, ~O(5) here) yet an
    eps-divergent growth rate, the failure the monitor exists to catch,
    still blows past the 2x spread.
    """
    c_fits = {eps: fit_gronwall_constant(records) for eps, records in runs.items()}
    if not c_fits:
        raise ValueError("no runs given")
    floored = [max(c, c_floor) for c in c_fits.values()]
    spread = max(floored) / min(floored)
    return GronwallReport(c_fits=c_fits, c_floor=c_floor, spread=float(spread),
                          passed=bool(spread < 2.0))
