"""Gradient-flow calibration (xi, B, theta, lambda, c) and its certification.

Construction, per reference-flow snapshot:

* signed distance s and closest-point data on the grid (distance module);
* xi = zeta(s) grad s with zeta(r) = 1 - r^2/(2 delta^2) near the curve,
  blended to 0 by a quintic smoothstep on [delta/2, delta];
* theta = theta_trunc(s), the odd C^2 truncation of the identity with
  plateau 3 delta/4, so that theta/s stays in [1/2, 1] on supp xi;
* the tangential potential: c = avg(V H), solve phi'' = V H - c spectrally
  in arclength, X = -phi' tau, which makes div B = c on the curve
  (the other sign would give div B = 2 V H - c there);
* B = eta(s) ((V nu + X) at the closest point), eta = 1 inside delta,
  blended to 0 on [delta, 2 delta].

Certification evaluates the calibration conditions on tubular shells,
with time derivatives from centered differences of two calibration
snapshots and spatial derivatives by 2nd-order finite differences, fits
the decay order in the shell radius, and classifies conditions whose
residual sits at the discretization floor (the exact ansatz satisfies the
transport conditions identically, so their measured residual is pure
O(dt^2) + O(h^2) noise; a Richardson refinement in each parameter detects
this and such a residual trivially satisfies an O(dist) requirement).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as _fft
from scipy.interpolate import CubicSpline

from . import fields as F
from .curves import CurveGeometry, CurveState, geometry, resample_uniform, vpmcf_velocity
from .distance import SignedDistanceField, signed_distance

CONDITIONS = (
    "eq09_div_B",
    "eq10_xixi_grad_B",
    "eq11_transport_theta",
    "eq12_transport_xi_sq",
    "eq13_transport_xi",
    "eq14_geometric_evolution",
)
ORDER_THRESHOLDS = {name: 0.9 for name in CONDITIONS}
ORDER_THRESHOLDS["eq12_transport_xi_sq"] = 1.8


class InsufficientShells(RuntimeError):
    """Fewer than 4 tubular shells fit between 2h and delta/2."""


def smoothstep(x):
    """Quintic smoothstep: 0 below 0, 1 above 1, C^2 at both junctions."""
    xc = np.clip(x, 0.0, 1.0)
    return xc ** 3 * (10.0 + xc * (6.0 * xc - 15.0))


def smoothstep_antiderivative(x):
    xc = np.clip(x, 0.0, 1.0)
    base = xc ** 4 * (2.5 + xc * (xc - 3.0))
    return base + np.maximum(x - 1.0, 0.0)


@dataclass(frozen=True)
class Cutoffs:
    """The three 1D cutoff profiles of the construction, all C^2."""

    delta: float

    def zeta(self, r):
        d = self.delta
        a = np.abs(r)
        quad = 1.0 - r * r / (2.0 * d * d)
        blend = 1.0 - smoothstep((a - 0.5 * d) / (0.5 * d))
        return np.where(a >= d, 0.0, quad * blend)

    def theta(self, r):
        # theta' = 1, blended to 0 on [delta/2, delta]; plateau 3 delta/4
        d = self.delta
        a = np.abs(r)
        x = (a - 0.5 * d) / (0.5 * d)
        mid = 0.5 * d + 0.5 * d * (np.clip(x, 0.0, 1.0)
                                   - smoothstep_antiderivative(np.clip(x, 0.0, 1.0)))
        out = np.where(a <= 0.5 * d, a, np.where(a >= d, 0.75 * d, mid))
        return np.sign(r) * out

    def eta(self, r):
        d = self.delta
        a = np.abs(r)
        return np.where(a <= d, 1.0,
                        np.where(a >= 2.0 * d, 0.0,
                                 1.0 - smoothstep((a - d) / d)))


def tangential_potential(geom: CurveGeometry, v: np.ndarray):
    """Solve the surface Poisson problem for the tangential velocity.

    c = (oint V H ds)/perimeter; phi'' = V H - c spectrally in arclength
    (markers must be uniform in arclength), zero mean; the tangential field
    is X = -phi' tau, the sign that makes div_Sigma X = c - V H and hence
    div B = c on the curve.

    Returns (phi per marker, X per marker as (M, 2), c).
    """
    w = geom.weights
    c = float(np.sum(v * geom.curvature * w) / np.sum(w))
    rhs = v * geom.curvature - c
    m = rhs.shape[0]
    length = geom.perimeter
    k = np.fft.rfftfreq(m, d=1.0 / m) * (2.0 * np.pi / length)  # arclength wavenumbers
    rh = _fft.rfft(rhs)
    with np.errstate(divide="ignore", invalid="ignore"):
        ph = np.where(k > 0, -rh / k ** 2, 0.0)
    pot = _fft.irfft(ph, n=m)
    dph = np.where(k > 0, ph * 1j * k, 0.0)
    if m % 2 == 0:
        dph[-1] = 0.0
    pot_prime = _fft.irfft(dph, n=m)
    x_scalar = -pot_prime
    return pot, x_scalar[:, None] * geom.tangent, c


def _periodic_scalar_spline(values: np.ndarray) -> CubicSpline:
    m = values.shape[0]
    alpha = np.linspace(0.0, 2.0 * np.pi, m + 1)
    return CubicSpline(alpha, np.concatenate([values, values[:1]]),
                       bc_type="periodic")


@dataclass
class Calibration:
    """Sampled calibration fields plus the 1D data behind them."""

    grid: F.PeriodicGrid
    t: float
    delta: float
    xi: F.VectorField
    B: F.VectorField
    theta: F.ScalarField
    lam: float                      # sharp-interface multiplier, avg curvature
    c: float                        # divergence constant avg(V H)
    sd: SignedDistanceField
    geom: CurveGeometry
    v: np.ndarray                   # per-marker normal velocity
    x_tangential: np.ndarray        # per-marker tangential field X
    potential: np.ndarray           # per-marker Poisson potential
    cutoffs: Cutoffs


def build_calibration(curve: CurveState, grid: F.PeriodicGrid,
                      delta: float | None = None,
                      resample: bool = True) -> Calibration:
    """Construct (xi, B, theta, lambda, c) for one snapshot on one grid."""
    markers = resample_uniform(curve.markers) if resample else curve.markers
    state = CurveState(markers, t=curve.t)
    geom = geometry(state, check_simple=False)
    v, lam = vpmcf_velocity(geom)
    pot, x_tan, c = tangential_potential(geom, v)

    sd = signed_distance(state, grid, delta=delta)
    cut = Cutoffs(sd.delta)
    s = sd.s.values

    xi = cut.zeta(s)[..., None] * sd.grad_s.values

    theta = cut.theta(s)

    v_spline = _periodic_scalar_spline(v)
    x_spline = _periodic_scalar_spline(_to_scalar_tangential(x_tan, geom))
    b = np.zeros(s.shape + (2,))
    support = np.abs(s) < 2.0 * sd.delta
    alpha = np.mod(sd.closest_alpha[support], 2.0 * np.pi)
    tau = sd.spline.tangent(alpha)
    nu = sd.spline.normal(alpha)
    vecs = v_spline(alpha)[:, None] * nu + x_spline(alpha)[:, None] * tau
    b[support] = cut.eta(s[support])[:, None] * vecs

    return Calibration(
        grid=grid, t=curve.t, delta=sd.delta,
        xi=F.VectorField(grid, xi), B=F.VectorField(grid, b),
        theta=F.ScalarField(grid, theta), lam=lam, c=c, sd=sd, geom=geom,
        v=v, x_tangential=x_tan, potential=pot, cutoffs=cut)


def _to_scalar_tangential(x_tan: np.ndarray, geom: CurveGeometry) -> np.ndarray:
    return np.einsum("ij,ij->i", x_tan, geom.tangent)


# ---------------------------------------------------------------------------
# verification


def residual_fields(cal_m: Calibration, cal_p: Calibration,
                    backend: str = "fd2"):
    """Left-hand sides of the calibration conditions at the pair midpoint.

    Time derivatives are centered differences of the two snapshots; spatial
    derivatives act on the averaged fields. Returns (residuals, s_mid,
    scales), where scales holds the magnitude of each condition's largest
    constituent term (the yardstick for 'residual at the numerical floor').
    """
    if (cal_m.grid.nx, cal_m.grid.ny) != (cal_p.grid.nx, cal_p.grid.ny):
        raise ValueError("calibration pair must share a grid")
    grid = cal_m.grid
    dt = cal_p.t - cal_m.t
    if dt <= 0:
        raise ValueError("snapshots must be time-ordered")

    mid = lambda a, b: 0.5 * (a + b)  # noqa: E731
    ddt = lambda a, b: (b - a) / dt   # noqa: E731

    s_mid = mid(cal_m.sd.s.values, cal_p.sd.s.values)
    xi = mid(cal_m.xi.values, cal_p.xi.values)
    b_field = mid(cal_m.B.values, cal_p.B.values)
    theta = mid(cal_m.theta.values, cal_p.theta.values)
    lam = mid(cal_m.lam, cal_p.lam)
    c_const = mid(cal_m.c, cal_p.c)

    grad = lambda vals: F.gradient_values(vals, grid, backend)  # noqa: E731
    gbx = grad(b_field[..., 0])   # gbx[..., i] = d_i B_x
    gby = grad(b_field[..., 1])
    div_b = gbx[..., 0] + gby[..., 1]
    gxx = grad(xi[..., 0])
    gxy = grad(xi[..., 1])
    div_xi = gxx[..., 0] + gxy[..., 1]
    gtheta = grad(theta)

    res = {}
    scales = {}

    res["eq09_div_B"] = div_b - c_const
    scales["eq09_div_B"] = max(np.abs(div_b).max(), abs(c_const))

    # xi_i xi_j d_i B_j
    xx = (xi[..., 0] * (xi[..., 0] * gbx[..., 0] + xi[..., 1] * gby[..., 0])
          + xi[..., 1] * (xi[..., 0] * gbx[..., 1] + xi[..., 1] * gby[..., 1]))
    res["eq10_xixi_grad_B"] = xx
    scales["eq10_xixi_grad_B"] = max(np.abs(gbx).max(), np.abs(gby).max())

    dtheta = ddt(cal_m.theta.values, cal_p.theta.values)
    adv_theta = b_field[..., 0] * gtheta[..., 0] + b_field[..., 1] * gtheta[..., 1]
    res["eq11_transport_theta"] = dtheta + adv_theta
    scales["eq11_transport_theta"] = max(np.abs(dtheta).max(),
                                         np.abs(adv_theta).max(), 1e-30)

    xi_sq_m = np.sum(cal_m.xi.values ** 2, axis=-1)
    xi_sq_p = np.sum(cal_p.xi.values ** 2, axis=-1)
    gxisq = grad(mid(xi_sq_m, xi_sq_p))
    dxisq = ddt(xi_sq_m, xi_sq_p)
    adv_xisq = b_field[..., 0] * gxisq[..., 0] + b_field[..., 1] * gxisq[..., 1]
    res["eq12_transport_xi_sq"] = dxisq + adv_xisq
    scales["eq12_transport_xi_sq"] = max(np.abs(dxisq).max(),
                                         np.abs(adv_xisq).max(), 1e-30)

    dxi = ddt(cal_m.xi.values, cal_p.xi.values)
    comp = np.empty_like(xi)
    # (B.grad) xi_j + ((grad B)^T xi)_j = B_i d_i xi_j + xi_i d_j B_i
    comp[..., 0] = (dxi[..., 0]
                    + b_field[..., 0] * gxx[..., 0] + b_field[..., 1] * gxx[..., 1]
                    + xi[..., 0] * gbx[..., 0] + xi[..., 1] * gby[..., 0])
    comp[..., 1] = (dxi[..., 1]
                    + b_field[..., 0] * gxy[..., 0] + b_field[..., 1] * gxy[..., 1]
                    + xi[..., 0] * gbx[..., 1] + xi[..., 1] * gby[..., 1])
    res["eq13_transport_xi"] = np.hypot(comp[..., 0], comp[..., 1])
    scales["eq13_transport_xi"] = max(np.abs(dxi).max(),
                                      np.abs(gxx).max() + np.abs(gxy).max(), 1e-30)

    b_dot_xi = b_field[..., 0] * xi[..., 0] + b_field[..., 1] * xi[..., 1]
    res["eq14_geometric_evolution"] = b_dot_xi + div_xi - lam
    scales["eq14_geometric_evolution"] = max(np.abs(b_dot_xi).max(),
                                             np.abs(div_xi).max(), abs(lam))

    return res, s_mid, scales


def shell_edges(grid: F.PeriodicGrid, delta: float, ratio: float = 1.35,
                min_shells: int = 4):
    """Geometric shell edges on [2h, delta/2].

    Raises
    ------
    InsufficientShells
        If fewer than ``min_shells`` shells of ratio >= 1.12 fit.
    """
    lo = 2.0 * grid.h_max
    hi = 0.5 * delta
    if hi / lo >= ratio ** min_shells:
        n = int(np.floor(np.log(hi / lo) / np.log(ratio)))
    else:
        n = int(np.floor(np.log(hi / lo) / np.log(1.12)))
        if n < min_shells:
            raise InsufficientShells(
                f"only {max(n, 0)} shells fit between 2h={lo:.3g} and "
                f"delta/2={hi:.3g}")
    return np.geomspace(lo, hi, n + 1)


def shell_maxima(values: np.ndarray, s: np.ndarray, edges: np.ndarray):
    """(radii, maxima): max |values| on each shell {e_k <= |s| < e_k+1}."""
    a = np.abs(s)
    radii = np.sqrt(edges[:-1] * edges[1:])
    maxima = np.empty(len(edges) - 1)
    av = np.abs(values)
    for k in range(len(edges) - 1):
        mask = (a >= edges[k]) & (a < edges[k + 1])
        maxima[k] = av[mask].max() if mask.any() else 0.0
    return radii, maxima


def fit_decay_order(radii: np.ndarray, maxima: np.ndarray) -> float:
    """Least-squares slope of log(max residual) against log(shell radius)."""
    good = maxima > 0
    if good.sum() < 2:
        return 0.0
    lx = np.log(radii[good])
    ly = np.log(maxima[good])
    slope = np.polyfit(lx, ly, 1)[0]
    return float(slope)


@dataclass
class ConditionResult:
    name: str
    radii: np.ndarray
    maxima: np.ndarray
    order: float
    threshold: float
    scale: float
    time_ratio: float | None = None    # shell max ratio at pair spacing dt/2
    space_ratio: float | None = None   # coarse-grid max / fine-grid max
    passed: bool = False
    reason: str = ""


@dataclass
class StaticChecks:
    """Pointwise conditions that need no differencing."""

    shortness_margin: float   # max over grid of |xi| - (1 - s^2/(2 delta^2))_+
    theta_ratio_min: float    # min |theta|/|s| on supp xi
    theta_ratio_max: float    # max |theta|/|s| on supp xi
    theta_sign_ok: bool       # theta > 0 outside, < 0 inside
    theta_sup: float          # global sup |theta| (bounded by delta)
    xi_outside_support: float  # max |xi| where |s| > delta
    b_outside_support: float   # max |B| where |s| > 2 delta
    on_curve_nu_nu_grad_b: float  # max |nu x nu : grad B| on the |s| < h shell
    on_curve_div_b_minus_c: float

    @property
    def shortness_ok(self) -> bool:
        return self.shortness_margin <= 1e-10

    @property
    def theta_bilipschitz_ok(self) -> bool:
        return self.theta_ratio_min >= 0.5 - 1e-9 and self.theta_ratio_max <= 1.0 + 1e-9


def static_checks(cal: Calibration, backend: str = "fd2") -> StaticChecks:
    grid = cal.grid
    s = cal.sd.s.values
    xi_norm = np.hypot(cal.xi.values[..., 0], cal.xi.values[..., 1])
    bound = np.clip(1.0 - s * s / (2.0 * cal.delta ** 2), 0.0, None)
    shortness_margin = float((xi_norm - bound).max())

    theta = cal.theta.values
    on_support = (np.abs(s) <= cal.delta) & (np.abs(s) > 1e-12)
    ratios = np.abs(theta[on_support]) / np.abs(s[on_support])
    sign_ok = bool(np.all(np.sign(theta[on_support]) == np.sign(s[on_support])))

    outside = np.abs(s) > cal.delta
    far = np.abs(s) > 2.0 * cal.delta
    b_norm = np.hypot(cal.B.values[..., 0], cal.B.values[..., 1])

    gbx = F.gradient_values(cal.B.values[..., 0], grid, backend)
    gby = F.gradient_values(cal.B.values[..., 1], grid, backend)
    nu = cal.sd.grad_s.values
    nunu = (nu[..., 0] * (nu[..., 0] * gbx[..., 0] + nu[..., 1] * gby[..., 0])
            + nu[..., 1] * (nu[..., 0] * gbx[..., 1] + nu[..., 1] * gby[..., 1]))
    div_b = gbx[..., 0] + gby[..., 1]
    near = np.abs(s) <= grid.h_max

    return StaticChecks(
        shortness_margin=shortness_margin,
        theta_ratio_min=float(ratios.min()),
        theta_ratio_max=float(ratios.max()),
        theta_sign_ok=sign_ok,
        theta_sup=float(np.abs(theta).max()),
        xi_outside_support=float(xi_norm[outside].max()) if outside.any() else 0.0,
        b_outside_support=float(b_norm[far].max()) if far.any() else 0.0,
        on_curve_nu_nu_grad_b=float(np.abs(nunu[near]).max()),
        on_curve_div_b_minus_c=float(np.abs(div_b[near] - cal.c).max()),
    )


def verify_calibration(cal_m: Calibration, cal_p: Calibration,
                       backend: str = "fd2"):
    """Shell maxima and fitted decay orders for one snapshot pair.

    Returns {condition: ConditionResult} with pass/reason left unfilled
    (certify_calibration adds the floor classification and verdicts).
    """
    res, s_mid, scales = residual_fields(cal_m, cal_p, backend)
    edges = shell_edges(cal_m.grid, min(cal_m.delta, cal_p.delta))
    out = {}
    for name in CONDITIONS:
        radii, maxima = shell_maxima(res[name], s_mid, edges)
        out[name] = ConditionResult(
            name=name, radii=radii, maxima=maxima,
            order=fit_decay_order(radii, maxima),
            threshold=ORDER_THRESHOLDS[name], scale=scales[name])
    return out


@dataclass
class CalibrationResidualReport:
    """Certification record for Definition-style calibration conditions."""

    t: float
    delta: float
    pair_dt: float
    grid_nx: int
    conditions: dict
    statics: StaticChecks
    sign_note: str = ("tangential field X = -grad_Sigma phi with "
                      "Delta_Sigma phi = V H - c, so div B = c on the curve")

    @property
    def passed(self) -> bool:
        conds = all(c.passed for c in self.conditions.values())
        return (conds and self.statics.shortness_ok
                and self.statics.theta_bilipschitz_ok
                and self.statics.theta_sign_ok)

    def to_csv(self, path) -> None:
        """condition, shell_radius, max_residual, fitted_order rows."""
        with open(path, "w") as fh:
            fh.write("condition,shell_radius,max_residual,fitted_order\n")
            for name in CONDITIONS:
                c = self.conditions[name]
                for r, v in zip(c.radii, c.maxima):
                    fh.write(f"{name},{r:.17g},{v:.17g},{c.order:.17g}\n")

    def summary(self) -> str:
        lines = [f"calibration certification at t={self.t:.6g} "
                 f"(delta={self.delta:.4g}, pair dt={self.pair_dt:.3g}, "
                 f"grid {self.grid_nx}^2)"]
        for name in CONDITIONS:
            c = self.conditions[name]
            lines.append(
                f"  {name}: order={c.order:+.2f} (threshold {c.threshold}), "
                f"max residual={c.maxima.max():.3e} (scale {c.scale:.3e}), "
                f"{'PASS' if c.passed else 'FAIL'} [{c.reason}]")
        st = self.statics
        lines.append(f"  shortness margin {st.shortness_margin:.2e} "
                     f"({'PASS' if st.shortness_ok else 'FAIL'})")
        lines.append(f"  theta/s in [{st.theta_ratio_min:.3f}, "
                     f"{st.theta_ratio_max:.3f}], sign "
                     f"{'ok' if st.theta_sign_ok else 'WRONG'}, "
                     f"sup|theta|={st.theta_sup:.3g} <= delta={self.delta:.3g} "
                     f"({'PASS' if st.theta_bilipschitz_ok else 'FAIL'})")
        lines.append(f"  on-curve: |nu nu : grad B|={st.on_curve_nu_nu_grad_b:.2e}, "
                     f"|div B - c|={st.on_curve_div_b_minus_c:.2e}")
        lines.append(f"  {self.sign_note}")
        lines.append(f"  overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def certify_calibration(cal_m: Calibration, cal_p: Calibration,
                        half_pair=None, coarse_pair=None,
                        backend: str = "fd2") -> CalibrationResidualReport:
    """Verify a snapshot pair and classify floor-dominated conditions.

    ``half_pair``: the same instant with half the snapshot spacing; a shell
    maximum dropping towards 1/4 identifies an O(dt^2) differencing floor.
    ``coarse_pair``: the same pair sampled on a 2x coarser grid; the fine
    residual dropping towards 1/4 of the coarse one identifies an O(h^2)
    finite-difference floor. A condition whose residual is certified at the
    floor satisfies its O(dist)/O(dist^2) requirement trivially; otherwise
    the fitted decay order must clear the threshold.
    """
    results = verify_calibration(cal_m, cal_p, backend)
    if half_pair is not None:
        half = verify_calibration(half_pair[0], half_pair[1], backend)
        for name, c in results.items():
            ref = np.where(c.maxima > 0, c.maxima, 1.0)
            c.time_ratio = float(np.median(half[name].maxima / ref))
    if coarse_pair is not None:
        coarse = verify_calibration(coarse_pair[0], coarse_pair[1], backend)
        for name, c in results.items():
            # compare overall maxima on the shell range both grids resolve
            lo = coarse[name].radii[0]
            fine_max = c.maxima[c.radii >= lo].max() if (c.radii >= lo).any() else 0.0
            cmax = coarse[name].maxima.max()
            c.space_ratio = float(cmax / fine_max) if fine_max > 0 else np.inf

    for c in results.values():
        if c.order >= c.threshold:
            c.passed, c.reason = True, "decay order"
        elif c.maxima.max() <= 1e-9 * max(c.scale, 1.0):
            # scale floored at 1, the natural O(1) size of curvature and
            # velocity here; a stationary flow zeroes the term scales too
            c.passed, c.reason = True, "residual below 1e-9 of term scale"
        elif c.time_ratio is not None and c.time_ratio <= 0.45:
            c.passed, c.reason = True, (
                f"time-differencing floor (residual x{c.time_ratio:.2f} "
                f"at half pair spacing)")
        elif c.space_ratio is not None and c.space_ratio >= 2.0:
            c.passed, c.reason = True, (
                f"finite-difference floor (residual x{1 / c.space_ratio:.2f} "
                f"of the 2h-grid value)")
        else:
            c.passed, c.reason = False, "no decay and not at the numerical floor"

    return CalibrationResidualReport(
        t=0.5 * (cal_m.t + cal_p.t), delta=cal_m.delta,
        pair_dt=cal_p.t - cal_m.t, grid_nx=cal_m.grid.nx,
        conditions=results, statics=static_checks(cal_p, backend))
