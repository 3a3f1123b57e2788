"""Relative energy, bulk error, coercivity, and Gronwall monitor checks."""

from dataclasses import dataclass

import numpy as np
import pytest

from nlac import curves as C
from nlac import fields as F
from nlac import solver as S
from nlac.calibration import build_calibration
from nlac.distance import estimate_delta
from nlac.energy import (SignIncoherenceWarning, BulkError, bulk_error,
                         fit_gronwall_constant, gronwall_monitor,
                         indicator_field, relative_energy, tube_l1_error)
from nlac.potential import DEFAULT_WELL as well


@dataclass
class _FlatCal:
    """Minimal calibration stub: constant xi, exact planar distance."""

    grid: object
    xi: object
    sd: object
    theta: object
    delta: float


@dataclass
class _FlatSd:
    s: object
    curve: object = None


def flat_interface_setup(n=256, eps=0.05, lx=2.0):
    grid = F.PeriodicGrid(n, n, lx, lx)
    X, _ = grid.meshgrid()
    x0, x1 = 0.5, 1.5
    u = well.profile((X - x0) / eps) + well.profile((x1 - X) / eps) - 1.0
    s = np.maximum(x0 - X, X - x1)  # signed distance to the strip [x0, x1]
    xi = np.zeros((n, n, 2))
    xi[..., 0] = np.where(X < 1.0, -1.0, 1.0)  # exterior normal of the strip
    theta = np.clip(s, -0.1, 0.1)
    cal = _FlatCal(grid=grid,
                   xi=F.VectorField(grid, xi),
                   sd=_FlatSd(s=F.ScalarField(grid, s)),
                   theta=F.ScalarField(grid, theta),
                   delta=0.2)
    return grid, u, cal


def test_flat_profile_discrepancy_and_tilt_vanish():
    errs = []
    for n in (128, 256):
        grid, u, cal = flat_interface_setup(n=n)
        st = S.PhaseState(F.ScalarField(grid, u), eps=0.05)
        reb = relative_energy(st, cal)
        assert reb.discrepancy >= -1e-12
        assert reb.tilt >= -1e-12
        errs.append(reb.e_rel)
    assert errs[1] < 1e-6
    assert errs[1] < errs[0]  # shrinks under refinement


def test_relative_energy_nonnegative_decomposition_on_noisy_state():
    grid, u, cal = flat_interface_setup(n=128)
    rng = np.random.default_rng(3)
    u = np.clip(u + 0.02 * rng.standard_normal(u.shape), -0.05, 1.05)
    st = S.PhaseState(F.ScalarField(grid, u), eps=0.05)
    reb = relative_energy(st, cal)
    assert reb.discrepancy >= -1e-10
    assert reb.tilt >= -1e-10
    assert reb.e_rel == pytest.approx(reb.discrepancy + reb.tilt)


def test_lemma_constants_hold_exactly():
    # Q1 <= 2E, Q2 <= 2E, Q3 <= 12E pointwise in quadrature, any state
    grid, u, cal = flat_interface_setup(n=128)
    rng = np.random.default_rng(11)
    for trial in range(3):
        noisy = np.clip(u + 0.05 * rng.standard_normal(u.shape), -0.08, 1.08)
        st = S.PhaseState(F.ScalarField(grid, noisy), eps=0.05)
        reb = relative_energy(st, cal)
        scale = max(reb.e_rel, 1e-30)
        assert reb.q1 <= 2.0 * reb.e_rel + 1e-12 * scale
        assert reb.q2 <= 2.0 * reb.e_rel + 1e-12 * scale
        assert reb.q3 <= 12.0 * reb.e_rel + 1e-12 * scale
        assert reb.q4 <= reb.q4_cap * reb.e_rel * (1 + 1e-9) + 1e-15


def test_degenerate_gradient_convention():
    grid = F.PeriodicGrid(64, 64, 2.0, 2.0)
    _, _, cal = flat_interface_setup(n=64)
    st = S.PhaseState(F.ScalarField(grid, np.full((64, 64), 0.5)), eps=0.05)
    reb = relative_energy(st, cal)
    assert reb.degenerate_points == 64 * 64
    assert reb.tilt == 0.0  # the |grad psi| factor kills the branch


def well_prepared_circle(eps, n, lx=2.0, r=0.5):
    grid = F.PeriodicGrid(n, n, lx, lx)
    curve = C.circle(r, (lx / 2, lx / 2), 256)
    delta = estimate_delta(curve, (lx, lx))
    state = S.well_prepared_init(curve, eps, grid, delta=delta)
    cal = build_calibration(curve, grid, delta=delta)
    return state, curve, cal, grid


def test_well_prepared_circle_scaling():
    # E_rel(0), F(0) = O(eps^2); (tube L1)^2 <= C F with C eps-uniform
    rows = []
    for eps, n in [(0.08, 128), (0.056, 192), (0.04, 256)]:
        state, curve, cal, grid = well_prepared_circle(eps, n)
        reb = relative_energy(state, cal)
        be = bulk_error(state, curve, cal)
        tl1 = tube_l1_error(state, cal)
        rows.append((eps, reb.e_rel, be.f_bulk, tl1 ** 2 / be.f_bulk))
        assert be.sign_coherent
    from nlac.experiment import fit_slope
    e_slope, _, _ = fit_slope([(r[0], r[1]) for r in rows])
    f_slope, _, _ = fit_slope([(r[0], r[2]) for r in rows])
    assert e_slope >= 1.8
    assert f_slope >= 1.8
    ratios = [r[3] for r in rows]
    assert max(ratios) / min(ratios) < 2.0  # interpolation constant stable


def test_bulk_error_zero_for_exact_indicator():
    # u chosen so that psi = phi(u) reproduces the rasterized indicator
    grid = F.PeriodicGrid(128, 128, 2.0, 2.0)
    curve = C.circle(0.5, (1.0, 1.0), 256)
    chi = indicator_field(curve, grid)
    f = chi.values
    u = f.copy()  # Newton for phi(u) = f on [0, 1]
    for _ in range(60):
        phi = u * u * (3.0 - 2.0 * u)
        dphi = np.maximum(6.0 * u * (1.0 - u), 1e-12)
        u = np.clip(u - (phi - f) / dphi, 0.0, 1.0)
    assert np.abs(well.phi(u) - f).max() < 1e-12
    cal = build_calibration(curve, grid)
    st = S.PhaseState(F.ScalarField(grid, u), eps=0.05)
    be = bulk_error(st, curve, cal, chi=chi)
    assert abs(be.f_bulk) < 1e-12
    assert be.f_bulk_abs < 1e-12
    assert be.l1_error < 1e-12


def test_indicator_fractions():
    grid = F.PeriodicGrid(128, 128, 2.0, 2.0)
    curve = C.circle(0.5, (1.0, 1.0), 256)
    chi = indicator_field(curve, grid)
    assert np.all(chi.values >= 0.0) and np.all(chi.values <= 1.0)
    assert F.integrate(chi) == pytest.approx(np.pi * 0.25, rel=5e-6)
    # strictly interior / exterior cells are exactly 0/1
    X, Y = grid.meshgrid()
    r = np.hypot(X - 1.0, Y - 1.0)
    assert np.all(chi.values[r < 0.45] == 1.0)
    assert np.all(chi.values[r > 0.55] == 0.0)


def test_sign_coherence_is_unconditional_for_clamped_psi():
    # with psi = phi(u) in [0, 1] and chi in {0, 1}, (psi - chi) and theta
    # share their sign pointwise (inside: psi - 1 <= 0, theta < 0; outside:
    # psi >= 0, theta > 0), so the two evaluations agree for *any* state --
    # even one whose interface sits far from the reference curve
    grid = F.PeriodicGrid(128, 128, 2.0, 2.0)
    inner = C.circle(0.35, (1.0, 1.0), 128)
    outer = C.circle(0.55, (1.0, 1.0), 128)
    state = S.well_prepared_init(inner, 0.05, grid)
    cal = build_calibration(outer, grid)
    be = bulk_error(state, outer, cal)
    assert be.sign_coherent
    assert be.f_bulk == pytest.approx(be.f_bulk_abs, rel=1e-3)


def test_sign_incoherence_warning_guard():
    # the guard itself: an indicator on the wrong side trips it
    grid = F.PeriodicGrid(128, 128, 2.0, 2.0)
    curve = C.circle(0.5, (1.0, 1.0), 128)
    state = S.well_prepared_init(curve, 0.05, grid)
    cal = build_calibration(curve, grid)
    chi = indicator_field(curve, grid, cal.sd.s.values)
    inverted = F.ScalarField(grid, 1.0 - chi.values)
    with pytest.warns(SignIncoherenceWarning):
        be = bulk_error(state, curve, cal, chi=inverted)
    assert not be.sign_coherent


def test_gronwall_constant_trivial_cases():
    assert fit_gronwall_constant([(0.0, 1e-3), (1.0, 1e-3)]) == 0.0
    c = fit_gronwall_constant([(0.0, 1e-3), (0.5, 2e-3), (1.0, 3e-3)])
    assert c == pytest.approx(np.log(2.0) / 0.5)  # binding record at t=0.5
    with pytest.raises(ValueError):
        fit_gronwall_constant([(0.0, 1.0)])


def test_gronwall_monitor_spread():
    make = lambda c: [(0.0, 1e-4), (0.5, 1e-4 * np.exp(0.5 * c)),  # noqa: E731
                      (1.0, 1e-4 * np.exp(c))]
    ok = gronwall_monitor({0.08: make(1.2), 0.04: make(1.8), 0.02: make(0.9)})
    assert ok.passed and ok.spread < 2.0
    bad = gronwall_monitor({0.08: make(0.2), 0.04: make(8.0)})
    assert not bad.passed
    decaying = gronwall_monitor({0.08: make(-3.0), 0.04: make(-1.0)})
    assert decaying.passed  # floored constants compare as uniformly bounded


def test_bulk_error_returns_both_evaluations():
    state, curve, cal, grid = well_prepared_circle(0.056, 192)
    be = bulk_error(state, curve, cal)
    assert isinstance(be, BulkError)
    assert be.f_bulk == pytest.approx(be.f_bulk_abs, rel=0.05)
    assert be.f_bulk > 0


def test_reported_quantities_stable_under_refinement():
    # doubling the grid at fixed eps moves every reported quantity by < 1%
    vals = {}
    for n in (128, 256):
        state, curve, cal, grid = well_prepared_circle(0.08, n)
        reb = relative_energy(state, cal)
        be = bulk_error(state, curve, cal)
        vals[n] = np.array([reb.e_rel, reb.q1, reb.q2, reb.q3, reb.q4,
                            be.f_bulk, be.l1_error])
    rel = np.abs(vals[256] - vals[128]) / np.abs(vals[256])
    assert rel.max() < 0.01
