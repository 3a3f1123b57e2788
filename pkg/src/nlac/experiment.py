"""Run orchestration: configs, single runs, eps-sweeps, slope fits, reports.

A sweep builds one reference trajectory, then for each eps: well-prepared
initial data, time stepping with per-record diagnostics, calibration plus
relative-energy evaluation at every record time, and a per-run CSV. The
sweep report fits log-log slopes of the headline quantities against eps
and carries everything the acceptance gate asserts on.

Outputs under the chosen directory:

    config.resolved.json
    trajectory/               reference-flow snapshots (CSV + index)
    runs/eps_<value>/diagnostics.csv
    calibration/residuals.csv, calibration/summary.txt
    sweep_report.csv
    summary.txt
"""

from __future__ import annotations

import json
import os
import time
import traceback
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree
from skimage import measure as _sk_measure

from . import curves as C
from . import fields as F
from . import solver as S
from .calibration import Calibration, build_calibration, certify_calibration
from .distance import estimate_delta
from .energy import (bulk_error, fit_gronwall_constant, gronwall_monitor,
                     indicator_field, relative_energy)
from .potential import DEFAULT_WELL

SCENARIOS = ("stationary-circle", "ellipse-relaxation", "perturbed-circle")
GRID_LADDER = (96, 128, 160, 192, 256, 320, 384, 448, 512, 640, 768, 1024)

DIAGNOSTICS_HEADER = ("t,mass,energy,lambda_eps,dissipation,"
                      "E_rel,F_bulk,L1_error,Q1,Q2,Q3,Q4")


class ConfigError(ValueError):
    pass


class NonPositiveValue(ValueError):
    pass


@dataclass
class ExperimentConfig:
    scenario: str
    nx: int
    ny: int
    lx: float
    ly: float
    eps_list: list
    T: float
    record_interval: float
    dt_rule: str = "eps-sq:0.05"
    scheme: str = "sbdf2"
    kappa: float | None = None
    cells_per_eps: float = 4.4
    scale_grid_with_eps: bool = True
    markers: int = 256
    curve_dt_safety: float = 0.1
    curve_resample_every: int = 25
    verify_calibration_times: list = field(default_factory=list)
    calibration_coarse_factor: int = 2
    dump_fields: bool = False
    seed: int = 0
    scenario_params: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    schema: int = 1

    def validate(self):
        if self.schema != 1:
            raise ConfigError(f"unsupported config schema {self.schema}")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if not self.eps_list:
            raise ConfigError("eps_list must not be empty")
        if len(self.eps_list) < 3:
            raise ConfigError("eps_list needs >= 3 entries for slope fits")
        if any(e2 >= e1 for e1, e2 in zip(self.eps_list, self.eps_list[1:])):
            raise ConfigError("eps_list must be strictly decreasing")
        if self.T <= 0 or self.record_interval <= 0:
            raise ConfigError("T and record_interval must be positive")
        if abs(round(self.T / self.record_interval) * self.record_interval
               - self.T) > 1e-9 * self.T:
            raise ConfigError("T must be a multiple of record_interval")
        for eps in self.eps_list:
            n = self.grid_size(eps)
            h = max(self.lx / n, self.ly / n)
            if eps / h < 1.5:
                raise ConfigError(
                    f"eps={eps} resolved by only {eps / h:.2f} cells "
                    f"across the profile width (need eps/h >= 1.5)")
        _parse_dt_rule(self.dt_rule)  # raises on malformed rules

    def grid_size(self, eps: float) -> int:
        if not self.scale_grid_with_eps:
            return self.nx
        want = self.cells_per_eps * max(self.lx, self.ly) / eps
        for n in GRID_LADDER:
            if n >= want and n >= 8:
                return min(n, self.nx)
        return self.nx

    def grid_for(self, eps: float) -> F.PeriodicGrid:
        n = self.grid_size(eps)
        return F.PeriodicGrid(n, n, self.lx, self.ly)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            raw = json.load(fh)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            cfg = cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        cfg.validate()
        return cfg

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _parse_dt_rule(rule: str):
    """dt rules: 'explicit-cfl', 'imex-fixed:<dt>', 'eps-sq:<c>' (dt = c eps^2),
    'eps-linear:<c>' (dt = c eps)."""
    if rule == "explicit-cfl":
        return ("explicit-cfl", None)
    for prefix in ("imex-fixed", "eps-sq", "eps-linear"):
        if rule.startswith(prefix + ":"):
            try:
                return (prefix, float(rule.split(":", 1)[1]))
            except ValueError:
                raise ConfigError(f"malformed dt rule {rule!r}") from None
    raise ConfigError(f"unknown dt rule {rule!r}")


def resolve_dt(cfg: ExperimentConfig, eps: float, grid: F.PeriodicGrid) -> float:
    """dt from the configured rule, rounded down to divide record_interval."""
    kind, value = _parse_dt_rule(cfg.dt_rule)
    if kind == "explicit-cfl":
        raw = S.explicit_dt_limit(grid, eps)
    elif kind == "imex-fixed":
        raw = value
    elif kind == "eps-sq":
        raw = value * eps * eps
    else:
        raw = value * eps
    n_sub = max(1, int(np.ceil(cfg.record_interval / raw - 1e-12)))
    return cfg.record_interval / n_sub


def scenario_curve(cfg: ExperimentConfig) -> C.CurveState:
    p = dict(cfg.scenario_params)
    center = (0.5 * cfg.lx, 0.5 * cfg.ly)
    if cfg.scenario == "stationary-circle":
        return C.circle(p.get("radius", 0.5), center, cfg.markers)
    if cfg.scenario == "ellipse-relaxation":
        r0 = p.get("radius", 0.65)
        aspect = p.get("aspect", 1.25)
        return C.ellipse(r0 * aspect, r0 / aspect, center, cfg.markers)
    return C.perturbed_circle(
        p.get("radius", 0.5), center, cfg.markers,
        amplitude=p.get("amplitude", 0.05),
        modes=tuple(p.get("modes", (2, 3, 4, 5))), seed=cfg.seed)


def fit_slope(pairs):
    """Log-log least squares of value against eps.

    Returns (slope, intercept, residual) with residual the rms of the log
    misfit. Raises NonPositiveValue on non-positive inputs, ValueError on
    fewer than 3 pairs.
    """
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValueError("need at least 3 (eps, value) pairs")
    eps = np.array([p[0] for p in pairs], dtype=float)
    val = np.array([p[1] for p in pairs], dtype=float)
    if np.any(eps <= 0) or np.any(val <= 0):
        raise NonPositiveValue("slope fit needs positive eps and values")
    lx, ly = np.log(eps), np.log(val)
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return float(slope), float(intercept), residual


def _fmt(x) -> str:
    if x is None:
        return ""
    return f"{x:.17g}"


@dataclass
class EpsRunResult:
    eps: float
    nx: int
    dt: float
    records: list                    # DiagnosticsRecord, fully filled
    sup_l1: float
    e0: float                        # E_rel(0) + F(0)
    sup_ef: float
    c_fit: float
    mass_drift_rel: float
    energy_monotone_slack: float     # most positive E increase beyond slack
    sup_lambda_err: float | None     # vs 1/R, circle scenario only
    hausdorff_max: float | None
    mass_shift: float
    u_band: tuple
    runtime: float
    q_margins: tuple                 # worst-case (2E-Q1, 2E-Q2, 12E-Q3, Q4/E)
    field_dumps: dict = field(default_factory=dict)


@dataclass
class SweepReport:
    config: ExperimentConfig
    delta: float
    runs: list                       # EpsRunResult, ordered as eps_list
    l1_slope: float
    l1_residual: float
    e0_slope: float
    e0_residual: float
    gronwall: object
    calibration_reports: list = field(default_factory=list)
    lambda_slope: float | None = None
    failures: list = field(default_factory=list)  # (eps, message) skipped runs

    def to_csv(self, path) -> None:
        # wall times stay out: the report is bit-reproducible per config+seed
        cols = ("eps,nx,dt,sup_L1,E0,sup_EF,C_fit,mass_drift_rel,"
                "sup_lambda_err,hausdorff_max")
        with open(path, "w") as fh:
            fh.write(cols + "\n")
            for r in self.runs:
                fh.write(",".join([
                    _fmt(r.eps), str(r.nx), _fmt(r.dt), _fmt(r.sup_l1),
                    _fmt(r.e0), _fmt(r.sup_ef), _fmt(r.c_fit),
                    _fmt(r.mass_drift_rel), _fmt(r.sup_lambda_err),
                    _fmt(r.hausdorff_max)]) + "\n")
            fh.write(f"# L1_slope,{_fmt(self.l1_slope)},"
                     f"residual,{_fmt(self.l1_residual)}\n")
            fh.write(f"# E0_slope,{_fmt(self.e0_slope)},"
                     f"residual,{_fmt(self.e0_residual)}\n")
            fh.write(f"# gronwall_spread,{_fmt(self.gronwall.spread)}\n")

    def summary(self) -> str:
        cfg = self.config
        lines = [f"scenario {cfg.scenario}: eps sweep "
                 f"{[r.eps for r in self.runs]}, T={cfg.T:g}, "
                 f"scheme {cfg.scheme}, dt rule {cfg.dt_rule}, "
                 f"delta={self.delta:.4g}"]
        for r in self.runs:
            extra = ""
            if r.sup_lambda_err is not None:
                extra += f" sup|lam-1/R|={r.sup_lambda_err:.3e}"
            if r.hausdorff_max is not None:
                extra += f" hausdorff={r.hausdorff_max:.3e}"
            lines.append(
                f"  eps={r.eps:<6g} grid {r.nx}^2 dt={r.dt:.3e} "
                f"supL1={r.sup_l1:.4e} E0={r.e0:.4e} supEF={r.sup_ef:.4e} "
                f"C_fit={r.c_fit:.3g} mass_drift={r.mass_drift_rel:.2e}"
                f"{extra} ({r.runtime:.1f}s)")
        lines.append(f"L1 slope {self.l1_slope:.3f} (rms residual "
                     f"{self.l1_residual:.3f}); E0 slope {self.e0_slope:.3f} "
                     f"(rms residual {self.e0_residual:.3f})")
        if self.lambda_slope is not None:
            lines.append(f"lambda error slope {self.lambda_slope:.3f}")
        lines.append(f"Gronwall C_fits {self.gronwall.c_fits} "
                     f"spread {self.gronwall.spread:.3f} "
                     f"({'PASS' if self.gronwall.passed else 'FAIL'})")
        for eps, message in self.failures:
            lines.append(f"  SKIPPED eps={eps:g}: {message}")
        for rep in self.calibration_reports:
            lines.append(rep.summary())
        return "\n".join(lines)


def _hausdorff_to_curve(u_values, grid: F.PeriodicGrid, curve: C.CurveState) -> float:
    """Symmetric Hausdorff distance between the u = 1/2 level set (marching
    squares) and the reference curve."""
    contours = _sk_measure.find_contours(u_values, 0.5)
    if not contours:
        return np.inf
    pts = np.vstack(contours)
    pts[:, 0] = (pts[:, 0] + 0.5) * grid.hx
    pts[:, 1] = (pts[:, 1] + 0.5) * grid.hy
    from .distance import PeriodicCurveSpline
    spline = PeriodicCurveSpline(curve.markers)
    dense = spline(2.0 * np.pi * np.arange(8 * curve.m) / (8 * curve.m))
    d1 = cKDTree(dense).query(pts)[0].max()
    d2 = cKDTree(pts).query(dense)[0].max()
    return float(max(d1, d2))


def _reference_trajectory(cfg: ExperimentConfig, curve: C.CurveState):
    """Evolve the reference flow once, storing record-time states plus the
    bracketing states used for calibration time-differencing."""
    n_records = int(round(cfg.T / cfg.record_interval))
    dt_raw = C.stable_dt(curve, cfg.curve_dt_safety)
    n_c = max(1, int(np.ceil(cfg.record_interval / dt_raw)))
    dt_c = cfg.record_interval / n_c

    h_min = min(cfg.lx, cfg.ly) / cfg.nx
    m_pair = max(2, int(round(0.25 * h_min / dt_c)))
    m_pair += m_pair % 2  # even so the half-spacing pair is on the lattice

    keep = set()
    for k in range(n_records + 1):
        keep.add(k * n_c)
    for t_v in cfg.verify_calibration_times:
        k = int(round(t_v / (dt_c * n_c)))
        base = k * n_c
        for off in (m_pair, m_pair // 2):
            keep.add(base - off)
            keep.add(base + off)
    keep = {k for k in keep if 0 <= k <= n_records * n_c + m_pair}
    t_final = (n_records * n_c + (m_pair if cfg.verify_calibration_times else 0)) * dt_c
    traj = C.evolve(curve, dt_c, t_final, keep_steps=keep,
                    resample_every=cfg.curve_resample_every)
    return traj, n_c, m_pair


def _run_one_eps(cfg: ExperimentConfig, eps: float, traj, n_c: int,
                 delta: float, curve0: C.CurveState, well=DEFAULT_WELL):
    tic = time.perf_counter()
    grid = cfg.grid_for(eps)
    dt = resolve_dt(cfg, eps, grid)
    n_sub = int(round(cfg.record_interval / dt))
    scheme = cfg.scheme
    if _parse_dt_rule(cfg.dt_rule)[0] == "explicit-cfl":
        scheme = "explicit"
    state0 = S.well_prepared_init(curve0, eps, grid, well, delta=delta)
    sol_cfg = S.SolverConfig(dt=dt, scheme=scheme, kappa=cfg.kappa, T=cfg.T,
                             record_every=n_sub)
    sim = S.simulate(state0, sol_cfg, well, keep_fields=True)

    radius = cfg.scenario_params.get("radius", 0.5) \
        if cfg.scenario == "stationary-circle" else None
    sup_l1 = 0.0
    sup_ef = 0.0
    e0 = None
    sup_lambda_err = 0.0 if radius else None
    hausdorff = 0.0 if radius else None
    ef_records = []
    q_margins = [np.inf, np.inf, np.inf, 0.0]
    cal_cache = {}
    for rec in sim.records:
        k = int(round(rec.t / cfg.record_interval))
        curve_t = traj.state_at(k * n_c)
        cal = cal_cache.get(k)
        if cal is None:
            cal = build_calibration(curve_t, grid, delta=delta)
            cal_cache = {k: cal}  # only the latest is worth keeping
        u_arr = sim.fields[int(round(rec.t / dt))]
        st = S.PhaseState(F.ScalarField(grid, u_arr), eps, rec.t)
        reb = relative_energy(st, cal, well)
        chi = indicator_field(curve_t, grid, cal.sd.s.values)
        be = bulk_error(st, curve_t, cal, well, chi=chi)
        rec.e_rel, rec.f_bulk, rec.l1_error = reb.e_rel, be.f_bulk, be.l1_error
        rec.q1, rec.q2, rec.q3, rec.q4 = reb.q1, reb.q2, reb.q3, reb.q4
        sup_l1 = max(sup_l1, be.l1_error)
        ef = reb.e_rel + be.f_bulk
        sup_ef = max(sup_ef, ef)
        ef_records.append((rec.t, ef))
        if e0 is None:
            e0 = ef
        q_margins[0] = min(q_margins[0], 2.0 * reb.e_rel - reb.q1)
        q_margins[1] = min(q_margins[1], 2.0 * reb.e_rel - reb.q2)
        q_margins[2] = min(q_margins[2], 12.0 * reb.e_rel - reb.q3)
        q_margins[3] = max(q_margins[3], reb.q4 / max(reb.e_rel, 1e-300))
        if radius is not None:
            sup_lambda_err = max(sup_lambda_err,
                                 abs(rec.lambda_eps - 1.0 / radius))
            hausdorff = max(hausdorff,
                            _hausdorff_to_curve(u_arr, grid, curve_t))

    field_dumps = dict(sim.fields) if cfg.dump_fields else {}

    masses = [r.mass for r in sim.records]
    mass_drift = max(abs(m - masses[0]) for m in masses) / abs(masses[0])
    worst_energy_increase = 0.0
    for r0, r1 in zip(sim.records, sim.records[1:]):
        # roundoff allowance: the energy quadrature itself carries ~1e-12
        # relative noise, which a stationary state would otherwise trip on
        slack = 10.0 * dt * max(r0.dissipation, r1.dissipation) \
            + 1e-12 * abs(r0.energy)
        worst_energy_increase = max(worst_energy_increase,
                                    (r1.energy - r0.energy) - slack)

    c_fit = fit_gronwall_constant(ef_records)
    return EpsRunResult(
        eps=eps, nx=grid.nx, dt=dt, records=sim.records, sup_l1=sup_l1,
        e0=e0, sup_ef=sup_ef, c_fit=c_fit, mass_drift_rel=mass_drift,
        energy_monotone_slack=worst_energy_increase,
        sup_lambda_err=sup_lambda_err, hausdorff_max=hausdorff,
        mass_shift=state0.mass_shift, u_band=(sim.u_min, sim.u_max),
        runtime=time.perf_counter() - tic, q_margins=tuple(q_margins),
        field_dumps=field_dumps)


def _write_diagnostics(path, records) -> None:
    with open(path, "w") as fh:
        fh.write(DIAGNOSTICS_HEADER + "\n")
        for r in records:
            fh.write(",".join(_fmt(v) for v in (
                r.t, r.mass, r.energy, r.lambda_eps, r.dissipation,
                r.e_rel, r.f_bulk, r.l1_error, r.q1, r.q2, r.q3, r.q4)) + "\n")


def certify_at(cfg: ExperimentConfig, traj, n_c: int, m_pair: int,
               t_verify: float, delta: float):
    """Build the calibration pairs around t_verify and certify them."""
    grid = F.PeriodicGrid(cfg.nx, cfg.ny, cfg.lx, cfg.ly)
    base = int(round(t_verify / cfg.record_interval)) * n_c
    cal = lambda step, g: build_calibration(  # noqa: E731
        traj.state_at(step), g, delta=delta)
    cal_m, cal_p = cal(base - m_pair, grid), cal(base + m_pair, grid)
    half = (cal(base - m_pair // 2, grid), cal(base + m_pair // 2, grid))
    coarse = None
    cf = cfg.calibration_coarse_factor
    if cf and cfg.nx % cf == 0:
        gc = F.PeriodicGrid(cfg.nx // cf, cfg.ny // cf, cfg.lx, cfg.ly)
        if delta >= 8.0 * gc.h_max:
            coarse = (cal(base - m_pair, gc), cal(base + m_pair, gc))
    return certify_calibration(cal_m, cal_p, half_pair=half, coarse_pair=coarse)


def _settle(future):
    try:
        return ("ok", future.result())
    except Exception as exc:
        return ("error", exc)


def run(cfg: ExperimentConfig, outdir) -> SweepReport:
    """Execute the configured sweep and write all artifacts under outdir."""
    cfg.validate()
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg.to_json(outdir / "config.resolved.json")

    curve0 = scenario_curve(cfg)
    delta = estimate_delta(curve0, (cfg.lx, cfg.ly))
    traj, n_c, m_pair = _reference_trajectory(cfg, curve0)
    traj.save(outdir / "trajectory")

    runs = []
    failures = []
    workers = int(os.environ.get("NLAC_WORKERS", "1"))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {eps: pool.submit(_run_one_eps, cfg, eps, traj, n_c,
                                        delta, curve0) for eps in cfg.eps_list}
            outcomes = {eps: _settle(f) for eps, f in futures.items()}
    else:
        outcomes = {}
        for eps in cfg.eps_list:
            try:
                outcomes[eps] = ("ok", _run_one_eps(cfg, eps, traj, n_c,
                                                    delta, curve0))
            except Exception as exc:  # a failed eps is skipped, not fatal
                outcomes[eps] = ("error", exc)
    for eps in cfg.eps_list:
        kind, payload = outcomes[eps]
        if kind == "ok":
            runs.append(payload)
        else:
            failures.append((eps, f"{type(payload).__name__}: {payload}"))
    if failures and len(runs) < 3:
        detail = "; ".join(f"eps={e:g}: {m}" for e, m in failures)
        raise RuntimeError(f"too few eps-runs survived for slope fits ({detail})")

    for r in runs:
        run_dir = outdir / "runs" / f"eps_{r.eps:g}"
        run_dir.mkdir(parents=True, exist_ok=True)
        _write_diagnostics(run_dir / "diagnostics.csv", r.records)
        if cfg.dump_fields:
            field_dir = run_dir / "fields"
            field_dir.mkdir(exist_ok=True)
            grid = cfg.grid_for(r.eps)
            for step, values in sorted(r.field_dumps.items()):
                F.save_field(F.ScalarField(grid, values),
                             field_dir / f"u_{step:08d}.bin")

    l1_slope, _, l1_res = fit_slope([(r.eps, r.sup_l1) for r in runs])
    e0_slope, _, e0_res = fit_slope([(r.eps, r.e0) for r in runs])
    gron = gronwall_monitor({r.eps: [(rec.t, (rec.e_rel or 0) + (rec.f_bulk or 0))
                                     for rec in r.records] for r in runs})
    lambda_slope = None
    if cfg.scenario == "stationary-circle":
        lambda_slope, _, _ = fit_slope(
            [(r.eps, r.sup_lambda_err) for r in runs])

    cal_reports = []
    if cfg.verify_calibration_times:
        cal_dir = outdir / "calibration"
        cal_dir.mkdir(parents=True, exist_ok=True)
        for i, t_v in enumerate(cfg.verify_calibration_times):
            rep = certify_at(cfg, traj, n_c, m_pair, t_v, delta)
            suffix = "" if len(cfg.verify_calibration_times) == 1 else f"_{i}"
            rep.to_csv(cal_dir / f"residuals{suffix}.csv")
            cal_reports.append(rep)
        with open(cal_dir / "summary.txt", "w") as fh:
            for rep in cal_reports:
                fh.write(rep.summary() + "\n")

    report = SweepReport(config=cfg, delta=delta, runs=runs,
                         l1_slope=l1_slope, l1_residual=l1_res,
                         e0_slope=e0_slope, e0_residual=e0_res,
                         gronwall=gron, calibration_reports=cal_reports,
                         lambda_slope=lambda_slope, failures=failures)
    report.to_csv(outdir / "sweep_report.csv")
    passed, lines = evaluate_thresholds(report)
    with open(outdir / "summary.txt", "w") as fh:
        fh.write(report.summary() + "\n")
        for line in lines:
            fh.write(line + "\n")
        fh.write(("PASS" if passed else "FAIL") + "\n")
    return report


def evaluate_thresholds(report: SweepReport):
    """Check the acceptance thresholds carried by the config.

    Supported keys: l1_slope_min, l1_residual_max, e0_slope_min,
    gronwall_spread_max, lambda_slope_min, hausdorff_eps_factor,
    mass_drift_dt_factor, energy_monotone, q_bounds, calibration_pass.
    Returns (all_passed, report lines). An empty thresholds dict passes.
    """
    th = report.config.thresholds
    checks = []

    def add(name, ok, detail):
        checks.append((name, bool(ok), detail))

    if "l1_slope_min" in th:
        add("l1_slope", report.l1_slope >= th["l1_slope_min"],
            f"{report.l1_slope:.3f} >= {th['l1_slope_min']}")
    if "l1_residual_max" in th:
        add("l1_residual", report.l1_residual <= th["l1_residual_max"],
            f"{report.l1_residual:.3f} <= {th['l1_residual_max']}")
    if "e0_slope_min" in th:
        add("e0_slope", report.e0_slope >= th["e0_slope_min"],
            f"{report.e0_slope:.3f} >= {th['e0_slope_min']}")
    if "gronwall_spread_max" in th:
        add("gronwall_spread", report.gronwall.spread <= th["gronwall_spread_max"],
            f"{report.gronwall.spread:.3f} <= {th['gronwall_spread_max']}")
    if "lambda_slope_min" in th:
        ok = (report.lambda_slope is not None
              and report.lambda_slope >= th["lambda_slope_min"])
        add("lambda_slope", ok, f"{report.lambda_slope} >= {th['lambda_slope_min']}")
    if "hausdorff_eps_factor" in th:
        worst = max((r.hausdorff_max or 0) / r.eps for r in report.runs)
        add("hausdorff", worst <= th["hausdorff_eps_factor"],
            f"max hausdorff/eps {worst:.2f} <= {th['hausdorff_eps_factor']}")
    if "mass_drift_dt_factor" in th:
        worst = max(r.mass_drift_rel / r.dt for r in report.runs)
        add("mass_drift", worst <= th["mass_drift_dt_factor"],
            f"max drift/dt {worst:.2f} <= {th['mass_drift_dt_factor']}")
    if th.get("energy_monotone"):
        worst = max(r.energy_monotone_slack for r in report.runs)
        add("energy_monotone", worst <= 0.0,
            f"worst E increase beyond slack {worst:.2e} <= 0")
    if th.get("q_bounds"):
        worst1 = min(min(r.q_margins[0], r.q_margins[1], r.q_margins[2])
                     for r in report.runs)
        add("q_bounds", worst1 >= -1e-9,
            f"worst lemma-constant margin {worst1:.2e} >= -1e-9")
    if th.get("calibration_pass"):
        ok = (bool(report.calibration_reports)
              and all(rep.passed for rep in report.calibration_reports))
        add("calibration", ok, "all certified conditions pass")

    lines = [f"threshold {name}: {'PASS' if ok else 'FAIL'} ({detail})"
             for name, ok, detail in checks]
    return all(ok for _, ok, _ in checks), lines
