"""Nonlocal Allen-Cahn laboratory.

Simulates the mass-conserving (nonlocal) Allen-Cahn equation on periodic 2D
grids, evolves volume-preserving mean curvature flow of closed planar curves
by spectral front tracking, constructs gradient-flow calibrations
(xi, B, theta, lambda) for the reference flow, and verifies the
sharp-interface convergence rate and calibration conditions at desk scale.
"""

from .fields import PeriodicGrid, ScalarField, VectorField
from .potential import DEFAULT_WELL, QuarticDoubleWell
from .curves import CurveState, CurveGeometry
from .solver import PhaseState, SolverConfig, DiagnosticsRecord
from .calibration import Calibration, CalibrationResidualReport
from .energy import RelativeEnergyBreakdown

__all__ = [
    "PeriodicGrid", "ScalarField", "VectorField",
    "DEFAULT_WELL", "QuarticDoubleWell",
    "CurveState", "CurveGeometry",
    "PhaseState", "SolverConfig", "DiagnosticsRecord",
    "Calibration", "CalibrationResidualReport",
    "RelativeEnergyBreakdown",
]

__version__ = "0.1.0"
