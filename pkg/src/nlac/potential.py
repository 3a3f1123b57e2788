"""The double-well potential, its Modica-Mortola transform, and the optimal profile.

The shipped potential is W(u) = 18 u^2 (1-u)^2, whose wells are 0 and 1 and
whose surface tension sigma = phi(1) = int_0^1 sqrt(2W) dz is normalized to 1.
For this W the heteroclinic profile solving U'' = W'(U), U(0) = 1/2 is the
logistic function U(s) = 1/(1 + exp(-6s)), which satisfies the equipartition
identity (U')^2 = 2 W(U) exactly.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


class QuarticDoubleWell:
    """W(u) = depth * u^2 (1-u)^2 with depth = 18 giving sigma = 1.

    The potential interface is pluggable (anything exposing these methods
    works downstream) but only this default is shipped and tested.
    """

    #: surface tension phi(1) for the default depth
    sigma = 1.0

    def W(self, u):
        return 18.0 * np.square(u) * np.square(u - 1.0)

    def Wprime(self, u):
        return 36.0 * u * (u - 1.0) * (2.0 * u - 1.0)

    def Wsecond(self, u):
        return 36.0 * (6.0 * u * u - 6.0 * u + 1.0)

    def max_Wsecond(self, lo: float = -0.1, hi: float = 1.1) -> float:
        """max |W''| over [lo, hi]; W'' is a parabola with vertex at 1/2."""
        candidates = [abs(self.Wsecond(lo)), abs(self.Wsecond(hi))]
        if lo <= 0.5 <= hi:
            candidates.append(abs(self.Wsecond(0.5)))
        return float(max(candidates))

    def sqrt2W(self, u):
        # literal square root: sqrt(36 u^2 (u-1)^2) = 6|u(1-u)|, >= 0 always
        return 6.0 * np.abs(u * (1.0 - u))

    def phi(self, u):
        """Modica-Mortola transform, 3u^2 - 2u^3 on [0,1], constant outside."""
        uc = np.clip(u, 0.0, 1.0)
        return uc * uc * (3.0 - 2.0 * uc)

    def phiprime(self, u):
        uc = np.clip(u, 0.0, 1.0)
        return 6.0 * uc * (1.0 - uc)

    def profile(self, s):
        """Optimal transition profile U, the solution of U' = sqrt(2W(U))."""
        return expit(6.0 * np.asarray(s, dtype=float))

    def profile_deriv(self, s):
        u = self.profile(s)
        return 6.0 * u * (1.0 - u)


DEFAULT_WELL = QuarticDoubleWell()
