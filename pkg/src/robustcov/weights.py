"""Scalar calculus of M-estimator weight functions.

Two bounded weight families are supported:

* Tyler-type:  u(x) = K * (1 + t) / (t + x)
* Huber-type:  u(x) = K * min{1, (1 + t) / (t + x)}

Both have phi(x) = x * u(x) strictly increasing with supremum
phi_inf = K * (1 + t).  The regularized context attaches a shrinkage
parameter rho and an aspect ratio c = N/n, and carries the derived map
g(x) = x / (1 - (1 - rho) * c * phi(x)) together with its inverse and
the effective weight v = u o g^{-1} that appears in all
large-dimensional equivalents.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError, KinkError

__all__ = ["WeightKind", "WeightFunction", "RegularizedContext"]

# bisection controls for g^{-1} (monotone bracket, no derivative needed)
_GINV_MAX_ITER = 100
_GINV_TOL = 1e-13


def _u_scalar(tyler: bool, K: float, t: float, x: float) -> float:
    hyper = K * (1.0 + t) / (t + x)
    return hyper if tyler else min(K, hyper)


class WeightKind(enum.Enum):
    M_TYLER = "m-tyler"
    M_HUBER = "m-huber"


@dataclass(frozen=True)
class WeightFunction:
    """A member of one of the two bounded weight families.

    Parameters
    ----------
    kind : WeightKind
        Tyler-type or Huber-type.
    K : float
        Positive scale factor.
    t : float
        Positive shape parameter.
    """

    kind: WeightKind
    K: float
    t: float

    def __post_init__(self):
        if self.K <= 0 or self.t <= 0:
            raise ValueError(f"K and t must be positive, got K={self.K}, t={self.t}")
        if not isinstance(self.kind, WeightKind):
            object.__setattr__(self, "kind", WeightKind(self.kind))

    @classmethod
    def tyler(cls, K: float = 1.0, t: float = 0.1) -> "WeightFunction":
        return cls(WeightKind.M_TYLER, K, t)

    @classmethod
    def huber(cls, K: float = 1.0, t: float = 0.1) -> "WeightFunction":
        return cls(WeightKind.M_HUBER, K, t)

    @property
    def phi_infinity(self) -> float:
        """Supremum of phi(x) = x * u(x); never attained at finite x."""
        return self.K * (1.0 + self.t)

    @property
    def u_at_zero(self) -> float:
        if self.kind is WeightKind.M_TYLER:
            return self.K * (1.0 + self.t) / self.t
        return self.K

    def u(self, x):
        """Evaluate the weight u(x) for x >= 0 (scalar or array)."""
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise ValueError("u is defined on [0, inf) only")
        hyper = self.K * (1.0 + self.t) / (self.t + x)
        if self.kind is WeightKind.M_TYLER:
            out = hyper
        else:
            out = np.minimum(self.K, hyper)
        return out if out.ndim else float(out)

    def phi(self, x):
        """phi(x) = x * u(x), strictly increasing and bounded by phi_infinity."""
        x = np.asarray(x, dtype=float)
        out = x * np.asarray(self.u(x))
        return out if out.ndim else float(out)

    def phi_inv(self, y):
        """Inverse of phi on [0, phi_infinity).

        Closed form in both families; the Huber branch is piecewise
        (linear for y <= K, hyperbolic above).
        """
        y = np.asarray(y, dtype=float)
        if np.any(y < 0) or np.any(y >= self.phi_infinity):
            raise ValueError(
                f"phi_inv requires 0 <= y < phi_infinity = {self.phi_infinity}"
            )
        hyper = y * self.t / (self.K * (1.0 + self.t) - y)
        if self.kind is WeightKind.M_TYLER:
            out = hyper
        else:
            out = np.where(y <= self.K, y / self.K, hyper)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class RegularizedContext:
    """A weight function paired with shrinkage rho and aspect ratio c.

    Admissibility (1 - rho) * phi_infinity * c < 1 is enforced at
    construction so that g, g^{-1} and v are well defined; inner loops
    can then evaluate them branch-free.  rho = 0 is accepted whenever
    it is admissible (phi_infinity * c < 1), which recovers the
    non-regularized calculus.
    """

    weight: WeightFunction
    rho: float
    c: float
    _shrink: float = field(init=False, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise AdmissibilityError(f"rho must lie in [0, 1], got {self.rho}")
        if self.c <= 0:
            raise AdmissibilityError(f"aspect ratio c must be positive, got {self.c}")
        slack = 1.0 - (1.0 - self.rho) * self.c * self.weight.phi_infinity
        if slack <= 0:
            raise AdmissibilityError(
                f"(1 - rho) * phi_inf * c = {(1.0 - self.rho) * self.c * self.weight.phi_infinity:.6g}"
                " >= 1; increase rho or reduce c/K"
            )
        object.__setattr__(self, "_shrink", slack)

    @property
    def rho_lower_bound(self) -> float:
        """Smallest admissible rho for this weight and aspect ratio."""
        return max(0.0, 1.0 - 1.0 / (self.c * self.weight.phi_infinity))

    def g(self, x):
        """g(x) = x / (1 - (1 - rho) * c * phi(x)); identity when rho = 1."""
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise ValueError("g is defined on [0, inf) only")
        denom = 1.0 - (1.0 - self.rho) * self.c * np.asarray(self.weight.phi(x))
        out = x / denom
        return out if out.ndim else float(out)

    def _g_inv_scalar(self, y: float) -> float:
        if y == 0.0:
            return 0.0
        # g(x) >= x and g(x) <= x / slack give a guaranteed bracket;
        # plain-float bisection keeps this hot path allocation-free
        tyler = self.weight.kind is WeightKind.M_TYLER
        K, t = self.weight.K, self.weight.t
        factor = (1.0 - self.rho) * self.c
        lo = y * self._shrink
        hi = y
        for _ in range(_GINV_MAX_ITER):
            mid = 0.5 * (lo + hi)
            g_mid = mid / (1.0 - factor * mid * _u_scalar(tyler, K, t, mid))
            if g_mid < y:
                lo = mid
            else:
                hi = mid
            if hi - lo <= _GINV_TOL * (1.0 + mid):
                break
        return 0.5 * (lo + hi)

    def g_inv(self, y):
        """Inverse of g via bracketed bisection on [y * slack, y]."""
        if self.rho == 1.0:
            y = np.asarray(y, dtype=float)
            if np.any(y < 0):
                raise ValueError("g_inv is defined on [0, inf) only")
            return y if y.ndim else float(y)
        y_arr = np.asarray(y, dtype=float)
        if np.any(y_arr < 0):
            raise ValueError("g_inv is defined on [0, inf) only")
        if y_arr.ndim == 0:
            return self._g_inv_scalar(float(y_arr))
        return np.array([self._g_inv_scalar(float(val)) for val in y_arr.ravel()]).reshape(
            y_arr.shape
        )

    def v(self, x):
        """Effective weight v(x) = u(g^{-1}(x)); equals u when rho = 1."""
        x_arr = np.asarray(x, dtype=float)
        if x_arr.ndim == 0:
            xf = float(x_arr)
            if xf < 0:
                raise ValueError("v is defined on [0, inf) only")
            w = xf if self.rho == 1.0 else self._g_inv_scalar(xf)
            return _u_scalar(self.weight.kind is WeightKind.M_TYLER, self.weight.K, self.weight.t, w)
        return self.weight.u(self.g_inv(x))

    @property
    def kink(self) -> float:
        """Location of the Huber-type non-differentiable point of v.

        v is constant (= K) left of g(1) = 1 / (1 - (1 - rho) * c * K)
        and strictly decreasing right of it.  Tyler-type v is smooth
        everywhere; the value is still returned for uniformity.
        """
        return 1.0 / (1.0 - (1.0 - self.rho) * self.c * self.weight.K)

    def v_prime(self, x: float, approximate: bool = True, side: str | None = None) -> float:
        """Derivative dv/dx at a scalar x > 0.

        With ``approximate=True`` (small-t closed form) the Tyler-type
        derivative is -K*(1+t)*s / (t + s*x)^2 with s = 1 - (1-rho)*c*K,
        and the Huber-type one is 0 left of the kink x = 1/s and the
        Tyler-type expression right of it.  With ``approximate=False`` a
        central finite difference with step 1e-6 * max(1, x) is applied
        to the exact v.

        At the Huber-type kink the two-sided derivative does not exist;
        pass ``side='left'`` or ``side='right'`` to get the one-sided
        value, otherwise a KinkError is raised.
        """
        if x <= 0:
            raise ValueError("v_prime requires x > 0")
        s = 1.0 - (1.0 - self.rho) * self.c * self.weight.K
        K, t = self.weight.K, self.weight.t
        h = 1e-6 * max(1.0, x)
        huber = self.weight.kind is WeightKind.M_HUBER
        at_kink = huber and abs(x - 1.0 / s) <= h
        if at_kink and side is None:
            raise KinkError(
                f"v is not differentiable at the Huber-type kink x = {1.0 / s:.6g}; "
                "pass side='left' or side='right'"
            )
        if approximate:
            slope = -K * (1.0 + t) * s / (t + s * x) ** 2
            if not huber:
                return slope
            if at_kink:
                return 0.0 if side == "left" else slope
            return 0.0 if x < 1.0 / s else slope
        if at_kink:
            if side == "left":
                return (self.v(x) - self.v(x - h)) / h
            return (self.v(x + h) - self.v(x)) / h
        return (self.v(x + h) - self.v(x - h)) / (2.0 * h)
