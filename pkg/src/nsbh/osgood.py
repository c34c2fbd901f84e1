"""
Osgood comparison: for ``g(t) <= c + int gamma mu(g)``, the bound
``M(c) - M(g(t)) <= int_{t0}^t gamma`` with ``M(x) = int_x^a dtau / mu(tau)``.

``M`` is evaluated by adaptive quadrature in the variable ``u = ln tau``, which
removes the singular behaviour of ``1/mu`` at the origin for the moduli of
interest (``tau`` and the double-log modulus become smooth in ``u``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

QUAD_TOL = 1e-8
QUAD_FLOOR = 1e-300


def mu_linear(tau):
    return np.asarray(tau, dtype=float)


def mu_double_log(tau):
    """``tau (1 - ln tau) ln(1 - ln tau)``, positive and nondecreasing on (0, e^-2]."""
    tau = np.asarray(tau, dtype=float)
    y = 1.0 - np.log(tau)
    return tau * y * np.log(y)


def M_linear_closed(x, a):
    return np.log(a / np.asarray(x, dtype=float))


def M_double_log_closed(x, a):
    """Closed form ``ln ln(1 - ln x) - ln ln(1 - ln a)``."""
    x = np.asarray(x, dtype=float)
    return np.log(np.log(1.0 - np.log(x))) - np.log(np.log(1.0 - np.log(a)))


def M_double_log_inverse(m, a):
    """Inverse of :func:`M_double_log_closed` in ``x``."""
    lla = np.log(np.log(1.0 - np.log(a)))
    return np.exp(1.0 - np.exp(np.exp(np.asarray(m, dtype=float) + lla)))


@dataclass
class OsgoodProblem:
    """Data of an Osgood comparison on ``[t0, T]``.

    ``gamma`` is either a callable of time or a pair ``(times, values)``
    integrated by the trapezoid rule.
    """

    c: float
    gamma: object
    mu: Callable = mu_linear
    a: float = 1.0
    t0: float = 0.0
    T: float = 1.0

    def __post_init__(self):
        if self.c < 0:
            raise ValueError(f"c must be nonnegative, got {self.c}")
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")
        probe = self.a * np.logspace(-12, 0, 241)
        vals = self.mu(probe)
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            bad = probe[~(np.isfinite(vals) & (vals > 0))][0]
            raise ValueError(f"modulus must be positive on (0, a]; mu({bad:.3e}) = {self.mu(bad)}")

    def gamma_integral(self, t: np.ndarray) -> np.ndarray:
        """``int_{t0}^{t_i} gamma`` at each requested time."""
        t = np.asarray(t, dtype=float)
        if callable(self.gamma):
            out = np.empty_like(t)
            acc, prev = 0.0, self.t0
            for i, ti in enumerate(t):
                val, _ = integrate.quad(self.gamma, prev, ti, epsabs=QUAD_TOL * 1e-2, epsrel=1e-12, limit=200)
                acc += val
                prev = ti
                out[i] = acc
            return out
        tt, gg = (np.asarray(x, dtype=float) for x in self.gamma)
        if np.any(gg < 0):
            raise ValueError("gamma must be nonnegative")
        cum = np.concatenate([[0.0], integrate.cumulative_trapezoid(gg, tt)])
        return np.interp(t, tt, cum) - np.interp(self.t0, tt, cum)

    def M(self, x) -> np.ndarray:
        """``int_x^a dtau/mu`` by adaptive quadrature in ``ln tau``; ``inf`` at ``x = 0`` if divergent."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        la = np.log(self.a)

        def integrand(u):
            tau = np.exp(u)
            return tau / float(self.mu(tau))

        for i, xi in enumerate(x):
            if xi <= 0:
                out[i] = np.inf if self.diverges() else self._M_from(-np.inf, la, integrand)
            else:
                out[i] = self._M_from(np.log(xi), la, integrand)
        return out

    @staticmethod
    def _M_from(lo, hi, integrand):
        if lo >= hi:
            val, _ = integrate.quad(integrand, hi, lo, epsabs=QUAD_TOL * 1e-2, epsrel=1e-12, limit=400)
            return -val
        val, _ = integrate.quad(integrand, lo, hi, epsabs=QUAD_TOL * 1e-2, epsrel=1e-12, limit=400)
        return val

    def diverges(self) -> bool:
        """Whether ``int_0^a dtau/mu`` diverges, judged from growth of M at tiny x."""
        la = np.log(self.a)

        def integrand(u):
            tau = np.exp(u)
            return tau / float(self.mu(tau))

        m1 = self._M_from(la - 200.0, la, integrand)
        m2 = self._M_from(la - 400.0, la, integrand)
        return bool(m2 - m1 > 1e-3 * max(1.0, abs(m1)))


def osgood_bound(prob: OsgoodProblem, g, times=None) -> dict:
    """Check the Osgood conclusion on a tabulation ``g`` at ``times``.

    Returns ``certified``, the ``M`` curve and the pointwise margin
    ``int gamma - (M(c) - M(g))`` (nonnegative where the bound holds).
    """
    g = np.asarray(g, dtype=float)
    if times is None:
        times = np.linspace(prob.t0, prob.T, g.size)
    times = np.asarray(times, dtype=float)
    if np.any(g < 0):
        raise ValueError("tabulation must be nonnegative")
    if np.any(g > prob.a):
        i = int(np.argmax(g > prob.a))
        raise ValueError(f"tabulation exceeds a={prob.a:g} at t={times[i]:g} (g={g[i]:.3e})")
    if prob.c == 0:
        if not prob.diverges():
            raise ValueError("c = 0 requires a modulus with divergent integral at 0")
        ok = bool(np.all(g <= QUAD_FLOOR))
        return {"certified": ok, "M_curve": [], "margin": [], "mode": "zero"}
    Mg = prob.M(np.maximum(g, QUAD_FLOOR))
    Mc = float(prob.M(prob.c)[0])
    G = prob.gamma_integral(times)
    margin = G - (Mc - Mg)
    ok = bool(np.all(margin >= -QUAD_TOL))
    return {"certified": ok, "M_curve": Mg.tolist(), "margin": margin.tolist(), "mode": "comparison"}
