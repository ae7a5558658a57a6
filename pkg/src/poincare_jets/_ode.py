"""Thin wrapper around scipy's adaptive explicit Runge-Kutta integrator."""

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationError

DEFAULT_RTOL = 1e-12
DEFAULT_ATOL = 1e-12


def integrate(rhs, y0, t0, t1, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, max_step=np.inf,
              dense_output=False, events=None):
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t1`` with DOP853.

    Returns the scipy solution object; raises IntegrationError on failure.
    """
    y0 = np.asarray(y0)
    if t1 == t0:
        class _Trivial:
            y = y0[:, None]
            t = np.array([t0])
            nfev = 0
            t_events = None
            y_events = None
            sol = None
            status = 0
        return _Trivial()
    sol = solve_ivp(rhs, (t0, t1), y0, method="DOP853", rtol=rtol, atol=atol,
                    max_step=max_step, dense_output=dense_output, events=events)
    if sol.status < 0:
        raise IntegrationError(f"integration failed on [{t0}, {t1}]: {sol.message}")
    return sol


def endpoint(rhs, y0, t0, t1, **kwargs):
    return integrate(rhs, y0, t0, t1, **kwargs).y[:, -1]
