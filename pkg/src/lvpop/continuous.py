"""Mean-field reference dynamics dx_i/dt = x_i (A x)_i on the simplex.

Time is measured in units of n scheduler steps, so a discrete run of T raw
steps is compared with the continuous state at time T / n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FixedPoint, NoReturnWithinBound, StepSizeTooLarge, ZeroPopulation
from .potential import _b_array, potential_U

PERIOD_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Orbit:
    t: np.ndarray  # (m,)
    x: np.ndarray  # (m, k)
    U0: float | None
    U: np.ndarray | None  # potential along the samples, when defined
    simplex_drift: float  # max |sum(x) - 1| seen before each projection

    @property
    def final(self) -> np.ndarray:
        return self.x[-1]

    def max_potential_drift(self) -> float:
        if self.U is None:
            raise ZeroPopulation("potential is undefined on this orbit")
        return float(np.abs(self.U - self.U0).max())


def rhs(x, A) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x * (np.asarray(A, dtype=float) @ x)


def _rk4_step(x, A, h):
    k1 = x * (A @ x)
    y = x + 0.5 * h * k1
    k2 = y * (A @ y)
    y = x + 0.5 * h * k2
    k3 = y * (A @ y)
    y = x + h * k3
    k4 = y * (A @ y)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _checked_step(x, A, h):
    """RK4 step plus simplex projection; returns (x', drift)."""
    y = _rk4_step(x, A, h)
    if np.any(y[x > 0] <= 0.0) or np.any(y < 0.0):
        raise StepSizeTooLarge(f"step h={h:g} drives a coordinate non-positive")
    s = y.sum()
    return y / s, abs(s - 1.0)


def _validate_x0(x0) -> np.ndarray:
    x = np.asarray(x0, dtype=float).ravel()
    if np.any(x < 0) or not np.isfinite(x).all():
        raise ValueError("x0 must be finite and non-negative")
    s = x.sum()
    if s <= 0:
        raise ValueError("x0 must have positive mass")
    return x / s


def rk4_integrate(x0, A, duration: float, h: float, b=None, sample_every: int = 1) -> Orbit:
    """Fixed-step classical RK4 with per-step renormalisation onto the simplex.

    The last step is shortened so the orbit ends exactly at ``duration``.
    When ``b`` is given and U(x0) is defined, U is recorded at every sample.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if duration < 0:
        raise ValueError("duration must be non-negative")
    A = np.asarray(A, dtype=float)
    x = _validate_x0(x0)
    n_full = int(np.floor(duration / h + 1e-9))
    tail = duration - n_full * h
    if tail <= 1e-12 * max(1.0, duration):
        tail = 0.0
    ts, xs = [0.0], [x.copy()]
    drift = 0.0
    for s in range(1, n_full + 1):
        x, d = _checked_step(x, A, h)
        drift = max(drift, d)
        if s % sample_every == 0 or (s == n_full and tail == 0.0):
            ts.append(s * h)
            xs.append(x.copy())
    if tail > 0.0:
        x, d = _checked_step(x, A, tail)
        drift = max(drift, d)
        ts.append(duration)
        xs.append(x.copy())
    t = np.array(ts)
    X = np.array(xs)
    U0 = U = None
    if b is not None:
        bb = _b_array(b)
        if np.all(X[:, bb != 0] > 0):
            U = np.array([potential_U(bb, row) for row in X])
            U0 = float(U[0])
    return Orbit(t, X, U0, U, float(drift))


def estimate_period(x0, A, h: float = 1e-3, max_time: float = 1e4,
                    coord: int | None = None) -> float:
    """First return time of the flow to the section through ``x0``.

    The section is {x_c = x0_c} crossed in the same direction as the flow at
    ``x0``; ``c`` defaults to the coordinate with the largest speed at ``x0``.
    The crossing inside the last RK4 step is located by bisection on the step
    length to well below ``PERIOD_TOL``.
    """
    A = np.asarray(A, dtype=float)
    x0 = _validate_x0(x0)
    v0 = rhs(x0, A)
    if np.abs(v0).max() < 1e-14:
        raise FixedPoint("x0 is a fixed point of the flow")
    c = int(np.argmax(np.abs(v0))) if coord is None else coord
    if abs(v0[c]) < 1e-14:
        raise FixedPoint(f"flow is tangent to the section x_{c} = const at x0")
    sign = np.sign(v0[c])
    target = x0[c]

    def g(y):
        return sign * (y[c] - target)

    x = x0
    steps = 0
    left_section = False
    while steps * h < max_time:
        t = steps * h
        y, _ = _checked_step(x, A, h)
        if g(y) < 0:
            left_section = True  # went around to the far side of the section
        if left_section and g(x) <= 0.0 < g(y):
            lo, hi = 0.0, h
            while hi - lo > 1e-14:
                mid = 0.5 * (lo + hi)
                ym, _ = _checked_step(x, A, mid)
                if g(ym) > 0:
                    hi = mid
                else:
                    lo = mid
            return t + 0.5 * (lo + hi)
        x = y
        steps += 1
    raise NoReturnWithinBound(f"no return to the section within t = {max_time:g}")


def d_infty(x, y) -> float:
    return float(np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)).max())


def d_U(x, y, b) -> float:
    return abs(potential_U(b, x) - potential_U(b, y))


def linear_approx_rps(x0, t: float, n: float) -> np.ndarray:
    """x_a(0) (1 + (t/n)(x_{a+1}(0) - x_{a+2}(0))), indices cyclic."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (3,):
        raise ValueError("linear approximation is for three species")
    return x0 * (1.0 + (t / n) * (np.roll(x0, -1) - np.roll(x0, -2)))
