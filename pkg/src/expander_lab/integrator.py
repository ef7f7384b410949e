"""Adaptive explicit Runge-Kutta integration with dense output and events.

Implements the Dormand-Prince 5(4) embedded pair: six effective stages with
first-same-as-last reuse, fifth-order propagation, fourth-order error
estimate, and the quartic Shampine interpolant for dense output.  Step-size
selection uses a PI controller.  Event functions are monitored at every
accepted step and located on the dense output by bisection.

The systems integrated here are planar and non-stiff in the regimes this
package drives through this module; no implicit fallback is provided.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

# Dormand-Prince tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([], dtype=float),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# Difference between the 5th- and 4th-order weights.
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# Quartic dense-output coefficients (Shampine); row sums reproduce _B.
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
# PI controller exponents (error order 5).
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5
_EPS = float(np.finfo(float).eps)

EVENT_LOCATION_TOL = 1e-12


class Termination(enum.Enum):
    REACHED_END = "reached_end"
    EVENT = "event"
    STEP_FAILURE = "step_failure"


@dataclass(frozen=True)
class Event:
    """Scalar sign-change function g(t, y); integration stops when it fires.

    direction=+1 fires on up-crossings (g passes from <0 to >0), -1 on
    down-crossings, 0 on either.  A crossing that starts exactly at g=0 and
    moves to the firing side is located at the step start.
    """

    name: str
    fn: Callable[[float, np.ndarray], float]
    direction: int = 0


@dataclass
class Trajectory:
    """Integration result: accepted samples plus a dense evaluator.

    ``ts`` is strictly monotone (increasing or decreasing with the
    integration direction); calling the trajectory evaluates the quartic
    interpolant anywhere inside the covered interval.
    """

    ts: np.ndarray
    ys: np.ndarray
    termination: Termination
    event_name: str | None = None
    event_time: float | None = None
    failure_reason: str | None = None
    n_rhs_evals: int = 0
    _seg_t0: np.ndarray = field(default=None, repr=False)
    _seg_h: np.ndarray = field(default=None, repr=False)
    _seg_y0: np.ndarray = field(default=None, repr=False)
    _seg_q: np.ndarray = field(default=None, repr=False)

    @property
    def t_start(self) -> float:
        return float(self.ts[0])

    @property
    def t_end(self) -> float:
        return float(self.ts[-1])

    def __call__(self, t):
        """Dense evaluation at scalar or array times inside the span."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        lo, hi = min(self.t_start, self.t_end), max(self.t_start, self.t_end)
        pad = 1e-9 * (hi - lo) + 1e-12
        if np.any(t_arr < lo - pad) or np.any(t_arr > hi + pad):
            raise ValueError(f"dense evaluation outside [{lo}, {hi}]")
        direction = 1.0 if self._seg_h[0] > 0 else -1.0
        starts = direction * self._seg_t0
        idx = np.searchsorted(starts, direction * t_arr, side="right") - 1
        idx = np.clip(idx, 0, len(self._seg_t0) - 1)
        theta = (t_arr - self._seg_t0[idx]) / self._seg_h[idx]
        theta = np.clip(theta, 0.0, 1.0)
        powers = np.stack([theta, theta**2, theta**3, theta**4], axis=-1)
        out = self._seg_y0[idx] + self._seg_h[idx, None] * np.einsum(
            "sdj,sj->sd", self._seg_q[idx], powers
        )
        if np.isscalar(t) or np.asarray(t).ndim == 0:
            return out[0]
        return out


def _dense_eval_single(y0, h, q, theta):
    powers = np.array([theta, theta**2, theta**3, theta**4])
    return y0 + h * (q @ powers)


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    state0: Sequence[float],
    t0: float,
    t1: float,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-12,
    events: Sequence[Event] = (),
    first_step: float | None = None,
    max_steps: int = 1_000_000,
) -> Trajectory:
    """Integrate y' = rhs(t, y) from t0 to t1 (either direction).

    Local error per step is kept below abs_tol + rel_tol*|y| by the embedded
    estimate.  Integration stops at t1, at the first event crossing, or when
    the step size underflows (reported as a StepFailure termination rather
    than raised).
    """
    if t1 == t0:
        raise ValueError("t0 and t1 must differ")
    if rel_tol <= 0 or abs_tol <= 0:
        raise ValueError("tolerances must be positive")
    y = np.array(state0, dtype=float)
    dim = y.size
    direction = 1.0 if t1 > t0 else -1.0
    span = abs(t1 - t0)
    h = direction * (abs(first_step) if first_step is not None else 1e-4 * span)

    t = float(t0)
    ts = [t]
    ys = [y.copy()]
    seg_t0, seg_h, seg_y0, seg_q = [], [], [], []
    k = np.empty((7, dim))
    k[0] = rhs(t, y)
    n_evals = 1
    ev_prev = [e.fn(t, y) for e in events]
    err_prev = 1.0
    termination = Termination.REACHED_END
    event_name = None
    event_time = None
    failure = None

    steps = 0
    while direction * (t1 - t) > 0:
        steps += 1
        if steps > max_steps:
            termination = Termination.STEP_FAILURE
            failure = f"exceeded {max_steps} steps"
            break
        h_min = 16 * _EPS * max(abs(t), span * 1e-3)
        if abs(h) < h_min:
            termination = Termination.STEP_FAILURE
            failure = f"step size underflow at t={t!r} (h={h!r})"
            break
        if direction * (t + h - t1) > 0:
            h = t1 - t

        for i in range(1, 7):
            yi = y + h * (_A[i] @ k[:i])
            k[i] = rhs(t + _C[i] * h, yi)
        n_evals += 6
        y_new = yi  # stage 7 evaluates at (t+h, y1): FSAL
        err_vec = h * (_E @ k)
        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        q = err_vec / scale
        err = math.sqrt(float(q @ q) / dim)

        if err > 1.0:
            h *= max(_MIN_FACTOR, _SAFETY * err ** (-1 / 5))
            continue

        q = k.T @ _P
        t_new = t + h
        seg_t0.append(t)
        seg_h.append(h)
        seg_y0.append(y.copy())
        seg_q.append(q)

        fired: list[tuple[float, str, np.ndarray]] = []
        for j, e in enumerate(events):
            v_new = e.fn(t_new, y_new)
            v_old = ev_prev[j]
            up = e.direction >= 0 and v_old <= 0 < v_new
            down = e.direction <= 0 and v_old >= 0 > v_new
            if up or down:
                tau, y_tau = _locate_event(e, v_old, t, h, y, q)
                fired.append((tau, e.name, y_tau))
            ev_prev[j] = v_new
        if fired:
            fired.sort(key=lambda item: direction * item[0])
            tau, name, y_tau = fired[0]
            ts.append(tau)
            ys.append(y_tau)
            termination = Termination.EVENT
            event_name = name
            event_time = tau
            break

        ts.append(t_new)
        ys.append(y_new.copy())
        t = t_new
        y = y_new.copy()
        k[0] = k[6]

        if err == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = min(
                _MAX_FACTOR,
                max(_MIN_FACTOR, _SAFETY * err ** (-_ALPHA) * err_prev ** _BETA),
            )
        h *= factor
        err_prev = max(err, 1e-10)

    if not seg_t0:
        # No step was ever accepted; degenerate dense data over a point.
        seg_t0, seg_h = [t0], [direction * 1.0]
        seg_y0, seg_q = [np.array(state0, dtype=float)], [np.zeros((dim, 4))]

    return Trajectory(
        ts=np.array(ts),
        ys=np.array(ys),
        termination=termination,
        event_name=event_name,
        event_time=event_time,
        failure_reason=failure,
        n_rhs_evals=n_evals,
        _seg_t0=np.array(seg_t0),
        _seg_h=np.array(seg_h),
        _seg_y0=np.array(seg_y0),
        _seg_q=np.array(seg_q),
    )


def _locate_event(event: Event, v_left, t, h, y0, q):
    """Bisect the dense output over one step down to EVENT_LOCATION_TOL in t."""
    a, b = 0.0, 1.0
    va = v_left
    if va == 0.0:
        # Started exactly on the zero set and moved to the firing side.
        return t, _dense_eval_single(y0, h, q, 0.0)
    while abs(b - a) * abs(h) > EVENT_LOCATION_TOL:
        mid = 0.5 * (a + b)
        vm = event.fn(t + mid * h, _dense_eval_single(y0, h, q, mid))
        if (vm > 0) == (va > 0) and vm != 0.0:
            a = mid
        else:
            b = mid
    theta = 0.5 * (a + b)
    return t + theta * h, _dense_eval_single(y0, h, q, theta)
