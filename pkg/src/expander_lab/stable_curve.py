"""Constructive stable-curve location for perturbed planar saddles.

Systems of the form

    X_t = -kappa X + f1(X, Y) + e^{-beta t} g1(X, Y)
    Y_t =    mu  Y + f2(X, Y) + e^{-beta t} g2(X, Y)

(kappa, mu, beta > 0, f_i superlinear and g_i at most linear at the origin)
admit, for small enough entry abscissa eps and late enough start time T, a
solution entering the cone

    R+ = {|Y| <= M X, 0 <= X <= eps}

through {X = eps} and decaying to the origin.  Solutions off that curve
leave the cone through the top edge {Y = +MX} or the bottom edge
{Y = -MX}, and the two exit classes fill single open Y-intervals of the
entry segment, so bisection on the entry ordinate converges to the stable
initial condition.

Because the expanding rate mu amplifies any entry error by e^{mu t}, a
single shot can only follow the curve for a time of order
log(bracket width)/(kappa+mu).  ``track_stable_curve`` therefore re-aims:
it restarts the bisection from the endpoint of each certified segment,
assembling an arbitrarily deep pseudo-trajectory whose jumps stay below the
bracket width.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .integrator import Event, Termination, Trajectory, integrate


class BracketFailure(RuntimeError):
    """The entry-segment endpoints do not classify Top/Bottom as required."""


class UndecidedExit(RuntimeError):
    """A shot ended without a usable classification (horizon or step failure)."""


class NoAdmissiblePair(RuntimeError):
    """No (eps, T) in the search grids certifies the entry conditions."""


class WindowTooShort(ValueError):
    """The requested fit window is not covered by the trajectory."""


class ExitClass(enum.Enum):
    TOP = "top"
    BOTTOM = "bottom"
    CONVERGED = "converged"


@dataclass(frozen=True)
class PerturbedSaddleSystem:
    """Planar saddle with an exponentially decaying perturbation.

    ``field_fn`` optionally supplies a fused evaluator of the full field
    (used on the hot shooting path); when absent the field is assembled
    from the parts.  The parts stay authoritative for the sampled entry
    certification.
    """

    kappa: float
    mu: float
    beta: float
    f1: Callable[[float, float], float]
    f2: Callable[[float, float], float]
    g1: Callable[[float, float], float]
    g2: Callable[[float, float], float]
    field_fn: Callable[[float, np.ndarray], np.ndarray] | None = None

    def __post_init__(self) -> None:
        if not (self.kappa > 0 and self.mu > 0 and self.beta > 0):
            raise ValueError("kappa, mu, beta must all be positive")
        for name in ("f1", "f2", "g1", "g2"):
            if abs(getattr(self, name)(0.0, 0.0)) > 1e-15:
                raise ValueError(f"{name}(0, 0) must vanish")

    @property
    def field(self) -> Callable[[float, np.ndarray], np.ndarray]:
        if self.field_fn is not None:
            return self.field_fn
        return self._assembled_field

    def _assembled_field(self, t: float, z: np.ndarray) -> np.ndarray:
        X, Y = z
        decay = math.exp(-self.beta * t)
        return np.array(
            [
                -self.kappa * X + self.f1(X, Y) + decay * self.g1(X, Y),
                self.mu * Y + self.f2(X, Y) + decay * self.g2(X, Y),
            ]
        )


@dataclass(frozen=True)
class ShootingConfig:
    """Entry data and numerical knobs for one shooting problem.

    M is the cone aperture, eps the entry abscissa, T the start time and
    t_max the classification horizon.  convergence_radius declares a shot
    Converged when the orbit norm drops below it; bisect_tol is the width
    tolerance on the entry-ordinate interval.
    """

    M: float
    eps: float
    T: float
    t_max: float
    convergence_radius: float | None = None
    bisect_tol: float | None = None
    rel_tol: float = 1e-10
    abs_tol: float | None = None

    def __post_init__(self) -> None:
        if not (self.M > 0 and self.eps > 0):
            raise ValueError("M and eps must be positive")
        if not self.t_max > self.T:
            raise ValueError("t_max must exceed T")

    @property
    def radius(self) -> float:
        return self.convergence_radius if self.convergence_radius is not None else 1e-8 * self.eps

    @property
    def width_tol(self) -> float:
        if self.bisect_tol is not None:
            return self.bisect_tol
        return max(1e-14 * self.M * self.eps, 8 * math.ulp(self.M * self.eps))

    @property
    def atol(self) -> float:
        # The natural error scale is the entry abscissa: Y hugs the curve at
        # |Y| << X, and holding Y to its own magnitude would force tiny
        # steps for no classification benefit.
        return self.abs_tol if self.abs_tol is not None else 1e-2 * self.rel_tol * self.eps


@dataclass(frozen=True)
class ShotResult:
    exit_class: ExitClass
    trajectory: Trajectory


def shoot(system: PerturbedSaddleSystem, config: ShootingConfig, Y0: float) -> ShotResult:
    """Integrate from (eps, Y0) at time T and classify the outcome."""
    M, eps = config.M, config.eps
    if abs(Y0) > M * eps * (1 + 1e-12):
        raise ValueError(f"|Y0| = {abs(Y0)} exceeds M*eps = {M * eps}")
    radius = config.radius
    events = [
        Event("top", lambda t, z: z[1] - M * z[0], direction=1),
        Event("bottom", lambda t, z: z[1] + M * z[0], direction=-1),
        Event("converged", lambda t, z: z[0] ** 2 + z[1] ** 2 - radius**2, direction=-1),
        Event("side", lambda t, z: z[0] - eps * (1 + 1e-9), direction=1),
    ]
    traj = integrate(
        system.field,
        [eps, Y0],
        config.T,
        config.t_max,
        rel_tol=config.rel_tol,
        abs_tol=config.atol,
        events=events,
    )
    if traj.termination is Termination.EVENT:
        if traj.event_name == "top":
            return ShotResult(ExitClass.TOP, traj)
        if traj.event_name == "bottom":
            return ShotResult(ExitClass.BOTTOM, traj)
        if traj.event_name == "converged":
            return ShotResult(ExitClass.CONVERGED, traj)
        raise UndecidedExit(f"shot left through the entry face at t={traj.event_time}")
    if traj.termination is Termination.STEP_FAILURE:
        raise UndecidedExit(f"integrator step failure: {traj.failure_reason}")
    # Horizon reached inside the cone: converged iff the norm still shrinks.
    z_end = traj.ys[-1]
    norm_end = math.hypot(*z_end)
    t_ref = max(config.T, config.t_max - 1.0)
    norm_ref = math.hypot(*traj(t_ref))
    if norm_end <= norm_ref:
        return ShotResult(ExitClass.CONVERGED, traj)
    raise UndecidedExit(
        f"horizon t_max={config.t_max} reached with non-decreasing norm "
        f"({norm_ref} -> {norm_end})"
    )


def classify_exit(system: PerturbedSaddleSystem, config: ShootingConfig, Y0: float) -> ExitClass:
    """Exit classification of the shot from (eps, Y0); see ``shoot``."""
    return shoot(system, config, Y0).exit_class


def find_stable_initial(
    system: PerturbedSaddleSystem,
    config: ShootingConfig,
    split: float = 0.5,
    bracket_scale: float = 1.0,
    bracket: tuple[float, float] | None = None,
) -> float:
    """Bisect the entry ordinate between a Top and a Bottom witness.

    The endpoints +-M*eps*bracket_scale must classify Top/Bottom
    (BracketFailure otherwise; shrink eps or increase T).  ``split`` is the
    interval fraction used per iteration (0.5 = plain bisection); any value
    in (0, 1) converges to the same curve and is useful for independently
    perturbed reruns.  An explicit ``bracket`` (lo, hi) may be supplied to
    warm-start near a known ordinate; its endpoints are validated the same
    way.
    """
    if not 0.0 < split < 1.0:
        raise ValueError("split must lie in (0, 1)")
    if bracket is None:
        hi = config.M * config.eps * bracket_scale
        lo = -hi
    else:
        lo, hi = bracket
        limit = config.M * config.eps * (1 + 1e-12)
        if not (-limit <= lo < hi <= limit):
            raise BracketFailure(f"bracket {bracket} not inside the entry segment")
    c_hi = classify_exit(system, config, hi)
    if c_hi is not ExitClass.TOP:
        raise BracketFailure(f"upper entry point classified {c_hi}, expected Top")
    c_lo = classify_exit(system, config, lo)
    if c_lo is not ExitClass.BOTTOM:
        raise BracketFailure(f"lower entry point classified {c_lo}, expected Bottom")
    width_tol = config.width_tol
    while hi - lo > width_tol:
        mid = lo + split * (hi - lo)
        if mid <= lo or mid >= hi:
            break  # interval no longer splittable in floating point
        c = classify_exit(system, config, mid)
        if c is ExitClass.TOP:
            hi = mid
        elif c is ExitClass.BOTTOM:
            lo = mid
        else:
            return mid  # certified convergent shot
    return 0.5 * (lo + hi)


def _find_warm(
    system: PerturbedSaddleSystem,
    config: ShootingConfig,
    center: float,
    radius: float,
    split: float = 0.5,
    bracket_scale: float = 1.0,
) -> float:
    """find_stable_initial with a warm bracket, falling back to the full one."""
    limit = config.M * config.eps * bracket_scale
    lo = max(center - radius, -limit)
    hi = min(center + radius, limit)
    if lo < hi:
        try:
            return find_stable_initial(system, config, split=split, bracket=(lo, hi))
        except BracketFailure:
            pass
    return find_stable_initial(system, config, split=split, bracket_scale=bracket_scale)


@dataclass(frozen=True)
class TrackedCurve:
    """Stable curve assembled from re-aimed converged segments.

    Segment j starts where segment j-1 ended, with the entry ordinate
    re-bisected; the jump is bounded by the local bracket width, so the
    assembly shadows the true curve at the bisection tolerance.
    """

    segments: tuple[Trajectory, ...]
    y_stars: tuple[float, ...]
    configs: tuple[ShootingConfig, ...]

    @property
    def t_start(self) -> float:
        return self.segments[0].t_start

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    def __call__(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t_arr.size, 2))
        starts = np.array([s.t_start for s in self.segments])
        idx = np.clip(np.searchsorted(starts, t_arr, side="right") - 1, 0, len(starts) - 1)
        for j, seg in enumerate(self.segments):
            mask = idx == j
            if np.any(mask):
                out[mask] = seg(np.minimum(t_arr[mask], seg.t_end))
        if np.isscalar(t) or np.asarray(t).ndim == 0:
            return out[0]
        return out

    def sample(self, n_per_segment: int = 120, trim: int = 2):
        """Concatenated (t, X, Y) arrays over interior dense samples."""
        ts, zs = [], []
        for seg in self.segments:
            grid = np.linspace(seg.t_start, seg.t_end, n_per_segment)
            if trim:
                grid = grid[trim:-trim]
            ts.append(grid)
            zs.append(seg(grid))
        return np.concatenate(ts), np.vstack(zs)


# Entry-ordinate errors of size d survive in the cone for a time of order
# log(M eps / d)/(kappa+mu) before the expanding mode ejects them.  The
# bisection horizon must exceed that time at d = width so every midpoint is
# classifiable; the kept trajectory is truncated much earlier, while the
# amplified bracket noise is still ~_JUNCTION_GROWTH * width relative.
_HORIZON_MARGIN = 1.0
_JUNCTION_GROWTH = 1e5


def discrimination_horizon(system: PerturbedSaddleSystem, config: ShootingConfig) -> float:
    """Time after which even width-level entry errors have left the cone."""
    width = config.width_tol
    rate = system.kappa + system.mu
    return math.log(2 * config.M * config.eps / width) / rate + _HORIZON_MARGIN


def segment_span(system: PerturbedSaddleSystem, config: ShootingConfig) -> float:
    """Kept span of one tracked segment before re-aiming.

    Short enough that the bracket noise, growing like e^{(kappa+mu) s},
    stays below ~1e5 times the relative bisection width.
    """
    return math.log(_JUNCTION_GROWTH) / (system.kappa + system.mu)


def track_stable_curve(
    system: PerturbedSaddleSystem,
    config: ShootingConfig,
    s_stop: float,
    split: float = 0.5,
    bracket_scale: float = 1.0,
    max_segments: int = 256,
) -> TrackedCurve:
    """Follow the stable curve from (eps, T) until time s_stop.

    Each segment bisects over the full discrimination horizon, keeps the
    certified shot over ``segment_span`` only, and re-aims from its endpoint;
    the relative bisection tolerance is preserved across segments.
    """
    rel_width = config.width_tol / (config.M * config.eps)
    span = segment_span(system, config)
    segments: list[Trajectory] = []
    y_stars: list[float] = []
    configs: list[ShootingConfig] = []
    s0, eps_seg = config.T, config.eps
    y_incoming: float | None = None
    for _ in range(max_segments):
        cfg = replace(
            config,
            eps=eps_seg,
            T=s0,
            t_max=s0 + span,
            bisect_tol=rel_width * config.M * eps_seg,
            abs_tol=1e-2 * config.rel_tol * eps_seg,
        )
        horizon = replace(cfg, t_max=s0 + discrimination_horizon(system, cfg))
        if y_incoming is None:
            y_star = find_stable_initial(system, horizon, split=split, bracket_scale=bracket_scale)
        else:
            # The incoming ordinate sits within the amplified bracket noise
            # of the continuation; a warm bracket saves most iterations.
            radius = 10 * _JUNCTION_GROWTH * cfg.width_tol
            y_star = _find_warm(
                system, horizon, y_incoming, radius, split=split, bracket_scale=bracket_scale
            )
        result = shoot(system, cfg, y_star)
        if result.exit_class is not ExitClass.CONVERGED:
            raise BracketFailure(
                f"re-aimed shot at T={cfg.T} classified {result.exit_class}, not Converged"
            )
        segments.append(result.trajectory)
        y_stars.append(y_star)
        configs.append(cfg)
        s0 = result.trajectory.t_end
        eps_seg = float(result.trajectory.ys[-1, 0])
        y_incoming = float(result.trajectory.ys[-1, 1])
        norm_end = float(np.hypot(*result.trajectory.ys[-1]))
        if s0 >= s_stop * (1 - 1e-12) or norm_end <= cfg.radius:
            break
    else:
        raise BracketFailure(f"exceeded {max_segments} tracking segments before s_stop={s_stop}")
    return TrackedCurve(tuple(segments), tuple(y_stars), tuple(configs))


def fit_decay_rate(trajectory, window: tuple[float, float], n_points: int = 200) -> float:
    """Negated least-squares slope of log X over the window.

    Accepts a Trajectory or a TrackedCurve (anything densely evaluable with
    t_start/t_end).  The window must be covered and X must stay positive.
    """
    ta, tb = window
    lo = min(trajectory.t_start, trajectory.t_end)
    hi = max(trajectory.t_start, trajectory.t_end)
    pad = 1e-9 * (hi - lo)
    if not (tb > ta and ta >= lo - pad and tb <= hi + pad):
        raise WindowTooShort(f"window [{ta}, {tb}] not covered by [{lo}, {hi}]")
    grid = np.linspace(ta, tb, n_points)
    X = np.asarray(trajectory(grid))[:, 0]
    if np.any(X <= 0):
        raise ValueError("X must be positive throughout the fit window")
    slope = np.polyfit(grid, np.log(X), 1)[0]
    return -float(slope)


def _sample_fn(fn, X, Y):
    """Evaluate a field function on arrays, falling back to a scalar loop."""
    try:
        out = np.asarray(fn(X, Y), dtype=float)
        if out.shape == X.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([fn(float(x), float(y)) for x, y in zip(X.ravel(), Y.ravel())]).reshape(X.shape)


def admissible_entry(
    system: PerturbedSaddleSystem,
    M: float,
    delta: float,
    eps_grid: Sequence[float] | None = None,
    T_grid: Sequence[float] | None = None,
    n_samples: int = 1000,
) -> tuple[float, float]:
    """Largest grid eps and smallest grid T certifying the entry conditions.

    Certification samples the worst case over t >= T (perturbation magnitude
    frozen at e^{-beta T}):

      * contraction, throughout the cone:  f1 + e^{-beta T}|g1| <= delta X,
      * expulsion on the top edge Y=+MX:   mu M X + f2 - e^{-beta T}|g2| > 0,
      * expulsion on the bottom edge:     -mu M X + f2 + e^{-beta T}|g2| < 0.

    Together these guarantee the Top/Bottom bracket required by
    ``find_stable_initial``.
    """
    if not 0 < delta < system.kappa:
        raise ValueError("delta must lie in (0, kappa)")
    if eps_grid is None:
        eps_grid = [2.0**-j for j in range(0, 21)]
    if T_grid is None:
        T_grid = list(range(0, 21))

    side = max(4, int(math.sqrt(n_samples)))
    u = np.linspace(1.0 / side, 1.0, side)
    v = np.linspace(-1.0, 1.0, side)
    UU, VV = np.meshgrid(u, v)
    x_edge = np.linspace(1.0 / n_samples, 1.0, n_samples)

    for eps in eps_grid:
        Xc = eps * UU
        Yc = M * Xc * VV
        f1c = _sample_fn(system.f1, Xc, Yc)
        g1c = np.abs(_sample_fn(system.g1, Xc, Yc))
        Xe = eps * x_edge
        top_f2 = _sample_fn(system.f2, Xe, M * Xe)
        top_g2 = np.abs(_sample_fn(system.g2, Xe, M * Xe))
        bot_f2 = _sample_fn(system.f2, Xe, -M * Xe)
        bot_g2 = np.abs(_sample_fn(system.g2, Xe, -M * Xe))
        for T in T_grid:
            decay = math.exp(-system.beta * T)
            if np.any(f1c + decay * g1c > delta * Xc):
                continue
            if np.any(system.mu * M * Xe + top_f2 - decay * top_g2 <= 0):
                continue
            if np.any(-system.mu * M * Xe + bot_f2 + decay * bot_g2 >= 0):
                continue
            return float(eps), float(T)
    raise NoAdmissiblePair(
        f"no (eps, T) within eps >= {min(eps_grid)}, T <= {max(T_grid)} certifies the entry"
    )
