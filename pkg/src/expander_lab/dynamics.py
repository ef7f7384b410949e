"""Right-hand sides, coordinate transforms and linearizations of the reduced ODE.

The graph {(r x, f(r) L(x))} is a self-similar solution iff the radial
profile f satisfies

    f_rr/(1 + f_r^2) + (n-p) f_r/r + p (r f_r - lam^2 f)/(r^2 + lam^2 f^2)
        + C (r f_r - f) = 0,

with C = +1 for expanders, 0 for minimal graphs, -1 for shrinkers.  In the
log-radius variables t = log r, phi = f/r, psi = phi_t this becomes the
planar system

    phi_t = psi
    psi_t = -psi - ((n-p + p/(1+lam^2 phi^2) + C e^{2t}) psi
                    + (n-p + (1-lam^2) p/(1+lam^2 phi^2)) phi)
                   (1 + (phi+psi)^2).

All formulas are implemented exactly as printed, term by term, so that the
residual tests certify the transcription.  Every function here is pure and
accepts numpy arrays wherever a scalar is accepted.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .params import LomseSpec

# Callers must keep t below ~40: the non-autonomous coefficient is evaluated
# as exp(2t) directly and overflows near t ~ 355.
T_MAX_SAFE = 40.0


class DegenerateRadius(ValueError):
    """The profile equation is only defined for r > 0."""


class SimilarityConstant(enum.IntEnum):
    """Allowed values of the similarity constant C."""

    SHRINKER = -1
    MINIMAL = 0
    EXPANDER = 1


class Equilibrium(enum.Enum):
    ORIGIN = "origin"
    CONE_POINT = "cone_point"


@dataclass(frozen=True)
class PhiPsiState:
    """A point (t, phi, psi) of the reduced first-order system."""

    t: float
    phi: float
    psi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.t) and math.isfinite(self.phi) and math.isfinite(self.psi)):
            raise ValueError(f"non-finite state ({self.t}, {self.phi}, {self.psi})")


def _check_C(C: int) -> int:
    if int(C) != C or int(C) not in (-1, 0, 1):
        raise ValueError(f"similarity constant must be -1, 0 or +1, got {C!r}")
    return int(C)


def ode_residual(r, f, f_r, f_rr, spec: LomseSpec, C: int = 1):
    """Left-hand side of the profile equation; zero along exact solutions."""
    C = _check_C(C)
    if np.any(np.asarray(r) <= 0):
        raise DegenerateRadius("profile equation needs r > 0")
    n, p, lam2 = spec.n, spec.p, spec.lam2
    return (
        f_rr / (1 + f_r**2)
        + (n - p) * f_r / r
        + p * (r * f_r - lam2 * f) / (r**2 + lam2 * f**2)
        + C * (r * f_r - f)
    )


def residual_terms(r, f, f_r, f_rr, spec: LomseSpec, C: int = 1):
    """The four summands of the profile equation, for scale-aware residuals."""
    C = _check_C(C)
    if np.any(np.asarray(r) <= 0):
        raise DegenerateRadius("profile equation needs r > 0")
    n, p, lam2 = spec.n, spec.p, spec.lam2
    return (
        f_rr / (1 + f_r**2),
        (n - p) * f_r / r,
        p * (r * f_r - lam2 * f) / (r**2 + lam2 * f**2),
        C * (r * f_r - f),
    )


def rhs_profile(r, f, f_r, spec: LomseSpec, C: int = 1):
    """Solve the profile equation for f_rr (algebraic rearrangement)."""
    C = _check_C(C)
    if np.any(np.asarray(r) <= 0):
        raise DegenerateRadius("profile equation needs r > 0")
    n, p, lam2 = spec.n, spec.p, spec.lam2
    lower = (
        (n - p) * f_r / r
        + p * (r * f_r - lam2 * f) / (r**2 + lam2 * f**2)
        + C * (r * f_r - f)
    )
    return -(1 + f_r**2) * lower


def _phipsi_field(t, phi, psi, n, p, lam2, C):
    """Raw (phi_t, psi_t) without state wrapping; hot path of the solver."""
    u = 1 + lam2 * phi * phi
    coef_psi = n - p + p / u + C * np.exp(2 * t)
    coef_phi = n - p + (1 - lam2) * p / u
    psi_t = -psi - (coef_psi * psi + coef_phi * phi) * (1 + (phi + psi) ** 2)
    return psi, psi_t


def rhs_phipsi(state: PhiPsiState, spec: LomseSpec, C: int = 1) -> tuple[float, float]:
    """Field of the first-order (phi, psi) system at the given state."""
    C = _check_C(C)
    phi_t, psi_t = _phipsi_field(state.t, state.phi, state.psi, spec.n, spec.p, spec.lam2, C)
    return float(phi_t), float(psi_t)


def rhs_phipsi_autonomous(phi, psi, spec: LomseSpec):
    """Field with the e^{2t} term dropped (the t -> -infinity limit)."""
    u = 1 + spec.lam2 * phi * phi
    coef_psi = spec.n - spec.p + spec.p / u
    coef_phi = spec.n - spec.p + (1 - spec.lam2) * spec.p / u
    psi_t = -psi - (coef_psi * psi + coef_phi * phi) * (1 + (phi + psi) ** 2)
    return psi, psi_t


def phipsi_jacobian(t, phi, psi, spec: LomseSpec, C: int = 1) -> np.ndarray:
    """Jacobian of the (phi, psi) field with respect to (phi, psi)."""
    n, p, lam2 = spec.n, spec.p, spec.lam2
    u = 1 + lam2 * phi * phi
    A = n - p + p / u + C * math.exp(2 * t)
    B = n - p + (1 - lam2) * p / u
    S = 1 + (phi + psi) ** 2
    P = A * psi + B * phi
    dA = -p * 2 * lam2 * phi / u**2
    dB = -(1 - lam2) * p * 2 * lam2 * phi / u**2
    d_phi = -((dA * psi + B + dB * phi) * S + P * 2 * (phi + psi))
    d_psi = -1 - (A * S + P * 2 * (phi + psi))
    return np.array([[0.0, 1.0], [d_phi, d_psi]])


def to_saddle_coords(state: PhiPsiState, spec: LomseSpec) -> tuple[float, float, float]:
    """Map (t, phi, psi) to the time-reversed saddle coordinates (s, X, Y).

    s = -t; X carries the slow (contracting) eigendirection of the origin,
    Y the fast (expanding) one: phi = X + Y, psi = (k-1) X - (n+k) Y.
    """
    n, k = spec.n, spec.k
    den = n + 2 * k - 1
    X = ((n + k) * state.phi + state.psi) / den
    Y = ((k - 1) * state.phi - state.psi) / den
    return -state.t, X, Y


def from_saddle_coords(s: float, X: float, Y: float, spec: LomseSpec) -> PhiPsiState:
    """Inverse of to_saddle_coords; the round trip is the identity."""
    n, k = spec.n, spec.k
    return PhiPsiState(t=-s, phi=X + Y, psi=(k - 1) * X - (n + k) * Y)


def linearize(spec: LomseSpec, at: Equilibrium) -> np.ndarray:
    """Linearization matrix of the autonomous part at an equilibrium."""
    n, p, lam2 = spec.n, spec.p, spec.lam2
    if at is Equilibrium.ORIGIN:
        return np.array([[0.0, 1.0], [p * lam2 - n, -n - 1.0]])
    if at is Equilibrium.CONE_POINT:
        return np.array([[0.0, 1.0], [2 * n * (n / (p * lam2) - 1), -n - 1.0]])
    raise ValueError(f"unknown equilibrium {at!r}")


@dataclass(frozen=True)
class SaddleParts:
    """Components of the time-reversed system near the origin.

    In backward time s = -t the system reads

        X_s = -kappa X + f1(X, Y) + e^{-beta s} g1(X, Y)
        Y_s =    mu  Y + f2(X, Y) + e^{-beta s} g2(X, Y)

    with kappa = k-1, mu = n+k, beta = 2; f1, f2 are superlinear at the
    origin and g1, g2 at most linear (the similarity constant C is folded
    into g1, g2).
    """

    kappa: float
    mu: float
    beta: float
    f1: Callable[[float, float], float]
    f2: Callable[[float, float], float]
    g1: Callable[[float, float], float]
    g2: Callable[[float, float], float]


def saddle_parts(spec: LomseSpec, C: int = 1) -> SaddleParts:
    """Build the exact nonlinear/perturbation parts of the backward system."""
    C = _check_C(C)
    n, p, k, lam2 = spec.n, spec.p, spec.k, spec.lam2
    kappa, mu = float(k - 1), float(n + k)
    den = n + 2 * k - 1

    def _backward_autonomous(X, Y):
        phi = X + Y
        psi = (k - 1) * X - (n + k) * Y
        dphi = -psi
        _, psi_t = rhs_phipsi_autonomous(phi, psi, spec)
        dpsi = -psi_t
        return ((n + k) * dphi + dpsi) / den, ((k - 1) * dphi - dpsi) / den

    def f1(X, Y):
        dX, _ = _backward_autonomous(X, Y)
        return dX + kappa * X

    def f2(X, Y):
        _, dY = _backward_autonomous(X, Y)
        return dY - mu * Y

    # The e^{2t} term contributes -C e^{2t} psi (1+(phi+psi)^2) to psi_t;
    # reversing time flips its sign into dpsi/ds.
    def _g_common(X, Y):
        phi = X + Y
        psi = (k - 1) * X - (n + k) * Y
        return C * psi * (1 + (phi + psi) ** 2)

    def g1(X, Y):
        return _g_common(X, Y) / den

    def g2(X, Y):
        return -_g_common(X, Y) / den

    return SaddleParts(kappa=kappa, mu=mu, beta=2.0, f1=f1, f2=f2, g1=g1, g2=g2)


def backward_field(spec: LomseSpec, C: int = 1) -> Callable[[float, np.ndarray], np.ndarray]:
    """Fused fast evaluator of the full backward field (s, (X, Y)) -> d/ds.

    Equivalent to assembling saddle_parts into -kappa X + f1 + e^{-2s} g1
    etc., but computed in one pass with scalar math; this is the hot path of
    the shooting loops.
    """
    C = _check_C(C)
    n, p, k, lam2 = spec.n, spec.p, spec.k, spec.lam2
    den = n + 2 * k - 1

    def field(s: float, z: np.ndarray) -> np.ndarray:
        X = float(z[0])
        Y = float(z[1])
        phi = X + Y
        psi = (k - 1) * X - (n + k) * Y
        u = 1 + lam2 * phi * phi
        coef_psi = n - p + p / u + C * math.exp(-2 * s)
        coef_phi = n - p + (1 - lam2) * p / u
        psi_t = -psi - (coef_psi * psi + coef_phi * phi) * (1 + (phi + psi) ** 2)
        dphi = -psi
        dpsi = -psi_t
        return np.array([((n + k) * dphi + dpsi) / den, ((k - 1) * dphi - dpsi) / den])

    return field
