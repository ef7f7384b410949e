"""Compact positive-invariant region of the expander phase plane.

The region Delta is bounded below by {psi = 0}, 0 <= phi <= phi0, and above
by the graph of

    g(phi) = c * ((lam^2-1) p / (1 + lam^2 phi^2) - (n-p)) * phi / (n-p),

with c = 3/2 for the triples (3,2,2), (5,4,2), (5,4,4) and c = 2 for n >= 7.
The bracket is positive on [0, phi0) and vanishes exactly at phi0, so g
closes up at both ends with g'(0) = c (p lam^2 - n)/(n-p) > k-1.

Note the sign of the lam^2 term: the bracket must be (lam^2-1)p/(1+lam^2
phi^2) - (n-p).  Writing (1-lam^2) instead makes g negative on (0, phi0]
with g'(0) < 0, which is incompatible with a region that contains
{psi >= 0} and supports an entry slope above k-1; verify_invariance
certifies the implemented sign numerically.

Invariance is the pair of sampled flux conditions
  (1) psi_t >= 0 on the bottom edge {(phi, 0)},
  (2) <(phi_t, psi_t), (g'(phi), -1)> >= 0 along the graph of g
where (g'(phi), -1) is the inner normal.  Because psi = g >= 0 on the graph
and the non-autonomous coefficient C e^{2t} multiplies +psi, the autonomous
limit is the worst case for (2); times t and the autonomous limit are both
sampled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import PhiPsiState, _phipsi_field, phipsi_jacobian, rhs_phipsi_autonomous
from .params import LomseSpec, solvable_case

DEFAULT_SLACK = 1e-9
_LOW_TRIPLES = ((3, 2, 2), (5, 4, 2), (5, 4, 4))


class UnsupportedCase(ValueError):
    """Raised for admissible triples outside the sink cases."""


@dataclass(frozen=True)
class InvariantRegion:
    """The compact region Delta between {psi = 0} and the barrier graph."""

    spec: LomseSpec
    c: float
    g: Callable[[np.ndarray], np.ndarray]
    g_prime: Callable[[np.ndarray], np.ndarray]

    @property
    def phi0(self) -> float:
        return self.spec.phi0


def build_region(spec: LomseSpec) -> InvariantRegion:
    """Construct Delta for a solvable spec; UnsupportedCase otherwise."""
    if not solvable_case(spec):
        raise UnsupportedCase(
            f"{spec}: cone point is a spiral sink, no barrier of this form"
        )
    n, p, lam2 = spec.n, spec.p, spec.lam2
    c = 1.5 if (spec.n, spec.p, spec.k) in _LOW_TRIPLES else 2.0

    def g(phi):
        u = 1 + lam2 * np.asarray(phi) ** 2
        return c * ((lam2 - 1) * p / u - (n - p)) * phi / (n - p)

    def g_prime(phi):
        phi = np.asarray(phi)
        u = 1 + lam2 * phi**2
        bracket = (lam2 - 1) * p / u - (n - p)
        d_bracket = -(lam2 - 1) * p * 2 * lam2 * phi / u**2
        return c * (bracket + phi * d_bracket) / (n - p)

    return InvariantRegion(spec=spec, c=c, g=g, g_prime=g_prime)


def contains(region: InvariantRegion, state: PhiPsiState, slack: float = DEFAULT_SLACK) -> bool:
    """Membership of (phi, psi) in Delta, inclusive boundaries.

    ``slack`` loosens every boundary comparison; trajectory monitors use it
    because integrators graze boundaries.  Pass slack=0.0 for the exact
    region.
    """
    phi, psi = state.phi, state.psi
    if phi < -slack or phi > region.phi0 + slack:
        return False
    if psi < -slack:
        return False
    return psi <= float(region.g(min(max(phi, 0.0), region.phi0))) + slack


@dataclass(frozen=True)
class InvarianceReport:
    min_bottom_inflow: float
    min_barrier_inflow: float
    n_samples: int
    tol: float
    passed: bool


def verify_invariance(
    region: InvariantRegion,
    t_from: float = 0.0,
    n_samples: int = 10_000,
    tol: float = 1e-10,
) -> InvarianceReport:
    """Sample the two inward-flux conditions on the boundary of Delta.

    Both boundary arcs are sampled at ``n_samples`` points, at times
    t in {t_from, t_from+1, ..., t_from+20} and in the autonomous limit.
    Passing means neither sampled flux drops below -tol.
    """
    if n_samples < 100:
        raise ValueError("need at least 100 samples for a meaningful check")
    spec = region.spec
    n, p, lam2 = spec.n, spec.p, spec.lam2
    phis = np.linspace(0.0, spec.phi0, n_samples)

    # Bottom edge: psi = 0, inward direction is +psi, so the flux is psi_t
    # itself.  The e^{2t} term is multiplied by psi = 0; the autonomous
    # value is exact for every t.
    _, bottom_flux = rhs_phipsi_autonomous(phis, np.zeros_like(phis), spec)
    min_bottom = float(bottom_flux.min())

    # Barrier arc: flux = g'(phi) * phi_t - psi_t evaluated at psi = g(phi).
    # g vanishes at both endpoints up to round-off; the arc lives at psi >= 0,
    # so clamp the rounding noise (e^{2t} would amplify a -1e-17 into O(1)).
    g_vals = np.maximum(region.g(phis), 0.0)
    gp_vals = region.g_prime(phis)
    phi_t, psi_t = rhs_phipsi_autonomous(phis, g_vals, spec)
    min_barrier = float((gp_vals * phi_t - psi_t).min())
    for t in range(0, 21):
        phi_t, psi_t = _phipsi_field(t_from + t, phis, g_vals, n, p, lam2, 1)
        min_barrier = min(min_barrier, float((gp_vals * phi_t - psi_t).min()))

    passed = min_bottom >= -tol and min_barrier >= -tol
    return InvarianceReport(
        min_bottom_inflow=min_bottom,
        min_barrier_inflow=min_barrier,
        n_samples=n_samples,
        tol=tol,
        passed=passed,
    )


def exit_excess(region: InvariantRegion, phi, psi) -> np.ndarray:
    """How far (phi, psi) lies outside Delta; 0 inside, positive outside."""
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    g_vals = region.g(np.clip(phi, 0.0, region.phi0))
    return np.maximum.reduce(
        [-phi, phi - region.phi0, -psi, psi - g_vals, np.zeros_like(phi)]
    )


def max_trajectory_excursion(
    region: InvariantRegion,
    phi_start: float,
    psi_start: float,
    t_span: tuple[float, float],
    rel_tol: float = 1e-9,
    abs_tol: float = 1e-12,
    n_probe: int = 1500,
) -> float:
    """Integrate one trajectory and report its largest excursion out of Delta.

    The forward system is stiff once e^{2t} is large, so this uses the
    implicit Radau method; an explicit integrator would need ~e^{2t} steps.
    """
    spec = region.spec

    def rhs(t, z):
        return _phipsi_field(t, z[0], z[1], spec.n, spec.p, spec.lam2, 1)

    def jac(t, z):
        return phipsi_jacobian(t, z[0], z[1], spec, 1)

    sol = solve_ivp(
        rhs, t_span, [phi_start, psi_start], method="Radau", jac=jac,
        rtol=rel_tol, atol=abs_tol, dense_output=True,
    )
    if not sol.success:
        raise RuntimeError(f"trajectory integration failed: {sol.message}")
    probe = sol.sol(np.linspace(t_span[0], t_span[1], n_probe))
    return float(exit_excess(region, probe[0], probe[1]).max())
