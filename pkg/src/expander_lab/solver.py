"""End-to-end construction and certification of graphical self-expanders.

A profile is built in two legs joined at t = -T (r = R = e^{-T}):

  * backward leg: the stable curve of the time-reversed saddle system is
    located by shooting and tracked toward the origin, which realizes the
    r -> 0 tail f ~ r^k;
  * the entry abscissa is adjusted by a secant iteration until the Dirichlet
    value phi(-T) = f(R)/R hits the requested eps;
  * forward leg: the matched state is integrated through the invariant
    region Delta until psi has collapsed and phi has stabilized at its
    asymptotic slope phi_inf.

The forward system is genuinely stiff: the psi-equation carries a
coefficient e^{2t}, so its Jacobian grows like e^{2t} while the solution
rides the slow manifold psi ~ e^{-2t}.  An explicit pair would need ~e^{2t}
steps; the forward leg therefore uses the implicit Radau method from scipy
with the analytic Jacobian.  The backward leg and all shooting use the
package's own explicit integrator.

Certification is independent of the construction path: the second-order
profile residual is evaluated with f_rr obtained by finite differences of
dense output, never from the first-order right-hand side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy.integrate import solve_ivp

from .barrier import UnsupportedCase, build_region, contains
from .dynamics import (
    PhiPsiState,
    _phipsi_field,
    backward_field,
    phipsi_jacobian,
    residual_terms,
    saddle_parts,
)
from .params import LomseSpec, solvable_case
from .stable_curve import (
    BracketFailure,
    PerturbedSaddleSystem,
    ShootingConfig,
    TrackedCurve,
    WindowTooShort,
    _find_warm,
    discrimination_horizon,
    find_stable_initial,
    fit_decay_rate,
    track_stable_curve,
)

LN10 = math.log(10.0)

# Forward integration stops once |psi| and the per-unit-window phi drift
# fall below this; capped at FORWARD_T_CAP.
PSI_SETTLED = 1e-9
FORWARD_T_CAP = 20.0
REGION_SLACK = 1e-7


class NoConvergence(RuntimeError):
    """The forward leg failed to settle before the time cap."""


class RegionViolation(RuntimeError):
    """A forward sample left the invariant region beyond slack."""


@dataclass
class ProfileDiagnostics:
    max_residual: float
    decay_fit: float
    k_hat: float
    envelope_ok: bool
    in_region_ok: bool
    psi_final: float
    phi_inf_error: float


class _ForwardPath:
    """Dense forward solution assembled from unit-window Radau chunks."""

    def __init__(self, chunks):
        self.chunks = chunks
        self.t_start = chunks[0].t[0]
        self.t_end = chunks[-1].t[-1]
        self._starts = np.array([c.t[0] for c in chunks])

    def __call__(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(self._starts, t_arr, side="right") - 1, 0, len(self.chunks) - 1)
        out = np.empty((t_arr.size, 2))
        for j, chunk in enumerate(self.chunks):
            mask = idx == j
            if np.any(mask):
                tt = np.clip(t_arr[mask], chunk.t[0], chunk.t[-1])
                out[mask] = chunk.sol(tt).T
        if np.isscalar(t) or np.asarray(t).ndim == 0:
            return out[0]
        return out


@dataclass
class ExpanderProfile:
    """A constructed expander: samples, derived radial data, diagnostics.

    Sample arrays run over increasing t and contain the backward tail
    (t < -T, i.e. r < R) followed by the forward leg.  r = e^t, f = r*phi,
    f_r = phi + psi throughout.
    """

    spec: LomseSpec
    eps: float
    R: float
    T: float
    t: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    r: np.ndarray
    f: np.ndarray
    f_r: np.ndarray
    phi_inf: float
    converged: bool
    diagnostics: ProfileDiagnostics
    eps_hat: float
    y_star: float
    curve: TrackedCurve | None
    forward: _ForwardPath | None

    def phi_psi_at(self, t):
        """Dense (phi, psi) at times t, spanning both legs."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t_arr.size, 2))
        back = t_arr < -self.T
        if np.any(back):
            Z = self.curve(-t_arr[back])
            k, n = self.spec.k, self.spec.n
            out[back, 0] = Z[:, 0] + Z[:, 1]
            out[back, 1] = (k - 1) * Z[:, 0] - (n + k) * Z[:, 1]
        if np.any(~back):
            out[~back] = self.forward(t_arr[~back])
        if np.isscalar(t) or np.asarray(t).ndim == 0:
            return out[0]
        return out

    def f_of_r(self, r):
        """Dense profile value f(r); f(0) = 0 by continuity."""
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros_like(r_arr)
        pos = r_arr > 0
        vals = self.phi_psi_at(np.log(r_arr[pos]))
        out[pos] = r_arr[pos] * np.atleast_2d(vals)[:, 0]
        if np.isscalar(r) or np.asarray(r).ndim == 0:
            return float(out[0])
        return out


class AsymptoticAngle(NamedTuple):
    value: float
    error_estimate: float


def _saddle_system(spec: LomseSpec) -> PerturbedSaddleSystem:
    parts = saddle_parts(spec, 1)
    return PerturbedSaddleSystem(
        kappa=parts.kappa,
        mu=parts.mu,
        beta=parts.beta,
        f1=parts.f1,
        f2=parts.f2,
        g1=parts.g1,
        g2=parts.g2,
        field_fn=backward_field(spec, 1),
    )


def _zero_profile(spec: LomseSpec, T: float) -> ExpanderProfile:
    """Degenerate eps = 0 solution: the flat plane f = 0."""
    t = np.linspace(-T - 1, T + 1, 9)
    z = np.zeros_like(t)
    diag = ProfileDiagnostics(
        max_residual=0.0, decay_fit=math.nan, k_hat=math.nan,
        envelope_ok=True, in_region_ok=True, psi_final=0.0, phi_inf_error=0.0,
    )
    return ExpanderProfile(
        spec=spec, eps=0.0, R=math.exp(-T), T=T, t=t, phi=z, psi=z,
        r=np.exp(t), f=z, f_r=z, phi_inf=0.0, converged=True,
        diagnostics=diag, eps_hat=0.0, y_star=0.0, curve=None, forward=None,
    )


def build_expander(
    spec: LomseSpec,
    eps: float,
    T: float,
    M: float = 0.1,
    tail_decades: float = 3.5,
    shoot_rel_tol: float = 1e-10,
    forward_rel_tol: float = 1e-11,
    forward_abs_tol: float = 1e-14,
    forward_max_step: float = 0.05,
    split: float = 0.5,
    bracket_scale: float = 1.0,
    match_rel_tol: float = 1e-10,
) -> ExpanderProfile:
    """Construct the expander through phi(-T) = eps and certify it.

    The entry abscissa eps_hat of the saddle system is iterated so that
    phi(-T) = eps_hat + Y_star(eps_hat) matches eps to match_rel_tol*eps;
    the backward tail is tracked over ``tail_decades`` decades of r and the
    forward leg is integrated until psi settles below 1e-9.
    """
    if not solvable_case(spec):
        raise UnsupportedCase(f"{spec}: spiral-sink case, expander construction not covered")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0.0:
        return _zero_profile(spec, T)
    if M * eps > 0.9 * spec.phi0:
        raise ValueError("entry cone does not fit in the phase region; lower eps or M")

    system = _saddle_system(spec)
    n, p, k = spec.n, spec.p, spec.k

    # Outer secant/fixed-point loop on the entry abscissa.
    cfg = ShootingConfig(M=M, eps=eps, T=T, t_max=T + 1.0, rel_tol=shoot_rel_tol)
    match_tol = match_rel_tol * eps
    eps_hat, y_star = eps, 0.0
    warm: float | None = None
    for _ in range(40):
        cfg = replace(cfg, eps=eps_hat, t_max=T + 1.0)
        cfg = replace(cfg, t_max=T + discrimination_horizon(system, cfg))
        if warm is None:
            y_star = find_stable_initial(system, cfg, split=split, bracket_scale=bracket_scale)
        else:
            y_star = _find_warm(
                system, cfg, warm, warm_radius, split=split, bracket_scale=bracket_scale
            )
        mismatch = eps - (eps_hat + y_star)
        if abs(mismatch) < match_tol:
            break
        eps_hat += mismatch
        # Y* moves by O(eps * mismatch) under the entry update.
        warm, warm_radius = y_star, max(4 * abs(mismatch) * eps, 1e4 * cfg.width_tol)
    else:
        raise NoConvergence(f"Dirichlet matching did not reach {match_tol} (last mismatch {mismatch})")

    # Backward tail over the requested number of r-decades.
    s_stop = T + tail_decades * LN10 + 0.5
    curve = track_stable_curve(
        system, cfg, s_stop=s_stop, split=split, bracket_scale=bracket_scale
    )

    # Forward leg through Delta with the implicit Radau method.
    region = build_region(spec)
    phi0 = eps_hat + y_star
    psi0 = (k - 1) * eps_hat - (n + k) * y_star
    chunks = []
    y = np.array([phi0, psi0])
    t_cur = -T
    converged = False

    def rhs(t, z):
        phi_t, psi_t = _phipsi_field(t, z[0], z[1], n, p, spec.lam2, 1)
        return (phi_t, psi_t)

    def jac(t, z):
        return phipsi_jacobian(t, z[0], z[1], spec, 1)

    while t_cur < FORWARD_T_CAP:
        sol = solve_ivp(
            rhs, (t_cur, t_cur + 1.0), y, method="Radau", jac=jac,
            rtol=forward_rel_tol, atol=forward_abs_tol,
            max_step=forward_max_step, dense_output=True,
        )
        if not sol.success:
            raise NoConvergence(f"forward integration failed at t={t_cur}: {sol.message}")
        chunks.append(sol)
        probe_t = np.linspace(sol.t[0], sol.t[-1], 50)
        for tt, (ph, ps) in zip(probe_t, sol.sol(probe_t).T):
            if not contains(region, PhiPsiState(float(tt), float(ph), float(ps)), slack=REGION_SLACK):
                raise RegionViolation(
                    f"forward state ({ph}, {ps}) at t={tt} left Delta beyond {REGION_SLACK}"
                )
        phi_start = y[0]
        y = sol.y[:, -1]
        t_cur = sol.t[-1]
        if abs(y[1]) < PSI_SETTLED and abs(y[0] - phi_start) < PSI_SETTLED:
            converged = True
            break
    if not converged:
        raise NoConvergence(f"forward leg not settled by t={FORWARD_T_CAP}")
    forward = _ForwardPath(chunks)

    # Assemble sample arrays (backward tail reversed into increasing t).
    s_samp, Z = curve.sample()
    t_back = -s_samp[::-1]
    X_b, Y_b = Z[::-1, 0], Z[::-1, 1]
    phi_back = X_b + Y_b
    psi_back = (k - 1) * X_b - (n + k) * Y_b
    t_fwd, phi_fwd, psi_fwd = [], [], []
    for chunk in chunks:
        grid = np.linspace(chunk.t[0], chunk.t[-1], 40, endpoint=False)
        vals = chunk.sol(grid)
        t_fwd.append(grid)
        phi_fwd.append(vals[0])
        psi_fwd.append(vals[1])
    t_fwd.append(np.array([t_cur]))
    phi_fwd.append(np.array([y[0]]))
    psi_fwd.append(np.array([y[1]]))
    t_all = np.concatenate([t_back, np.concatenate(t_fwd)])
    phi_all = np.concatenate([phi_back, np.concatenate(phi_fwd)])
    psi_all = np.concatenate([psi_back, np.concatenate(psi_fwd)])
    r_all = np.exp(t_all)
    profile = ExpanderProfile(
        spec=spec, eps=eps, R=math.exp(-T), T=T,
        t=t_all, phi=phi_all, psi=psi_all,
        r=r_all, f=r_all * phi_all, f_r=phi_all + psi_all,
        phi_inf=float(y[0]), converged=True,
        diagnostics=ProfileDiagnostics(
            max_residual=math.nan, decay_fit=math.nan, k_hat=math.nan,
            envelope_ok=False, in_region_ok=False,
            psi_final=float(y[1]),
            phi_inf_error=abs(float(y[1])) / 2 + 1e-12,
        ),
        eps_hat=eps_hat, y_star=y_star, curve=curve, forward=forward,
    )

    diag = profile.diagnostics
    diag.max_residual = _certified_residual(profile)
    fit_lo = T + 0.5
    fit_hi = min(curve.t_end - 0.2, fit_lo + 2.5 * LN10)
    diag.decay_fit = fit_decay_rate(curve, (fit_lo, fit_hi))
    try:
        diag.k_hat = small_r_exponent(profile)
    except WindowTooShort:
        diag.k_hat = math.nan
    diag.envelope_ok = check_envelope(profile)
    diag.in_region_ok = bool(
        all(
            contains(region, PhiPsiState(float(tt), float(ph), float(ps)), slack=REGION_SLACK)
            for tt, ph, ps in zip(t_all, phi_all, psi_all)
        )
    )
    return profile


def dirichlet_solve(spec: LomseSpec, eps: float, R: float, **kwargs) -> ExpanderProfile:
    """Construct the expander with boundary condition f(R) = eps*R."""
    if R <= 0:
        raise ValueError("R must be positive")
    profile = build_expander(spec, eps, T=-math.log(R), **kwargs)
    if eps > 0:
        boundary = profile.f_of_r(R)
        if abs(boundary - eps * R) > 1e-10 * eps * R:
            raise NoConvergence(
                f"Dirichlet mismatch: f(R) = {boundary}, expected {eps * R}"
            )
    return profile


def _certified_residual(profile: ExpanderProfile) -> float:
    """Sup of the relative profile-equation residual along both legs.

    f_rr comes from central differences of dense output; the residual is
    normalized by the largest of the four equation terms pointwise.
    """
    spec = profile.spec
    n, k = spec.n, spec.k
    sup_rel = 0.0

    def rel_residual(t_grid, phi, psi, phi_p, psi_p, phi_m, psi_m, delta):
        r = np.exp(t_grid)
        f = r * phi
        f_r = phi + psi
        dfr_dt = ((phi_p + psi_p) - (phi_m + psi_m)) / (2 * delta)
        f_rr = np.exp(-t_grid) * dfr_dt
        terms = residual_terms(r, f, f_r, f_rr, spec, 1)
        scale = np.maximum.reduce([np.abs(term) for term in terms])
        scale = np.maximum(scale, 1e-300)
        return float(np.max(np.abs(sum(terms)) / scale))

    delta = 2.5e-4
    for seg in profile.curve.segments:
        ss = np.linspace(seg.t_start, seg.t_end, 60)[3:-3]
        if ss.size == 0:
            continue
        Z0, Zp, Zm = seg(ss), seg(ss + delta), seg(ss - delta)

        def unpack(Z):
            X, Y = Z[:, 0], Z[:, 1]
            return X + Y, (k - 1) * X - (n + k) * Y

        phi, psi = unpack(Z0)
        # +delta in s is -delta in t: swap the sided values.
        phi_m, psi_m = unpack(Zp)
        phi_p, psi_p = unpack(Zm)
        sup_rel = max(sup_rel, rel_residual(-ss, phi, psi, phi_p, psi_p, phi_m, psi_m, delta))

    delta = 2e-4
    for chunk in profile.forward.chunks:
        tt = np.linspace(chunk.t[0], chunk.t[-1], 40)[1:-1]
        if tt.size == 0:
            continue
        Z0, Zp, Zm = chunk.sol(tt), chunk.sol(tt + delta), chunk.sol(tt - delta)
        sup_rel = max(
            sup_rel,
            rel_residual(tt, Z0[0], Z0[1], Zp[0], Zp[1], Zm[0], Zm[1], delta),
        )
    return sup_rel


def envelope_constant(spec: LomseSpec) -> float:
    """Pumping bound: psi_t > 0 forces psi < C e^{-2t} with this C."""
    return 2 * spec.lam2 * (spec.n - spec.p) * spec.phi0**3 / (3 * math.sqrt(3.0))


def check_envelope(profile: ExpanderProfile) -> bool:
    """Envelope and collapse of psi on the forward samples.

    At every stored forward sample where the field gives psi_t > 0, psi must
    lie below C e^{-2t}; additionally the final psi must be below 1e-8.
    """
    spec = profile.spec
    C_env = envelope_constant(spec)
    mask = profile.t >= -profile.T - 1e-12
    t = profile.t[mask]
    phi = profile.phi[mask]
    psi = profile.psi[mask]
    _, psi_t = _phipsi_field(t, phi, psi, spec.n, spec.p, spec.lam2, 1)
    rising = psi_t > 0
    if np.any(psi[rising] >= C_env * np.exp(-2 * t[rising])):
        return False
    return bool(abs(psi[-1]) < 1e-8)


def small_r_exponent(profile: ExpanderProfile, min_decades: float = 3.0) -> float:
    """Least-squares exponent of f ~ r^k_hat on the backward tail."""
    mask = (profile.r < profile.R * math.exp(-0.5)) & (profile.f > 0)
    r, f = profile.r[mask], profile.f[mask]
    if r.size < 10 or math.log10(r.max() / r.min()) < min_decades:
        raise WindowTooShort(
            f"backward tail covers {0.0 if r.size < 2 else math.log10(r.max() / r.min()):.2f} "
            f"decades of r, need {min_decades}"
        )
    return float(np.polyfit(np.log(r), np.log(f), 1)[0])


def asymptotic_angle(profile: ExpanderProfile) -> AsymptoticAngle:
    """Asymptotic slope phi_inf with a tail-integral error estimate.

    phi is nondecreasing and psi decays under the e^{-2t} envelope, so the
    remaining drift past the final time is at most psi_final/2.
    """
    if not profile.converged:
        raise NoConvergence("profile did not converge; no asymptotic slope")
    return AsymptoticAngle(profile.phi_inf, profile.diagnostics.phi_inf_error)


@dataclass(frozen=True)
class UniquenessReport:
    sup_difference: float
    tolerance: float
    passed: bool
    eps: float
    R: float


def uniqueness_check(spec: LomseSpec, eps: float, R: float, **kwargs) -> UniquenessReport:
    """Two independently bracketed constructions must agree on [0, R].

    Valid for eps in (0, 1] and R <= lam^{-2/(2k-3)}.  The second run uses
    a shrunk bracket, an off-center bisection split and halved tolerances;
    agreement below 1e-6*eps*R certifies that the numerics respect the
    uniqueness of the Dirichlet problem.
    """
    if not 0 < eps <= 1:
        raise ValueError("uniqueness range requires eps in (0, 1]")
    r_limit = spec.lam ** (-2.0 / (2 * spec.k - 3))
    if R > r_limit * (1 + 1e-12):
        raise ValueError(f"uniqueness range requires R <= lam^(-2/(2k-3)) = {r_limit}")

    # Deep enough tail that the small-r remainder bound is negligible
    # against the tolerance: f <= eps R (r/R)^(k-1/2).
    tol = 1e-6 * eps * R
    frac = (0.3 * tol / (eps * R)) ** (1.0 / (spec.k - 0.5))
    decades = -math.log10(frac) + 0.3
    base = dict(tail_decades=decades)
    base.update(kwargs)
    prof_a = dirichlet_solve(spec, eps, R, **base)
    perturbed = dict(base)
    perturbed.update(
        split=0.45,
        bracket_scale=0.9,
        shoot_rel_tol=base.get("shoot_rel_tol", 1e-10) / 2,
        forward_rel_tol=base.get("forward_rel_tol", 1e-11) / 2,
    )
    prof_b = dirichlet_solve(spec, eps, R, **perturbed)

    r_grid = np.geomspace(R * frac, R, 800)
    diff = np.abs(prof_a.f_of_r(r_grid) - prof_b.f_of_r(r_grid))
    small_r_bound = max(prof_a.f_of_r(R * frac), prof_b.f_of_r(R * frac))
    sup = float(max(diff.max(), small_r_bound))
    return UniquenessReport(
        sup_difference=sup, tolerance=tol, passed=bool(sup < tol), eps=eps, R=R
    )
