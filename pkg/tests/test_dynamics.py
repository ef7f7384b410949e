"""Right-hand sides, transforms, linearizations: transcription certificates."""

import math

import numpy as np
import pytest

from expander_lab.dynamics import (
    DegenerateRadius,
    Equilibrium,
    PhiPsiState,
    backward_field,
    from_saddle_coords,
    linearize,
    ode_residual,
    residual_terms,
    rhs_phipsi,
    rhs_phipsi_autonomous,
    rhs_profile,
    saddle_parts,
    to_saddle_coords,
)
from expander_lab.integrator import integrate
from expander_lab.params import classify_equilibria, iter_admissible, validate_type

SPEC322 = validate_type(3, 2, 2)
SPEC542 = validate_type(5, 4, 2)


class TestProfileEquation:
    def test_flat_plane_is_solution(self):
        assert rhs_profile(1.0, 0.0, 0.0, SPEC322, 1) == 0.0

    def test_exact_cone_is_solution(self):
        # f = phi0 * r solves the equation: each first-order term vanishes.
        phi0 = SPEC322.phi0
        assert abs(rhs_profile(1.0, phi0, phi0, SPEC322, 1)) < 1e-14
        assert abs(ode_residual(1.0, phi0, phi0, 0.0, SPEC322, 1)) < 1e-14

    def test_hand_value(self):
        # -(1+0.36)*(0.6 + 2*(0.6-4*0.5)/(1+4*0.25) + 0.1) = 119/125
        val = rhs_profile(1.0, 0.5, 0.6, SPEC322, 1)
        assert val == pytest.approx(119 / 125, abs=1e-15)

    def test_residual_hand_value(self):
        # (n-p)*1 + p*1/1 + 1 = 4 for (3,2,2) at r=1, f=0, f_r=1, f_rr=0
        assert ode_residual(1.0, 0.0, 1.0, 0.0, SPEC322, 1) == pytest.approx(4.0, abs=1e-15)

    def test_roundtrip_random(self):
        rng = np.random.default_rng(7)
        r = rng.uniform(0.05, 10.0, 10_000)
        f = rng.uniform(-2.0, 2.0, 10_000)
        f_r = rng.uniform(-3.0, 3.0, 10_000)
        f_rr = rhs_profile(r, f, f_r, SPEC322, 1)
        res = ode_residual(r, f, f_r, f_rr, SPEC322, 1)
        terms = residual_terms(r, f, f_r, f_rr, SPEC322, 1)
        scale = np.maximum(np.maximum.reduce([np.abs(t) for t in terms]), 1e-30)
        assert np.max(np.abs(res) / scale) < 1e-13

    def test_degenerate_radius(self):
        with pytest.raises(DegenerateRadius):
            rhs_profile(0.0, 0.1, 0.1, SPEC322, 1)
        with pytest.raises(DegenerateRadius):
            ode_residual(-1.0, 0.1, 0.1, 0.0, SPEC322, 1)

    def test_similarity_constant_validated(self):
        with pytest.raises(ValueError):
            rhs_profile(1.0, 0.1, 0.1, SPEC322, 2)


class TestPhiPsiSystem:
    def test_origin_equilibrium(self):
        assert rhs_phipsi(PhiPsiState(0.0, 0.0, 0.0), SPEC322, 1) == (0.0, 0.0)

    def test_cone_point_annihilates_autonomous_part(self):
        # At phi0 the phi-coefficient vanishes by construction; with psi = 0
        # the e^{2t} term is inert, so the full field vanishes at any t.
        phi0 = SPEC322.phi0
        _, psi_t = rhs_phipsi_autonomous(phi0, 0.0, SPEC322)
        assert abs(psi_t) < 2e-15
        _, psi_t_full = rhs_phipsi(PhiPsiState(5.0, phi0, 0.0), SPEC322, 1)
        assert abs(psi_t_full) < 2e-15

    def test_hand_value(self):
        phi_t, psi_t = rhs_phipsi(PhiPsiState(0.0, 0.5, 0.1), SPEC322, 1)
        assert phi_t == 0.1
        assert psi_t == pytest.approx(213 / 250, abs=1e-15)

    def test_consistency_with_profile_equation(self):
        # f = r phi, f_r = phi + psi, f_rr = e^{-t}(psi_t + psi) must solve
        # the second-order equation whenever (phi_t, psi_t) is the field.
        rng = np.random.default_rng(11)
        for _ in range(300):
            t = rng.uniform(-3.0, 2.0)
            phi = rng.uniform(0.0, 1.1)
            psi = rng.uniform(-0.5, 1.0)
            _, psi_t = rhs_phipsi(PhiPsiState(t, phi, psi), SPEC322, 1)
            r = math.exp(t)
            f_rr_sys = math.exp(-t) * (psi_t + psi)
            f_rr_prof = rhs_profile(r, r * phi, phi + psi, SPEC322, 1)
            scale = max(abs(f_rr_prof), 1.0)
            assert abs(f_rr_sys - f_rr_prof) / scale < 1e-12

    def test_nonfinite_state_rejected(self):
        with pytest.raises(ValueError):
            PhiPsiState(0.0, math.inf, 0.0)


class TestSaddleCoordinates:
    def test_origin_maps_to_origin(self):
        assert to_saddle_coords(PhiPsiState(0.0, 0.0, 0.0), SPEC322) == (0.0, 0.0, 0.0)

    def test_example_values(self):
        # (n+k)/(n+2k-1) = 5/6 and (k-1)/(n+2k-1) = 1/6 for (3,2,2)
        s, X, Y = to_saddle_coords(PhiPsiState(0.0, 1.0, 0.0), SPEC322)
        assert s == 0.0
        assert X == pytest.approx(5 / 6, abs=1e-15)
        assert Y == pytest.approx(1 / 6, abs=1e-15)
        # inverse relations: phi = X + Y, psi = (k-1)X - (n+k)Y
        assert X + Y == pytest.approx(1.0, abs=1e-15)
        assert 1 * X - 5 * Y == pytest.approx(0.0, abs=1e-15)

    def test_roundtrip_identity(self):
        rng = np.random.default_rng(3)
        for spec in (SPEC322, SPEC542):
            for _ in range(200):
                state = PhiPsiState(
                    rng.uniform(-5, 5), rng.uniform(-1, 2), rng.uniform(-1, 1)
                )
                back = from_saddle_coords(*to_saddle_coords(state, spec), spec)
                assert back.t == state.t
                assert abs(back.phi - state.phi) < 1e-14
                assert abs(back.psi - state.psi) < 1e-14


class TestLinearization:
    def test_322_matrices(self):
        A = linearize(SPEC322, Equilibrium.ORIGIN)
        assert np.array_equal(A, [[0.0, 1.0], [5.0, -4.0]])
        B = linearize(SPEC322, Equilibrium.CONE_POINT)
        assert np.array_equal(B, [[0.0, 1.0], [-3.75, -4.0]])

    def test_542_origin(self):
        A = linearize(SPEC542, Equilibrium.ORIGIN)
        assert np.array_equal(A, [[0.0, 1.0], [7.0, -6.0]])

    def test_eigenvalues_match_classification_grid(self):
        for spec in iter_admissible(31, 10):
            eq = classify_equilibria(spec)
            origin = sorted(np.linalg.eigvals(linearize(spec, Equilibrium.ORIGIN)).real)
            assert origin[1] == pytest.approx(spec.k - 1, abs=1e-10)
            assert origin[0] == pytest.approx(-spec.n - spec.k, abs=1e-10)
            cone = np.linalg.eigvals(linearize(spec, Equilibrium.CONE_POINT))
            expected = sorted(eq.cone_point_eigenvalues, key=lambda z: (z.real, z.imag))
            got = sorted((complex(z) for z in cone), key=lambda z: (z.real, z.imag))
            for a, b in zip(expected, got):
                assert abs(a - b) < 1e-10


class TestBackwardSystem:
    def test_parts_vanish_at_origin(self):
        parts = saddle_parts(SPEC322, 1)
        for fn in (parts.f1, parts.f2, parts.g1, parts.g2):
            assert fn(0.0, 0.0) == 0.0
        assert parts.kappa == 1.0 and parts.mu == 5.0 and parts.beta == 2.0

    def test_nonlinear_parts_superlinear(self):
        parts = saddle_parts(SPEC322, 1)
        ratios = []
        for scale in (1e-1, 1e-2, 1e-3, 1e-4):
            grid = np.linspace(-scale, scale, 7)
            worst = max(
                max(abs(parts.f1(x, y)), abs(parts.f2(x, y))) / math.hypot(x, y)
                for x in grid
                for y in grid
                if (x, y) != (0.0, 0.0)
            )
            ratios.append(worst)
        # superlinear: the linear-normalized size decays with the box
        assert ratios[-1] < 1e-2 * ratios[0]

    def test_perturbation_at_most_linear(self):
        parts = saddle_parts(SPEC322, 1)
        rng = np.random.default_rng(5)
        for scale in (1e-2, 1e-4, 1e-6):
            pts = rng.uniform(-scale, scale, (50, 2))
            for x, y in pts:
                norm = math.hypot(x, y)
                if norm == 0:
                    continue
                assert abs(parts.g1(x, y)) < 10 * norm
                assert abs(parts.g2(x, y)) < 10 * norm

    def test_fused_field_matches_parts(self):
        parts = saddle_parts(SPEC322, 1)
        fused = backward_field(SPEC322, 1)
        rng = np.random.default_rng(9)
        for _ in range(200):
            s = rng.uniform(0.0, 8.0)
            z = rng.uniform(-0.3, 0.3, 2)
            decay = math.exp(-parts.beta * s)
            expected = np.array(
                [
                    -parts.kappa * z[0] + parts.f1(*z) + decay * parts.g1(*z),
                    parts.mu * z[1] + parts.f2(*z) + decay * parts.g2(*z),
                ]
            )
            assert np.allclose(fused(s, z), expected, rtol=1e-13, atol=1e-17)

    def test_chain_rule_along_trajectory(self):
        # Finite differences of (X, Y)(s) along an integrated (phi, psi)
        # trajectory must reproduce the backward field.
        spec = SPEC322
        k, n = spec.k, spec.n

        def fwd(t, y):
            phi_t, psi_t = rhs_phipsi(PhiPsiState(t, y[0], y[1]), spec, 1)
            return np.array([phi_t, psi_t])

        traj = integrate(fwd, [0.3, 0.05], 0.0, -1.5, rel_tol=1e-12, abs_tol=1e-14)
        fused = backward_field(spec, 1)
        delta = 1e-5
        for t in np.linspace(-0.2, -1.3, 12):
            s = -t

            def xy_at(tt):
                phi, psi = traj(tt)
                den = n + 2 * k - 1
                return np.array([((n + k) * phi + psi) / den, ((k - 1) * phi - psi) / den])

            # d/ds = -d/dt
            fd = -(xy_at(t + delta) - xy_at(t - delta)) / (2 * delta)
            field = fused(s, xy_at(t))
            assert np.allclose(fd, field, rtol=1e-6, atol=1e-9)
