"""Admissibility, derived constants and equilibrium classification."""

import math

import numpy as np
import pytest

from expander_lab.dynamics import Equilibrium, linearize
from expander_lab.params import (
    EquilibriumKind,
    InadmissibleType,
    NonEvenDegree,
    classify_equilibria,
    iter_admissible,
    solvable_case,
    validate_type,
)


def hopf_cone_slope(d: int) -> float:
    # Independent formula: the unique slope making the Hopf cone minimal.
    return math.sqrt((2 * d + 1) / (4 * (d - 1)))


def test_validate_322_constants():
    spec = validate_type(3, 2, 2)
    assert spec.lam == 2.0
    assert abs(spec.phi0 - math.sqrt(5) / 2) < 1e-15
    assert abs(spec.phi0 - 1.1180339887498949) < 1e-12
    assert abs(spec.phi0 - hopf_cone_slope(2)) < 1e-12


def test_validate_1582_constants():
    spec = validate_type(15, 8, 2)
    assert spec.lam == 2.0
    assert abs(spec.phi0 - math.sqrt(17 / 28)) < 1e-15
    assert abs(spec.phi0 - hopf_cone_slope(8)) < 1e-12


@pytest.mark.parametrize("d", [2, 4, 8])
def test_hopf_family_cross_check(d):
    spec = validate_type(2 * d - 1, d, 2)
    assert abs(spec.phi0 - hopf_cone_slope(d)) < 1e-12


@pytest.mark.parametrize(
    "n,p,k",
    [(4, 2, 2), (3, 1, 2), (13, 8, 2), (15, 9, 2), (6, 5, 2), (9, 6, 2)],
)
def test_inadmissible_pairs(n, p, k):
    with pytest.raises(InadmissibleType):
        validate_type(n, p, k)


@pytest.mark.parametrize("k", [1, 3, 0, -2, 5])
def test_non_even_degree(k):
    with pytest.raises(NonEvenDegree):
        validate_type(3, 2, k)


def test_non_even_degree_is_inadmissible_subclass():
    assert issubclass(NonEvenDegree, InadmissibleType)


def test_lambda_formula_exact_over_grid():
    # Families with l, q <= 10.
    for l in range(1, 11):
        for q in range(1, 11):
            for n, p in ((2 * l + 1, 2 * l), (4 * l + 3, 4 * l), (15, 8)):
                k = 2 * q
                spec = validate_type(n, p, k)
                assert spec.lam**2 == pytest.approx(k * (n + k - 1) / p, rel=1e-15)
                assert p * spec.lam**2 > n


@pytest.mark.parametrize(
    "triple,expected",
    [
        ((3, 2, 2), True),
        ((3, 2, 4), False),
        ((3, 2, 6), False),
        ((5, 4, 2), True),
        ((5, 4, 4), True),
        ((5, 4, 6), False),
        ((7, 4, 2), True),
        ((7, 6, 10), True),
        ((15, 8, 8), True),
    ],
)
def test_solvable_case(triple, expected):
    assert solvable_case(validate_type(*triple)) is expected


def test_classify_322():
    eq = classify_equilibria(validate_type(3, 2, 2))
    assert eq.origin_eigenvalues == (1.0, -5.0)
    assert eq.kind is EquilibriumKind.SINK
    cone = sorted(z.real for z in eq.cone_point_eigenvalues)
    assert cone == pytest.approx([-2.5, -1.5], abs=1e-12)
    assert all(z.imag == 0 for z in eq.cone_point_eigenvalues)
    # trace and determinant against the linearization at the cone point
    trace = sum(z.real for z in eq.cone_point_eigenvalues)
    prod = (eq.cone_point_eigenvalues[0] * eq.cone_point_eigenvalues[1]).real
    assert trace == pytest.approx(-4.0, abs=1e-12)
    assert prod == pytest.approx(3.75, abs=1e-12)


def test_classify_324_spiral():
    eq = classify_equilibria(validate_type(3, 2, 4))
    assert eq.discriminant == pytest.approx(-5.0, abs=1e-12)
    assert eq.kind is EquilibriumKind.SPIRAL_SINK
    z1, z2 = eq.cone_point_eigenvalues
    assert z1 == z2.conjugate()
    assert z1.real == pytest.approx(-2.0, abs=1e-12)


def test_classify_542_sink():
    eq = classify_equilibria(validate_type(5, 4, 2))
    assert eq.kind is EquilibriumKind.SINK


def test_origin_eigenvalues_match_linearization_grid():
    for spec in iter_admissible(31, 10):
        eq = classify_equilibria(spec)
        assert eq.origin_eigenvalues == (float(spec.k - 1), float(-spec.n - spec.k))
        eigs = sorted(np.linalg.eigvals(linearize(spec, Equilibrium.ORIGIN)))
        assert eigs[0] == pytest.approx(-spec.n - spec.k, abs=1e-10)
        assert eigs[1] == pytest.approx(spec.k - 1, abs=1e-10)


def test_iter_admissible_contents():
    triples = {(s.n, s.p, s.k) for s in iter_admissible(15, 4)}
    assert (3, 2, 2) in triples
    assert (15, 8, 2) in triples
    assert (7, 4, 2) in triples and (7, 6, 2) in triples
    assert (15, 12, 4) in triples and (15, 14, 4) in triples
    assert all(k % 2 == 0 for (_, _, k) in triples)
    assert not any(n % 2 == 0 for (n, _, _) in triples)


def test_spec_is_hashable_and_frozen():
    spec = validate_type(3, 2, 2)
    assert hash(spec) == hash(validate_type(3, 2, 2))
    with pytest.raises(Exception):
        spec.n = 5
