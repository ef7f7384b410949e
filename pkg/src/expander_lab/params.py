"""Catalog and validation of Lawson-Osserman map data.

An admissible triple (n, p, k) describes a sphere map S^n -> S^m of rank p
whose components are degree-k spherical harmonics and whose differential has
a single nonzero singular value.  Only three families exist:

    (n, p) = (2l+1, 2l),   k = 2q      (Hopf S^3 -> S^2 family)
    (n, p) = (4l+3, 4l),   k = 2q      (Hopf S^7 -> S^4 family)
    (n, p) = (15, 8),      k = 2q      (Hopf S^15 -> S^8 family)

with l, q >= 1.  Validation derives the singular value ``lam`` and the
minimal-cone slope ``phi0`` eagerly; every downstream module reads these
constants and never recomputes them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator


class InadmissibleType(ValueError):
    """The triple (n, p, k) does not belong to any of the three families."""


class NonEvenDegree(InadmissibleType):
    """The harmonic degree k must be an even integer >= 2."""


@dataclass(frozen=True)
class LomseSpec:
    """An admissible (n, p, k) triple with its derived constants.

    Attributes
    ----------
    n : sphere dimension of the domain (odd, >= 3, or 15)
    p : rank of the map differential (0 < p < n)
    k : spherical-harmonic degree (even, >= 2)
    lam : the common nonzero singular value, sqrt(k(n+k-1)/p)
    phi0 : slope tan(theta) of the associated minimal cone,
        sqrt((p lam^2 - n) / ((n-p) lam^2))
    """

    n: int
    p: int
    k: int
    lam: float
    phi0: float

    @property
    def lam2(self) -> float:
        """lam squared, k(n+k-1)/p (kept exact for integer-friendly triples)."""
        return self.k * (self.n + self.k - 1) / self.p

    def __str__(self) -> str:
        return f"({self.n},{self.p},{self.k})"


class EquilibriumKind(enum.Enum):
    SINK = "sink"
    SPIRAL_SINK = "spiral_sink"


@dataclass(frozen=True)
class EquilibriumClass:
    """Eigenvalue data of the two equilibria of the reduced planar system.

    ``origin_eigenvalues`` is always the real pair (k-1, -n-k).  The cone
    point at (phi0, 0) has eigenvalues -(n+1)/2 +- sqrt(disc)/2 with
    disc = n^2 - 6n + 1 + 8n^2/(k(k+n-1)); a negative discriminant makes it
    a spiral sink.
    """

    origin_eigenvalues: tuple[float, float]
    cone_point_eigenvalues: tuple[complex, complex]
    discriminant: float
    kind: EquilibriumKind


def _family_of(n: int, p: int) -> int | None:
    """Return 1, 2 or 3 for the matching family, else None."""
    if n >= 3 and n % 2 == 1 and p == n - 1:
        return 1
    if n >= 7 and n % 4 == 3 and p == n - 3:
        return 2
    if (n, p) == (15, 8):
        return 3
    return None


def validate_type(n: int, p: int, k: int) -> LomseSpec:
    """Validate (n, p, k) against the three families and derive constants.

    Raises NonEvenDegree when k is not an even integer >= 2, and
    InadmissibleType when (n, p) fits no family.
    """
    for name, value in (("n", n), ("p", p), ("k", k)):
        if not isinstance(value, (int,)) or isinstance(value, bool):
            raise InadmissibleType(f"{name} must be an integer, got {value!r}")
    if k < 2 or k % 2 != 0:
        raise NonEvenDegree(f"degree k must be even and >= 2, got k={k}")
    if _family_of(n, p) is None:
        raise InadmissibleType(
            f"(n, p) = ({n}, {p}) matches none of the families "
            f"(2l+1, 2l), (4l+3, 4l), (15, 8)"
        )
    lam2 = k * (n + k - 1) / p
    # p*lam2 = k(n+k-1) > n for every admissible triple, so phi0 is real.
    phi0 = math.sqrt((p * lam2 - n) / ((n - p) * lam2))
    return LomseSpec(n=n, p=p, k=k, lam=math.sqrt(lam2), phi0=phi0)


def solvable_case(spec: LomseSpec) -> bool:
    """True exactly when the expander construction applies.

    The covered triples are (3,2,2), (5,4,2), (5,4,4) and everything with
    n >= 7; the remaining admissible triples have a spiral-sink cone point
    and are refused by the solver.
    """
    if spec.n >= 7:
        return True
    return (spec.n, spec.p, spec.k) in ((3, 2, 2), (5, 4, 2), (5, 4, 4))


def classify_equilibria(spec: LomseSpec) -> EquilibriumClass:
    """Eigenvalues and sink/spiral-sink classification of both equilibria."""
    n, k = spec.n, spec.k
    origin = (float(k - 1), float(-n - k))
    disc = n * n - 6 * n + 1 + 8 * n * n / (k * (k + n - 1))
    re = -(n + 1) / 2
    if disc >= 0:
        half = math.sqrt(disc) / 2
        cone = (complex(re + half), complex(re - half))
        kind = EquilibriumKind.SINK
    else:
        half = math.sqrt(-disc) / 2
        cone = (complex(re, half), complex(re, -half))
        kind = EquilibriumKind.SPIRAL_SINK
    return EquilibriumClass(
        origin_eigenvalues=origin,
        cone_point_eigenvalues=cone,
        discriminant=disc,
        kind=kind,
    )


def iter_admissible(max_n: int, max_k: int) -> Iterator[LomseSpec]:
    """Enumerate all admissible specs with n <= max_n and k <= max_k."""
    pairs = []
    for l in range(1, (max_n - 1) // 2 + 1):
        pairs.append((2 * l + 1, 2 * l))
    for l in range(1, (max_n - 3) // 4 + 1):
        pairs.append((4 * l + 3, 4 * l))
    if max_n >= 15:
        pairs.append((15, 8))
    for n, p in sorted(set(pairs)):
        for k in range(2, max_k + 1, 2):
            yield validate_type(n, p, k)
