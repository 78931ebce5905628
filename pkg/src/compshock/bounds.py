"""Identified sets for two componentwise responses ``(theta_1, theta_2)``.

Sets are finite unions of open convex regions, each an intersection of
strict half-planes ``a*theta_1 + b*theta_2 < c``. Coefficients are held as
:class:`fractions.Fraction`, so membership, emptiness, inclusion and
interval projection are decided exactly (Fourier-Motzkin elimination).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateLineError,
    InvalidArgumentError,
    NonIdentificationError,
    RelevanceError,
)

ABOVE = "theta1>theta2"
BELOW = "theta1<theta2"


def exact(value) -> Fraction:
    """Exact rational for an input number (floats via their shortest decimal repr)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    value = float(value)
    if not np.isfinite(value):
        raise InvalidArgumentError(f"coefficients must be finite, got {value}")
    return Fraction(repr(value))


@dataclass(frozen=True)
class HalfPlane:
    """``a*theta_1 + b*theta_2 < c`` (``<=`` when not strict)."""

    a: Fraction
    b: Fraction
    c: Fraction
    strict: bool = True

    @classmethod
    def of(cls, a, b, c, strict=True) -> "HalfPlane":
        return cls(exact(a), exact(b), exact(c), strict)

    def contains(self, theta1, theta2) -> bool:
        lhs = self.a * exact(theta1) + self.b * exact(theta2)
        return lhs < self.c if self.strict else lhs <= self.c

    def contains_grid(self, theta1, theta2) -> np.ndarray:
        lhs = float(self.a) * np.asarray(theta1) + float(self.b) * np.asarray(theta2)
        c = float(self.c)
        return lhs < c if self.strict else lhs <= c

    def complement(self) -> "HalfPlane":
        return HalfPlane(-self.a, -self.b, -self.c, not self.strict)

    def as_tuple(self) -> tuple:
        return (float(self.a), float(self.b), float(self.c), "<" if self.strict else "<=")


def _feasible(planes: Iterable[HalfPlane]) -> bool:
    """Exact feasibility of a system of (strict or weak) linear inequalities in 2-D."""
    cons = [((p.a, p.b), p.c, p.strict) for p in planes]
    for var in (0, 1):
        pos, neg, rest = [], [], []
        for coefs, c, strict in cons:
            (pos if coefs[var] > 0 else neg if coefs[var] < 0 else rest).append((coefs, c, strict))
        new = rest
        for (cp, bp, sp), (cn, bn, sn) in itertools.product(pos, neg):
            fp, fn = -cn[var], cp[var]
            coefs = tuple(fp * u + fn * v for u, v in zip(cp, cn))
            new.append((coefs, fp * bp + fn * bn, sp or sn))
        cons = new
    return all((c > 0) if strict else (c >= 0) for _, c, strict in cons)


@dataclass(frozen=True)
class Region:
    planes: tuple
    branch: Optional[str] = None

    def contains(self, theta1, theta2) -> bool:
        return all(p.contains(theta1, theta2) for p in self.planes)

    def contains_grid(self, theta1, theta2) -> np.ndarray:
        out = np.ones(np.broadcast(np.asarray(theta1), np.asarray(theta2)).shape, dtype=bool)
        for p in self.planes:
            out &= p.contains_grid(theta1, theta2)
        return out

    def is_empty(self) -> bool:
        return not _feasible(self.planes)

    def interval(self, axis: int) -> tuple:
        """Open projection ``(lo, hi)`` of the region onto ``theta_{axis+1}``."""
        other = 1 - axis
        cons = [((p.a, p.b), p.c, p.strict) for p in self.planes]
        pos = [c for c in cons if c[0][other] > 0]
        neg = [c for c in cons if c[0][other] < 0]
        keep = [c for c in cons if c[0][other] == 0]
        for (cp, bp, sp), (cn, bn, sn) in itertools.product(pos, neg):
            fp, fn = -cn[other], cp[other]
            keep.append((tuple(fp * u + fn * v for u, v in zip(cp, cn)), fp * bp + fn * bn, sp or sn))
        lo, hi = -np.inf, np.inf
        for coefs, c, _ in keep:
            k = coefs[axis]
            if k > 0:
                hi = min(hi, c / k)
            elif k < 0:
                lo = max(lo, c / k)
        return (float(lo), float(hi))


@dataclass
class IdentifiedSet:
    """Finite union of open convex regions in the ``(theta_1, theta_2)`` plane."""

    regions: tuple
    provenance: tuple = ()

    def __post_init__(self):
        self.regions = tuple(r for r in self.regions if not r.is_empty())

    def contains(self, theta1, theta2) -> bool:
        return any(r.contains(theta1, theta2) for r in self.regions)

    def contains_grid(self, theta1, theta2) -> np.ndarray:
        shape = np.broadcast(np.asarray(theta1), np.asarray(theta2)).shape
        out = np.zeros(shape, dtype=bool)
        for r in self.regions:
            out |= r.contains_grid(theta1, theta2)
        return out

    @property
    def is_empty(self) -> bool:
        return not self.regions

    def intervals(self) -> list:
        """Per-region projections onto each axis, tagged by branch."""
        return [{"branch": r.branch, "theta1": r.interval(0), "theta2": r.interval(1)}
                for r in self.regions]

    def to_records(self) -> list:
        """Serializable form: one record per inequality of each region."""
        recs = []
        for k, r in enumerate(self.regions):
            for p in r.planes:
                a, b, c, op = p.as_tuple()
                recs.append({"region": k, "branch": r.branch, "a": a, "b": b, "c": c, "op": op})
        return recs


@dataclass
class SignRestriction:
    """Sign of weight ``weight`` (1 or 2) in ``beta = w1*theta1 + w2*theta2``."""

    weight: int
    sign: int
    beta: float
    label: str = ""

    def __post_init__(self):
        if self.weight not in (1, 2):
            raise InvalidArgumentError("weight index must be 1 or 2")
        if self.sign not in (1, -1):
            raise InvalidArgumentError("sign must be +1 or -1")
        if not np.isfinite(self.beta):
            raise InvalidArgumentError("beta must be finite")

    def describe(self) -> str:
        tag = f"w{self.weight}{'>' if self.sign > 0 else '<'}0 (beta={self.beta})"
        return f"{self.label}: {tag}" if self.label else tag


def _above():
    return HalfPlane.of(-1, 1, 0)


def _below():
    return HalfPlane.of(1, -1, 0)


def sign_restriction_set(r: SignRestriction) -> IdentifiedSet:
    """Set of ``(theta_1, theta_2)`` consistent with one weight-sign restriction.

    Uses ``w1 = (beta - theta_2)/(theta_1 - theta_2)`` and ``w2 = 1 - w1``; the
    diagonal ``theta_1 = theta_2`` is excluded.
    """
    b = exact(r.beta)
    # w1 restricts theta_2 relative to beta, w2 restricts theta_1
    a1, a2 = (Fraction(0), Fraction(1)) if r.weight == 1 else (Fraction(1), Fraction(0))
    less = HalfPlane(a1, a2, b)
    greater = HalfPlane(-a1, -a2, -b)
    if r.weight == 1:
        above_side, below_side = (less, greater) if r.sign > 0 else (greater, less)
    else:
        above_side, below_side = (greater, less) if r.sign > 0 else (less, greater)
    regions = (Region((_above(), above_side), ABOVE), Region((_below(), below_side), BELOW))
    return IdentifiedSet(regions, (r.describe(),))


def _merge_branch(regions: Sequence[Region]) -> Optional[str]:
    tags = {r.branch for r in regions if r.branch is not None}
    return tags.pop() if len(tags) == 1 else None


def intersect(sets: Sequence[IdentifiedSet]) -> IdentifiedSet:
    """Exact intersection; empty pieces are pruned."""
    sets = list(sets)
    if not sets:
        raise InvalidArgumentError("intersect needs at least one set")
    regions = []
    for combo in itertools.product(*(s.regions for s in sets)):
        planes = tuple(dict.fromkeys(p for r in combo for p in r.planes))
        regions.append(Region(planes, _merge_branch(combo)))
    provenance = tuple(itertools.chain.from_iterable(s.provenance for s in sets))
    return IdentifiedSet(tuple(regions), provenance)


def is_subset(inner: IdentifiedSet, outer: IdentifiedSet) -> bool:
    """Exact test of ``inner`` being contained in ``outer``."""
    for region in inner.regions:
        # region minus outer = region intersected with the complement of every outer region
        pieces = [[p.complement() for p in r.planes] for r in outer.regions]
        for choice in itertools.product(*pieces):
            if _feasible(region.planes + tuple(choice)):
                return False
    return True


@dataclass
class SubsetReport:
    beta: float
    relations: dict = field(default_factory=dict)

    @property
    def all_hold(self) -> bool:
        return all(self.relations.values())


def subset_relations(beta: float = 0.0) -> SubsetReport:
    """Check that negative-weight sets sit inside the opposite positive-weight sets.

    ``set(w2 < 0)`` is contained in ``set(w1 > 0)`` and ``set(w1 < 0)`` in
    ``set(w2 > 0)``; both inclusions are strict.
    """
    w1p = sign_restriction_set(SignRestriction(1, 1, beta))
    w1n = sign_restriction_set(SignRestriction(1, -1, beta))
    w2p = sign_restriction_set(SignRestriction(2, 1, beta))
    w2n = sign_restriction_set(SignRestriction(2, -1, beta))
    return SubsetReport(beta, {
        "w2<0 in w1>0": is_subset(w2n, w1p),
        "w1<0 in w2>0": is_subset(w1n, w2p),
        "w1>0 not in w2<0": not is_subset(w1p, w2n),
        "w2>0 not in w1<0": not is_subset(w2p, w1n),
    })


@dataclass
class CovarianceLine:
    """Affine constraint ``c_y = sum_s c_s * theta_s`` from one instrument."""

    c_y: float
    coefficients: tuple

    def __post_init__(self):
        self.coefficients = tuple(float(c) for c in self.coefficients)
        if not any(self.coefficients):
            raise DegenerateLineError("all instrument-sector covariances are zero")

    @property
    def weights(self) -> np.ndarray:
        """Identified weights ``c_s / sum(c)``."""
        c = np.asarray(self.coefficients)
        total = c.sum()
        if total == 0.0:
            raise RelevanceError("instrument is uncorrelated with x: sum of covariances is zero")
        return c / total

    @property
    def w1(self) -> float:
        return float(self.weights[0])

    def residual(self, theta) -> float:
        return float(self.c_y - np.dot(self.coefficients, theta))

    def to_records(self) -> list:
        return [{"c_y": self.c_y, **{f"c_{s + 1}": c for s, c in enumerate(self.coefficients)}}]


def case2_line(c_y: float, c_1: float, c_2: Optional[float] = None, *more) -> CovarianceLine:
    """Line ``c_y = c_1 theta_1 + c_2 theta_2`` (a hyperplane for more sectors)."""
    coefs = (c_1,) if c_2 is None else (c_1, c_2, *more)
    return CovarianceLine(float(c_y), coefs)


def counterfactual_theta1(line: CovarianceLine, theta2):
    """``theta_1`` on the line for a calibrated ``theta_2`` (scalar or array)."""
    if len(line.coefficients) != 2:
        raise InvalidArgumentError("counterfactual calibration needs a two-sector line")
    c1, c2 = line.coefficients
    if c1 == 0.0:
        raise NonIdentificationError("theta_1 does not enter the line (c_1 = 0)")
    result = (line.c_y - c2 * np.asarray(theta2, dtype=float)) / c1
    return float(result) if np.ndim(result) == 0 else result


def population_line(model, spec, h: int, cumulative: bool = False) -> CovarianceLine:
    """Line from population covariances of an augmented model and one instrument."""
    from .svma import instrument_covariance

    cov_h = instrument_covariance(model, spec, h, cumulative=cumulative)
    cov_0 = cov_h if cumulative else instrument_covariance(model, spec, 0)
    return CovarianceLine(float(cov_h[-1]), tuple(cov_0[: model.S]))


def sample_line(panel, j: int, h: int, controls=None, cumulative: bool = False) -> CovarianceLine:
    """Line from residualized sample covariances with instrument ``j``."""
    from .estimation import residualized_moments

    Zp, Ups, Xbar = residualized_moments(panel, [j], h, controls, cumulative, sectoral=True)
    n = Zp.shape[0]
    c_y = float(Zp[:, 0] @ Ups[:, 0] / n)
    return CovarianceLine(c_y, tuple(Zp[:, 0] @ Xbar[:, 0, :] / n))
