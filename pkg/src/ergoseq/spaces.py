"""Symbolic descriptors for the classical symmetric sequence spaces.

Descriptors form a closed enumeration (l_p, c0, l_inf), so membership and
the uniform-ergodic criterion are decidable per kind.  Membership verdicts
are three-valued: a bounded unknown tail genuinely underdetermines
membership in c0 and l_p, and that is an answer, not an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .sequences import TruncatedSequence, difference, norm, sup_distance

__all__ = [
    "MEMBER",
    "NON_MEMBER",
    "UNDECIDABLE",
    "SpaceDescriptor",
    "PreconditionViolated",
    "contains",
    "contains_one",
    "uiet",
    "fatou_check",
]

MEMBER = "member"
NON_MEMBER = "non_member"
UNDECIDABLE = "undecidable"


class PreconditionViolated(ValueError):
    """The hypothesis a check relies on fails on the supplied data."""


@dataclass(frozen=True)
class SpaceDescriptor:
    """One of l_p (1 <= p < inf), c0, or l_inf."""

    kind: str               # "lp" | "c0" | "linf"
    p: float | None = None

    def __post_init__(self):
        if self.kind not in ("lp", "c0", "linf"):
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.kind == "lp":
            if self.p is None or not 1.0 <= float(self.p) < math.inf:
                raise ValueError("lp descriptors need p in [1, inf)")
            object.__setattr__(self, "p", float(self.p))
        elif self.p is not None:
            raise ValueError("only lp descriptors carry an exponent")

    @classmethod
    def lp(cls, p: float) -> "SpaceDescriptor":
        return cls("lp", float(p))

    @classmethod
    def c0(cls) -> "SpaceDescriptor":
        return cls("c0")

    @classmethod
    def linf(cls) -> "SpaceDescriptor":
        return cls("linf")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "lp":
            d["p"] = self.p
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SpaceDescriptor":
        return cls(d["kind"], d.get("p"))


def contains(space: SpaceDescriptor, x: TruncatedSequence) -> str:
    """Three-valued membership verdict for x in the space.

    Everything bounded is in l_inf.  A vanishing tail puts the finite
    prefix in every l_p and in c0; a nonzero constant tail excludes both;
    a bounded unknown tail decides neither way.
    """
    if space.kind == "linf":
        return MEMBER
    t = x.tail
    if t.is_zero_like:
        return MEMBER
    if t.kind == "constant":
        return NON_MEMBER
    return UNDECIDABLE


def contains_one(space: SpaceDescriptor) -> bool:
    """Whether the all-ones sequence belongs to the space."""
    return space.kind == "linf"


def uiet(space: SpaceDescriptor) -> bool:
    """Whether averages of every Dunford-Schwartz operator converge in the
    uniform norm for every element of the space.

    Holds exactly when the space excludes the all-ones sequence, which for
    this enumeration means every kind except l_inf.
    """
    return not contains_one(space)


def fatou_check(space: SpaceDescriptor, family, x: TruncatedSequence) -> bool:
    """Finite-family shadow of the Fatou property for l_p.

    Given x_k with non-increasing sup-norm distances to x, asserts
    ||x||_p <= sup_k ||x_k||_p + ||x - x_last||_p + eps.  The allowance term
    is what a finite family leaves undetermined; it vanishes as the family
    closes in on x, recovering the norm bound that a uniformly bounded
    approximating family forces on its limit.  A test oracle, not a theorem
    prover.
    """
    if space.kind != "lp":
        raise ValueError("the Fatou check is defined for lp descriptors")
    family = list(family)
    if not family:
        raise PreconditionViolated("empty approximating family")
    for z in family + [x]:
        if not z.tail.is_zero_like:
            raise PreconditionViolated("the check needs exact zero-tail elements")
    dists = [sup_distance(z, x) for z in family]
    for a, b in zip(dists, dists[1:]):
        if b > a:
            raise PreconditionViolated(
                "sup-norm distances to the limit must be non-increasing"
            )
    p = space.p
    family_sup = max(norm(z, p) for z in family)
    allowance = norm(difference(family[-1], x), p)
    slack = 1e-12 * max(1.0, norm(x, p))
    return norm(x, p) <= family_sup + allowance + slack
