"""Exact finite representations of bounded real sequences.

A sequence lives as an explicit prefix of values (positions 1..N) plus a
symbolic tail: identically zero, identically a constant, or unknown but
bounded in magnitude.  Every operation here either returns an exact answer
or refuses with a specific error; nothing is silently approximated.
Numerical tolerances belong to the averaging layer, not to this one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Tail",
    "TruncatedSequence",
    "SplitPair",
    "UndecidableNorm",
    "InexactRearrangement",
    "NotInC0",
    "SplitImpossible",
    "norm",
    "rearrange",
    "majorizes",
    "split_c0",
    "sup_distance",
    "difference",
    "basis_vector",
    "constant_one",
]


class UndecidableNorm(ValueError):
    """The requested norm is not determined by the stored information."""


class InexactRearrangement(ValueError):
    """The non-increasing rearrangement cannot be certified from the prefix."""


class NotInC0(ValueError):
    """The element is certified to lie outside c0."""


class SplitImpossible(ValueError):
    """The tail bound is too weak for the requested small-tail split."""


ZERO = "zero"
CONSTANT = "constant"
BOUNDED = "bounded"


@dataclass(frozen=True)
class Tail:
    """Symbolic description of every coordinate past the stored prefix.

    kind "zero":     x_s = 0 for all s > N.
    kind "constant": x_s = value for all s > N.
    kind "bounded":  |x_s| <= value for all s > N, values otherwise unknown.
    """

    kind: str
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in (ZERO, CONSTANT, BOUNDED):
            raise ValueError(f"unknown tail kind {self.kind!r}")
        v = float(self.value)
        if not math.isfinite(v):
            raise ValueError("tail value must be finite")
        if self.kind == ZERO and v != 0.0:
            raise ValueError("a zero tail carries no value")
        if self.kind == BOUNDED and v < 0.0:
            raise ValueError("a tail bound must be nonnegative")
        object.__setattr__(self, "value", v)

    @classmethod
    def zero(cls) -> "Tail":
        return cls(ZERO)

    @classmethod
    def constant(cls, c: float) -> "Tail":
        return cls(CONSTANT, float(c))

    @classmethod
    def bounded(cls, b: float) -> "Tail":
        return cls(BOUNDED, float(b))

    @property
    def sup(self) -> float:
        """Supremum of |x_s| over the tail positions."""
        return abs(self.value)

    @property
    def is_zero_like(self) -> bool:
        """True when every tail coordinate is exactly zero."""
        return self.kind == ZERO or self.value == 0.0


@dataclass(frozen=True, eq=False)
class TruncatedSequence:
    """A real sequence known exactly on positions 1..N plus a symbolic tail.

    Immutable; all operations on it are pure.  Equality is mathematical:
    two representations are equal when they denote the same sequence (a
    trailing run of values matching the tail constant is irrelevant).
    """

    values: tuple[float, ...] = ()
    tail: Tail = field(default_factory=Tail.zero)

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if any(not math.isfinite(v) for v in vals):
            raise ValueError("sequence prefix entries must be finite")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def canonical(self) -> "TruncatedSequence":
        """Equivalent representation with redundant prefix entries trimmed."""
        tail = self.tail
        if tail.kind != ZERO and tail.value == 0.0:
            tail = Tail.zero()
        vals = list(self.values)
        if tail.kind != BOUNDED:
            fill = tail.value
            while vals and vals[-1] == fill:
                vals.pop()
        return TruncatedSequence(tuple(vals), tail)

    def __eq__(self, other):
        if not isinstance(other, TruncatedSequence):
            return NotImplemented
        a, b = self.canonical(), other.canonical()
        return a.values == b.values and a.tail == b.tail

    def __hash__(self):
        c = self.canonical()
        return hash((c.values, c.tail))

    def __repr__(self):
        if self.tail.kind == ZERO:
            return f"TruncatedSequence({list(self.values)})"
        return f"TruncatedSequence({list(self.values)}, {self.tail.kind}={self.tail.value})"

    def value_at(self, s: int) -> float:
        """Exact value at 1-indexed position s; refuses inside unknown tails."""
        if s < 1:
            raise IndexError("positions are 1-indexed")
        if s <= len(self.values):
            return self.values[s - 1]
        if self.tail.kind == BOUNDED and self.tail.value != 0.0:
            raise ValueError(f"position {s} lies in an unknown bounded tail")
        return self.tail.value if self.tail.kind == CONSTANT else 0.0

    @property
    def support_length(self) -> int:
        """Last position certainly holding a nonzero value (0 if none)."""
        for i in range(len(self.values) - 1, -1, -1):
            if self.values[i] != 0.0:
                return i + 1
        return 0

    def to_array(self, length: int | None = None) -> np.ndarray:
        """Dense window of the first `length` coordinates (zero tails only)."""
        if not self.tail.is_zero_like:
            raise ValueError("only zero-tail sequences convert to finite arrays")
        if length is None:
            length = len(self.values)
        if length < len(self.values) and any(v != 0.0 for v in self.values[length:]):
            raise ValueError("array window smaller than the certified support")
        out = np.zeros(length)
        head = min(len(self.values), length)
        out[:head] = self.values[:head]
        return out

    @classmethod
    def from_array(cls, arr) -> "TruncatedSequence":
        return cls(tuple(float(v) for v in np.asarray(arr).ravel()), Tail.zero())

    def to_dict(self) -> dict:
        return {
            "values": list(self.values),
            "tail_kind": self.tail.kind,
            "tail_value": self.tail.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TruncatedSequence":
        return cls(tuple(d["values"]), Tail(d["tail_kind"], d.get("tail_value", 0.0)))


def basis_vector(k: int) -> TruncatedSequence:
    """e_k: one at position k, zero elsewhere."""
    if k < 1:
        raise ValueError("positions are 1-indexed")
    return TruncatedSequence((0.0,) * (k - 1) + (1.0,), Tail.zero())


def constant_one() -> TruncatedSequence:
    """The all-ones sequence: in l_inf, outside c0 and every l_p."""
    return TruncatedSequence((), Tail.constant(1.0))


def norm(x: TruncatedSequence, p: float) -> float:
    """The l_p norm of x for p in [1, inf], exact or refused.

    p = inf is always decidable.  For finite p the value is exact when the
    tail vanishes, +inf when the tail is a nonzero constant, and refused
    (UndecidableNorm) when the tail is only bounded: the finite information
    held does not determine the sum.
    """
    p = float(p)
    if p != math.inf and not p >= 1.0:
        raise ValueError("p must lie in [1, inf]")
    if p == math.inf:
        head = max((abs(v) for v in x.values), default=0.0)
        return max(head, x.tail.sup)
    if x.tail.kind == CONSTANT and x.tail.value != 0.0:
        return math.inf
    if x.tail.kind == BOUNDED and x.tail.value != 0.0:
        raise UndecidableNorm(
            f"l_{p:g} norm undetermined: tail only bounded by {x.tail.value!r}"
        )
    if p == 1.0:
        return math.fsum(abs(v) for v in x.values)
    return math.fsum(abs(v) ** p for v in x.values) ** (1.0 / p)


def rearrange(x: TruncatedSequence) -> TruncatedSequence:
    """Non-increasing rearrangement of |x|.

    Exact when the tail vanishes: the magnitudes sorted in descending order
    with a zero tail.  For a bounded tail the sorted nonzero prefix
    magnitudes are certified only if the bound does not exceed the smallest
    of them; the result then keeps that certified prefix and a bounded tail.
    Nonzero constant tails are refused: positions past the prefix are not
    represented here.  Idempotent in every accepted case.
    """
    tail = x.tail
    mags = sorted((abs(v) for v in x.values), reverse=True)
    if tail.is_zero_like:
        return TruncatedSequence(tuple(mags), Tail.zero())
    if tail.kind == CONSTANT:
        raise InexactRearrangement(
            "rearrangement past the prefix is not represented for nonzero constant tails"
        )
    b = tail.value
    nonzero = [m for m in mags if m != 0.0]
    if nonzero and b > nonzero[-1]:
        raise InexactRearrangement(
            f"tail bound {b!r} exceeds the smallest certain magnitude {nonzero[-1]!r}"
        )
    return TruncatedSequence(tuple(nonzero), Tail.bounded(b))


def majorizes(x: TruncatedSequence, y: TruncatedSequence) -> bool:
    """True when x sits below y in the Hardy-Littlewood-Polya order (x < y).

    Checks that every partial sum of the rearrangement of x is dominated by
    the matching partial sum of the rearrangement of y, for all k up to the
    longer support (beyond which both partial sums are constant).  Needs
    both inputs exactly rearrangeable; bounded tails leave the partial sums
    undetermined and are refused.
    """
    for z in (x, y):
        if not z.tail.is_zero_like:
            raise InexactRearrangement(
                "partial sums past the prefix are undetermined for this tail"
            )
    xs = rearrange(x).values
    ys = rearrange(y).values
    sx = sy = 0.0
    for i in range(max(len(xs), len(ys))):
        sx += xs[i] if i < len(xs) else 0.0
        sy += ys[i] if i < len(ys) else 0.0
        if sx > sy:
            return False
    return True


@dataclass(frozen=True)
class SplitPair:
    """Decomposition x = head + tail_part with sup-norm of tail_part below 1/k.

    head is finitely supported (zero tail); tail_part carries the original
    tail.  bound is the exact sup norm of tail_part where known.
    """

    head: TruncatedSequence
    tail_part: TruncatedSequence
    k: int
    bound: float

    def __post_init__(self):
        if not self.bound < 1.0 / self.k:
            raise ValueError("split bound must stay strictly below 1/k")

    @property
    def support_length(self) -> int:
        """Number of leading positions the head keeps."""
        return len(self.head.values)


def split_c0(x: TruncatedSequence, k: int) -> SplitPair:
    """Split a (certified) c0 element into a big head and a small remainder.

    The head keeps the shortest prefix 1..s such that every later certain
    magnitude and the tail bound fall strictly below 1/k; the remainder is
    x minus the head, reconstructing x exactly.  Elements with a nonzero
    constant tail are outside c0 (NotInC0); a bounded tail at or above 1/k
    cannot support the split (SplitImpossible).
    """
    k = int(k)
    if k < 1:
        raise ValueError("k must be a positive integer")
    tail = x.tail
    if tail.kind == CONSTANT and tail.value != 0.0:
        raise NotInC0("a nonzero constant tail certifies the element outside c0")
    threshold = 1.0 / k
    if tail.kind == BOUNDED and not tail.value < threshold:
        raise SplitImpossible(
            f"tail bound {tail.value!r} is not below 1/k = {threshold!r}"
        )
    s = len(x.values)
    while s > 0 and abs(x.values[s - 1]) < threshold:
        s -= 1
    head = TruncatedSequence(x.values[:s], Tail.zero())
    rest = TruncatedSequence((0.0,) * s + x.values[s:], tail)
    rest_sup = max((abs(v) for v in x.values[s:]), default=0.0)
    return SplitPair(head=head, tail_part=rest, k=k, bound=max(rest_sup, tail.sup))


def _fill(seq: TruncatedSequence) -> float:
    return seq.tail.value if seq.tail.kind == CONSTANT else 0.0


def sup_distance(x: TruncatedSequence, y: TruncatedSequence) -> float:
    """Exact sup-norm distance between two sequences with known tails."""
    if x.tail.kind == BOUNDED and x.tail.value != 0.0:
        raise UndecidableNorm("sup distance undetermined for bounded tails")
    if y.tail.kind == BOUNDED and y.tail.value != 0.0:
        raise UndecidableNorm("sup distance undetermined for bounded tails")
    n = max(len(x.values), len(y.values))
    fx, fy = _fill(x), _fill(y)
    best = abs(fx - fy)
    for i in range(n):
        a = x.values[i] if i < len(x.values) else fx
        b = y.values[i] if i < len(y.values) else fy
        best = max(best, abs(a - b))
    return best


def difference(x: TruncatedSequence, y: TruncatedSequence) -> TruncatedSequence:
    """x - y for sequences with zero or constant tails (exact)."""
    if not (x.tail.kind != BOUNDED or x.tail.value == 0.0):
        raise ValueError("difference undefined for unknown bounded tails")
    if not (y.tail.kind != BOUNDED or y.tail.value == 0.0):
        raise ValueError("difference undefined for unknown bounded tails")
    n = max(len(x.values), len(y.values))
    fx, fy = _fill(x), _fill(y)
    vals = tuple(
        (x.values[i] if i < len(x.values) else fx)
        - (y.values[i] if i < len(y.values) else fy)
        for i in range(n)
    )
    c = fx - fy
    tail = Tail.zero() if c == 0.0 else Tail.constant(c)
    return TruncatedSequence(vals, tail)
