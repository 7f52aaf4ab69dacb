"""Dunford-Schwartz operators: certified simultaneous l1 and l_inf contractions.

For a matrix acting on coordinates 1..M the two contraction bounds are
concrete: every absolute row sum at most one (l_inf to l_inf) and every
absolute column sum at most one (l1 to l1).  Structural forms (shifts,
permutations, convex combinations, powers, compositions) stay symbolic so
they can act at any horizon without materializing a matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .sequences import Tail, TruncatedSequence

__all__ = [
    "Certificate",
    "DsOperator",
    "MatrixOperator",
    "ShiftOperator",
    "PermutationOperator",
    "ConvexCombination",
    "PowerOperator",
    "ComposeOperator",
    "NotContraction",
    "UnsupportedForm",
    "IncompatibleSupport",
    "apply",
    "certify_ds",
    "modulus",
    "to_matrix",
    "random_ds",
    "random_doubly_stochastic",
    "random_permutation_mix",
    "identity",
    "operator_to_dict",
    "operator_from_dict",
]


class NotContraction(ValueError):
    """The matrix fails at least one of the two contraction bounds."""

    def __init__(self, row_norm: float, col_norm: float, tolerance: float = 0.0):
        self.row_norm = float(row_norm)
        self.col_norm = float(col_norm)
        bad = []
        if row_norm > 1.0 + tolerance:
            bad.append(f"max absolute row sum {row_norm!r} > 1")
        if col_norm > 1.0 + tolerance:
            bad.append(f"max absolute column sum {col_norm!r} > 1")
        super().__init__("not a Dunford-Schwartz contraction: " + "; ".join(bad))


class UnsupportedForm(TypeError):
    """The operation is not defined for this operator form."""


class IncompatibleSupport(ValueError):
    """Input support exceeds the operator's certified domain."""


@dataclass(frozen=True)
class Certificate:
    """Contraction evidence: bounds on the two operator norms."""

    row_norm: float  # l_inf -> l_inf bound (max absolute row sum)
    col_norm: float  # l1 -> l1 bound (max absolute column sum)
    certified: bool = True

    def to_dict(self) -> dict:
        return {"row_norm": self.row_norm, "col_norm": self.col_norm}


def _window_vector(x: TruncatedSequence, width: int) -> np.ndarray:
    if not x.tail.is_zero_like:
        raise IncompatibleSupport(
            "this operator form needs a certified zero tail"
        )
    vals = x.values
    if len(vals) > width and any(v != 0.0 for v in vals[width:]):
        raise IncompatibleSupport(f"support exceeds the operator window 1..{width}")
    v = np.zeros(width)
    head = min(len(vals), width)
    v[:head] = vals[:head]
    return v


def _seq(arr: np.ndarray) -> TruncatedSequence:
    return TruncatedSequence(tuple(float(v) for v in arr), Tail.zero())


class DsOperator:
    """Base class for certified operators.  Immutable after construction."""

    cert: Certificate

    def apply(self, x: TruncatedSequence) -> TruncatedSequence:
        raise NotImplementedError

    @property
    def domain_dim(self) -> int | None:
        """Window size for matrix-like forms, None for horizon-free forms."""
        return None

    @property
    def grows_support(self) -> bool:
        """Whether repeated application can push support rightward."""
        return False

    def window_kernel(self, width: int) -> Callable[[np.ndarray], np.ndarray]:
        """Row-wise action on (R, width) arrays.

        Matches the operator exactly on sequences supported in 1..width,
        provided the support cannot flow past the window (the averaging
        engine sizes the window accordingly for growing forms).
        """
        raise NotImplementedError


class MatrixOperator(DsOperator):
    """Explicit M x M window operator; zero action past its window."""

    def __init__(self, matrix, cert: Certificate):
        arr = np.array(matrix, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("matrix form must be square")
        if not np.all(np.isfinite(arr)):
            raise ValueError("matrix entries must be finite")
        arr.setflags(write=False)
        self.matrix = arr
        self.dim = int(arr.shape[0])
        self.cert = cert

    @property
    def domain_dim(self) -> int:
        return self.dim

    def apply(self, x: TruncatedSequence) -> TruncatedSequence:
        v = _window_vector(x, self.dim)
        return _seq(self.matrix @ v)

    def window_kernel(self, width: int):
        if width == self.dim:
            at = np.ascontiguousarray(self.matrix.T)
        else:
            ext = np.zeros((width, width))
            m = min(width, self.dim)
            ext[:m, :m] = self.matrix[:m, :m]
            at = np.ascontiguousarray(ext.T)
        return lambda rows: rows @ at

    def __repr__(self):
        return f"MatrixOperator(dim={self.dim}, row_norm={self.cert.row_norm:.6g}, col_norm={self.cert.col_norm:.6g})"


class ShiftOperator(DsOperator):
    """Left shift (Tx)_s = x_(s+1) or right shift (Tx)_1 = 0, (Tx)_s = x_(s-1).

    Acts exactly on any tail kind: both shifts map a symbolic tail to itself.
    """

    def __init__(self, direction: str):
        if direction not in ("left", "right"):
            raise ValueError("direction must be 'left' or 'right'")
        self.direction = direction
        self.cert = Certificate(1.0, 1.0)

    @property
    def grows_support(self) -> bool:
        return self.direction == "right"

    def apply(self, x: TruncatedSequence) -> TruncatedSequence:
        if self.direction == "left":
            return TruncatedSequence(x.values[1:], x.tail)
        return TruncatedSequence((0.0,) + x.values, x.tail)

    def window_kernel(self, width: int):
        if self.direction == "left":
            def step(rows: np.ndarray) -> np.ndarray:
                out = np.empty_like(rows)
                out[:, :-1] = rows[:, 1:]
                out[:, -1] = 0.0
                return out
        else:
            def step(rows: np.ndarray) -> np.ndarray:
                out = np.empty_like(rows)
                out[:, 1:] = rows[:, :-1]
                out[:, 0] = 0.0
                return out
        return step

    def __repr__(self):
        return f"ShiftOperator({self.direction!r})"


class PermutationOperator(DsOperator):
    """(Tx)_s = x_(perm[s]) on the window 1..M, identity beyond it."""

    def __init__(self, perm: Sequence[int]):
        p = tuple(int(v) for v in perm)
        if sorted(p) != list(range(1, len(p) + 1)):
            raise ValueError("perm must list each position 1..M exactly once")
        self.perm = p
        self.cert = Certificate(1.0, 1.0)

    @property
    def domain_dim(self) -> int:
        return len(self.perm)

    def apply(self, x: TruncatedSequence) -> TruncatedSequence:
        v = _window_vector(x, len(self.perm))
        idx = np.asarray(self.perm, dtype=int) - 1
        return _seq(v[idx])

    def window_kernel(self, width: int):
        m = len(self.perm)
        src = np.arange(width)
        keep = np.ones(width)
        for s in range(min(m, width)):
            t = self.perm[s] - 1
            if t < width:
                src[s] = t
            else:
                src[s] = 0
                keep[s] = 0.0
        return lambda rows: rows[:, src] * keep

    def __repr__(self):
        return f"PermutationOperator({self.perm})"


def _combo_bounds(weights, parts):
    row = math.fsum(w * p.cert.row_norm for w, p in zip(weights, parts))
    col = math.fsum(w * p.cert.col_norm for w, p in zip(weights, parts))
    return row, col


class ConvexCombination(DsOperator):
    """Weighted mix of certified operators; closed under the contraction bounds."""

    def __init__(self, weights: Sequence[float], parts: Sequence[DsOperator]):
        w = tuple(float(a) for a in weights)
        parts = tuple(parts)
        if not parts or len(w) != len(parts):
            raise ValueError("weights and parts must be nonempty and aligned")
        if any(a < 0.0 for a in w):
            raise ValueError("weights must be nonnegative")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        self.weights = w
        self.parts = parts
        row, col = _combo_bounds(w, parts)
        self.cert = Certificate(row, col)

    @property
    def domain_dim(self) -> int | None:
        dims = [p.domain_dim for p in self.parts if p.domain_dim is not None]
        return max(dims) if dims else None

    @property
    def grows_support(self) -> bool:
        return any(p.grows_support for p in self.parts)

    def apply(self, x: TruncatedSequence) -> TruncatedSequence:
        return _weighted_sum(self.weights, [p.apply(x) for p in self.parts])

    def window_kernel(self, width: int):
        kerns = [p.window_kernel(width) for p in self.parts]
        w = self.weights

        def step(rows: np.ndarray) -> np.ndarray:
            out = w[0] * kerns[0](rows)
            for wi, ki in zip(w[1:], kerns[1:]):
                out += wi * ki(rows)
            return out

        return step


class PowerOperator(DsOperator):
    """T^k of a certified operator."""

    def __init__(self, base: DsOperator, k: int):
        k = int(k)
        if k < 1:
            raise ValueError("exponent must be a positive integer")
        self.base = base
        self.k = k
        self.cert = Certificate(base.cert.row_norm ** k, base.cert.col_norm ** k)

    @property
    def domain_dim(self) -> int | None:
        return self.base.domain_dim

    @property
    def grows_support(self) -> bool:
        return self.base.grows_support

    def apply(self, x: TruncatedSequence) -> TruncatedSequence:
        for _ in range(self.k):
            x = self.base.apply(x)
        return x

    def window_kernel(self, width: int):
        kern = self.base.window_kernel(width)
        k = self.k

        def step(rows: np.ndarray) -> np.ndarray:
            for _ in range(k):
                rows = kern(rows)
            return rows

        return step


class ComposeOperator(DsOperator):
    """Composition; Compose([A, B]) acts as A after B."""

    def __init__(self, parts: Sequence[DsOperator]):
        parts = tuple(parts)
        if not parts:
            raise ValueError("composition needs at least one part")
        self.parts = parts
        row = math.prod(p.cert.row_norm for p in parts)
        col = math.prod(p.cert.col_norm for p in parts)
        self.cert = Certificate(row, col)

    @property
    def domain_dim(self) -> int | None:
        dims = [p.domain_dim for p in self.parts if p.domain_dim is not None]
        return max(dims) if dims else None

    @property
    def grows_support(self) -> bool:
        return any(p.grows_support for p in self.parts)

    def apply(self, x: TruncatedSequence) -> TruncatedSequence:
        for part in reversed(self.parts):
            x = part.apply(x)
        return x

    def window_kernel(self, width: int):
        kerns = [p.window_kernel(width) for p in reversed(self.parts)]

        def step(rows: np.ndarray) -> np.ndarray:
            for k in kerns:
                rows = k(rows)
            return rows

        return step


def _weighted_sum(weights, seqs) -> TruncatedSequence:
    # Tails combine linearly where known; an unknown bounded tail caps the
    # certified prefix at the shortest bounded prefix.
    bounded = [s for s in seqs if s.tail.kind == "bounded" and s.tail.value != 0.0]
    if bounded:
        prefix_len = min(len(s.values) for s in bounded)
        bound = math.fsum(
            w * s.tail.sup for w, s in zip(weights, seqs)
        )
        tail = Tail.bounded(bound)
    else:
        prefix_len = max((len(s.values) for s in seqs), default=0)
        c = math.fsum(
            w * (s.tail.value if s.tail.kind == "constant" else 0.0)
            for w, s in zip(weights, seqs)
        )
        tail = Tail.constant(c) if c != 0.0 else Tail.zero()
    vals = []
    for i in range(prefix_len):
        vals.append(
            math.fsum(
                w * (s.values[i] if i < len(s.values) else
                     (s.tail.value if s.tail.kind == "constant" else 0.0))
                for w, s in zip(weights, seqs)
            )
        )
    return TruncatedSequence(tuple(vals), tail)


def apply(T: DsOperator, x: TruncatedSequence) -> TruncatedSequence:
    """Exact symbolic application of T to x (see each form for tail rules)."""
    return T.apply(x)


def _coerce_matrix(entries) -> np.ndarray:
    if isinstance(entries, np.ndarray):
        return np.array(entries, dtype=float)
    if isinstance(entries, dict):
        if not entries:
            return np.zeros((0, 0))
        dim = max(max(r, c) for r, c in entries)
        arr = np.zeros((dim, dim))
        for (r, c), v in entries.items():
            arr[r - 1, c - 1] = float(v)
        return arr
    entries = list(entries)
    if entries and isinstance(entries[0], (list, tuple)) and len(entries[0]) == 3 \
            and isinstance(entries[0][0], (int, np.integer)):
        dim = max(max(int(r), int(c)) for r, c, _ in entries)
        arr = np.zeros((dim, dim))
        for r, c, v in entries:
            arr[int(r) - 1, int(c) - 1] = float(v)
        return arr
    return np.array(entries, dtype=float)


def _abs_sums(arr: np.ndarray) -> tuple[float, float]:
    if arr.size == 0:
        return 0.0, 0.0
    a = np.abs(arr)
    return float(a.sum(axis=1).max()), float(a.sum(axis=0).max())


def certify_ds(entries, tolerance: float = 0.0) -> MatrixOperator:
    """Certify a matrix as a Dunford-Schwartz contraction or reject it.

    Accepts a dense array, nested lists, a {(row, col): value} map, or
    [row, col, value] triples (1-indexed).  Accepts exactly when both the
    max absolute row sum and the max absolute column sum are at most
    1 + tolerance; the exact computed sums are stored in the certificate.
    """
    if tolerance < 0.0:
        raise ValueError("tolerance must be nonnegative")
    arr = _coerce_matrix(entries)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("matrix form must be square")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix entries must be finite")
    row, col = _abs_sums(arr)
    if row > 1.0 + tolerance or col > 1.0 + tolerance:
        raise NotContraction(row, col, tolerance)
    return MatrixOperator(arr, Certificate(row, col))


def modulus(T: DsOperator) -> DsOperator:
    """The positive operator |T| dominating T: |T^k x| <= |T|^k |x|.

    Entrywise absolute value for matrices (absolute row and column sums are
    unchanged, so the certificate carries over); shifts and permutations are
    already positive.  Composite forms are refused: the modulus of a
    composite is not the composite of the moduli, flatten with to_matrix
    first.
    """
    if isinstance(T, MatrixOperator):
        return MatrixOperator(np.abs(T.matrix), T.cert)
    if isinstance(T, (ShiftOperator, PermutationOperator)):
        return T
    raise UnsupportedForm(
        "modulus is available for matrix, shift, and permutation forms only; "
        "flatten composites with to_matrix first"
    )


def _dense_window(T: DsOperator, dim: int) -> np.ndarray:
    if isinstance(T, MatrixOperator):
        out = np.zeros((dim, dim))
        m = min(dim, T.dim)
        out[:m, :m] = T.matrix[:m, :m]
        return out
    if isinstance(T, ShiftOperator):
        return np.eye(dim, k=1 if T.direction == "left" else -1)
    if isinstance(T, PermutationOperator):
        out = np.zeros((dim, dim))
        m = len(T.perm)
        for s in range(dim):
            t = T.perm[s] - 1 if s < m else s
            if t < dim:
                out[s, t] = 1.0
        return out
    if isinstance(T, ConvexCombination):
        out = np.zeros((dim, dim))
        for w, p in zip(T.weights, T.parts):
            out += w * _dense_window(p, dim)
        return out
    if isinstance(T, PowerOperator):
        return np.linalg.matrix_power(_dense_window(T.base, dim), T.k)
    if isinstance(T, ComposeOperator):
        out = np.eye(dim)
        for p in T.parts:
            out = out @ _dense_window(p, dim)
        return out
    raise UnsupportedForm(f"no dense window for {type(T).__name__}")


def to_matrix(T: DsOperator, dim: int) -> MatrixOperator:
    """Compression of T to the window 1..dim as a certified matrix.

    Equals T on inputs supported in 1..dim except at the window boundary:
    inflow from coordinate dim+1 is dropped (the left shift loses row dim),
    and composites are compressed stage by stage, matching the windowed
    engine.  The compression of a contraction stays a contraction.
    """
    if dim < 1:
        raise ValueError("dim must be a positive integer")
    arr = _dense_window(T, dim)
    row, col = _abs_sums(arr)
    # Contraction holds mathematically; allow only accumulated rounding here.
    if row > 1.0 + 1e-9 or col > 1.0 + 1e-9:
        raise NotContraction(row, col)
    return MatrixOperator(arr, Certificate(row, col))


def identity(dim: int) -> PermutationOperator:
    """The identity on 1..dim as a (trivially certified) permutation."""
    return PermutationOperator(tuple(range(1, dim + 1)))


def _certification_scale(a: np.ndarray) -> np.ndarray:
    # Force both absolute sums under one; a couple of extra passes absorb
    # the rounding of the division itself.
    for attempt in range(12):
        row, col = _abs_sums(a)
        m = max(row, col)
        if m <= 1.0:
            return a
        a = a / m if attempt < 6 else a * (1.0 - 2.0 ** -48)
    row, col = _abs_sums(a)
    raise AssertionError(f"certification scaling stalled at {row}, {col}")


def random_ds(dim: int, density: float = 0.5, sign_mode: str = "nonnegative",
              seed=0) -> MatrixOperator:
    """Seeded random doubly substochastic operator, certified by construction.

    Samples a sparse nonnegative matrix, alternately rescales rows then
    columns that exceed unit sum (at most 100 rounds, usually one), then
    applies a final hard scale so certification at zero tolerance always
    succeeds.  sign_mode "signed" flips each entry's sign with probability
    one half afterwards, leaving the absolute sums unchanged.
    """
    if dim < 1:
        raise ValueError("dim must be a positive integer")
    if not 0.0 < density <= 1.0:
        raise ValueError("density must lie in (0, 1]")
    if sign_mode not in ("nonnegative", "signed"):
        raise ValueError("sign_mode must be 'nonnegative' or 'signed'")
    rng = np.random.default_rng(seed)
    mask = rng.random((dim, dim)) < density
    a = np.where(mask, rng.random((dim, dim)), 0.0)
    for _ in range(100):
        rows = np.abs(a).sum(axis=1)
        hot = rows > 1.0
        if hot.any():
            a[hot] /= rows[hot, None]
        cols = np.abs(a).sum(axis=0)
        hot = cols > 1.0
        if hot.any():
            a[:, hot] /= cols[hot]
        row, col = _abs_sums(a)
        if row <= 1.0 and col <= 1.0:
            break
    a = _certification_scale(a)
    if sign_mode == "signed":
        flips = rng.random((dim, dim)) < 0.5
        a = np.where(flips, -a, a)
    row, col = _abs_sums(a)
    return MatrixOperator(a, Certificate(row, col))


def random_permutation_mix(dim: int, seed=0) -> MatrixOperator:
    """Seeded convex mix of the identity with two random permutations.

    Dyadic weights (1/2, 1/4, 1/4) make every row and column sum exactly
    1.0 in floating point, so the matrix is genuinely doubly stochastic,
    carries an exact fixed vector (the constant one), and certifies at zero
    tolerance.  Mixing in the identity keeps the non-fixed spectrum
    strictly inside the unit circle.
    """
    if dim < 1:
        raise ValueError("dim must be a positive integer")
    rng = np.random.default_rng(seed)
    arr = np.zeros((dim, dim))
    arr[np.arange(dim), np.arange(dim)] += 0.5
    for w in (0.25, 0.25):
        perm = rng.permutation(dim)
        arr[np.arange(dim), perm] += w
    row, col = _abs_sums(arr)
    return MatrixOperator(arr, Certificate(row, col))


def random_doubly_stochastic(dim: int, seed=0, rounds: int = 200) -> MatrixOperator:
    """Seeded random matrix balanced to unit row and column sums.

    Alternating row/column balancing on a strictly positive start converges
    to a doubly stochastic matrix; a final hard scale keeps both absolute
    sums at or below one so certification at zero tolerance holds.  Useful
    when a genuinely nontrivial fixed space is wanted (the constant vector
    is fixed up to rounding).
    """
    if dim < 1:
        raise ValueError("dim must be a positive integer")
    rng = np.random.default_rng(seed)
    a = rng.random((dim, dim)) + 0.1
    for _ in range(rounds):
        a /= a.sum(axis=1, keepdims=True)
        a /= a.sum(axis=0, keepdims=True)
    a = _certification_scale(a)
    row, col = _abs_sums(a)
    return MatrixOperator(a, Certificate(row, col))


_FORM_NAMES = {
    MatrixOperator: "matrix",
    ShiftOperator: "shift",
    PermutationOperator: "permutation",
    ConvexCombination: "convex",
    PowerOperator: "power",
    ComposeOperator: "compose",
}


def operator_to_dict(T: DsOperator) -> dict:
    """JSON-ready description: form, dim, sparse entries, certificate."""
    d = {"form": _FORM_NAMES[type(T)], "cert": T.cert.to_dict()}
    if isinstance(T, MatrixOperator):
        rows, cols = np.nonzero(T.matrix)
        d["dim"] = T.dim
        d["entries"] = [
            [int(r) + 1, int(c) + 1, float(T.matrix[r, c])]
            for r, c in sorted(zip(rows.tolist(), cols.tolist()))
        ]
    elif isinstance(T, ShiftOperator):
        d["dim"] = None
        d["entries"] = []
        d["direction"] = T.direction
    elif isinstance(T, PermutationOperator):
        d["dim"] = len(T.perm)
        d["entries"] = []
        d["perm"] = list(T.perm)
    elif isinstance(T, ConvexCombination):
        d["dim"] = T.domain_dim
        d["entries"] = []
        d["weights"] = list(T.weights)
        d["parts"] = [operator_to_dict(p) for p in T.parts]
    elif isinstance(T, PowerOperator):
        d["dim"] = T.domain_dim
        d["entries"] = []
        d["k"] = T.k
        d["base"] = operator_to_dict(T.base)
    elif isinstance(T, ComposeOperator):
        d["dim"] = T.domain_dim
        d["entries"] = []
        d["parts"] = [operator_to_dict(p) for p in T.parts]
    return d


def operator_from_dict(d: dict) -> DsOperator:
    """Inverse of operator_to_dict; round-trips exactly."""
    form = d["form"]
    if form == "matrix":
        dim = int(d["dim"])
        arr = np.zeros((dim, dim))
        for r, c, v in d["entries"]:
            arr[int(r) - 1, int(c) - 1] = float(v)
        cert = d.get("cert")
        if cert is not None:
            return MatrixOperator(arr, Certificate(cert["row_norm"], cert["col_norm"]))
        return certify_ds(arr)
    if form == "shift":
        return ShiftOperator(d["direction"])
    if form == "permutation":
        return PermutationOperator(d["perm"])
    if form == "convex":
        return ConvexCombination(d["weights"], [operator_from_dict(p) for p in d["parts"]])
    if form == "power":
        return PowerOperator(operator_from_dict(d["base"]), d["k"])
    if form == "compose":
        return ComposeOperator([operator_from_dict(p) for p in d["parts"]])
    raise ValueError(f"unknown operator form {form!r}")
