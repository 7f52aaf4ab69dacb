"""Incremental Cesaro averaging with convergence detection, the running
maximal function, the weak-type counting check, and the l2 mean-ergodic
decomposition.

Averages A(n) = (1/n) sum_{k<n} T^k x are advanced one operator application
per step.  Convergence is judged at geometrically doubled checkpoints
n = 1, 2, 4, ...: at each doubling the engine forms the extrapolated limit
estimate R = 2 A(2n) - A(n), which cancels the leading 1/n term that every
Cesaro-type sequence carries, and declares convergence once a window of
consecutive extrapolant changes falls under the tolerance.  The raw
checkpoint change sup|A(2n) - A(n)| is recorded alongside; it decays like
1/n even for instantly-converging orbits, so it reports the Cauchy scale of
the averages themselves rather than the quality of the limit estimate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .operators import DsOperator, IncompatibleSupport, MatrixOperator, UnsupportedForm
from .sequences import Tail, TruncatedSequence, norm

__all__ = [
    "KAHAN_HORIZON",
    "AverageState",
    "CheckpointRecord",
    "ConvergenceReport",
    "MaximalInequalityCheck",
    "Decomposition",
    "NoConvergence",
    "step",
    "run_averaging",
    "run_averaging_many",
    "maximal_function",
    "check_maximal_inequality",
    "mean_ergodic_decompose",
    "transpose_fixed_estimate",
    "write_residual_csv",
]

# Plain summation keeps about 1e-10 accuracy over 2^16 unit-scale steps;
# beyond that, compensated summation keeps checkpoint residuals meaningful
# at tolerances near 1e-8.
KAHAN_HORIZON = 2 ** 16


class NoConvergence(RuntimeError):
    """Escalation budget exhausted before the tolerance was met."""

    def __init__(self, message: str, decomposition: "Decomposition | None" = None):
        super().__init__(message)
        self.decomposition = decomposition


def _window_width(T: DsOperator, xs: Sequence[TruncatedSequence], horizon: int) -> int:
    need = max((x.support_length for x in xs), default=0)
    if T.domain_dim is not None:
        need = max(need, T.domain_dim)
    if T.grows_support:
        need += int(horizon)
    return max(need, 1)


def _window_vector(x: TruncatedSequence, width: int) -> np.ndarray:
    if not x.tail.is_zero_like:
        raise IncompatibleSupport(
            "the averaging engine needs inputs with certified zero tails"
        )
    vals = x.values
    if len(vals) > width and any(v != 0.0 for v in vals[width:]):
        raise IncompatibleSupport(f"support exceeds the engine window 1..{width}")
    v = np.zeros(width)
    head = min(len(vals), width)
    v[:head] = vals[:head]
    return v


class _Columns:
    """Steps several input columns through one operator simultaneously.

    State per column: the latest orbit point T^(n-1) x, the running sum of
    orbit points (optionally compensated), and the coordinatewise maximum
    of |A(m)| over m <= n when tracking is on.
    """

    def __init__(self, operator: DsOperator, xs: Sequence[TruncatedSequence], *,
                 horizon_hint: int = 0, track_maximal: bool = False,
                 compensated: bool | None = None):
        width = _window_width(operator, xs, horizon_hint)
        self.width = width
        self.V = np.stack([_window_vector(x, width) for x in xs])
        self.S = self.V.copy()
        if compensated is None:
            compensated = horizon_hint > KAHAN_HORIZON
        self.comp = np.zeros_like(self.V) if compensated else None
        self.kernel = operator.window_kernel(width)
        self.n = 1
        self.maximal = np.abs(self.V) if track_maximal else None
        # For growing supports the window is exact only up to the hint.
        self.n_limit = horizon_hint if operator.grows_support else None
        self._tmp = np.empty_like(self.V)

    def advance_to(self, n_target: int) -> None:
        if self.n_limit is not None and n_target > self.n_limit:
            raise IncompatibleSupport(
                "window sized for horizon "
                f"{self.n_limit}; cannot advance to {n_target}"
            )
        while self.n < n_target:
            V = self.kernel(self.V)
            self.V = V
            if self.comp is None:
                self.S += V
            else:
                y = V - self.comp
                t = self.S + y
                self.comp = (t - self.S) - y
                self.S = t
            self.n += 1
            if self.maximal is not None:
                np.abs(self.S, out=self._tmp)
                self._tmp /= self.n
                np.maximum(self.maximal, self._tmp, out=self.maximal)

    def averages(self) -> np.ndarray:
        s = self.S if self.comp is None else self.S + self.comp
        return s / self.n


class AverageState:
    """Running average state for a single input; the incremental engine.

    Mutable and single-owner: advance it sequentially with step().  Distinct
    runs are independent and may execute in parallel.  Memory is one window
    vector per role; no trajectory history is kept.
    """

    def __init__(self, operator: DsOperator, x: TruncatedSequence, *,
                 horizon_hint: int = 0, track_maximal: bool = True,
                 compensated: bool | None = None):
        self._cols = _Columns(
            operator, [x], horizon_hint=horizon_hint,
            track_maximal=track_maximal, compensated=compensated,
        )
        self.operator = operator

    @property
    def n(self) -> int:
        return self._cols.n

    @property
    def current_power_image(self) -> TruncatedSequence:
        """The latest orbit point T^(n-1) x."""
        return TruncatedSequence.from_array(self._cols.V[0])

    @property
    def running_sum(self) -> TruncatedSequence:
        s = self._cols.S if self._cols.comp is None else self._cols.S + self._cols.comp
        return TruncatedSequence.from_array(s[0])

    def average_array(self) -> np.ndarray:
        return self._cols.averages()[0]

    def average(self) -> TruncatedSequence:
        """A(n) = running_sum / n."""
        return TruncatedSequence.from_array(self.average_array())

    @property
    def maximal(self) -> TruncatedSequence:
        """Coordinatewise max of |A(m)| over m <= n (lower bound of the sup)."""
        if self._cols.maximal is None:
            raise ValueError("state was built with track_maximal=False")
        return TruncatedSequence.from_array(self._cols.maximal[0])

    def step(self) -> "AverageState":
        """One operator application plus vector updates; returns self."""
        self._cols.advance_to(self.n + 1)
        return self


def step(state: AverageState) -> AverageState:
    """Advance the running average by one step (mutates and returns state)."""
    return state.step()


@dataclass(frozen=True)
class CheckpointRecord:
    """One doubling checkpoint: n, the extrapolant Cauchy residual used for
    the convergence verdict (None at the first doubling, where no previous
    extrapolant exists), and the raw change sup|A(n) - A(n/2)|."""

    n: int
    residual: float | None
    max_coord_change: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "residual": self.residual,
            "max_coord_change": self.max_coord_change,
        }


@dataclass(frozen=True)
class ConvergenceReport:
    """Outcome of an averaging run."""

    limit_estimate: TruncatedSequence
    converged: bool
    residual_trace: tuple[CheckpointRecord, ...]
    horizon: int
    tolerance: float
    window: int
    n_final: int
    checkpoint_averages: tuple[tuple[int, TruncatedSequence], ...] | None = None

    def final_residual(self) -> float:
        for rec in reversed(self.residual_trace):
            if rec.residual is not None:
                return rec.residual
        return math.inf

    def to_dict(self) -> dict:
        return {
            "limit_estimate": self.limit_estimate.to_dict(),
            "converged": self.converged,
            "residual_trace": [r.to_dict() for r in self.residual_trace],
            "horizon": self.horizon,
            "tolerance": self.tolerance,
            "window": self.window,
            "n_final": self.n_final,
        }


def run_averaging_many(T: DsOperator, xs: Sequence[TruncatedSequence],
                       horizon: int, tol: float = 1e-8, window: int = 3, *,
                       collect_checkpoints: bool = False,
                       compensated: bool | None = None) -> list[ConvergenceReport]:
    """run_averaging for several inputs under one operator, sharing the
    step loop and the checkpoint grid.  Stops early once every column has
    converged; otherwise runs to the horizon ceiling."""
    if window < 2:
        raise ValueError("window must be at least 2")
    if horizon < window:
        raise ValueError("horizon must be at least the window length")
    if not xs:
        return []
    cols = _Columns(T, xs, horizon_hint=horizon, compensated=compensated)
    C = len(xs)
    prev_A = cols.averages().copy()
    prev_R = None
    consec = np.zeros(C, dtype=int)
    conv_n = np.zeros(C, dtype=int)
    limits = prev_A.copy()
    trace: list[tuple[int, np.ndarray | None, np.ndarray]] = []
    snaps: list[tuple[int, np.ndarray]] | None = [(1, prev_A.copy())] if collect_checkpoints else None
    n_cp = 1
    while n_cp < horizon:
        n_next = min(2 * n_cp, horizon)
        cols.advance_to(n_next)
        if n_next < 2 * n_cp:
            break  # partial stretch to a non-power-of-two horizon; no doubling
        A = cols.averages()
        change = np.abs(A - prev_A).max(axis=1)
        R = 2.0 * A - prev_A
        if prev_R is None:
            resid = None
        else:
            resid = np.abs(R - prev_R).max(axis=1)
            passing = resid <= tol
            consec = np.where(passing, consec + 1, 0)
            newly = (conv_n == 0) & (consec >= window)
            if newly.any():
                conv_n[newly] = n_next
                limits[newly] = R[newly]
        trace.append((n_next, resid, change))
        if snaps is not None:
            snaps.append((n_next, A.copy()))
        prev_A, prev_R, n_cp = A, R, n_next
        if (conv_n > 0).all():
            break
    if not (conv_n > 0).all() and cols.n < horizon:
        cols.advance_to(horizon)
    final_A = cols.averages()
    unconverged = conv_n == 0
    limits[unconverged] = final_A[unconverged]

    reports = []
    for c in range(C):
        records = tuple(
            CheckpointRecord(
                n,
                float(res[c]) if res is not None else None,
                float(chg[c]),
            )
            for n, res, chg in trace
        )
        cp = None
        if snaps is not None:
            cp = tuple((n, TruncatedSequence.from_array(a[c])) for n, a in snaps)
        reports.append(ConvergenceReport(
            limit_estimate=TruncatedSequence.from_array(limits[c]),
            converged=bool(conv_n[c] > 0),
            residual_trace=records,
            horizon=horizon,
            tolerance=tol,
            window=window,
            n_final=int(conv_n[c]) if conv_n[c] > 0 else cols.n,
            checkpoint_averages=cp,
        ))
    return reports


def run_averaging(T: DsOperator, x: TruncatedSequence, horizon: int,
                  tol: float = 1e-8, window: int = 3, *,
                  collect_checkpoints: bool = False) -> ConvergenceReport:
    """Run the averages of x under T up to a horizon ceiling.

    Residuals are taken at doubling checkpoints; converged means the final
    `window` extrapolant residuals all fell at or under tol, in which case
    the limit estimate is the extrapolated checkpoint value (exact limit up
    to roughly the tolerance).  Without convergence the estimate is the last
    average A(n_final) itself.
    """
    return run_averaging_many(
        T, [x], horizon, tol, window, collect_checkpoints=collect_checkpoints
    )[0]


def maximal_function(T: DsOperator, x: TruncatedSequence, horizon: int) -> TruncatedSequence:
    """Coordinatewise max of |A(n) x| over 1 <= n <= horizon.

    Monotone non-decreasing in the horizon, and a certified lower bound of
    the true supremum over all n (which no finite run can certify).
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    cols = _Columns(T, [x], horizon_hint=horizon, track_maximal=True)
    cols.advance_to(horizon)
    return TruncatedSequence.from_array(cols.maximal[0])


@dataclass(frozen=True)
class MaximalInequalityCheck:
    """Superlevel count of the running maximal function against the
    weak-type bound (2 ||x||_p / alpha)^p."""

    lhs_card: int
    rhs_bound: float
    holds: bool

    def to_dict(self) -> dict:
        return {"lhs_card": self.lhs_card, "rhs_bound": self.rhs_bound, "holds": self.holds}


def check_maximal_inequality(T: DsOperator, x: TruncatedSequence, p: float,
                             alpha: float, horizon: int) -> MaximalInequalityCheck:
    """Count coordinates where the finite-horizon maximal function reaches
    alpha and compare with the weak-type bound.

    The finite-horizon maximal function lower-bounds the true supremum, so
    holds=True is necessary-but-weaker evidence for the bound; holds=False
    at any horizon would refute it outright.
    """
    p = float(p)
    if not 1.0 <= p < math.inf:
        raise ValueError("p must lie in [1, inf)")
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    xp = norm(x, p)
    m = maximal_function(T, x, horizon)
    arr = np.asarray(m.values)
    lhs = int(np.count_nonzero(arr >= alpha)) if arr.size else 0
    rhs = (2.0 * xp / alpha) ** p
    return MaximalInequalityCheck(lhs_card=lhs, rhs_bound=rhs, holds=lhs <= rhs)


@dataclass(frozen=True)
class Decomposition:
    """x ~= fixed_part + (T z - z) with z = coboundary_source."""

    fixed_part: TruncatedSequence
    coboundary_source: TruncatedSequence
    residual: float       # l2 norm of x - y - (Tz - z)
    fixed_gap: float      # sup norm of T y - y actually achieved
    n_averaged: int       # Cesaro order used for the fixed part

    def to_dict(self) -> dict:
        return {
            "fixed_part": self.fixed_part.to_dict(),
            "coboundary_source": self.coboundary_source.to_dict(),
            "residual": self.residual,
            "fixed_gap": self.fixed_gap,
            "n_averaged": self.n_averaged,
        }


def _cesaro_fixed_point(A: np.ndarray, v: np.ndarray, tol: float,
                        max_iters: int) -> tuple[np.ndarray, int, float]:
    """Escalate the Cesaro order n = 2^j by matrix doubling until the
    averaged vector is tol-fixed under A.

    Uses A(2n) = (A(n) + T^n A(n)) / 2 and T^(2n) = (T^n)^2, so order 2^j
    costs j pairs of matrix products; (T - I) A(n) telescopes to
    (T^n - I)/n, hence the gap falls at least like 2 ||v|| / n and the
    escalation always terminates for a reasonable budget.
    """
    dim = A.shape[0]
    P = np.eye(dim)
    Q = A.copy()
    n = 1
    y = v.copy()
    gap = float(np.abs(A @ y - y).max()) if dim else 0.0
    for _ in range(max_iters):
        if gap <= tol:
            break
        P = 0.5 * (P + Q @ P)
        Q = Q @ Q
        n *= 2
        y = P @ v
        gap = float(np.abs(A @ y - y).max())
    return y, n, gap


def mean_ergodic_decompose(T: DsOperator, x: TruncatedSequence,
                           tol: float = 1e-8, max_iters: int = 60) -> Decomposition:
    """Split x into a T-fixed part plus a coboundary, in l2 on the window.

    The fixed part y is a high-order Cesaro average of x, the order doubled
    until sup|Ty - y| <= tol; the coboundary source z is the minimal-norm
    least-squares solution of (T - I) z = x - y.  The l2 residual of the
    reconstruction is reported exactly.  Raises NoConvergence (with the
    partial decomposition attached) if the gap is still above tol after
    max_iters doublings.
    """
    if not isinstance(T, MatrixOperator):
        raise UnsupportedForm(
            "the decomposition needs the matrix form; flatten with to_matrix first"
        )
    A = T.matrix
    xv = _window_vector(x, T.dim)
    y, n_avg, gap = _cesaro_fixed_point(A, xv, tol, max_iters)
    B = A - np.eye(T.dim)
    z, *_ = np.linalg.lstsq(B, xv - y, rcond=None)
    residual = float(np.linalg.norm(xv - y - (A @ z - z)))
    dec = Decomposition(
        fixed_part=TruncatedSequence.from_array(y),
        coboundary_source=TruncatedSequence.from_array(z),
        residual=residual,
        fixed_gap=gap,
        n_averaged=n_avg,
    )
    if gap > tol:
        raise NoConvergence(
            f"fixed-part gap {gap!r} still above {tol!r} after {max_iters} doublings",
            dec,
        )
    return dec


def transpose_fixed_estimate(T: MatrixOperator, v, tol: float = 1e-10,
                             max_iters: int = 60) -> np.ndarray:
    """Mean-ergodic projection of v onto the fixed space of the transpose.

    The returned vector satisfies sup|T^t y - y| <= tol up to the escalation
    budget; it is the natural supply of transpose-fixed test vectors.
    """
    if not isinstance(T, MatrixOperator):
        raise UnsupportedForm("transpose projection needs the matrix form")
    y, _, _ = _cesaro_fixed_point(T.matrix.T, np.asarray(v, dtype=float), tol, max_iters)
    return y


def write_residual_csv(report: ConvergenceReport, path) -> None:
    """Checkpoint trace as CSV rows (n, residual, max_coord_change)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "residual", "max_coord_change"])
        for rec in report.residual_trace:
            w.writerow([
                rec.n,
                "nan" if rec.residual is None else repr(rec.residual),
                repr(rec.max_coord_change),
            ])
