import math

import numpy as np
import pytest

from ergoseq.averaging import (
    AverageState,
    NoConvergence,
    check_maximal_inequality,
    maximal_function,
    mean_ergodic_decompose,
    run_averaging,
    run_averaging_many,
    step,
    transpose_fixed_estimate,
    write_residual_csv,
)
from ergoseq.operators import (
    PermutationOperator,
    ShiftOperator,
    UnsupportedForm,
    certify_ds,
    identity,
    modulus,
    random_ds,
    random_permutation_mix,
    to_matrix,
)
from ergoseq.sequences import Tail, TruncatedSequence, basis_vector, norm

from oracles import naive_average, naive_maximal


def seq(*values):
    return TruncatedSequence(tuple(values))


SWAP = PermutationOperator((2, 1))


# --- stepping -------------------------------------------------------------------

def test_step_identity_fixed_point():
    state = AverageState(identity(2), seq(1.0, 2.0))
    for _ in range(5):
        step(state)
        assert state.average() == seq(1.0, 2.0)


def test_step_left_shift_on_basis():
    state = AverageState(ShiftOperator("left"), basis_vector(1))
    step(state)
    assert state.n == 2
    assert state.average() == seq(0.5)
    assert state.current_power_image == seq()


def test_step_swap_orbit():
    state = AverageState(SWAP, seq(1.0, 0.0))
    step(state)
    assert state.average() == seq(0.5, 0.5)
    step(state)
    assert state.average() == seq(2 / 3, 1 / 3)
    assert state.running_sum == seq(2.0, 1.0)


def test_state_window_guard_for_right_shift():
    state = AverageState(ShiftOperator("right"), seq(1.0), horizon_hint=4)
    for _ in range(3):
        step(state)
    with pytest.raises(Exception):
        step(state)


# --- run_averaging ----------------------------------------------------------------

def test_run_identity_converges_with_zero_residuals():
    rep = run_averaging(identity(2), seq(1.0, 2.0), 2 ** 10, 1e-8)
    assert rep.converged
    assert rep.limit_estimate == seq(1.0, 2.0)
    assert all(r.residual in (None, 0.0) for r in rep.residual_trace)
    assert rep.n_final == 16  # earliest point the window rule can fire
    # non-dyadic values accumulate ordinary rounding, nothing more
    rep = run_averaging(identity(2), seq(0.3, -0.4), 2 ** 10, 1e-8)
    assert rep.converged
    assert np.allclose(rep.limit_estimate.values, [0.3, -0.4], atol=1e-14)


def test_run_left_shift_finite_support_limit_zero():
    x = seq(0.9, -0.5, 0.3)
    rep = run_averaging(ShiftOperator("left"), x, 2 ** 12, 1e-10)
    assert rep.converged
    assert rep.limit_estimate == seq()
    # Past the support, A(n) = c/n exactly, so the raw checkpoint change is
    # |c|/(2n): halving from the n=8 record on (support is 3 positions).
    changes = [r.max_coord_change for r in rep.residual_trace]
    assert changes[0] > 0.0
    tail = changes[2:]
    for a, b in zip(tail, tail[1:]):
        assert b == a / 2


def test_run_swap_oscillation():
    rep = run_averaging(SWAP, seq(1.0, 0.0), 2 ** 22, 1e-6)
    assert rep.converged
    assert np.allclose(rep.limit_estimate.values, [0.5, 0.5], atol=1e-6)
    assert rep.limit_estimate == seq(0.5, 0.5)  # exact at even checkpoints


def test_run_validates_window_and_horizon():
    with pytest.raises(ValueError):
        run_averaging(SWAP, seq(1.0, 0.0), 2 ** 10, 1e-8, window=1)
    with pytest.raises(ValueError):
        run_averaging(SWAP, seq(1.0, 0.0), 1, 1e-8, window=2)


def test_run_without_convergence_reports_last_average():
    # A strict tolerance never satisfied inside a tiny horizon.
    T = random_ds(4, 0.9, "nonnegative", 11)
    x = seq(1.0, 1.0, 1.0, 1.0)
    rep = run_averaging(T, x, 8, 1e-300)
    assert not rep.converged
    assert rep.n_final == 8
    got = np.asarray(rep.limit_estimate.values)
    want = naive_average(T.matrix, np.ones(4), 8)
    assert np.allclose(got, want, atol=1e-13)


def test_run_many_matches_single_runs():
    T = random_ds(6, 0.5, "nonnegative", 3)
    xs = [TruncatedSequence(tuple(np.random.default_rng(i).standard_normal(6)))
          for i in range(3)]
    many = run_averaging_many(T, xs, 2 ** 10, 1e-9)
    singles = [run_averaging(T, x, 2 ** 10, 1e-9) for x in xs]
    for a, b in zip(many, singles):
        assert a.converged == b.converged
        assert np.allclose(a.limit_estimate.values, b.limit_estimate.values, atol=1e-12)


def test_checkpoint_grid_is_shared_and_collected():
    T = random_ds(4, 0.5, "nonnegative", 8)
    xs = [seq(1.0, 0.0, 0.0, 0.0), seq(0.0, 1.0, 0.0, 0.0)]
    reps = run_averaging_many(T, xs, 64, 1e-14, collect_checkpoints=True)
    ns0 = [n for n, _ in reps[0].checkpoint_averages]
    ns1 = [n for n, _ in reps[1].checkpoint_averages]
    assert ns0 == ns1 == [1, 2, 4, 8, 16, 32, 64]


def test_residual_csv(tmp_path):
    rep = run_averaging(SWAP, seq(1.0, 0.0), 64, 1e-6)
    out = tmp_path / "trace.csv"
    write_residual_csv(rep, out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "n,residual,max_coord_change"
    assert len(lines) == len(rep.residual_trace) + 1


# --- maximal function ---------------------------------------------------------------

def test_maximal_identity_is_abs():
    assert maximal_function(identity(2), seq(-1.0, 2.0), 7) == seq(1.0, 2.0)


def test_maximal_left_shift_basis():
    assert maximal_function(ShiftOperator("left"), basis_vector(1), 100) == basis_vector(1)


@pytest.mark.parametrize("horizon", [1, 2, 4, 64])
def test_maximal_swap_frozen_values(horizon):
    # Enumerating A(n)[1,0] for the swap: the orbit is 2-periodic, so
    # coordinate 1 peaks at n=1 (value 1) and coordinate 2 at n=2 (value 1/2).
    got = maximal_function(SWAP, seq(1.0, 0.0), horizon)
    if horizon == 1:
        assert got == seq(1.0, 0.0)
    else:
        assert got == seq(1.0, 0.5)


def test_maximal_monotone_in_horizon():
    T = random_ds(8, 0.4, "nonnegative", 21)
    x = TruncatedSequence(tuple(np.random.default_rng(2).random(8)))
    prev = np.zeros(8)
    for horizon in (1, 2, 5, 17, 64, 200):
        cur = np.asarray(maximal_function(T, x, horizon).values)
        assert np.all(cur >= prev - 1e-15)
        prev = cur


def test_maximal_matches_oracle():
    T = random_ds(4, 0.7, "nonnegative", 33)
    x = np.random.default_rng(4).random(4)
    got = np.asarray(maximal_function(T, seq(*x), 32).values)
    want = naive_maximal(T.matrix, x, 32)
    assert np.allclose(got, want, atol=1e-13)


# --- the weak-type counting check ----------------------------------------------------

def test_check_maximal_identity_e1():
    res = check_maximal_inequality(identity(1), basis_vector(1), 1.0, 0.5, 16)
    assert res.lhs_card == 1 and res.rhs_bound == 4.0 and res.holds


def test_check_maximal_identity_pair():
    res = check_maximal_inequality(identity(2), seq(1.0, 1.0), 1.0, 1.0, 16)
    assert res.lhs_card == 2 and res.rhs_bound == 4.0 and res.holds


def test_check_maximal_validation():
    with pytest.raises(ValueError):
        check_maximal_inequality(identity(1), basis_vector(1), math.inf, 0.5, 4)
    with pytest.raises(ValueError):
        check_maximal_inequality(identity(1), basis_vector(1), 1.0, 0.0, 4)


def test_domination_transfer():
    # sup_n |A(n)(x - x')| <= maximal of |T| applied to |x - x'|, coordinatewise.
    T = random_ds(8, 0.5, "signed", 77)
    rng = np.random.default_rng(5)
    x, xp = rng.standard_normal(8), rng.standard_normal(8)
    horizon = 256
    lhs = np.asarray(maximal_function(T, seq(*(x - xp)), horizon).values)
    rhs = np.asarray(
        maximal_function(modulus(T), seq(*np.abs(x - xp)), horizon).values
    )
    assert np.all(lhs <= rhs * (1 + 1e-12) + 1e-15)


def test_average_norm_contraction():
    T = random_ds(8, 0.5, "signed", 13)
    x = TruncatedSequence(tuple(np.random.default_rng(6).standard_normal(8)))
    state = AverageState(T, x, track_maximal=False)
    for _ in range(64):
        step(state)
        avg = state.average()
        assert norm(avg, 1) <= norm(x, 1) * (1 + 1e-12)
        assert norm(avg, math.inf) <= norm(x, math.inf) * (1 + 1e-12)


# --- mean-ergodic decomposition ------------------------------------------------------

def test_decompose_identity():
    T = to_matrix(identity(3), 3)
    x = seq(0.2, -0.5, 0.7)
    dec = mean_ergodic_decompose(T, x)
    assert dec.fixed_part == x
    assert np.allclose(dec.coboundary_source.values, 0.0)
    assert dec.residual == 0.0


def test_decompose_swap_exact_algebra():
    T = to_matrix(SWAP, 2)
    dec = mean_ergodic_decompose(T, seq(1.0, 0.0))
    assert np.allclose(dec.fixed_part.values, [0.5, 0.5], atol=1e-12)
    assert np.allclose(dec.coboundary_source.values, [-0.25, 0.25], atol=1e-12)
    assert dec.residual <= 1e-12


def test_decompose_random_by_substitution():
    T = random_doubly = random_ds(8, 0.6, "nonnegative", 404)
    x_arr = np.random.default_rng(9).standard_normal(8)
    x = seq(*x_arr)
    dec = mean_ergodic_decompose(T, x, tol=1e-8)
    y = np.asarray(dec.fixed_part.values)
    z = np.asarray(dec.coboundary_source.values)
    assert np.abs(T.matrix @ y - y).max() <= 1e-8
    assert np.linalg.norm(x_arr - y - (T.matrix @ z - z)) <= 1e-8
    assert dec.residual <= 1e-8


def test_decompose_rejects_structural_forms():
    with pytest.raises(UnsupportedForm):
        mean_ergodic_decompose(SWAP, seq(1.0, 0.0))


def test_decompose_no_convergence_carries_partial_result():
    T = random_permutation_mix(6, 5)
    x = seq(*np.random.default_rng(3).standard_normal(6))
    with pytest.raises(NoConvergence) as info:
        mean_ergodic_decompose(T, x, tol=1e-8, max_iters=2)
    assert info.value.decomposition is not None
    assert info.value.decomposition.fixed_gap > 1e-8


def test_transpose_fixed_isometry_identity():
    for s in range(10):
        T = random_permutation_mix(8, s) if s % 2 else random_ds(8, 0.5, "nonnegative", s)
        v = np.random.default_rng(s).standard_normal(8)
        y = transpose_fixed_estimate(T, v)
        ty = T.matrix @ y
        lhs = float(np.sum((ty - y) ** 2))
        rhs = float(np.sum(ty ** 2)) - float(np.sum(y ** 2))
        assert abs(lhs - rhs) <= 1e-10
