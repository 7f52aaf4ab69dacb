import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from ergoseq import harness
from ergoseq.averaging import AverageState, maximal_function, run_averaging, step
from ergoseq.operators import ShiftOperator, operator_from_dict, random_ds
from ergoseq.sequences import TruncatedSequence, basis_vector, norm

from oracles import shift_average_coord1

SMALL = dict(trials=5, dim=6, horizon=4096)


def run(name, **kw):
    return harness.run_suite(harness.make_config(name, **kw))


# --- configuration ------------------------------------------------------------

def test_make_config_defaults():
    cfg = harness.make_config("convergence")
    assert cfg.horizon == 2 ** 12 and cfg.trials == 1000 and cfg.dim == 16
    assert cfg.tol == 1e-8 and cfg.window == 3
    assert harness.make_config("counterexample").horizon == 2 ** 20
    assert harness.make_config("fatou", horizon=None).horizon == 2 ** 12


def test_make_config_validation():
    with pytest.raises(ValueError):
        harness.make_config("no_such_suite")
    with pytest.raises(TypeError):
        harness.make_config("fatou", bogus=3)
    with pytest.raises(ValueError):
        harness.make_config("fatou", trials=0)


# --- suite smoke runs -----------------------------------------------------------

@pytest.mark.parametrize("name", [
    "maximal_ineq", "convergence", "majorization", "decomposition",
    "rearrangement_continuity", "fatou",
])
def test_small_suites_all_pass(name):
    rep = run(name, seed=7, **SMALL)
    assert rep.aggregate["fail"] == 0
    assert rep.aggregate["pass"] == SMALL["trials"]
    assert len(rep.trials) == SMALL["trials"]
    assert rep.failures == ()


def test_counterexample_suite_records():
    rep = run("counterexample", seed=7, horizon=2 ** 12)
    assert rep.aggregate["fail"] == 0
    main, contrast = rep.trials
    assert main["gap"] >= harness.GAP_THRESHOLD
    assert contrast["gap"] < main["gap"]


def test_maximal_suite_identity_override():
    from ergoseq.operators import to_matrix, identity

    cfg = harness.make_config("maximal_ineq", trials=1, dim=4, horizon=64,
                              p_values=(1.0,), alpha_values=(0.5,))
    rep = harness.suite_maximal_ineq(
        cfg,
        operator_override=to_matrix(identity(4), 4),
        input_override=basis_vector(1),
    )
    assert rep.aggregate["fail"] == 0
    # unit l1 input, alpha 0.5: one coordinate reaches 0.5, bound is 4
    assert rep.trials[0]["max_ratio"] == pytest.approx(0.25)


def test_batched_scan_matches_engine():
    cfg = harness.make_config("maximal_ineq", seed=3, trials=4, dim=5, horizon=128)
    mats = []
    xs = []
    for t in range(cfg.trials):
        T = random_ds(cfg.dim, harness.OPERATOR_DENSITY, "nonnegative",
                      [cfg.seed, t, 0])
        mats.append(T)
        xs.append(np.random.default_rng(t).random(cfg.dim))
    stacked = harness._batched_maximal_scan(
        np.stack([T.matrix for T in mats]), np.stack(xs), cfg.horizon)
    for t, T in enumerate(mats):
        single = maximal_function(T, TruncatedSequence(tuple(xs[t])), cfg.horizon)
        assert np.allclose(stacked[t], np.asarray(single.values), atol=1e-12)


# --- determinism -----------------------------------------------------------------

def test_reports_are_byte_identical():
    a = harness.report_json_bytes(run("convergence", seed=11, **SMALL).to_dict())
    b = harness.report_json_bytes(run("convergence", seed=11, **SMALL).to_dict())
    assert hashlib.sha256(a).hexdigest() == hashlib.sha256(b).hexdigest()
    c = harness.report_json_bytes(run("convergence", seed=12, **SMALL).to_dict())
    assert a != c


def test_report_schema_fields():
    rep = run("maximal_ineq", seed=1, **SMALL)
    body = rep.to_dict()
    assert set(body) == {"schema_version", "suite", "config", "trials",
                         "aggregate", "failures"}
    assert set(body["aggregate"]) == {"pass", "fail", "max_ratio", "worst_residual"}
    assert body["schema_version"] == harness.SCHEMA_VERSION
    json.dumps(body)  # JSON-serializable throughout


# --- failure artifacts ------------------------------------------------------------

def test_artifact_round_trip_reproduces_trial():
    # Build an artifact by hand from a passing trial and check the rerun
    # machinery reproduces the same verdict from the serialized pieces.
    T = random_ds(6, 0.4, "nonnegative", [9, 0, 0])
    x_arr = np.random.default_rng(1).random(6)
    x = TruncatedSequence(tuple(x_arr))
    artifact = {
        "suite": "maximal_ineq",
        "trial": 0,
        "operator": harness.operator_to_dict(T),
        "x": x.to_dict(),
        "params": {"horizon": 128, "p_values": [1.0, 2.0], "alpha_values": [0.25, 0.5]},
    }
    blob = harness.report_json_bytes(artifact)
    restored = json.loads(blob)
    back = operator_from_dict(restored["operator"])
    assert np.array_equal(back.matrix, T.matrix)
    result = harness.rerun_failure(restored)
    assert result["pass"]
    again = harness.rerun_failure(json.loads(harness.report_json_bytes(artifact)))
    assert again == result


def test_rerun_convergence_and_decomposition():
    T = random_ds(5, 0.5, "nonnegative", [4, 1, 0])
    x = TruncatedSequence(tuple(np.random.default_rng(2).standard_normal(5)))
    conv = harness.rerun_failure({
        "suite": "convergence",
        "operator": harness.operator_to_dict(T),
        "x": x.to_dict(),
        "params": {"horizon": 2 ** 12, "tol": 1e-8, "window": 3},
    })
    assert conv["pass"] and conv["converged"]
    dec = harness.rerun_failure({
        "suite": "decomposition",
        "operator": harness.operator_to_dict(T),
        "x": x.to_dict(),
        "params": {"tol": 1e-8},
    })
    assert dec["pass"]


# --- divergence demo ---------------------------------------------------------------

def test_block_sequence_layout():
    x = harness.block_sequence_prefix(40)
    ones = {s + 1 for s in np.nonzero(x)[0]}
    assert ones == {1} | set(range(4, 8)) | set(range(16, 32))


def test_demo_rejects_tiny_horizons():
    with pytest.raises(ValueError):
        harness.demo_counterexample(512)


def test_demo_matches_engine_at_small_horizon():
    horizon = 2 ** 10
    res = harness.demo_counterexample(horizon)
    x = harness.block_sequence_prefix(horizon)
    state = AverageState(ShiftOperator("left"), TruncatedSequence(tuple(x)),
                         track_maximal=False)
    octave = []
    for n in range(1, horizon + 1):
        if n > 1:
            step(state)
        coord1 = state.average_array()[0]
        assert coord1 == pytest.approx(shift_average_coord1(x, n), abs=1e-12)
        if n >= horizon // 2:
            octave.append(coord1)
    assert res.limsup_est == pytest.approx(max(octave), abs=1e-12)
    assert res.liminf_est == pytest.approx(min(octave), abs=1e-12)
    assert res.gap > 0


def test_demo_contrast_gap_shrinks_with_horizon():
    gaps = [harness.demo_counterexample(h, c0_contrast=True).gap
            for h in (2 ** 10, 2 ** 14, 2 ** 18)]
    assert gaps[0] > gaps[1] > gaps[2]


# --- run_all and the CLI --------------------------------------------------------------

def test_run_all_merges_reports():
    body = harness.run_all(seed=5, trials=3, dim=5, horizon=4096)
    assert set(body["suites"]) == set(harness.SUITE_NAMES)
    agg = body["aggregate"]
    assert agg["fail"] == 0
    # six suites of 3 trials plus the two demo records
    assert agg["pass"] == 6 * 3 + 2
    json.dumps(body)


def _cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "ergoseq", *args],
        capture_output=True, text=True,
    )


def test_cli_suite_and_exit_codes(tmp_path):
    out = tmp_path / "report.json"
    trace = tmp_path / "trace.csv"
    proc = _cli("suite", "fatou", "--seed", "3", "--trials", "4", "--dim", "5",
                "--out", str(out), "--trace", str(trace))
    assert proc.returncode == 0, proc.stderr
    body = json.loads(out.read_text())
    assert body["aggregate"]["fail"] == 0
    header = trace.read_text().splitlines()[0]
    assert header == "n,residual,coord_index,coord_value"


def test_cli_config_file_with_flag_precedence(tmp_path):
    cfgfile = tmp_path / "suite.cfg"
    cfgfile.write_text("seed=9\ntrials=3\ndim=4\n# comment\nhorizon=512\n")
    out = tmp_path / "r.json"
    proc = _cli("suite", "fatou", "--config", str(cfgfile), "--trials", "2",
                "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    body = json.loads(out.read_text())
    assert body["config"]["seed"] == 9
    assert body["config"]["trials"] == 2  # flag beats file
    assert body["config"]["dim"] == 4


def test_cli_demo(tmp_path):
    out = tmp_path / "demo.json"
    proc = _cli("demo", "counterexample", "--horizon", str(2 ** 12),
                "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    body = json.loads(out.read_text())
    assert body["gap"] >= harness.GAP_THRESHOLD


def test_cli_certify(tmp_path):
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"dim": 2, "entries": [[1, 1, 0.5], [2, 2, 0.5]]}))
    assert _cli("certify", "--matrix", str(good)).returncode == 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"matrix": [[1.0, 0.6], [0.0, 0.2]]}))
    proc = _cli("certify", "--matrix", str(bad))
    assert proc.returncode == 1
    assert "rejected" in proc.stdout
    assert _cli("certify", "--matrix", str(tmp_path / "missing.json")).returncode == 2


def test_cli_average():
    proc = _cli("average", "--op", "shift:left", "--x", "e:1",
                "--horizon", "4096")
    assert proc.returncode == 0, proc.stderr
    assert "converged" in proc.stdout


def test_cli_usage_error_is_exit_2():
    assert _cli("suite", "nonexistent").returncode == 2
