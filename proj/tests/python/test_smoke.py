import json
import math
import os
import subprocess

import numpy as np
import pytest

import pacgp


def schema():
    path = os.environ.get("PACGP_SCHEMA")
    if not path:
        here = os.path.dirname(__file__)
        path = os.path.join(here, "..", "..", "schema", "report.schema.json")
    with open(path) as f:
        return json.load(f)


def test_binary_kl_and_inverse():
    assert pacgp.binary_kl(0.1, 0.1) == 0.0
    assert pacgp.binary_kl(0.0, 0.5) == pytest.approx(math.log(2.0))
    p = pacgp.klinv(0.1, 0.05)
    assert p > 0.1
    assert pacgp.binary_kl(0.1, p) == pytest.approx(0.05, rel=1e-9)
    dq, de = pacgp.klinv_partials(0.1, 0.05)
    assert dq > 0 and de > 0
    with pytest.raises(ValueError):
        pacgp.klinv(1.5, 0.1)


def test_gibbs_risk_and_bound():
    y = np.array([0.0, 1.0])
    r = pacgp.gibbs_risk(y, y, np.array([1e-12, 1e-12]), loss="zero-one", epsilon=0.6, relative=False)
    assert r == pytest.approx(0.0, abs=1e-9)
    card = pacgp.log_theta_cardinality(3)
    assert card == pytest.approx(3 * math.log(1201.0))
    b, b_pin = pacgp.pac_bound(0.1, 20.0, 500, 3)
    assert 0.1 < b <= b_pin


def test_fit_returns_schema_valid_report():
    jsonschema = pytest.importorskip("jsonschema")
    rng = np.random.default_rng(0)
    X = rng.uniform(-3, 3, size=(60, 1))
    y = np.sin(X[:, 0]) + 0.1 * rng.standard_normal(60)
    out = pacgp.fit(X, y, X, y, epsilon=0.3, max_iters=60)
    rep = out["report"]
    jsonschema.validate(rep, schema())
    assert rep["B"] >= rep["gibbs_train"]
    assert out["mean"].shape == (60,)
    assert np.all(out["var"] > 0)


def test_run_document_validates():
    jsonschema = pytest.importorskip("jsonschema")
    doc = pacgp.run(dataset="demo-1d-half", repeats=2, max_iters=40, workers=1)
    jsonschema.validate(doc, schema())
    assert len(doc["reports"]) == 2
    with pytest.raises(ValueError):
        pacgp.run(bogus_key=1)


def test_selfcheck_passes():
    results = pacgp.selfcheck()
    assert results
    assert all(r["passed"] for r in results), [r for r in results if not r["passed"]]


def cli():
    path = os.environ.get("PACGP_CLI")
    if not path or not os.path.exists(path):
        pytest.skip("command-line tool not built")
    return path


@pytest.mark.parametrize(
    "args, code",
    [
        (["compare", "--dataset", "boston"], 2),
        (["train", "--bogus"], 2),
        (["train", "--model", "sparse", "--num-inducing", "5", "--objective", "mle"], 2),
        (["train", "--dataset", "/nonexistent.csv"], 4),
        (["evaluate", "--model-file", "/nonexistent.json"], 4),
    ],
)
def test_cli_exit_codes(args, code):
    proc = subprocess.run([cli()] + args, capture_output=True, text=True)
    assert proc.returncode == code, proc.stderr


def test_cli_train_writes_valid_report(tmp_path):
    jsonschema = pytest.importorskip("jsonschema")
    proc = subprocess.run(
        [cli(), "train", "--dataset", "demo-1d-half", "--max-iters", "40", "--out", str(tmp_path)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    with open(tmp_path / "report.json") as f:
        jsonschema.validate(json.load(f), schema())
    proc = subprocess.run(
        [cli(), "evaluate", "--model-file", str(tmp_path / "model_0.json")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
