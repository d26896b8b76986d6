import json

import pytest

from ustatlab.cli import EXIT_ASSERT, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main

GAUSSIAN_MODEL = {
    "dimension": 1,
    "confinement": {"type": "quadratic", "params": {"a": 0.5}},
    "kernels": [{"order": 2, "type": "quadratic_pair", "params": {"lambda": 0.5}}],
}


def write(tmp_path, doc, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def report(out):
    return json.loads((out / "report.json").read_text())


def test_check_quadratic(tmp_path):
    cfg = write(tmp_path, {"model": {**GAUSSIAN_MODEL, "kernels": []}})
    out = tmp_path / "o"
    assert main(["check", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rep = report(out)
    entries = {e["name"]: e for e in rep["results"]["assumptions"]["entries"]}
    h2 = entries["H2"]
    assert h2["status"] == "verified"
    assert h2["constants"]["c1"] == pytest.approx(1.0)


def test_simulate_unstable_dt(tmp_path):
    cfg = write(tmp_path, {"model": GAUSSIAN_MODEL, "sim": {"dt": 5.0, "horizon": 10.0, "n": 4}})
    out = tmp_path / "o"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == EXIT_NUMERIC
    diag = report(out)["diagnostic"]
    assert diag["error"] == "StabilityError"
    assert diag["admissible_dt"] < 5.0


def test_simulate_outputs_and_determinism(tmp_path):
    cfg = write(tmp_path, {"model": GAUSSIAN_MODEL,
                           "sim": {"dt": 0.01, "horizon": 0.5, "n": 20, "replicas": 2, "record_every": 5}})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", cfg, "--out", str(a), "--seed", "7", "--plot"]) == EXIT_OK
    assert main(["simulate", "--config", cfg, "--out", str(b), "--seed", "7", "--plot"]) == EXIT_OK
    for name in ("series.csv", "snapshot_final.csv", "plot.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ra, rb = report(a), report(b)
    ra.pop("meta"), rb.pop("meta")
    assert ra == rb
    assert "series.csv" in ra["artifacts"]
    header = (a / "series.csv").read_text().splitlines()[0]
    assert header == "t,mean,var,hamiltonian"


def test_existing_report_needs_force(tmp_path):
    cfg = write(tmp_path, {"model": GAUSSIAN_MODEL})
    out = tmp_path / "o"
    assert main(["fixed-point", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert main(["fixed-point", "--config", cfg, "--out", str(out)]) == EXIT_CONFIG
    assert main(["fixed-point", "--config", cfg, "--out", str(out), "--force"]) == EXIT_OK


@pytest.mark.parametrize("text", ["{not json", json.dumps({"sim": {}}),
                                  json.dumps({"model": GAUSSIAN_MODEL, "extra": 1})])
def test_bad_config_exit_code(tmp_path, text):
    p = tmp_path / "bad.json"
    p.write_text(text)
    assert main(["check", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_json_format(tmp_path):
    cfg = write(tmp_path, {"model": GAUSSIAN_MODEL, "grid": {"lo": -8, "hi": 8, "m": 401}})
    out = tmp_path / "o"
    assert main(["fixed-point", "--config", cfg, "--out", str(out), "--format", "json"]) == EXIT_OK
    doc = json.loads((out / "fixed_point.json").read_text())
    assert doc["columns"] == ["x", "density"]
    assert report(out)["gates"]["fisher_le_1e-6"] is True


def test_decoupling_assert(tmp_path):
    cfg = write(tmp_path, {"model": GAUSSIAN_MODEL,
                           "experiment": {"kernel": {"type": "product_pair", "params": {"lambda": 1.0}},
                                          "n": 10, "trials": 100, "samples": 100}})
    assert main(["decoupling", "--config", cfg, "--out", str(tmp_path / "o"), "--assert"]) == EXIT_OK


def test_rates_assert_gaussian_scenario(tmp_path):
    # full-pipeline golden run of the Gaussian first-order scenario
    cfg = write(tmp_path, {"model": GAUSSIAN_MODEL, "grid": {"lo": -8, "hi": 8, "m": 801},
                           "experiment": {"mu0": {"mean": 2.0, "var": 1.0}, "dt": 1e-4, "horizon": 5.0}})
    out = tmp_path / "o"
    code = main(["rates", "--config", cfg, "--out", str(out), "--assert"])
    gates = report(out)["gates"]
    failed = sorted(k for k, ok in gates.items() if not ok)
    assert code == EXIT_OK, f"gates failed: {failed}"
    assert code != EXIT_ASSERT
