import json

import pytest

from spothopf.cli import EXIT_NUMERICAL, EXIT_OK, dumps, main


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def _run(capsys, argv):
    code = main(argv)
    return code, capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["equilibrium", "--no-such-flag"],
    ["perturbed-disk", "--fourier-cos", "0,0,1"],
    ["threshold", "--n-spots", "0"],
    [],
])
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


@pytest.mark.parametrize("spec", [{"kind": "triangle"}, {"kind": "perturbed_disk", "sigma": 0.1}])
def test_bad_domain_exits_2(tmp_path, spec):
    with pytest.raises(SystemExit) as exc:
        main(["equilibrium", "--domain", _write(tmp_path, "d.json", spec)])
    assert exc.value.code == 2


def test_equilibrium_is_deterministic(capsys):
    a = _run(capsys, ["equilibrium", "--n-spots", "3"])
    b = _run(capsys, ["equilibrium", "--n-spots", "3"])
    assert a[0] == EXIT_OK and a == b
    data = json.loads(a[1])
    assert len(data["locations"]) == 3 and data["converged"]


def test_core_table_csv(capsys):
    code, out = _run(capsys, ["core-table", "--S-values", "2,3"])
    lines = out.splitlines()
    assert code == EXIT_OK
    assert lines[0].startswith("# manifest: ")
    assert lines[1].split(",")[0] == "S"
    assert len(lines) == 4


def test_threshold_json(capsys):
    code, out = _run(capsys, ["threshold"])
    data = json.loads(out)
    assert code == EXIT_OK
    assert data["tau_star"] == pytest.approx(0.0836820564, rel=1e-8)
    assert data["tau_star_unscaled"] == pytest.approx(data["tau_star"] / 0.01**2, rel=1e-10)


def test_source_outside_is_numerical_failure(capsys, tmp_path):
    seeds = _write(tmp_path, "s.json", [[1.5, 0.0]])
    out_dir = tmp_path / "run"
    code, out = _run(capsys, ["equilibrium", "--seeds", seeds, "--out", str(out_dir)])
    assert code == EXIT_NUMERICAL
    diag = json.loads(out)
    assert diag["status"] == "numerical_failure"
    assert json.loads((out_dir / "diagnostic.json").read_text()) == diag


def test_out_directory_and_manifest(capsys, tmp_path):
    out_dir = tmp_path / "run"
    code, out = _run(capsys, ["perturbed-disk", "--sigma", "0.1", "--fourier-cos", "0,0,1",
                              "--out", str(out_dir)])
    assert code == EXIT_OK
    man = json.loads((out_dir / "manifest.json").read_text())
    assert "timestamp" in man and man["outputs"]
    for name in man["outputs"]:
        assert (out_dir / name).exists()


def test_simulate_writes_trajectory(capsys, tmp_path):
    out_dir = tmp_path / "sim"
    code, _ = _run(capsys, ["simulate", "--eps", "0.1", "--tau-hat", "0.1", "--t-end", "4",
                            "--out", str(out_dir), "--snapshots"])
    assert code == EXIT_OK
    lines = (out_dir / "trajectory.csv").read_text().splitlines()
    assert lines[0].startswith("# manifest: ") and lines[1] == "t,x1_0,x2_0"
    assert len(lines) == 2 + 9
    assert (out_dir / "final_fields.npz").exists()
    assert json.loads((out_dir / "summary.json").read_text())["tau_hat"] == 0.1


def test_validate_subset(capsys):
    code, out = _run(capsys, ["validate", "--only", "1"])
    assert code == EXIT_OK
    assert out.splitlines()[0].startswith("[PASS]  1")


def test_dumps_rounds_and_sorts():
    text = dumps({"b": 1 / 3, "a": [complex(1, 2)], "c": float("nan")})
    assert text.index('"a"') < text.index('"b"')
    assert "0.333333333333" in text and "0.3333333333333" not in text
    assert json.loads(text)["c"] is None
