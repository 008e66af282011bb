import json
import math

import pytest

from logbouss import __version__
from logbouss.cli import main
from logbouss.io import read_csv

SMALL_VERIFY = """
grid = 64
alphas = [0.5]
betas = [1.0]
p_list = [2.0]
eps_list = [0.3]
refine_check = false
"""


@pytest.fixture
def small_verify(tmp_path):
    path = tmp_path / "verify.toml"
    path.write_text(SMALL_VERIFY)
    return str(path)


def files(d):
    return sorted(p.name for p in d.iterdir())


def test_kernel_single_point(tmp_path, capsys):
    out = tmp_path / "k"
    cfg = tmp_path / "k.toml"
    cfg.write_text("alphas = [1.0]\nbetas = [1.0]\ndims = [2]\ntimes = [1.0]\nkernel_radii = 31\n")
    assert main(["kernel", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "kernel_scan.csv")
    assert len(rows) == 1
    assert abs(float(rows[0]["mass"]) - 1) <= 1e-6
    assert rows[0]["askey_phi1"] == "true"
    assert rows[0]["tool_version"] == __version__
    assert str(out / "kernel_scan.csv") in capsys.readouterr().out


def test_kernel_poisson_overlay_plot(tmp_path):
    pytest.importorskip("matplotlib")
    out = tmp_path / "k"
    cfg = tmp_path / "k.toml"
    cfg.write_text("alphas = [0.0]\nbetas = [1.0]\ndims = [1]\ntimes = [1.0]\nkernel_radii = 41\n")
    assert main(["kernel", "--config", str(cfg), "--out", str(out), "--plots"]) == 0
    svg = (out / "kernel_curves.svg").read_text()
    assert "<svg" in svg
    assert (out / "positivity_map.svg").exists()


def test_kernel_empty_range(tmp_path, capsys):
    cfg = tmp_path / "k.toml"
    cfg.write_text("alphas = []\n")
    assert main(["kernel", "--config", str(cfg), "--out", str(tmp_path / "k")]) == 2
    assert "empty parameter range" in capsys.readouterr().err
    assert not (tmp_path / "k").exists()


def test_askey_reports_violation(tmp_path):
    cfg = tmp_path / "a.toml"
    cfg.write_text("alphas = [5.0]\nbetas = [1.0]\nlambdas = [1.1]\n")
    assert main(["askey", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    row = read_csv(tmp_path / "askey.csv")[0]
    assert row["phi1"] == "false" and row["above_threshold"] == "false"
    assert 0.02 < float(row["first_violation_r"]) < 0.03


def test_simulate_unknown_preset(tmp_path, capsys):
    assert main(["simulate", "--preset", "nope", "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "available presets" in err and "maxprinciple" in err


def test_simulate_galilean(tmp_path):
    assert main(["simulate", "--preset", "galilean", "--grid", "32", "--out", str(tmp_path)]) == 0
    assert files(tmp_path) == ["trajectory.csv", "trajectory.json"]
    meta = json.loads((tmp_path / "trajectory.json").read_text())
    assert meta["preset"] == "galilean" and meta["grid"] == 32 and meta["version"] == __version__


def test_simulate_preset_options_from_config(tmp_path):
    cfg = tmp_path / "s.toml"
    cfg.write_text('[simulate]\npreset = "euler-check"\ngrid = 32\n[simulate.preset_options]\nt_end = 0.5\n')
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "trajectory.csv")
    assert float(rows[-1]["t"]) == pytest.approx(0.5)
    w = [float(r["omega_Linf"]) for r in rows]
    assert max(abs(x / w[0] - 1) for x in w) <= 1e-5


def test_simulate_cfl_abort(tmp_path, capsys):
    cfg = tmp_path / "s.toml"
    cfg.write_text('[simulate]\npreset = "maxprinciple"\ngrid = 32\n[simulate.preset_options]\ndt = 1.0\nsteps = 2\n')
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "CFL" in err and "step=1" in err


def test_verify_default_style_passes(tmp_path, small_verify):
    assert main(["verify", "--config", small_verify, "--out", str(tmp_path / "o")]) == 0
    assert files(tmp_path / "o") == ["verify_cases.csv", "verify_summary.csv", "verify_summary.json"]


def test_verify_ceiling_zero_fails(tmp_path, small_verify, capsys):
    assert main(["verify", "--config", small_verify, "--out", str(tmp_path), "--ceiling", "0"]) == 1
    assert "verification failed" in capsys.readouterr().err
    assert json.loads((tmp_path / "verify_summary.json").read_text())["passed"] is False


def test_verify_json_only_writes_no_svg(tmp_path, small_verify):
    assert main(["verify", "--config", small_verify, "--out", str(tmp_path / "o"), "--json-only", "--plots"]) == 0
    assert files(tmp_path / "o") == ["verify_summary.json"]


@pytest.mark.parametrize("command", ["bernstein", "commutator"])
def test_sub_suites(tmp_path, small_verify, command):
    assert main([command, "--config", small_verify, "--out", str(tmp_path)]) == 0
    names = {r["report"].split(":")[1].split("[")[0] for r in read_csv(tmp_path / "verify_summary.csv")}
    if command == "bernstein":
        assert names == {"generalized_bernstein", "multiplier_bernstein", "multiplier_bernstein_Sq"}
    else:
        assert names == {"commutator_v1", "commutator_v2"}


def test_verify_byte_identical(tmp_path, small_verify, monkeypatch):
    monkeypatch.setenv("LOGBOUSS_THREADS", "2")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["verify", "--config", small_verify, "--out", str(a), "--seed", "5"]) == 0
    monkeypatch.setenv("LOGBOUSS_THREADS", "1")
    assert main(["verify", "--config", small_verify, "--out", str(b), "--seed", "5"]) == 0
    for name in ("verify_cases.csv", "verify_summary.csv", "verify_summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    raw = (a / "verify_cases.csv").read_bytes()
    assert raw.endswith(b"\r\n") and raw.splitlines()[0].endswith(b"config_hash,tool_version")


def test_seed_changes_hash(tmp_path, small_verify):
    main(["verify", "--config", small_verify, "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["verify", "--config", small_verify, "--out", str(tmp_path / "b"), "--seed", "2"])
    ha = read_csv(tmp_path / "a" / "verify_cases.csv")[0]["config_hash"]
    hb = read_csv(tmp_path / "b" / "verify_cases.csv")[0]["config_hash"]
    assert ha != hb and len(ha) == 64


def test_unwritable_output(tmp_path, small_verify, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["verify", "--config", small_verify, "--out", str(blocker / "sub")]) == 2
    assert "error" in capsys.readouterr().err


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_parallel_scan_matches_serial(tmp_path, monkeypatch):
    cfg = tmp_path / "k.toml"
    cfg.write_text("alphas = [0.0, 1.0]\nbetas = [1.0]\ndims = [1]\ntimes = [1.0]\nkernel_radii = 21\n")
    monkeypatch.setenv("LOGBOUSS_THREADS", "1")
    main(["kernel", "--config", str(cfg), "--out", str(tmp_path / "s")])
    monkeypatch.setenv("LOGBOUSS_THREADS", "3")
    main(["kernel", "--config", str(cfg), "--out", str(tmp_path / "p")])
    for name in ("kernel_scan.csv", "kernel_values.csv", "kernel_summary.json"):
        assert (tmp_path / "s" / name).read_bytes() == (tmp_path / "p" / name).read_bytes()
    assert not math.isnan(float(read_csv(tmp_path / "s" / "kernel_scan.csv")[0]["mass"]))
