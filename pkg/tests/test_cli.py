import io
import json
import os

import numpy as np
import pytest

from dissipscat import cli
from dissipscat.errors import ConfigError


def load(root):
    with open(os.path.join(root, "report.json")) as fh:
        return json.load(fh)


def test_presets_table():
    buf = io.StringIO()
    names = cli.list_presets(buf)
    for need in ("acceptance/ads-exactness", "acceptance/backscatter-sphere",
                 "acceptance/boundary-factorization", "acceptance/solver-decay",
                 "acceptance/translation", "acceptance/moments", "acceptance/dminus",
                 "acceptance/peak-ratio"):
        assert need in names
    again = io.StringIO()
    cli.list_presets(again)
    assert buf.getvalue() == again.getvalue()
    for exp, params, _ in cli.PRESETS.values():
        cli.make_config(exp, params)


def test_coerce_and_config_errors():
    assert cli.coerce("epsilon", "4/3", 0.5) == pytest.approx(4 / 3)
    assert cli.coerce("radius", "8, 12", (1.0,)) == (8.0, 12.0)
    assert cli.coerce("control", "no", True) is False
    with pytest.raises(ConfigError):
        cli.coerce("nr", "many", 3)
    with pytest.raises(ConfigError):
        cli.make_config("decay", {"bogus": "1"})
    with pytest.raises(ConfigError):
        cli.make_config("nonexistent")
    cfg = cli.make_config("evolve", {"snapshot-every": "3"})
    assert cfg.params["snapshot_every"] == 3


def test_bad_key_exit_code(tmp_path, capsys):
    assert cli.main(["ads-verify", "bogus=1", "--output", str(tmp_path)]) == 2
    assert cli.main(["preset", "no/such", "--output", str(tmp_path)]) == 2
    assert cli.main(["not-a-command"]) == 2
    assert "config error" in capsys.readouterr().err


def test_ads_verify_exit_zero_and_deterministic(tmp_path):
    args = ["ads-verify", "epsilon=0.5", "points=500", "eigen_points=100",
            "--output", str(tmp_path)]
    assert cli.main(args) == 0
    first = load(tmp_path)
    assert all(c["passed"] for c in first["criteria"])
    assert cli.main(args) == 0
    second = load(tmp_path)
    strip = lambda m: {k: {a: b for a, b in v.items() if a != "seconds"} for k, v in m.items()}
    assert strip(first["measurements"]) == strip(second["measurements"])
    with open(tmp_path / "runs.jsonl") as fh:
        assert len(fh.readlines()) == 2


def test_decay_writes_energy(tmp_path):
    code = cli.main(["decay", "--epsilon", "4/3", "--nr", "96", "--ntheta", "16",
                     "--output", str(tmp_path)])
    assert code == 0
    rep = load(tmp_path)
    assert rep["measurements"]["rate"] == pytest.approx(-0.5, rel=0.05)
    data = np.loadtxt(tmp_path / "energy.dat")
    assert data.shape[1] == 2 and data[0, 0] == 0.0
    with open(tmp_path / "summary.csv") as fh:
        assert fh.readline().strip() == "criterion,value,threshold,pass,hard"


def test_evolve_flags(tmp_path):
    code = cli.main(["evolve", "--epsilon", "pmc", "--nr", "48", "--ntheta", "12",
                     "--tfinal", "0.3", "--rmax", "5", "--probe", "0,2,0",
                     "--output", str(tmp_path)])
    assert code == 0
    rep = load(tmp_path)
    assert rep["config"]["boundary"] == "pmc"
    assert os.path.exists(tmp_path / "probe0_E3.dat")


def test_config_file(tmp_path):
    cfg = tmp_path / "study.cfg"
    cfg.write_text(f"seed = 7\noutput = {tmp_path / 'out'}\n\n"
                   "[hull:small]\ndirections = 120\ntolerance = 0.05\n\n"
                   "[boundary-classify]\ncount = 10\n")
    configs = cli.read_config(cfg)
    assert [c.label for c in configs] == ["small", "boundary-classify"]
    assert configs[0].seed == 7
    assert cli.main(["run", str(cfg)]) == 0
    assert os.path.exists(tmp_path / "out" / "small" / "hull_vertices.csv")
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = red\n[hull]\n")
    assert cli.main(["run", str(bad)]) == 2


def test_backscatter_artifacts(tmp_path):
    code = cli.main(["backscatter", "sigma=0.2", "directions=1", "control=false",
                     "--output", str(tmp_path)])
    assert code == 0
    for j in (1, 2):
        for k in (1, 2):
            assert os.path.exists(tmp_path / f"kernel_{j}{k}.dat")
    side = json.loads((tmp_path / "direction_0" / "kernel.json").read_text())
    assert side["pass"] and side["bound"] == pytest.approx(2.0)


def test_empty_report(tmp_path):
    rep = cli.RunReport("none", {})
    cli.emit_report(rep, str(tmp_path))
    assert load(tmp_path)["criteria"] == []
    assert sorted(os.listdir(tmp_path)) == ["report.json", "runs.jsonl"]
    assert rep.ok


def test_atomic_path_cleans_up(tmp_path):
    target = tmp_path / "x.txt"
    with pytest.raises(RuntimeError):
        with cli.atomic_path(str(target)) as tmp:
            open(tmp, "w").write("partial")
            raise RuntimeError
    assert os.listdir(tmp_path) == []
