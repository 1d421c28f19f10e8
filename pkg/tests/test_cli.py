import csv
import io
import json
import math

import pytest

from smectic_fem import cli
from smectic_fem.cli import StudyConfig, main, rerun, run_study, sweep_q, to_csv, to_json
from smectic_fem.linalg import SolverError
from smectic_fem.norms import NORMS

SMALL = dict(method="c0ip", k=2, levels=(2, 4), q=4.0, B=1.0)


@pytest.fixture(scope="module")
def study():
    return run_study(StudyConfig(**SMALL))


def test_csv_and_json_carry_identical_values(study):
    rows = list(csv.DictReader(io.StringIO(to_csv(study))))
    doc = json.loads(to_json(study))
    assert len(rows) == len(doc["reports"]) == 2
    for row, rep in zip(rows, doc["reports"]):
        assert int(row["n"]) == rep["n"] and int(row["dofs"]) == rep["dofs"]
        for name in NORMS["c0ip"]:
            assert float(row[name]) == rep["errors"][name]
        assert float(row["residual"]) == rep["residual"]
    assert doc["config"]["levels"] == [2, 4]
    assert set(doc["slopes"]) == set(NORMS["c0ip"])
    assert doc["failed"] is False


def test_csv_header(study):
    header = to_csv(study).splitlines()[0]
    assert header == "method,k,n,h,dofs,l2,h2q,triple,residual,seconds"


def test_slopes_have_both_signs(study):
    for s in study.slopes().values():
        assert s["slope"] == -s["order"]


def test_rerun_from_json_is_deterministic(study):
    doc = json.loads(to_json(study))
    again = rerun(doc["config"])
    for a, b in zip(study.reports, again.reports):
        assert a.errors == b.errors


@pytest.mark.parametrize("bad", [
    dict(method="argyris", k=3),
    dict(method="c0ip", k=5),
    dict(method="mixed", k=4),
    dict(levels=(8, 12)),
    dict(levels=(16, 8)),
    dict(levels=()),
    dict(levels=(64, 256)),
    dict(solution="gaussian"),
    dict(B=0.0),
    dict(sweep_q=(8.0,)),
    dict(method="nope"),
])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        StudyConfig(**bad)


def test_paper_scale_unlocks_large_levels():
    cfg = StudyConfig(levels=(64, 256), paper_scale=True)
    assert cfg.levels == (64, 256)


def test_B_qinv4():
    cfg = StudyConfig(q=10.0)
    assert cfg.B_value() == pytest.approx(1e-4)
    assert cfg.params(20.0).B == pytest.approx(20.0**-4)


def test_count_only_prints_sizes(capsys):
    assert main(["--method", "argyris", "--levels", "64,128,256,512", "--paper-scale", "--count-only"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "method,k,n,dofs"
    assert [int(line.split(",")[-1]) for line in out[1:]] == [37766, 149254, 593414, 2366470]


def test_bad_arguments_exit_with_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--method", "c0ip", "--degree", "7"])
    assert info.value.code == 2
    with pytest.raises(SystemExit):
        main(["--boundary", "S=02,N=01,E=32,W=99"])


def test_main_writes_outputs(tmp_path, capsys):
    prefix = tmp_path / "run" / "c0ip2"
    code = main(["--method", "c0ip", "--degree", "2", "--levels", "2,4", "--q", "4", "--B", "1",
                 "--out", str(prefix), "--plot", "--dump-mesh", "--dump-matrix"])
    assert code == 0
    for suffix in (".csv", ".json", ".svg", "_n2_mesh.txt", "_n4_matrix.txt"):
        assert (tmp_path / "run" / f"c0ip2{suffix}").exists()
    out = capsys.readouterr().out
    assert "# l2: order" in out


def test_failed_level_gives_exit_code_2(monkeypatch, tmp_path, capsys):
    def broken(*args, **kwargs):
        raise SolverError("matrix is singular", pivot=0)

    monkeypatch.setattr(cli, "solve_direct", broken)
    code = main(["--method", "c0ip", "--degree", "2", "--levels", "2,4", "--out", str(tmp_path / "x")])
    assert code == 2
    doc = json.loads((tmp_path / "x.json").read_text())
    assert doc["failed"] is True
    assert all(r["status"].startswith("failed") for r in doc["reports"])
    assert all(v is None for v in doc["reports"][0]["errors"].values())
    assert doc["slopes"] == {}


def test_sweep_over_q():
    res = sweep_q(StudyConfig(**SMALL), qs=(4.0, 8.0))
    assert res.abscissa == "q" and res.qs == (4.0, 8.0)
    assert [r.n for r in res.reports] == [4, 4]
    rows = list(csv.DictReader(io.StringIO(to_csv(res))))
    assert [float(r["q"]) for r in rows] == [4.0, 8.0]
    for name, s in res.slopes().items():
        assert s["slope"] == s["order"] and math.isfinite(s["slope"])


def test_sweep_needs_two_q_values():
    with pytest.raises(ValueError, match="two"):
        sweep_q(StudyConfig(**SMALL), qs=(8.0,))
