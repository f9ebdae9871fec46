import numpy as np
import pytest

from hvdc_ofo.cli import main
from hvdc_ofo.scenario import bundled

GRID = """
[stations]
a, dcgfm, 1500
b, dcgfm, 1000
c, dcgfm, 500
p, acgfm, 1000
q, acgfm, 1000
[lines]
a, p, 120
b, p, 200
b, q, 150
c, q, 80
p, q, 300
"""

SCN = """
[scenario]
topology = small.grid
case = custom
duration = 4
activation_time = 1
[limits]
v_min_pu = 0.95
v_max_pu = 1.0
i_scale = 1
[gains]
k_p = 200
k_d_i = 10
k_d_v = 10
[cost]
p_u = 0.01
p_y = 0.6667, 1, 2
[schedule]
0, p, 600
0, q, -300
"""

TOY_LOSS = """
[scenario]
case = loss
v_nom = 1000
[model]
k_g = 2, -1; -1, 2
w = 1, -3
[limits]
u_min = -1000, -1000
u_max = 1000, 1000
"""


@pytest.fixture
def small(tmp_path):
    (tmp_path / "small.grid").write_text(GRID)
    (tmp_path / "small.scn").write_text(SCN)
    return tmp_path


def fields(text):
    return dict(line.split(" = ", 1) for line in text.strip().splitlines() if " = " in line)


def test_validate_bundled(capsys):
    assert main(["validate", "--case", "proportional"]) == 0
    assert main(["validate", str(bundled("replica12.grid"))]) == 0
    assert "12" not in capsys.readouterr().err


def test_validate_rejects_inverted_box(small, capsys):
    p = small / "bad.scn"
    p.write_text(SCN.replace("v_max_pu = 1.0", "v_max_pu = 0.9"))
    assert main(["validate", str(p)]) == 1
    assert "bad.scn:" in capsys.readouterr().err


def test_missing_topology_names_path(small, capsys):
    p = small / "nogrid.scn"
    p.write_text(SCN.replace("small.grid", "absent.grid"))
    assert main(["run", str(p), "--out", str(small / "o")]) == 1
    assert "absent.grid" in capsys.readouterr().err


def test_oracle_toy(tmp_path, capsys):
    out = tmp_path / "kkt.txt"
    assert main(["oracle", str(bundled("toy_n1.scn")), "--out", str(out)]) == 0
    f = fields(out.read_text())
    assert float(f["u"]) == -2.0
    assert float(f["lambda_min"]) == pytest.approx(3.0)


def test_oracle_wide_limits_surrogate_is_zero(tmp_path, capsys):
    p = tmp_path / "sur.scn"
    p.write_text(TOY_LOSS.replace("case = loss", "case = loss_surrogate"))
    assert main(["oracle", str(p)]) == 0
    u = np.array([float(x) for x in fields(capsys.readouterr().out)["u"].split(",")])
    assert np.abs(u).max() < 1e-9


def test_oracle_wide_limits_loss(tmp_path, capsys):
    p = tmp_path / "loss.scn"
    p.write_text(TOY_LOSS)
    assert main(["oracle", str(p)]) == 0
    u = np.array([float(x) for x in fields(capsys.readouterr().out)["u"].split(",")])
    # minimizer of u'(K u + w) + V_nom 1'(K u + w) is interior here
    K = np.array([[2.0, -1.0], [-1.0, 2.0]])
    expected = np.linalg.solve(2 * K, -(np.array([1.0, -3.0]) + 1000 * K @ np.ones(2)))
    assert u == pytest.approx(expected)


def test_oracle_infeasible_exit_4(tmp_path, capsys):
    p = tmp_path / "inf.scn"
    p.write_text(bundled("toy_n1.scn").read_text().replace("u_max = 2", "u_max = 2\ni_min = 10\ni_max = 20"))
    assert main(["oracle", str(p)]) == 4
    assert "certificate" in capsys.readouterr().err


def test_run_writes_artifacts_reproducibly(small, capsys):
    args = ["run", str(small / "small.scn"), "--out"]
    assert main(args + [str(small / "r1")]) == 0
    assert main(args + [str(small / "r2")]) == 0
    for name in ("trajectory.csv", "triggers.csv", "summary.txt", "trigger_report.txt"):
        assert (small / "r1" / name).read_bytes() == (small / "r2" / name).read_bytes()
    f = fields((small / "r1" / "summary.txt").read_text())
    assert f["converged"] == "true"
    assert float(f["kkt_worst_relative"]) < 1e-4


def test_run_not_converged_exit_2(small, capsys):
    assert main(["run", str(small / "small.scn"), "--k-p", "1e-3", "--out", str(small / "o")]) == 2
    assert "did not converge" in capsys.readouterr().err


def test_run_collapse_exit_3(small, capsys):
    p = small / "heavy.scn"
    p.write_text(SCN.replace("0, q, -300", "0, q, -400000"))
    assert main(["run", str(p), "--out", str(small / "o")]) == 3
    assert "collapse" in capsys.readouterr().err


def test_run_overrides(small, capsys):
    assert main(["run", str(small / "small.scn"), "--comm", "event", "--sigma-x", "5",
                 "--t-max", "0.5", "--duration", "3", "--out", str(small / "ev")]) == 0
    f = fields((small / "ev" / "summary.txt").read_text())
    assert f["comm_mode"] == "event"
    assert f["u_error_bound"] == "10"


def test_compare_comm(small, capsys):
    assert main(["compare-comm", str(small / "small.scn"), "--out", str(small / "cc")]) == 0
    f = fields((small / "cc" / "compare_comm.txt").read_text())
    assert float(f["terminal_u_difference_inf"]) <= float(f["bound"])
    for kind in ("y", "x_p", "G_P"):
        assert int(f[f"event.{kind}.count"]) < int(f[f"periodic.{kind}.count"])
        assert f[f"event.{kind}.violations"] == "0"


def test_run_loss_case_beats_droop(tmp_path, capsys):
    assert main(["run", "--case", "loss", "--duration", "16", "--out", str(tmp_path)]) == 0
    f = fields((tmp_path / "summary.txt").read_text())
    assert float(f["loss_droop"]) >= float(f["loss_ofo"])
