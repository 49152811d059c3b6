import numpy as np
import pytest

from qlr.ensemble import synth_instance
from qlr.optimizer import OptimizerConfig, run
from qlr.report import (
    format_real,
    read_report,
    summarize,
    trajectory_rows,
    write_report,
)


def test_format_real_roundtrips_float64():
    g = np.random.Generator(np.random.Philox(0))
    for x in g.standard_normal(200) * 10 ** g.uniform(-300, 300, 200):
        assert float(format_real(x)) == x


def test_rows_and_roundtrip(tmp_path):
    inst = synth_instance(m=10, n=8, d=20, outliers=1, gain=4.0, seed=2)
    traj = run(inst.w, inst.h, OptimizerConfig(rank=2, outer_iters=3))
    rows = trajectory_rows(traj, seed=2, strategy="zero", rank=2, k=0, q_bits=2, lr_bits=None)
    assert len(rows) == 3
    path = tmp_path / "report.csv"
    write_report(path, rows)
    parsed = read_report(path)
    assert parsed[0]["lr_bits"] == 16
    for rec, row in zip(traj.records, parsed):
        assert row["act_err"] == rec.act_err  # 17 significant digits round-trip
        assert row["q_scale"] == rec.q_scale


def test_read_report_rejects_bad_header(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("wrong,header\n")
    with pytest.raises(ValueError):
        read_report(path)


def test_summarize_win_rates():
    errs = {
        ("zero", 4, 0): 0.5, ("zero", 4, 1): 0.5,
        ("odlri", 4, 0): 0.4, ("odlri", 4, 1): 0.6,
    }
    text = summarize(errs, ["zero", "odlri"])
    lines = text.splitlines()
    assert lines[0] == "strategy,mean_final_act_err,win_rate_vs_zero"
    assert lines[1].startswith("zero,") and lines[1].endswith(",-")
    assert lines[2].split(",")[2] == "0.5000"
