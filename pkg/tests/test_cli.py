import json
import subprocess
import sys

import pytest

from coincidence.cli import main
from coincidence.tags import read_tags


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_rate(capsys):
    code, out, _ = run(capsys, "rate", "--target-rate", "1")
    doc = json.loads(out)
    assert code == 0
    assert doc["rate_hz"] == pytest.approx(0.13e-3, rel=0.05)
    labels = [i["label"] for i in doc["inversions"]]
    assert labels == ["r_min", "target_0"]
    assert doc["inversions"][1]["over_cap"]


def test_metrics_with_override(capsys, tmp_path):
    out = tmp_path / "m.json"
    code, _, _ = run(capsys, "metrics", "--override", "pump.average_power=5", "--out", str(out))
    doc = json.loads(out.read_text())
    assert code == 0
    assert doc["source"]["rate_hz"] == pytest.approx(0.5 * 1.3338524770082881e-4, rel=1e-9)
    assert doc["metrics"]["n_target"] == 100


def test_sweep_writes_csv_and_png(capsys, tmp_path):
    code, _, _ = run(capsys, "sweep", "--out", str(tmp_path))
    assert code == 0
    for kind in ("capacity", "regimes", "design", "detectors", "axis"):
        assert (tmp_path / f"{kind}.csv").read_text().count("\n") > 2
        assert (tmp_path / f"{kind}.png").exists()


def test_sweep_single_to_stdout(capsys):
    code, out, _ = run(capsys, "sweep", "--figure", "capacity")
    assert code == 0 and out.startswith("n,p_avalanche")
    code, _, err = run(capsys, "sweep")
    assert code == 2 and "--out" in err


def test_simulate_histogram_characterize(capsys, tmp_path):
    ov = ["--override", "source.p_arrival=0.01", "--override", "channel_defaults.p_path=1"]
    code, out, _ = run(capsys, "simulate", "--cycles", "100000", "--dark", "--out", str(tmp_path), *ov)
    assert code == 0
    report = json.loads(out)
    assert report["bright"]["summary"]["cycles"] == 100000
    bright = read_tags(tmp_path / "bright.tags")
    assert bright.header.seed == 20231
    code, out, _ = run(capsys, "histogram", "--tags", str(tmp_path / "bright.tags"), "--max-delay", "2")
    assert code == 0 and out.splitlines()[0] == "delay,count" and len(out.splitlines()) == 6
    code, out, _ = run(capsys, "characterize", "--bright", str(tmp_path / "bright.tags"),
                       "--dark", str(tmp_path / "dark.tags"), *ov)
    doc = json.loads(out)
    assert code == 0
    assert abs(doc["p_s"] - 0.01) < 3 * doc["p_s_err"]


def test_simulate_csv_variant(capsys, tmp_path):
    code, _, _ = run(capsys, "simulate", "--cycles", "1000", "--seed", "4", "--csv", "--out", str(tmp_path))
    assert code == 0 and (tmp_path / "bright.csv").read_text().startswith("# {")


def test_exit_codes(capsys, tmp_path):
    assert run(capsys, "metrics", "--config", "missing")[0] == 2
    assert run(capsys, "metrics", "--override", "pump.average_power=-1")[0] == 2
    assert run(capsys, "histogram", "--tags", str(tmp_path / "none.tags"))[0] == 4
    bad = tmp_path / "bad.tags"
    bad.write_bytes(b"junk\n")
    assert run(capsys, "histogram", "--tags", str(bad))[0] == 4
    single = tmp_path / "one"
    run(capsys, "simulate", "--cycles", "10", "--out", str(single), "--override", "n_channels=1",
        "--override", "source.p_arrival=0.1")
    assert run(capsys, "histogram", "--tags", str(single / "bright.tags"))[0] == 3


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "coincidence", "rate"], capture_output=True, text=True)
    assert res.returncode == 0 and "rate_hz" in res.stdout
