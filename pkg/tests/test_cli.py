import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from osvardl.cli import EXIT_INGEST, EXIT_NUMERICAL, EXIT_OK, main
from osvardl.osv import read_events_csv
from osvardl.series import read_series_csv

WINDOW = ["--window-start", "2022-01-01", "--window-end", "2023-06-30"]


def tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def synthetic(tmp_path_factory):
    base = tmp_path_factory.mktemp("synthetic")
    snap = base / "snapshot"
    assert main(["simulate", "--snapshot", str(snap), "--seed", "3", *WINDOW]) == EXIT_OK
    out = base / "out"
    rc = main(["pipeline", "--snapshot", str(snap), "--output-dir", str(out), *WINDOW])
    return snap, out, rc


def test_ingest_fixture(snapshot_dir, tmp_path):
    assert main(["ingest", "--snapshot", str(snapshot_dir), "--output-dir", str(tmp_path)]) == EXIT_OK
    with open(tmp_path / "breakdown.csv", newline="") as fh:
        rows = {r["ecosystem"]: r for r in csv.DictReader(fh)}
    assert rows["Go"] == {"ecosystem": "Go", "all_entries": "7", "malware_entries": "1",
                          "malware_share": "14.29"}
    assert rows["npm"]["malware_share"] == "80.00"
    info = json.loads((tmp_path / "ingest.json").read_text())
    assert (info["records_read"], info["event_rows"], info["dropped_out_of_scope"]) == (60, 53, 8)
    assert len(read_events_csv(tmp_path / "events.csv")) == 53


def test_ingest_empty_directory(tmp_path):
    (tmp_path / "empty").mkdir()
    rc = main(["ingest", "--snapshot", str(tmp_path / "empty"), "--output-dir", str(tmp_path / "o")])
    assert rc == EXIT_INGEST


def test_ingest_three_records(snapshot_dir, tmp_path):
    snap = tmp_path / "snap"
    (snap / "npm").mkdir(parents=True)
    for name in ("MAL-2022-0001", "MAL-2022-0002", "GHSA-npm1-aaaa-0001"):
        shutil.copy(snapshot_dir / "npm" / f"{name}.json", snap / "npm")
    assert main(["ingest", "--snapshot", str(snap), "--output-dir", str(tmp_path / "o")]) == EXIT_OK
    lines = (tmp_path / "o" / "events.csv").read_text().splitlines()
    assert lines[0] == "date,ecosystem,kind,advisory_count,article_count"
    assert len(lines) == 4


def test_pipeline_outputs(synthetic):
    _, out, rc = synthetic
    assert rc == EXIT_OK
    for gran, T in (("daily", 546), ("weekly", 77), ("monthly", 18)):
        assert read_series_csv(out / f"series_{gran}.csv", gran).T == T
    with open(out / "orders.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["target", "daily", "weekly", "monthly"]
    assert [r[0] for r in rows[1:]] == ["Frequency", "Share"]
    summary = json.loads((out / "summary.json").read_text())
    assert len(summary["models"]) == 6
    model = out / "models" / "weekly_share"
    for name in ("trace.jsonl", "orders.json", "fit.json", "lrm.csv", "dm_eco.csv", "acf.csv",
                 "qq.csv", "fitted.csv", "diagnostics.json"):
        assert (model / name).is_file(), name
    diag = json.loads((model / "diagnostics.json").read_text())
    assert diag["share_exceedance_pct"] is not None


def test_fitted_csv_identity(synthetic):
    _, out, _ = synthetic
    data = np.genfromtxt(out / "models" / "daily_freq" / "fitted.csv", delimiter=",", names=True)
    assert np.allclose(data["fitted"] + data["residual"], data["observed"], rtol=0, atol=1e-12)


def test_series_round_trip_full_precision(synthetic, tmp_path):
    _, out, _ = synthetic
    bundle = read_series_csv(out / "series_daily.csv", "daily")
    from osvardl.series import write_series_csv

    write_series_csv(bundle, tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_bytes() == (out / "series_daily.csv").read_bytes()


def test_rerun_is_byte_identical(synthetic, tmp_path):
    snap, out, _ = synthetic
    again = tmp_path / "again"
    main(["pipeline", "--snapshot", str(snap), "--output-dir", str(again), *WINDOW])
    assert tree(again) == tree(out)


def test_fixed_orders_skip_selection(synthetic, tmp_path):
    snap, _, _ = synthetic
    out = tmp_path / "fixed"
    rc = main(["pipeline", "--snapshot", str(snap), "--output-dir", str(out), "--orders", "2,1,1,1",
               "--granularities", "monthly", *WINDOW])
    assert rc == EXIT_OK
    assert json.loads((out / "models" / "monthly_share" / "orders.json").read_text())["orders"] == [2, 1, 1, 1]


def test_config_file_and_override(synthetic, tmp_path):
    snap, _, _ = synthetic
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        f'snapshot_path = "{snap}"\noutput_dir = "cfg_out"\nwindow_start = "2022-01-01"\n'
        'window_end = "2023-06-30"\ngranularities = ["monthly"]\ntarget = "share"\n'
    )
    rc = main(["pipeline", "--config", str(cfg), "--target", "freq"])
    assert rc == EXIT_OK
    models = sorted(p.name for p in (tmp_path / "cfg_out" / "models").iterdir())
    assert models == ["monthly_freq"]


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('no_such_key = 1\n')
    with pytest.raises(SystemExit):
        main(["build", "--config", str(cfg)])


def test_fixture_pipeline_numerical_failure_is_deterministic(snapshot_dir, tmp_path):
    # Monthly MalFreq of the fixture equals Eco in every period, so log1p(y)
    # and log1p(eco) coincide and the design is singular.
    codes, trees = [], []
    for name in ("a", "b"):
        out = tmp_path / name
        codes.append(main(["pipeline", "--snapshot", str(snapshot_dir), "--output-dir", str(out)]))
        trees.append(tree(out))
    assert codes == [EXIT_NUMERICAL, EXIT_NUMERICAL]
    assert trees[0] == trees[1]
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["models"]["monthly_freq"]["status"] == "numerical_failure"
    assert "eco.L1" in summary["models"]["monthly_freq"]["message"]
    assert summary["models"]["monthly_share"]["status"] == "ok"


def test_module_entry_point(snapshot_dir, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "osvardl", "ingest", "--snapshot", str(snapshot_dir),
                           "--output-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "event rows: 53" in proc.stdout
