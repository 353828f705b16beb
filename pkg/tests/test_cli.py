import csv
import json

import pytest

from alphacoda.cli import fmt, main, to_json, write_atomic

FAST_MODEL = '[model]\nk_rule = 2\nmodel_rule = "rwd"\n'


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory, synthetic_tables):
    root = tmp_path_factory.mktemp("data")
    (root / "female.txt").write_text(synthetic_tables["female"])
    (root / "male.txt").write_text(synthetic_tables["male"])
    lines = synthetic_tables["female"].splitlines()
    broken = lines[:36] + [" ".join(lines[36].split()[:8])] + lines[37:]
    (root / "broken.txt").write_text("\n".join(broken) + "\n")
    return root


def write_config(path, text):
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------- helpers

def test_fmt_twelve_significant_digits():
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt(2.0) == "2"
    assert fmt(None) == ""
    assert json.loads(to_json({"x": 1 / 3}))["x"] == 0.333333333333


def test_write_atomic_replaces(tmp_path):
    target = tmp_path / "sub" / "a.txt"
    write_atomic(target, "one")
    write_atomic(target, "two")
    assert target.read_text() == "two"
    assert [p.name for p in target.parent.iterdir()] == ["a.txt"]


# ---------------------------------------------------------------- ingest

def test_ingest_valid(data_dir, tmp_path, capsys):
    assert main(["ingest", str(data_dir / "female.txt"), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "female_summary.json").read_text())
    assert (summary["n"], summary["D"]) == (100, 111)
    rows = read_csv(tmp_path / "female_series.csv")
    assert rows[0] == ["year", "age", "value"]
    assert len(rows) == 1 + 100 * 111


def test_ingest_truncated_names_line(data_dir, tmp_path, capsys):
    assert main(["ingest", str(data_dir / "broken.txt"), "--out", str(tmp_path)]) == 2
    assert "line 37" in capsys.readouterr().err


def test_ingest_missing_file(tmp_path):
    assert main(["ingest", str(tmp_path / "nope.txt"), "--out", str(tmp_path)]) == 2


def test_ingest_rebuild_reduces_zero_cells(data_dir, tmp_path):
    on, off = tmp_path / "on", tmp_path / "off"
    assert main(["ingest", str(data_dir / "female.txt"), "--out", str(on)]) == 0
    assert main(["ingest", str(data_dir / "female.txt"), "--no-rebuild-from-qx", "--out", str(off)]) == 0
    z_on = json.loads((on / "female_summary.json").read_text())["zero_cells"]
    z_off = json.loads((off / "female_summary.json").read_text())["zero_cells"]
    assert z_on <= z_off
    assert z_on != z_off


def test_ingest_csv_round_trip(data_dir, tmp_path):
    first = tmp_path / "a"
    assert main(["ingest", str(data_dir / "female.txt"), "--out", str(first)]) == 0
    second = tmp_path / "b"
    assert main(["ingest", str(first / "female_series.csv"), "--source", "csv", "--out", str(second)]) == 0
    assert (first / "female_series.csv").read_bytes() == (second / "female_series_series.csv").read_bytes()


# ---------------------------------------------------------------- config errors

def test_unknown_key_is_input_error(data_dir, tmp_path, capsys):
    cfg = write_config(tmp_path / "c.toml", f'[data]\npath = "{data_dir}/female.txt"\ncolour = "red"\n')
    assert main(["tune", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "colour" in capsys.readouterr().err


def test_bad_toml_is_input_error(tmp_path):
    cfg = write_config(tmp_path / "c.toml", "[data\npath = 1\n")
    assert main(["forecast", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_fixed_alpha_refuses_tuning(data_dir, tmp_path):
    cfg = write_config(tmp_path / "c.toml",
                       f'[data]\npath = "{data_dir}/female.txt"\n[transform]\nalpha = 0.3\n')
    assert main(["tune", "--config", cfg, "--out", str(tmp_path)]) == 4


def test_interval_criterion_without_bootstrap(data_dir, tmp_path):
    cfg = write_config(tmp_path / "c.toml", f'[data]\npath = "{data_dir}/female.txt"\n'
                       '[forecast]\nB = 0\n[experiment]\ncriteria = ["CPD_0.2"]\n')
    assert main(["evaluate", "--config", cfg, "--out", str(tmp_path)]) == 4


def test_relative_paths_resolve_against_config(data_dir, tmp_path):
    cfg = write_config(data_dir / "rel.toml", '[data]\npath = "female.txt"\n[transform]\nalpha = 0.3\n'
                       + FAST_MODEL + "[forecast]\nH = 2\nB = 0\n")
    assert main(["forecast", "--config", cfg, "--out", str(tmp_path)]) == 0


# ---------------------------------------------------------------- tune

def tune_config(tmp_path, data_dir):
    return write_config(tmp_path / "tune.toml", f'[data]\npath = "{data_dir}/female.txt"\n'
                        + FAST_MODEL + '[forecast]\nH = 10\n'
                        '[experiment]\ncriteria = ["KLD"]\ngrid_step = 0.25\nrefine = false\n')


def test_tune_outputs_and_determinism(data_dir, tmp_path):
    cfg = tune_config(tmp_path, data_dir)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["tune", "--config", cfg, "--out", str(a)]) == 0
    assert main(["tune", "--config", cfg, "--out", str(b)]) == 0
    profile = (a / "profile_female_KLD.csv").read_bytes()
    assert profile == (b / "profile_female_KLD.csv").read_bytes()
    rows = read_csv(a / "profile_female_KLD.csv")
    assert rows[0] == ["alpha", "error"] and len(rows) == 6
    meta = json.loads((a / "tune_female.json").read_text())
    best = min(rows[1:], key=lambda r: float(r[1]))
    assert meta["results"][0]["alpha_star"] == float(best[0])


# ---------------------------------------------------------------- forecast

def forecast_config(tmp_path, data_dir, B, extra=""):
    return write_config(tmp_path / f"fc{B}.toml", f'[data]\npath = "{data_dir}/female.txt"\n'
                        '[transform]\nalpha = 0.35\n' + FAST_MODEL
                        + f"[forecast]\nH = 10\nB = {B}\ngammas = [0.2, 0.05]\nseed = 5\n" + extra)


def test_forecast_with_bands(data_dir, tmp_path):
    cfg = forecast_config(tmp_path, data_dir, 200)
    assert main(["forecast", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "forecast_female.csv")
    assert rows[0] == ["year", "age", "point", "lb_0.2", "ub_0.2", "lb_0.05", "ub_0.05"]
    assert len(rows) == 1 + 10 * 111
    assert rows[1][:2] == ["2021", "0"]
    for r in rows[1:50]:
        lb95, lb80, p, ub80, ub95 = (float(r[i]) for i in (5, 3, 2, 4, 6))
        assert lb95 <= lb80 <= ub80 <= ub95
    meta = json.loads((tmp_path / "forecast_female.json").read_text())
    assert meta["K"] == 2 and meta["seed"] == 5 and meta["B"] == 200
    assert "clamp_count" in meta and len(meta["models"]) == 2
    assert (tmp_path / "fan_female.svg").read_text().startswith("<svg")


def test_forecast_point_only(data_dir, tmp_path):
    cfg = forecast_config(tmp_path, data_dir, 0)
    assert main(["forecast", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "forecast_female.csv")
    assert rows[0] == ["year", "age", "point"]
    assert len(rows) == 1 + 10 * 111


def test_forecast_bytes_reproducible(data_dir, tmp_path):
    cfg = forecast_config(tmp_path, data_dir, 100)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["forecast", "--config", cfg, "--out", str(a)]) == 0
    assert main(["forecast", "--config", cfg, "--out", str(b), "--threads", "3"]) == 0
    for name in ("forecast_female.csv", "forecast_female.json", "fan_female.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    c = tmp_path / "c"
    assert main(["forecast", "--config", cfg, "--out", str(c), "--seed", "6"]) == 0
    assert (a / "forecast_female.csv").read_bytes() != (c / "forecast_female.csv").read_bytes()


def test_small_bootstrap_is_contradiction(data_dir, tmp_path):
    cfg = forecast_config(tmp_path, data_dir, 20)
    assert main(["forecast", "--config", cfg, "--out", str(tmp_path)]) == 4


# ---------------------------------------------------------------- evaluate

def test_evaluate_tables(data_dir, tmp_path):
    cfg = write_config(tmp_path / "ev.toml",
                       f'[data]\npath = ["{data_dir}/female.txt", "{data_dir}/male.txt"]\n'
                       + FAST_MODEL + "[forecast]\nH = 10\nB = 0\n"
                       '[experiment]\nscheme = ["expanding", "rolling"]\n'
                       'methods = ["alpha", "ilr", "clr", "eda"]\ncriteria = ["KLD", "JSD_a", "JSD_g"]\n'
                       "grid_step = 0.25\nrefine = false\n")
    assert main(["evaluate", "--config", cfg, "--out", str(tmp_path)]) == 0
    tables = {}
    for scheme in ("expanding", "rolling"):
        rows = read_csv(tmp_path / f"comparison_{scheme}.csv")
        header, body = rows[0], rows[1:]
        tables[scheme] = body
        assert len(body) == 2 * 4 * 3
        for label in ("female", "male"):
            cells = [r for r in body if r[0] == label]
            assert len(cells) == 12
            assert all(r[header.index("failure")] == "" for r in cells)
            for crit in ("KLD", "JSD_a", "JSD_g"):
                best = [r for r in cells if r[2] == crit and r[header.index("best")] == "True"]
                assert best
        curves = read_csv(tmp_path / f"horizon_errors_{scheme}.csv")
        assert len(curves) == 1 + 2 * 4 * 3 * 10
        assert (tmp_path / f"fan_data_{scheme}.csv").exists()
        assert json.loads((tmp_path / f"comparison_{scheme}.json").read_text())
    assert tables["expanding"] != tables["rolling"]
    meta = json.loads((tmp_path / "evaluate.json").read_text())
    assert set(meta["tuned_alpha"]) == {"female", "male"}


def test_evaluate_all_failed_exit_3(data_dir, tmp_path):
    cfg = write_config(tmp_path / "ev.toml", f'[data]\npath = "{data_dir}/female.txt"\n'
                       "rebuild_from_qx = false\n" + FAST_MODEL + "[forecast]\nH = 5\nB = 0\n"
                       '[experiment]\nmethods = ["ilr"]\ncriteria = ["KLD"]\n')
    assert main(["evaluate", "--config", cfg, "--out", str(tmp_path)]) == 3
    rows = read_csv(tmp_path / "comparison_expanding.csv")
    assert rows[1][-1]


def test_threads_must_be_positive(data_dir, tmp_path):
    cfg = forecast_config(tmp_path, data_dir, 0)
    assert main(["forecast", "--config", cfg, "--out", str(tmp_path), "--threads", "0"]) == 2
