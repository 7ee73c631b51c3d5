from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest
import yaml

from conformal_lab import cli

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(json.dumps(data) if name.endswith(".json") else yaml.safe_dump(data))
    return str(p)


def records(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines()]


class TestMetricEval:
    def test_punctured_disk_grid(self, tmp_path):
        code = cli.main(["metric-eval", "--config", str(CONFIGS / "metric_eval.yaml"),
                         "--out", str(tmp_path)])
        assert code == 0
        rows = list(csv.DictReader((tmp_path / "metric_eval.csv").open(newline="")))
        assert len(rows) == 12
        assert [r["status"] for r in rows] == ["ok"] * 12
        for r in rows:
            assert float(r["numeric_curvature"]) == pytest.approx(-4.0, abs=1e-5)
        # radius-major order
        radii = [abs(complex(float(r["re"]), float(r["im"]))) for r in rows]
        assert radii == sorted(radii)

    def test_empty_sample_is_config_error(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.yaml", {"metric": {"name": "punctured_disk"},
                                         "sample": {"radii": [], "angles": 4}})
        assert cli.main(["metric-eval", "--config", cfg]) == 2
        assert "sample.radii" in capsys.readouterr().err

    def test_out_of_domain_row(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", {"metric": {"name": "punctured_disk"},
                                         "sample": {"points": [[0.5, 0.0], [1.5, 0.0]]}})
        assert cli.main(["metric-eval", "--config", cfg]) == 2
        out = capsys.readouterr().out.splitlines()
        assert out[1].endswith(",ok") and "error" in out[2]

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.yaml", {"metric": {"name": "punctured_disk", "alhpa": 1},
                                         "sample": {"radii": [0.1], "angles": 4}})
        assert cli.main(["metric-eval", "--config", cfg]) == 2
        assert "metric" in capsys.readouterr().err


class TestSolve:
    def test_manufactured(self, tmp_path):
        code = cli.main(["solve", "--config", str(CONFIGS / "solve_manufactured.yaml"),
                         "--out", str(tmp_path)])
        assert code == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["sup_error"] < 1e-4
        assert summary["grid"] == {"r_min": 1e-3, "r_max": 0.5, "Nr": 128, "Ntheta": 64}
        recs = records(tmp_path / "verdicts.jsonl")
        assert [r["check_id"] for r in recs] == ["solve-residual", "manufactured-error"]
        assert all(r["pass"] for r in recs)
        with (tmp_path / "u.csv").open(newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["r", "theta", "u"] and len(rows) == 1 + 128 * 64

    def test_nonnegative_kappa(self, tmp_path, capsys):
        code = cli.main(["solve", "--config", str(CONFIGS / "solve_manufactured.yaml"),
                         "--set", "kappa.coeffs=[-1.0, 10.0]"])
        assert code == 2
        assert "kappa" in capsys.readouterr().err

    def test_max_iter_zero(self, tmp_path):
        code = cli.main(["solve", "--config", str(CONFIGS / "solve_manufactured.yaml"),
                         "--set", "solver.max_iter=0", "--out", str(tmp_path)])
        assert code == 3
        (rec,) = records(tmp_path / "verdicts.jsonl")
        assert rec["status"] == "error" and rec["details"]["trace"]

    def test_explicit_boundary(self, tmp_path):
        cfg = write(tmp_path, "s.yaml", {"grid": {"r_min": 0.01, "r_max": 0.5, "Nr": 16, "Ntheta": 16},
                                         "kappa": {"coeffs": [-4.0, -4.0]},
                                         "boundary": {"inner": 0.0, "outer": 0.0}})
        assert cli.main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 0


class TestVerify:
    def test_all_checks_pass(self, tmp_path):
        assert cli.main(["verify", "--config", str(CONFIGS / "verify.yaml"), "--out", str(tmp_path)]) == 0
        recs = records(tmp_path / "verdicts.jsonl")
        assert all(r["pass"] for r in recs)
        assert list(recs[0]) == ["check_id", "theorem_tag", "expected", "measured", "tolerance",
                                 "pass", "status", "witness", "message", "details"]

    def test_jobs_do_not_change_output(self, tmp_path):
        base = ["verify", "--config", str(CONFIGS / "verify.yaml")]
        cli.main(base + ["--out", str(tmp_path / "a")])
        cli.main(base + ["--jobs", "3", "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "verdicts.jsonl").read_bytes() == (tmp_path / "b" / "verdicts.jsonl").read_bytes()

    def test_minda_corner_expected_zero(self, tmp_path, capsys):
        cfg = write(tmp_path, "v.yaml", {"checks": [{"tag": "minda",
                                                     "metric": {"name": "lambda_alpha_R", "alpha": 0.6}}]})
        assert cli.main(["verify", "--config", cfg]) == 0
        (rec,) = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
        assert rec["expected"] == 0.0

    def test_l_table_records(self, tmp_path, capsys):
        cfg = write(tmp_path, "v.yaml", {"checks": [{"tag": "l-table", "metric": {"name": "punctured_disk"},
                                                     "mode": "cusp", "n": 2}]})
        assert cli.main(["verify", "--config", cfg]) == 0
        recs = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
        ids = [r["check_id"] for r in recs]
        assert ids[:6] == [f"0:l-table[{a},{b}]" for a, b in [(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)]]
        assert recs[4]["expected"] == 0.125

    def test_unknown_tag(self, tmp_path, capsys):
        cfg = write(tmp_path, "v.yaml", {"checks": [{"tag": "thm9"}]})
        assert cli.main(["verify", "--config", cfg]) == 2
        err = capsys.readouterr().err
        assert "checks.0.tag" in err and "minda" in err

    def test_failing_check_exit_one(self, tmp_path, capsys):
        cfg = write(tmp_path, "v.yaml", {"checks": [
            {"tag": "minda", "metric": {"name": "punctured_disk"}, "expected": 0.4}]})
        assert cli.main(["verify", "--config", cfg]) == 1
        assert json.loads(capsys.readouterr().out)["status"] == "fail"

    def test_refused_check(self, tmp_path, capsys):
        cfg = write(tmp_path, "v.yaml", {"checks": [
            {"tag": "ahlfors", "metric": {"name": "hyperbolic_disk", "scale": 1.1}}]})
        assert cli.main(["verify", "--config", cfg]) == 1
        rec = json.loads(capsys.readouterr().out)
        assert rec["status"] == "refused" and rec["witness"] is not None

    def test_seed_override_and_precedence(self, tmp_path, capsys):
        cfg = write(tmp_path, "v.yaml", {"seed": 5, "checks": [
            {"tag": "delta-bound", "alpha": 0.9, "beta": 0.9, "gamma": 1.0}]})
        assert cli.main(["verify", "--config", cfg, "--set", "checks.0.alpha=0.95", "--seed", "7"]) == 0
        rec = json.loads(capsys.readouterr().out)
        assert rec["measured"] != pytest.approx(0.7541264053760246)

    def test_bad_override(self, tmp_path):
        cfg = write(tmp_path, "v.yaml", {"checks": []})
        assert cli.main(["verify", "--config", cfg, "--set", "checks.3.alpha=1"]) == 2
        assert cli.main(["verify", "--config", cfg, "--set", "novalue"]) == 2


class TestBounds:
    def test_bounds_config(self, tmp_path, capsys):
        assert cli.main(["bounds", "--config", str(CONFIGS / "bounds.yaml")]) == 0
        recs = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
        assert recs[0]["measured"] == pytest.approx(1.7724538509055159, abs=1e-12)
        assert len(recs) == 5

    def test_gamma_pole_is_runtime_error(self, tmp_path, capsys):
        cfg = write(tmp_path, "b.yaml", {"gamma": [0.5, -2]})
        assert cli.main(["bounds", "--config", cfg]) == 3
        recs = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
        assert recs[1]["status"] == "error"

    def test_constraint_violation(self, tmp_path):
        cfg = write(tmp_path, "b.yaml", {"three_puncture": [{"alpha": 0.5, "beta": 0.5, "gamma": 1.0}]})
        assert cli.main(["bounds", "--config", cfg]) == 2


def test_json_has_no_nan():
    rec = cli.VerdictRecord("x", "t", float("nan"), float("inf"), None, False, witness=1 + 2j)
    data = json.loads(rec.to_json())
    assert data["expected"] == "nan" and data["measured"] == "inf" and data["witness"] == [1.0, 2.0]


def test_missing_config_file():
    assert cli.main(["verify", "--config", "/nonexistent.yaml"]) == 2
