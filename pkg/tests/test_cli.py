import csv
import json
import subprocess
import sys

import numpy as np

from collide_charge import (
    BatteryDistribution,
    TransitionMatrix,
    geometric_distribution,
    tv_distance,
    write_transition_matrix,
)
from collide_charge.cli import (
    EXIT_CONVERGENCE,
    EXIT_OK,
    EXIT_REDUCIBLE,
    EXIT_TRUNCATION,
    EXIT_VALIDATION,
    main,
    summarize_ensemble_csv,
    worker_count,
)


def read_rows(path):
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


def snapshot_distribution(path):
    rows = read_rows(path)
    probs = np.zeros(max(int(r["level"]) for r in rows))
    for r in rows:
        probs[int(r["level"]) - 1] = float(r["prob"])
    leaked = max(1.0 - probs.sum(), 0.0)
    return BatteryDistribution(probs, leaked)


class TestRegimes:
    def test_positive_recurrent_regime(self, tmp_path, capsys):
        code = main(["regimes", "--s1", "0.7", "--s2", "0.3",
                     "--steps", "50", "500", "--out", str(tmp_path)])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "positive-recurrent" in out
        assert (tmp_path / "trajectory.csv").exists()
        assert (tmp_path / "config.json").exists()
        final = snapshot_distribution(tmp_path / "snapshot_m500.csv")
        target = geometric_distribution(3 / 7, final.n)
        assert tv_distance(final, target) < 1e-6

    def test_null_recurrent_snapshots_have_no_ergotropy(self, tmp_path, capsys):
        code = main(["regimes", "--s1", "0.5", "--s2", "0.5",
                     "--steps", "20", "200", "--out", str(tmp_path)])
        assert code == EXIT_OK
        assert "null-recurrent" in capsys.readouterr().out
        from collide_charge import ergotropy
        for name in ("snapshot_m20.csv", "snapshot_m200.csv"):
            assert ergotropy(snapshot_distribution(tmp_path / name)) < 1e-9

    def test_transient_mean_energy_increases(self, tmp_path, capsys):
        code = main(["regimes", "--s1", "0.3", "--s2", "0.7",
                     "--steps", "30", "100", "300", "--out", str(tmp_path)])
        assert code == EXIT_OK
        assert "transient" in capsys.readouterr().out
        from collide_charge import mean_energy
        means = [mean_energy(snapshot_distribution(tmp_path / name))
                 for name in ("snapshot_m30.csv", "snapshot_m100.csv",
                              "snapshot_m300.csv")]
        assert means[0] < means[1] < means[2]

    def test_validation_exit_code(self, tmp_path):
        code = main(["regimes", "--s1", "0.7", "--s2", "0.4",
                     "--steps", "10", "--out", str(tmp_path)])
        assert code == EXIT_VALIDATION

    def test_truncation_overflow_exit_code(self, tmp_path):
        code = main(["regimes", "--s1", "0.5", "--s2", "0.5",
                     "--steps", "5000", "--truncation", "25",
                     "--fixed-truncation", "--out", str(tmp_path)])
        assert code == EXIT_TRUNCATION

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "s1": 0.5, "s2": 0.5, "steps": [10], "out": str(tmp_path / "a"),
        }))
        code = main(["regimes", "--config", str(config),
                     "--s1", "0.7", "--s2", "0.3"])
        assert code == EXIT_OK
        assert "positive-recurrent" in capsys.readouterr().out
        echoed = json.loads((tmp_path / "a" / "config.json").read_text())
        assert echoed["s1"] == 0.7 and echoed["steps"] == [10]


class TestEnsemble:
    def run(self, tmp_path, name, seed="7"):
        outdir = tmp_path / name
        code = main(["ensemble", "--d", "3", "--runs", "3", "--steps", "60",
                     "--seed", seed, "--truncation", "80",
                     "--out", str(outdir)])
        assert code == EXIT_OK
        return outdir

    def test_schema_and_row_count(self, tmp_path):
        outdir = self.run(tmp_path, "a")
        rows = read_rows(outdir / "ensemble.csv")
        assert list(rows[0]) == ["run", "step", "state_class", "mean_energy",
                                 "ergotropy", "leaked_mass"]
        assert len(rows) == 3 * 61
        classes = {r["state_class"] for r in rows}
        assert classes == {"strictly-passive", "active", "maximally-mixed"}

    def test_byte_identical_given_seed(self, tmp_path):
        a = self.run(tmp_path, "a")
        b = self.run(tmp_path, "b")
        assert ((a / "ensemble.csv").read_bytes()
                == (b / "ensemble.csv").read_bytes())

    def test_seed_changes_output(self, tmp_path):
        a = self.run(tmp_path, "a", seed="7")
        b = self.run(tmp_path, "b", seed="8")
        assert ((a / "ensemble.csv").read_bytes()
                != (b / "ensemble.csv").read_bytes())

    def test_summary_round_trips_from_csv(self, tmp_path, capsys):
        outdir = self.run(tmp_path, "a")
        printed = capsys.readouterr().out
        recomputed = summarize_ensemble_csv(outdir / "ensemble.csv")
        assert recomputed == (outdir / "summary.txt").read_text()
        assert recomputed in printed

    def test_maximally_mixed_run_keeps_ergotropy_low(self, tmp_path):
        outdir = tmp_path / "mm"
        code = main(["ensemble", "--d", "5", "--runs", "3", "--steps", "200",
                     "--seed", "0", "--out", str(outdir)])
        assert code == EXIT_OK
        rows = [r for r in read_rows(outdir / "ensemble.csv")
                if r["state_class"] == "maximally-mixed"]
        ergs = [float(r["ergotropy"]) for r in rows]
        means = [float(r["mean_energy"]) for r in rows]
        assert max(ergs) < 1e-6
        assert all(b > a for a, b in zip(means[20:-1], means[21:]))

    def test_workers_match_sequential(self, tmp_path):
        a = self.run(tmp_path, "a")
        outdir = tmp_path / "par"
        code = main(["ensemble", "--d", "3", "--runs", "3", "--steps", "60",
                     "--seed", "7", "--truncation", "80", "--workers", "3",
                     "--out", str(outdir)])
        assert code == EXIT_OK
        assert ((a / "ensemble.csv").read_bytes()
                == (outdir / "ensemble.csv").read_bytes())

    def test_missing_seed_is_validation_error(self, tmp_path):
        code = main(["ensemble", "--d", "3", "--runs", "1", "--steps", "5",
                     "--out", str(tmp_path / "x")])
        assert code == EXIT_VALIDATION


class TestStationaryCommand:
    def test_qubit_fixed_point_is_protocol_independent(self, tmp_path, capsys):
        code = main(["stationary", "--d", "2", "--seed-a", "9", "--seed-b",
                     "11", "--truncation", "120", "--out", str(tmp_path)])
        assert code == EXIT_OK
        rows = read_rows(tmp_path / "stationary.csv")
        p_a = np.array([float(r["p_a"]) for r in rows])
        p_b = np.array([float(r["p_b"]) for r in rows])
        assert 0.5 * np.abs(p_a - p_b).sum() < 1e-8
        fuel = read_rows(tmp_path / "fuel.csv")
        s = np.array([float(r["prob"]) for r in fuel])
        # the geometric ratio is only testable above the solver noise floor
        solid = np.nonzero(p_a > 1e-6)[0]
        ratios = p_a[solid[1:]] / p_a[solid[:-1]]
        assert solid.size > 3
        assert np.abs(ratios - s[1] / s[0]).max() < 1e-6

    def test_multilevel_fixed_points_differ(self, tmp_path, capsys):
        code = main(["stationary", "--d", "5", "--seed-a", "101", "--seed-b",
                     "202", "--truncation", "120", "--out", str(tmp_path)])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        tv = float(out.splitlines()[0].split("=")[1])
        erg_a = float(out.splitlines()[1].split("=")[1])
        erg_b = float(out.splitlines()[2].split("=")[1])
        assert tv > 0.01
        assert erg_a < 1e-8 and erg_b < 1e-8

    def test_convergence_failure_exit_code(self, tmp_path):
        code = main(["stationary", "--d", "2", "--seed-a", "5", "--seed-b",
                     "11", "--truncation", "120", "--max-iters", "2",
                     "--out", str(tmp_path)])
        assert code == EXIT_CONVERGENCE


class TestClassifyCommand:
    def test_qubit_positive_recurrent(self, capsys):
        code = main(["classify", "--qubit", "0.7", "0.3", "--alpha", "const:1"])
        assert code == EXIT_OK
        assert "verdict = positive-recurrent" in capsys.readouterr().out

    def test_qubit_null_recurrent(self, capsys):
        code = main(["classify", "--qubit", "0.5", "0.5"])
        assert code == EXIT_OK
        assert "verdict = null-recurrent" in capsys.readouterr().out

    def test_qubit_transient(self, capsys):
        code = main(["classify", "--qubit", "0.3", "0.7"])
        assert code == EXIT_OK
        assert "verdict = transient" in capsys.readouterr().out

    def test_identity_matrix_file_is_reducible(self, tmp_path):
        t = TransitionMatrix.from_dense(np.eye(8), d=2)
        path = tmp_path / "matrix.txt"
        write_transition_matrix(t, path)
        code = main(["classify", "--matrix", str(path),
                     "--trials", "100", "--horizons", "50", "100"])
        assert code == EXIT_REDUCIBLE

    def test_report_written_to_file(self, tmp_path, capsys):
        report = tmp_path / "report.txt"
        code = main(["classify", "--qubit", "0.6", "0.4",
                     "--out", str(report)])
        assert code == EXIT_OK
        assert "verdict = positive-recurrent" in report.read_text()


class TestSampleCommand:
    def test_round_trip_through_classify(self, tmp_path, capsys):
        outdir = tmp_path / "sample"
        code = main(["sample", "--d", "3", "--seed", "19",
                     "--truncation", "600",
                     "--constraint", "strictly-passive", "--out", str(outdir)])
        assert code == EXIT_OK
        capsys.readouterr()
        code = main(["classify", "--matrix", str(outdir / "matrix.txt"),
                     "--trials", "2000", "--horizons", "500", "5000",
                     "--seed", "3"])
        assert code == EXIT_OK
        assert "verdict = positive-recurrent" in capsys.readouterr().out

    def test_deterministic(self, tmp_path):
        for name in ("a", "b"):
            main(["sample", "--d", "3", "--seed", "19", "--truncation", "30",
                  "--out", str(tmp_path / name)])
        assert ((tmp_path / "a" / "matrix.txt").read_bytes()
                == (tmp_path / "b" / "matrix.txt").read_bytes())


class TestWorkerCount:
    def test_env_caps_workers(self, monkeypatch):
        monkeypatch.setenv("COLLIDE_CHARGE_THREADS", "2")
        assert worker_count(8) == 2
        monkeypatch.delenv("COLLIDE_CHARGE_THREADS")
        assert worker_count(8) == 8
        assert worker_count(None) == 1


class TestConsoleEntryPoint:
    def test_subprocess_invocation(self, tmp_path):
        result = subprocess.run(
            [sys.executable, "-m", "collide_charge.cli", "classify",
             "--qubit", "0.7", "0.3"],
            capture_output=True, text=True)
        assert result.returncode == EXIT_OK
        assert "verdict = positive-recurrent" in result.stdout
