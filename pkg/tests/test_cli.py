import json

import numpy as np
import pytest

from rvelab.cli import main
from rvelab.geometry import load_configuration
from rvelab.stats import read_realizations_csv


def run(argv):
    return main([str(a) for a in argv])


class TestPackDrawSolve:
    def test_pack_disk(self, tmp_path):
        out = tmp_path / "cfg.json"
        assert run(["pack", "--shape", "disk", "--phi", "0.3", "--count", "16",
                    "--seed", "5", "--out", out]) == 0
        cfg = load_configuration(out)
        assert len(cfg) == 16
        assert cfg.non_overlapping

    def test_pack_rsa(self, tmp_path):
        out = tmp_path / "rsa.json"
        assert run(["pack", "--shape", "disk", "--phi", "0.2", "--count", "20",
                    "--method", "rsa", "--out", out]) == 0

    def test_draw_snapshot(self, tmp_path):
        out = tmp_path / "snap.json"
        assert run(["draw", "--protocol", "snapshot", "--shape", "disk",
                    "--K", "2", "--seed", "1", "--out", out]) == 0
        cfg = load_configuration(out)
        assert not cfg.cell.periodic

    def test_voxelize_solve_pipeline(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        grid = tmp_path / "grid"
        result = tmp_path / "result.json"
        assert run(["pack", "--shape", "disk", "--phi", "0.3", "--count", "16",
                    "--out", cfg]) == 0
        assert run(["voxelize", "--config", cfg, "--n", "64",
                    "--out", grid]) == 0
        assert run(["solve", "--grid", tmp_path / "grid.json",
                    "--alpha1", "1.2", "--alpha2", "0.2",
                    "--out", result]) == 0
        payload = json.loads(result.read_text())
        assert payload["converged"]
        assert 0.2 < payload["a_bar"] < 1.2
        assert len(payload["tensor"]) == 2

    def test_bad_arguments_fail(self, tmp_path):
        assert run(["pack", "--shape", "disk", "--phi", "0.3",
                    "--out", tmp_path / "x.json"]) == 1  # missing --count


class TestExpansionCheck:
    def test_emits_csv(self, tmp_path):
        out = tmp_path / "dev.csv"
        assert run(["expansion-check", "--seed", "0", "--out", out]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "rho,a_solver,a_first_order,deviation"
        assert len(lines) == 5


class TestAutocorr:
    def test_emits_csv(self, tmp_path):
        out = tmp_path / "h.csv"
        assert run(["autocorr", "--shape", "disk", "--K", "4",
                    "--seed", "2", "--out", out]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "r_over_radius,h,count"
        first = lines[1].split(",")
        assert float(first[1]) == pytest.approx(1.0)


class TestStudyCli:
    def test_run_and_summarize(self, tmp_path):
        cfg = {
            "shape": "disk", "phi": 0.3, "sizes": [2],
            "protocols": ["periodized"], "realizations": 3,
            "master_seed": 9, "workers": 1,
            "output_dir": str(tmp_path / "study"),
            "reference": {"value": 0.3174257},
        }
        path = tmp_path / "study.json"
        path.write_text(json.dumps(cfg))
        assert run(["study", "run", path]) == 0
        rows = read_realizations_csv(tmp_path / "study" / "realizations.csv")
        assert len(rows) == 3
        assert run(["study", "summarize", tmp_path / "study"]) == 0

    def test_partial_exit_code(self, tmp_path):
        cfg = {
            "shape": "sphere", "phi": 0.40, "sizes": [2],
            "protocols": ["periodized"], "realizations": 1,
            "master_seed": 1, "workers": 1,
            "output_dir": str(tmp_path / "study"),
            "packing": {"max_iters": 100},
        }
        path = tmp_path / "study.json"
        path.write_text(json.dumps(cfg))
        assert run(["study", "run", path]) == 2

    def test_vf_subcommand(self, tmp_path):
        cfg = {
            "shape": "disk", "phi": 0.3, "sizes": [2, 3],
            "protocols": ["periodized"], "realizations": 4,
            "master_seed": 2, "workers": 1,
            "output_dir": str(tmp_path / "vf"),
        }
        path = tmp_path / "vf.json"
        path.write_text(json.dumps(cfg))
        assert run(["study", "vf", path]) == 0
        assert (tmp_path / "vf" / "vf_curve.csv").exists()

    def test_fatal_exit_code(self, tmp_path):
        assert run(["study", "run", tmp_path / "missing.json"]) == 1
