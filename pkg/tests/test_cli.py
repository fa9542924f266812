import csv
import json

import pytest

from topt.cli import main


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestRun:
    def test_pendulum_writes_results_and_trace(self, tmp_path):
        code = main(["run", "--preset", "pendulum", "--M", "200",
                     "--out", str(tmp_path)])
        assert code == 0
        rows = read_rows(tmp_path / "results.csv")
        assert len(rows) == 1
        assert rows[0]["M"] == "200"
        assert rows[0]["N"] == "2"
        assert 5.0 < float(rows[0]["T_k"]) < 6.0
        assert float(rows[0]["abs_err"]) < 0.2
        trace = json.loads((tmp_path / "trace.json").read_text())
        assert trace["status"] == "converged"
        assert trace["newton_steps"] == int(rows[0]["newton_steps"])

    def test_invalid_preset_exits_3_without_files(self, tmp_path, capsys):
        out = tmp_path / "sub"
        code = main(["run", "--preset", "bogus", "--out", str(out)])
        assert code == 3
        assert not out.exists()
        diag = json.loads(capsys.readouterr().err.strip())
        assert diag["error"] == "config"

    def test_invalid_M_exits_3(self, tmp_path):
        assert main(["run", "--preset", "pendulum", "--M", "0",
                     "--out", str(tmp_path)]) == 3

    def test_determinism(self, tmp_path):
        """Identical configs give bit-identical results up to wall_time."""
        outs = []
        for sub in ("a", "b"):
            d = tmp_path / sub
            assert main(["run", "--preset", "pendulum", "--M", "150",
                         "--out", str(d)]) == 0
            rows = read_rows(d / "results.csv")
            outs.append([{k: v for k, v in r.items() if k != "wall_time"}
                         for r in rows])
        assert outs[0] == outs[1]

    def test_config_file_roundtrip(self, tmp_path, capsys):
        """The defaults subcommand output is a valid config file."""
        assert main(["defaults"]) == 0
        text = capsys.readouterr().out
        cfg = tmp_path / "defaults.ini"
        # keep only the pendulum section and shrink it for speed
        section = text.split("\n\n")[["pendulum" in b for b in text.split("\n\n")].index(True)]
        cfg.write_text(section.replace("M = 10000", "M = 120") + "\n")
        code = main(["run", "--config", str(cfg), "--out", str(tmp_path)])
        assert code == 0
        rows = read_rows(tmp_path / "results.csv")
        assert rows[0]["M"] == "120"

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = tmp_path / "bad.ini"
        cfg.write_text("[pendulum]\nMM = 3\n")
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 3

    def test_value_function_sampling(self, tmp_path):
        cfg = tmp_path / "vf.ini"
        cfg.write_text("[pendulum]\nM = 100\nsample_nus = 3.0,4.0,5.0\n")
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "value_function.csv")
        assert [float(r["nu"]) for r in rows] == [3.0, 4.0, 5.0]
        deltas = [float(r["delta"]) for r in rows]
        assert deltas == sorted(deltas, reverse=True)


class TestSweep:
    def test_temporal_orders(self, tmp_path):
        code = main(["sweep", "--preset", "pendulum",
                     "--M-list", "50,100,200", "--out", str(tmp_path)])
        assert code == 0
        rows = read_rows(tmp_path / "results.csv")
        assert [r["M"] for r in rows] == ["50", "100", "200"]
        errs = [float(r["abs_err"]) for r in rows]
        assert errs == sorted(errs, reverse=True)
        orders = read_rows(tmp_path / "orders.csv")
        assert len(orders) == 2
        for row in orders:
            assert 0.5 < float(row["order"]) < 1.5

    def test_empty_M_list_exits_3(self, tmp_path):
        assert main(["sweep", "--preset", "pendulum", "--M-list", "",
                     "--out", str(tmp_path)]) == 3

    def test_heat_reference_is_finest_run(self, tmp_path):
        code = main(["sweep", "--preset", "heat-neumann", "--M-list", "10,20",
                     "--n-list", "4", "--out", str(tmp_path)])
        assert code == 0
        rows = read_rows(tmp_path / "results.csv")
        assert float(rows[-1]["abs_err"]) == 0.0  # finest row is the reference
        trace = json.loads((tmp_path / "trace.json").read_text())
        assert "finest run" in trace["T_ref_source"]

    def test_parallel_jobs_match_serial(self, tmp_path):
        serial, parallel = tmp_path / "s", tmp_path / "p"
        for out, jobs in ((serial, "1"), (parallel, "2")):
            assert main(["sweep", "--preset", "pendulum",
                         "--M-list", "60,120", "--jobs", jobs,
                         "--out", str(out)]) == 0
        strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_time"}
                              for r in rows]
        assert strip(read_rows(serial / "results.csv")) == \
            strip(read_rows(parallel / "results.csv"))
