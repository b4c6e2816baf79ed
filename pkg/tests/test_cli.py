import io

import numpy as np
import pytest

from gapmm.cli import cmd_chl_train, cmd_robust_fit, cmd_trace_export, main
from gapmm.data.bal import serialize_bal
from gapmm.data.synth import SyntheticBASpec, synth_ba

SYNTH = "synthetic:c=3,p=20,obs=0.8,out=0.2,seed=3"


def test_help_exits_zero():
    for argv in (["robust-fit", "--help"], ["chl-train", "--help"],
                 ["trace-export", "--help"]):
        with pytest.raises(SystemExit) as err:
            main(argv)
        assert err.value.code == 0
    with pytest.raises(SystemExit) as err:
        main(["--help"])
    assert err.value.code == 0


def test_unknown_subcommand_exits_two():
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 2


class TestRobustFit:
    def test_trace_has_one_row_per_round(self, tmp_path):
        rc = cmd_robust_fit(["--input", SYNTH, "--strategy", "regemm",
                             "--rounds", "12", "--tau", "2", "--quiet",
                             "--out", str(tmp_path)])
        assert rc == 0
        trace = (tmp_path / "synthetic-seed3__regemm.csv").read_text().splitlines()
        assert len(trace) == 13  # header + rows

    def test_unknown_strategy_exits_two(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as err:
            cmd_robust_fit(["--input", SYNTH, "--strategy", "nope",
                            "--out", str(tmp_path)])
        assert err.value.code == 2
        assert "usage" in capsys.readouterr().err

    def test_all_strategies_comparable(self, tmp_path):
        for strat in ("irls", "joint-hq", "graduated", "regemm"):
            rc = cmd_robust_fit(["--input", SYNTH, "--strategy", strat,
                                 "--rounds", "6", "--tau", "2", "--quiet",
                                 "--out", str(tmp_path / strat)])
            assert rc == 0
        lengths = set()
        finals = {}
        for strat in ("irls", "joint-hq", "graduated", "regemm"):
            lines = (tmp_path / strat / f"synthetic-seed3__{strat}.csv") \
                .read_text().splitlines()
            lengths.add(len(lines))
            summary = (tmp_path / strat / "summary.csv").read_text().splitlines()[1]
            finals[strat] = float(summary.split(",")[2])
        assert lengths == {7}
        assert all(np.isfinite(v) for v in finals.values())

    def test_missing_input_exits_two(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as err:
            cmd_robust_fit(["--input", "/nonexistent/file.txt",
                            "--out", str(tmp_path)])
        assert err.value.code == 2
        assert "/nonexistent/file.txt" in capsys.readouterr().err

    def test_bal_file_input_not_mutated(self, tmp_path):
        problem, theta = synth_ba(SyntheticBASpec(cameras=3, points=15, seed=5))
        path = tmp_path / "tiny.bal"
        with open(path, "w") as fh:
            serialize_bal(problem, fh)
        before = path.read_bytes()
        rc = cmd_robust_fit(["--input", str(path), "--strategy", "irls",
                             "--rounds", "3", "--quiet",
                             "--out", str(tmp_path / "out")])
        assert rc == 0
        assert path.read_bytes() == before

    def test_seed_determinism(self, tmp_path):
        for sub in ("a", "b"):
            rc = cmd_robust_fit(["--input", SYNTH, "--strategy", "regemm",
                                 "--rounds", "8", "--seed", "9", "--quiet",
                                 "--out", str(tmp_path / sub)])
            assert rc == 0
        t1 = (tmp_path / "a" / "synthetic-seed3__regemm.csv").read_bytes()
        t2 = (tmp_path / "b" / "synthetic-seed3__regemm.csv").read_bytes()
        assert t1 == t2

    def test_dump_config(self, tmp_path):
        rc = cmd_robust_fit(["--input", SYNTH, "--strategy", "irls",
                             "--rounds", "2", "--quiet", "--dump-config",
                             "--out", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "config.json").exists()


class TestChlTrain:
    ARGS = ["--arch", "4-3-2", "--data", "synthetic:moons,n=20", "--seed", "2",
            "--quiet"]

    def test_stochastic_row_per_minibatch(self, tmp_path):
        rc = cmd_chl_train(self.ARGS + ["--driver", "stochastic-sudemm",
                                        "--batch", "5", "--epochs", "3",
                                        "--out", str(tmp_path)])
        assert rc == 0
        rows = (tmp_path / "chl__stochastic-sudemm.csv").read_text().splitlines()
        assert len(rows) - 1 == 3 * (20 // 5)

    def test_sudemm_beats_fixed_two_passes(self, tmp_path):
        finals = {}
        for driver, batch in (("sudemm", "0"), ("fixed:2", "0")):
            rc = cmd_chl_train(self.ARGS + ["--driver", driver, "--batch", batch,
                                            "--epochs", "8",
                                            "--out", str(tmp_path / driver.replace(":", "-"))])
            assert rc == 0
            summary = (tmp_path / driver.replace(":", "-") / "summary.csv") \
                .read_text().splitlines()[1]
            finals[driver] = float(summary.split(",")[2])
        assert finals["sudemm"] <= finals["fixed:2"]

    def test_bad_driver_exits_two(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as err:
            cmd_chl_train(self.ARGS + ["--driver", "bogus", "--out", str(tmp_path)])
        assert err.value.code == 2

    def test_missing_idx_file_exits_two(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as err:
            cmd_chl_train(["--arch", "4-3-2", "--data",
                           "idx:/no/images.idx,/no/labels.idx",
                           "--out", str(tmp_path)])
        assert err.value.code == 2
        assert "/no/images.idx" in capsys.readouterr().err

    def test_seed_determinism(self, tmp_path):
        for sub in ("a", "b"):
            rc = cmd_chl_train(self.ARGS + ["--driver", "stochastic-sudemm",
                                            "--batch", "5", "--epochs", "2",
                                            "--out", str(tmp_path / sub)])
            assert rc == 0
        t1 = (tmp_path / "a" / "chl__stochastic-sudemm.csv").read_bytes()
        t2 = (tmp_path / "b" / "chl__stochastic-sudemm.csv").read_bytes()
        assert t1 == t2


class TestTraceExport:
    def make_traces(self, tmp_path, n=2):
        paths = []
        for seed in range(n):
            out = tmp_path / f"run{seed}"
            cmd_robust_fit(["--input", f"synthetic:c=3,p=15,seed={seed}",
                            "--strategy", "irls", "--rounds", "4", "--quiet",
                            "--out", str(out)])
            paths.append(out / f"synthetic-seed{seed}__irls.csv")
        return paths

    def test_merge_row_count(self, tmp_path):
        paths = self.make_traces(tmp_path)
        out = tmp_path / "merged.csv"
        rc = cmd_trace_export([str(p) for p in paths] + ["--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        # 2 traces x 4 rows x 7 metrics + header
        assert len(lines) == 2 * 4 * 7 + 1
        assert lines[0] == "instance,strategy,t,metric,value"

    def test_merge_order_independent(self, tmp_path):
        paths = self.make_traces(tmp_path)
        out1, out2 = tmp_path / "m1.csv", tmp_path / "m2.csv"
        cmd_trace_export([str(paths[0]), str(paths[1]), "--out", str(out1)])
        cmd_trace_export([str(paths[1]), str(paths[0]), "--out", str(out2)])
        assert out1.read_bytes() == out2.read_bytes()

    def test_schema_mismatch_fails(self, tmp_path, capsys):
        bad = tmp_path / "bad__x.csv"
        bad.write_text("a,b,c\n1,2,3\n")
        rc = cmd_trace_export([str(bad), "--out", str(tmp_path / "m.csv")])
        assert rc == 1
        assert "schema" in capsys.readouterr().err
