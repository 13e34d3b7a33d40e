import csv

import pytest

from conftest import scenario_path

from evoroute.cli import main


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestRun:
    def test_fig1_writes_outputs(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(
            ["run", "--scenario", scenario_path("fig1"), "--out", str(out), "--seed", "7"]
        )
        assert code == 0
        for name in ("trace.csv", "metrics.csv", "invocations.csv"):
            assert (out / name).exists()
        metrics = read_csv(out / "metrics.csv")[0]
        assert int(metrics["planner_invocations"]) >= 1
        assert "run complete" in capsys.readouterr().out

    def test_missing_scenario_is_validation_error(self, tmp_path, capsys):
        code = main(["run", "--scenario", "missing.scenario", "--out", str(tmp_path)])
        assert code == 1
        assert "missing.scenario" in capsys.readouterr().err

    def test_static_router_never_resolves(self, tmp_path):
        out = tmp_path / "out"
        assert (
            main(
                [
                    "run",
                    "--scenario",
                    scenario_path("fig1"),
                    "--out",
                    str(out),
                    "--router",
                    "unit-ospf",
                ]
            )
            == 0
        )
        metrics = read_csv(out / "metrics.csv")[0]
        assert int(metrics["planner_invocations"]) == 0
        assert int(metrics["congestion_duration_s"]) == 40

    def test_rerun_outputs_byte_identical(self, tmp_path):
        blobs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert (
                main(
                    ["run", "--scenario", scenario_path("fig1"), "--out", str(out), "--seed", "4"]
                )
                == 0
            )
            blobs.append(
                ((out / "trace.csv").read_bytes(), (out / "metrics.csv").read_bytes())
            )
        assert blobs[0] == blobs[1]


class TestTransfer:
    def test_export_then_import(self, tmp_path, capsys):
        kb_file = tmp_path / "kb.txt"
        code = main(
            [
                "transfer",
                "export",
                "--scenario",
                scenario_path("fig1"),
                "--out",
                str(kb_file),
                "--seed",
                "0",
            ]
        )
        assert code == 0
        assert "exported 5 formulas" in capsys.readouterr().out
        assert len(kb_file.read_text().splitlines()) == 5

        assert main(["transfer", "import", "--kb", str(kb_file)]) == 0
        assert "5 formulas accepted" in capsys.readouterr().out

    def test_import_empty_warns(self, tmp_path, capsys):
        kb_file = tmp_path / "kb.txt"
        kb_file.write_text("")
        assert main(["transfer", "import", "--kb", str(kb_file)]) == 0
        captured = capsys.readouterr()
        assert "0 formulas accepted" in captured.out
        assert "warning" in captured.err

    def test_import_malformed_is_validation_error(self, tmp_path, capsys):
        kb_file = tmp_path / "kb.txt"
        kb_file.write_text("0.5 (util +\n")
        assert main(["transfer", "import", "--kb", str(kb_file)]) == 1
        assert "line 1" in capsys.readouterr().err

    def test_run_with_imported_kb(self, tmp_path):
        kb_file = tmp_path / "kb.txt"
        assert (
            main(
                [
                    "transfer",
                    "export",
                    "--scenario",
                    scenario_path("fig1"),
                    "--out",
                    str(kb_file),
                    "--seed",
                    "0",
                ]
            )
            == 0
        )
        out = tmp_path / "out"
        assert (
            main(
                [
                    "run",
                    "--scenario",
                    scenario_path("fig1"),
                    "--out",
                    str(out),
                    "--seed",
                    "1",
                    "--kb",
                    str(kb_file),
                ]
            )
            == 0
        )
        assert int(read_csv(out / "metrics.csv")[0]["planner_invocations"]) >= 1


class TestCompare:
    def test_adaptive_beats_static(self, tmp_path):
        out = tmp_path / "cmp"
        code = main(
            [
                "compare",
                "--scenario",
                scenario_path("fig1"),
                "--out",
                str(out),
                "--routers",
                "unit-ospf,genadapt",
                "--seeds",
                "0-4",
            ]
        )
        assert code == 0
        runs = read_csv(out / "runs.csv")
        assert len(runs) == 10
        summary = {row["router"]: row for row in read_csv(out / "summary.csv")}
        assert float(summary["genadapt"]["mean_congestion_duration_s"]) < float(
            summary["unit-ospf"]["mean_congestion_duration_s"]
        )

    def test_duplicate_seeds_rejected(self, tmp_path, capsys):
        code = main(
            [
                "compare",
                "--scenario",
                scenario_path("fig1"),
                "--out",
                str(tmp_path),
                "--seeds",
                "1,1",
            ]
        )
        assert code == 1
        assert "duplicate" in capsys.readouterr().err

    def test_unknown_router_rejected(self, tmp_path):
        code = main(
            [
                "compare",
                "--scenario",
                scenario_path("fig1"),
                "--out",
                str(tmp_path),
                "--routers",
                "rip",
            ]
        )
        assert code == 1


class TestGenTopology:
    def test_full_five(self, tmp_path, capsys):
        out = tmp_path / "net.txt"
        assert main(["gen-topology", "--kind", "full", "--size", "5", "--out", str(out)]) == 0
        assert "20 links" in capsys.readouterr().out
        from evoroute.netmodel import load_network

        net = load_network(str(out))
        assert (net.n_nodes, len(net.links)) == (5, 20)

    def test_mnp_is_bidirectional(self, tmp_path):
        out = tmp_path / "net.txt"
        assert main(["gen-topology", "--kind", "mnp", "--size", "3", "--out", str(out)]) == 0
        from evoroute.netmodel import load_network

        net = load_network(str(out))
        pairs = {(l.src, l.dst) for l in net.links}
        assert all((d, s) in pairs for s, d in pairs)

    def test_too_small_is_validation_error(self, tmp_path, capsys):
        code = main(
            ["gen-topology", "--kind", "full", "--size", "1", "--out", str(tmp_path / "n.txt")]
        )
        assert code == 1
        assert "error" in capsys.readouterr().err
