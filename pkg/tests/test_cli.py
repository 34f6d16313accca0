from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from causaltext.cli import cli, main
from causaltext.prompts import write_pairs

from conftest import synthetic_pairs

SAMPLE_MAP_ROWS = """\
nutrition,+,consumption of fruits and vegetables
nutrition,+,nutrition education hours
consumption of fruits and vegetables,-,obesity
consumption of fruits and vegetables,+,social support for eating fruits and vegetables
consumption of fruits and vegetables,-,lack of knowledge of benefits to eating fruits and vegetables
"""


@pytest.fixture
def runner():
    return CliRunner()


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


class TestExitCodes:
    def test_usage_error_is_2(self):
        assert main(["graph", "validate", "--no-such-flag"]) == 2

    def test_domain_error_is_1(self, tmp_path, capsys):
        bad = _write(tmp_path / "bad.csv", "A,+,A\n")
        assert main(["graph", "validate", str(bad)]) == 1
        assert "error[self-loop]" in capsys.readouterr().err

    def test_success_is_0(self, tmp_path):
        good = _write(tmp_path / "map.csv", SAMPLE_MAP_ROWS)
        assert main(["graph", "validate", str(good)]) == 0

    def test_missing_file_is_1(self, capsys):
        assert main(["graph", "validate", "/no/such/file.csv"]) == 1
        assert "error[io]" in capsys.readouterr().err


class TestGraphCommands:
    def test_validate_reports_counts(self, runner, tmp_path):
        path = _write(tmp_path / "map.csv", SAMPLE_MAP_ROWS)
        result = runner.invoke(cli, ["graph", "validate", str(path)])
        assert result.exit_code == 0
        payload = json.loads(result.stdout)
        assert payload["nodes"] == 6
        assert payload["edges"] == 5

    def test_decompose_streams_components(self, runner, tmp_path):
        path = _write(tmp_path / "map.csv", "A,+,B\nB,+,C\nC,+,A\n")
        result = runner.invoke(cli, ["graph", "decompose", str(path), "--max-nodes", "4"])
        assert result.exit_code == 0
        docs = [json.loads(line) for line in result.stdout.splitlines() if line.strip()]
        assert len(docs) == 2
        total_edges = sum(len(d["edges"]) for d in docs)
        assert total_edges == 3

    def test_reads_stdin_with_dash(self, runner):
        result = runner.invoke(cli, ["graph", "validate", "-"], input="A,+,B\n")
        assert result.exit_code == 0


class TestLinearizeCommand:
    def test_pipeline_decompose_then_linearize(self, runner, tmp_path):
        path = _write(tmp_path / "map.csv", SAMPLE_MAP_ROWS)
        decomposed = runner.invoke(cli, ["graph", "decompose", str(path)])
        result = runner.invoke(cli, ["linearize", "-"], input=decomposed.stdout)
        assert result.exit_code == 0
        lines = [l for l in result.stdout.splitlines() if l.strip()]
        assert all(l.startswith("<S> ") and l.endswith(" <E>") for l in lines)

    def test_notags_mode_and_pairs_emitter(self, runner, tmp_path):
        path = _write(tmp_path / "map.csv", "A,+,B\n")
        decomposed = runner.invoke(cli, ["graph", "decompose", str(path)])
        result = runner.invoke(
            cli,
            ["linearize", "-", "--mode", "notags", "--emit", "pairs"],
            input=decomposed.stdout,
        )
        assert result.exit_code == 0
        assert result.stdout.splitlines()[0] == "prompt,completion"
        assert "<CAUSES>" in result.stdout


class TestPromptCommands:
    def test_zero_shot(self, runner):
        result = runner.invoke(
            cli, ["prompt", "zero", "--test-prompt", "<S> <H> A <POS> <T> B <E>"]
        )
        assert result.exit_code == 0
        assert result.stdout.endswith("completion: ")
        assert "###" not in result.stdout

    def test_few_shot_prints_seed_and_blocks(self, runner, tmp_path):
        pairs = tmp_path / "pairs.csv"
        with pairs.open("w", newline="") as handle:
            write_pairs(synthetic_pairs(6, seed=2), handle)
        result = runner.invoke(
            cli,
            ["prompt", "few", "--pairs", str(pairs), "--k", "2", "--seed", "9",
             "--test-prompt", "<S> <H> X <POS> <T> Y <E>"],
        )
        assert result.exit_code == 0
        assert result.stdout.count("\n\n###\n\n") == 2
        assert "seed=9" in result.stderr

    def test_finetune_export(self, runner, tmp_path):
        pairs = tmp_path / "pairs.csv"
        with pairs.open("w", newline="") as handle:
            write_pairs(synthetic_pairs(4, seed=2), handle)
        result = runner.invoke(cli, ["prompt", "finetune-export", "--pairs", str(pairs)])
        assert result.exit_code == 0
        records = [json.loads(l) for l in result.stdout.splitlines() if l.strip()]
        assert len(records) == 4
        assert all(r["prompt"].endswith(" ->") for r in records)
        assert all(r["completion"].endswith("\n") for r in records)


class TestSplitCommand:
    def test_writes_three_files(self, runner, tmp_path):
        pairs = tmp_path / "pairs.csv"
        with pairs.open("w", newline="") as handle:
            write_pairs(synthetic_pairs(20, seed=2), handle)
        out = tmp_path / "splits"
        result = runner.invoke(
            cli,
            ["split", "--pairs", str(pairs), "--train", "10", "--validation", "5",
             "--test", "5", "--seed", "3", "--out-dir", str(out)],
        )
        assert result.exit_code == 0
        for name, count in (("train", 10), ("validation", 5), ("test", 5)):
            text = (out / f"{name}.csv").read_text()
            assert len(text.strip().splitlines()) == count + 1


class TestRunEvalTable:
    def test_offline_run_table_and_figures(self, runner, tmp_path):
        pairs = tmp_path / "pairs.csv"
        with pairs.open("w", newline="") as handle:
            write_pairs(synthetic_pairs(20, seed=4), handle)
        config = tmp_path / "grid.json"
        config.write_text(json.dumps({
            "run_id": "cli-test",
            "datasets": [{
                "name": "synthetic",
                "pairs": "pairs.csv",
                "split": {"train": 10, "validation": 4, "test": 6, "seed": 1},
            }],
            "temperatures": [0.6],
            "models": ["m"],
            "backend": {"kind": "template"},
        }))
        out = tmp_path / "runs"
        result = runner.invoke(
            cli, ["run", "--config", str(config), "--out-dir", str(out)]
        )
        assert result.exit_code == 0, result.output
        run_dir = result.stdout.strip().splitlines()[-1]
        report_dir = tmp_path / "report"
        table = runner.invoke(
            cli, ["table", run_dir, "--layout", "csv", "--out", str(report_dir)]
        )
        assert table.exit_code == 0
        assert table.stdout.startswith("dataset,")
        assert (report_dir / "table.md").exists()
        assert list(report_dir.glob("*.png"))

    def test_plan_counts_cells(self, runner, tmp_path):
        pairs = tmp_path / "pairs.csv"
        with pairs.open("w", newline="") as handle:
            write_pairs(synthetic_pairs(10, seed=4), handle)
        config = tmp_path / "grid.json"
        config.write_text(json.dumps({
            "datasets": [{
                "name": "synthetic",
                "pairs": "pairs.csv",
                "split": {"train": 5, "validation": 2, "test": 3, "seed": 1},
            }],
        }))
        result = runner.invoke(cli, ["plan", "--config", str(config)])
        assert result.exit_code == 0
        assert len(result.stdout.strip().splitlines()) == 12
        assert "total=12" in result.stderr

    def test_eval_command(self, runner, tmp_path):
        cands = _write(tmp_path / "c.txt", "a increases b.\nx decreases y.\n")
        refs = _write(tmp_path / "r.txt", "a increases b.\nx decreases y.\n")
        result = runner.invoke(
            cli, ["eval", "--candidates", str(cands), "--references", str(refs)]
        )
        assert result.exit_code == 0
        lines = [json.loads(l) for l in result.stdout.splitlines() if l.strip()]
        assert lines[-1]["aggregate"]["rouge_l"] == 1.0

    def test_eval_alignment_mismatch_is_domain_error(self, tmp_path, capsys):
        cands = _write(tmp_path / "c.txt", "one line\n")
        refs = _write(tmp_path / "r.txt", "one\ntwo\n")
        assert main(["eval", "--candidates", str(cands), "--references", str(refs)]) == 1
        assert "error[eval-align]" in capsys.readouterr().err


class TestAnnotateCommands:
    def test_create_then_stats(self, runner, tmp_path):
        from causaltext.linearize import TAGS, linearize
        from helpers import random_component

        def instances(variant):
            rows = []
            for i in range(6):
                component = random_component(40 + i, max_edges=2)
                rows.append({
                    "index": i,
                    "prompt": linearize(component, TAGS).text,
                    "generation": f"{variant} {i}",
                })
            return rows

        a_file = tmp_path / "a.jsonl"
        b_file = tmp_path / "b.jsonl"
        a_file.write_text("\n".join(json.dumps(r) for r in instances("tags")))
        b_file.write_text("\n".join(json.dumps(r) for r in instances("notags")))
        store_dir = tmp_path / "store"
        created = runner.invoke(
            cli,
            ["annotate", "create", "--results-a", str(a_file), "--results-b", str(b_file),
             "--n-samples", "3", "--store", str(store_dir), "--session-id", "s1"],
        )
        assert created.exit_code == 0, created.output

        from causaltext.annotation import LabelRecord, SessionStore
        store = SessionStore(store_dir)
        session = store.open("s1")
        for task in session.tasks:
            store.submit("s1", LabelRecord(
                task_id=task.task_id, annotator_id="solo",
                faithfulness_choice="A", coverage_choice="A",
            ))
        stats = runner.invoke(
            cli, ["annotate", "stats", "--store", str(store_dir), "--session-id", "s1"]
        )
        assert stats.exit_code == 0
        payload = json.loads(stats.stdout)
        assert payload["labels"] == 3
