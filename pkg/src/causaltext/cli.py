"""Command line entry point.

Exit codes: 0 success, 1 domain error (validation, budget, backend), 2
usage error. Domain errors print one line to stderr in the form
``error[<code>]: <message>``. Subcommands read stdin when a path is "-"
and write their primary output to stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .annotation import LabelRecord, SessionStore, create_session
from .errors import CausalTextError
from .graph import (
    Component,
    GraphFormat,
    decompose as decompose_graph,
    parse_graph,
    validate_graph,
)
from .linearize import (
    DEFAULT_CONNECTOR,
    DEFAULT_DELIMITER,
    TAGS,
    linearize as linearize_component,
    no_tags,
)
from .metrics import (
    PolarityLexicon,
    ScoredPair,
    aggregate,
    external_score,
    score_pair,
)
from .prompts import (
    DEFAULT_CONTEXT_LIMIT,
    DEFAULT_INSTRUCTION,
    DEFAULT_SEPARATOR,
    DEFAULT_STATEMENT,
    PairRecord,
    SplitSpec,
    build_few_shot,
    build_zero_shot,
    export_finetune,
    load_pairs,
    split_dataset,
    write_pairs,
)
from .report import render_table, write_report
from .runner import GridConfig, load_results, make_backend, plan_grid, run_grid
from .service import create_app, serve


def _read_source(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _detect_format(path: str, explicit: str | None) -> GraphFormat:
    if explicit:
        return GraphFormat(explicit)
    if path.endswith(".json") or path.endswith(".graph"):
        return GraphFormat.DOCUMENT
    return GraphFormat.EDGE_LIST


def _echo_seed(seed: int) -> None:
    click.echo(f"seed={seed}", err=True)


@click.group()
@click.version_option(version=__version__, prog_name="causaltext")
def cli():
    """Causal maps to text: decompose, linearize, prompt, run, score, annotate."""


@cli.group()
def graph():
    """Parse, validate and decompose causal maps."""


format_option = click.option(
    "--format",
    "fmt",
    type=click.Choice(["document", "edge-list"]),
    default=None,
    help="Input format; default guesses from the extension (.json/.graph is document).",
)


@graph.command("validate")
@click.argument("path")
@format_option
def graph_validate(path: str, fmt: str | None):
    """Check a map against the format invariants; exit 1 on violations."""
    parsed = parse_graph(_read_source(path), _detect_format(path, fmt))
    report = validate_graph(parsed)
    payload = {
        "nodes": len(parsed.nodes),
        "edges": len(parsed.edges),
        "violations": [{"code": v.code, "element": v.element} for v in report.violations],
        "warnings": [{"code": v.code, "element": v.element} for v in report.warnings],
    }
    click.echo(json.dumps(payload, ensure_ascii=False, indent=2))
    if not report.ok:
        raise CausalTextError("graph violates invariants", code="graph-invalid")


@graph.command("decompose")
@click.argument("path")
@format_option
@click.option("--max-nodes", default=4, show_default=True, help="Node budget per component.")
def graph_decompose(path: str, fmt: str | None, max_nodes: int):
    """Split a map into acyclic components; one JSON document per line."""
    parsed = parse_graph(_read_source(path), _detect_format(path, fmt))
    for component in decompose_graph(parsed, max_nodes):
        click.echo(json.dumps(component.to_document(), ensure_ascii=False))


@cli.command("linearize")
@click.argument("path")
@click.option("--mode", type=click.Choice(["tags", "notags"]), default="tags", show_default=True)
@click.option("--connector", default=DEFAULT_CONNECTOR, show_default=True)
@click.option(
    "--delimiter",
    default=DEFAULT_DELIMITER,
    show_default=True,
    help="Separator between edge segments; pass '' for the undelimited form.",
)
@click.option(
    "--emit",
    type=click.Choice(["text", "pairs"]),
    default="text",
    show_default=True,
    help="'pairs' writes a prompt,completion CSV with empty completions.",
)
def linearize_cmd(path: str, mode: str, connector: str, delimiter: str, emit: str):
    """Serialize components (JSON documents, one per line) to tagged text."""
    chosen = TAGS if mode == "tags" else no_tags(connector)
    texts = []
    for line_no, line in enumerate(_read_source(path).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            component = Component.from_document(json.loads(line))
        except (json.JSONDecodeError, KeyError) as exc:
            raise CausalTextError(f"line {line_no}: bad component document: {exc}",
                                  code="bad-component") from exc
        texts.append(linearize_component(component, chosen, delimiter=delimiter).text)
    if emit == "pairs":
        write_pairs((PairRecord(prompt=t, completion="") for t in texts), sys.stdout)
    else:
        for text in texts:
            click.echo(text)


@cli.group()
def prompt():
    """Assemble model inputs for the three training settings."""


@prompt.command("zero")
@click.option("--test-prompt", required=True)
@click.option("--instruction", default=DEFAULT_INSTRUCTION, show_default=False,
              help="Task description placed before the query.")
@click.option("--context-limit", default=DEFAULT_CONTEXT_LIMIT, show_default=True)
def prompt_zero(test_prompt: str, instruction: str, context_limit: int):
    bundle = build_zero_shot(test_prompt, instruction, context_limit=context_limit)
    click.echo(f"token_estimate={bundle.token_estimate}", err=True)
    sys.stdout.write(bundle.text)


@prompt.command("few")
@click.option("--pairs", "pairs_path", required=True, help="Training pairs CSV.")
@click.option("--test-prompt", required=True)
@click.option("--k", default=3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--separator", default=DEFAULT_SEPARATOR, show_default=False)
@click.option("--statement", default=DEFAULT_STATEMENT, show_default=True)
@click.option("--context-limit", default=DEFAULT_CONTEXT_LIMIT, show_default=True)
def prompt_few(pairs_path: str, test_prompt: str, k: int, seed: int, separator: str,
               statement: str, context_limit: int):
    pairs = load_pairs(_read_source(pairs_path))
    _echo_seed(seed)
    bundle = build_few_shot(
        pairs, k, seed, test_prompt,
        statement=statement, separator=separator, context_limit=context_limit,
    )
    click.echo(f"token_estimate={bundle.token_estimate}", err=True)
    sys.stdout.write(bundle.text)


@prompt.command("finetune-export")
@click.option("--pairs", "pairs_path", required=True, help="Training pairs CSV.")
@click.option("--stop-token", default="\\n", show_default=True,
              help="Stop sequence appended to completions (escapes decoded).")
@click.option("--prompt-suffix", default=" ->", show_default=True)
@click.option("--completion-prefix", default=" ", show_default=True)
def prompt_finetune(pairs_path: str, stop_token: str, prompt_suffix: str,
                    completion_prefix: str):
    """Write line-delimited fine-tune records to stdout."""
    pairs = load_pairs(_read_source(pairs_path))
    decoded_stop = stop_token.encode("utf-8").decode("unicode_escape")
    for line in export_finetune(
        pairs, decoded_stop, prompt_suffix=prompt_suffix, completion_prefix=completion_prefix
    ):
        click.echo(line)


@cli.command("split")
@click.option("--pairs", "pairs_path", required=True)
@click.option("--train", required=True, type=int)
@click.option("--validation", required=True, type=int)
@click.option("--test", required=True, type=int)
@click.option("--seed", default=0, show_default=True)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
def split_cmd(pairs_path: str, train: int, validation: int, test: int, seed: int, out_dir: str):
    """Shuffle and partition a pairs CSV into train/validation/test files."""
    pairs = load_pairs(_read_source(pairs_path))
    _echo_seed(seed)
    spec = SplitSpec(train=train, validation=validation, test=test, seed=seed)
    parts = split_dataset(pairs, spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, records in zip(("train", "validation", "test"), parts):
        with (out / f"{name}.csv").open("w", encoding="utf-8", newline="") as handle:
            write_pairs(records, handle)
        click.echo(f"{name}: {len(records)} pairs", err=True)
    click.echo(str(out))


@cli.command("run")
@click.option("--config", "config_path", required=True, help="Grid config JSON.")
@click.option("--backend", "backend_kind", type=click.Choice(["template", "replay", "remote"]),
              default=None, help="Override the backend declared in the config.")
@click.option("--out-dir", default="runs", show_default=True)
def run_cmd(config_path: str, backend_kind: str | None, out_dir: str):
    """Execute the full experiment grid and persist per-instance records."""
    config = GridConfig.from_file(config_path)
    if backend_kind:
        config.backend = {"kind": backend_kind, **(
            {"cache": config.backend.get("cache")} if backend_kind == "replay" else {}
        )}
    results = run_grid(config, out_dir=Path(out_dir))
    complete = sum(1 for r in results if r.complete)
    click.echo(f"cells={len(results)} complete={complete}", err=True)
    click.echo(str(Path(out_dir) / config.run_id))


@cli.command("plan")
@click.option("--config", "config_path", required=True, help="Grid config JSON.")
def plan_cmd(config_path: str):
    """Print the planned grid cells without executing them."""
    config = GridConfig.from_file(config_path)
    cells = plan_grid(config)
    for cell in cells:
        click.echo(f"{cell.cell_hash()}  {cell.label()}")
    click.echo(f"total={len(cells)}", err=True)


@cli.command("eval")
@click.option("--candidates", required=True, help="Generated sentences, one per line.")
@click.option("--references", required=True, help="Reference sentences, one per line.")
@click.option("--components", default=None,
              help="Component documents (JSONL) aligned with the candidates.")
@click.option("--lexicon", "lexicon_path", default=None, help="Polarity cue lexicon JSON.")
@click.option("--adapter", default=None,
              help="External scorer: command line or HTTP endpoint.")
def eval_cmd(candidates: str, references: str, components: str | None,
             lexicon_path: str | None, adapter: str | None):
    """Score candidate sentences against references; JSONL plus aggregate."""
    cand_lines = [l for l in _read_source(candidates).splitlines() if l.strip()]
    ref_lines = [l for l in _read_source(references).splitlines() if l.strip()]
    if len(cand_lines) != len(ref_lines):
        raise CausalTextError(
            f"{len(cand_lines)} candidates vs {len(ref_lines)} references", code="eval-align"
        )
    comps: list[Component | None] = [None] * len(cand_lines)
    if components:
        docs = [json.loads(l) for l in _read_source(components).splitlines() if l.strip()]
        if len(docs) != len(cand_lines):
            raise CausalTextError(
                f"{len(docs)} components vs {len(cand_lines)} candidates", code="eval-align"
            )
        comps = [Component.from_document(d) for d in docs]
    lexicon = PolarityLexicon.from_file(lexicon_path) if lexicon_path else None
    pairs = [
        ScoredPair(candidate=c, reference=r, component=comp)
        for c, r, comp in zip(cand_lines, ref_lines, comps)
    ]
    reports = [score_pair(pair, lexicon) for pair in pairs]
    if adapter:
        extra = external_score(pairs, adapter)
        for name, values in extra.items():
            reports = [
                type(report)(**{**report.as_dict(), "external": {**report.external, name: value}})
                for report, value in zip(reports, values)
            ]
    for index, report in enumerate(reports):
        click.echo(json.dumps({"index": index, **report.as_dict()}, ensure_ascii=False))
    click.echo(json.dumps({"aggregate": aggregate(reports).as_dict()}, ensure_ascii=False))


@cli.command("table")
@click.argument("run_dir")
@click.option("--layout", type=click.Choice(["markdown", "csv"]), default="markdown",
              show_default=True)
@click.option("--out", "out_dir", default=None,
              help="Also write table.csv, table.md and score figures here.")
def table_cmd(run_dir: str, layout: str, out_dir: str | None):
    """Tabulate a finished run; optionally render the report files."""
    results = load_results(run_dir)
    if out_dir:
        written = write_report(results, out_dir)
        for path in written["tables"] + written["figures"]:
            click.echo(str(path), err=True)
    sys.stdout.write(render_table(results, layout))


@cli.group()
def annotate():
    """Pairwise human evaluation: create, serve and summarize sessions."""


@annotate.command("create")
@click.option("--results-a", required=True, help="instances.jsonl of the first variant.")
@click.option("--results-b", required=True, help="instances.jsonl of the second variant.")
@click.option("--provenance-a", default="tags", show_default=True)
@click.option("--provenance-b", default="notags", show_default=True)
@click.option("--n-samples", default=20, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--session-id", default="session", show_default=True)
@click.option("--store", "store_dir", default="annotations", show_default=True)
def annotate_create(results_a: str, results_b: str, provenance_a: str, provenance_b: str,
                    n_samples: int, seed: int, session_id: str, store_dir: str):
    """Sample shared instances from two variant runs into a blinded session."""
    def read_records(path: str) -> list[dict]:
        return [json.loads(l) for l in _read_source(path).splitlines() if l.strip()]

    _echo_seed(seed)
    session = create_session(
        read_records(results_a),
        read_records(results_b),
        provenance_a=provenance_a,
        provenance_b=provenance_b,
        n_samples=n_samples,
        seed=seed,
        session_id=session_id,
    )
    store = SessionStore(store_dir)
    store.save(session)
    click.echo(str(Path(store_dir) / session_id))


@annotate.command("serve")
@click.option("--store", "store_dir", default="annotations", show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8765, show_default=True)
@click.option("--ui", "ui_dir", default=None, help="Built UI bundle to serve statically.")
def annotate_serve(store_dir: str, host: str, port: int, ui_dir: str | None):
    """Run the annotation HTTP service."""
    click.echo(f"serving sessions from {store_dir} on http://{host}:{port}", err=True)
    serve(SessionStore(store_dir), host=host, port=port, ui_dir=ui_dir)


@annotate.command("stats")
@click.option("--store", "store_dir", default="annotations", show_default=True)
@click.option("--session-id", default="session", show_default=True)
def annotate_stats(store_dir: str, session_id: str):
    """Print preference percentages and agreement for a session."""
    store = SessionStore(store_dir)
    click.echo(json.dumps(store.stats(session_id), ensure_ascii=False, indent=2))


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        return 130
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return 1
    except CausalTextError as exc:
        click.echo(f"error[{exc.code}]: {exc}", err=True)
        return 1
    except OSError as exc:
        click.echo(f"error[io]: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
