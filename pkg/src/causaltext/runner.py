"""Experiment grid: plan cells, execute them against a backend, persist results.

A cell is one point in the cartesian product of datasets, input modes
(tagged or connector form), training settings, temperatures and models.
Per-instance records are written as line-delimited JSON so aggregates can
always be recomputed from disk, and a warm replay cache makes re-runs
bit-identical and network-free.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .client import (
    CachingBackend,
    CompletionRequest,
    RemoteBackend,
    ReplayBackend,
    ReplayCache,
    TemplateBackend,
    complete_many,
)
from .errors import BudgetError, CausalTextError, RunnerError
from .graph import Component
from .linearize import (
    DEFAULT_CONNECTOR,
    LinearizationMode,
    TAGS,
    linearize,
    no_tags,
    parse_linearized,
)
from .metrics import (
    MetricReport,
    PolarityLexicon,
    ScoredPair,
    aggregate,
    score_pair,
)
from .prompts import (
    DEFAULT_CONTEXT_LIMIT,
    DEFAULT_FEW_SHOT_K,
    DEFAULT_INSTRUCTION,
    DEFAULT_SEPARATOR,
    DEFAULT_STATEMENT,
    PairRecord,
    attach_query,
    build_zero_shot,
    estimate_tokens,
    few_shot_prefix,
    load_pairs,
    sample_examples,
    split_dataset,
    SplitSpec,
)

MODES = ("tags", "notags")


@dataclass(frozen=True)
class ZeroShot:
    kind: str = "zero-shot"

    def label(self) -> str:
        return "zero-shot"

    def as_dict(self) -> dict:
        return {"kind": "zero-shot"}


@dataclass(frozen=True)
class FewShot:
    k: int = DEFAULT_FEW_SHOT_K
    seed: int = 0
    kind: str = "few-shot"

    def label(self) -> str:
        return f"few-shot(k={self.k})"

    def as_dict(self) -> dict:
        return {"kind": "few-shot", "k": self.k, "seed": self.seed}


@dataclass(frozen=True)
class FineTuned:
    model: str | None = None
    kind: str = "fine-tuned"

    def label(self) -> str:
        return "fine-tuned"

    def as_dict(self) -> dict:
        return {"kind": "fine-tuned", "model": self.model}


Setting = ZeroShot | FewShot | FineTuned


def setting_from_dict(data: dict) -> Setting:
    kind = data.get("kind")
    if kind == "zero-shot":
        return ZeroShot()
    if kind == "few-shot":
        return FewShot(k=int(data.get("k", DEFAULT_FEW_SHOT_K)), seed=int(data.get("seed", 0)))
    if kind == "fine-tuned":
        return FineTuned(model=data.get("model"))
    raise RunnerError(f"unknown setting kind {kind!r}", code="bad-setting")


@dataclass(frozen=True)
class ExperimentCell:
    dataset: str
    input_mode: str  # "tags" | "notags"
    setting: Setting
    temperature: float
    model: str

    def as_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "input_mode": self.input_mode,
            "setting": self.setting.as_dict(),
            "temperature": self.temperature,
            "model": self.model,
        }

    def cell_hash(self) -> str:
        payload = json.dumps(self.as_dict(), sort_keys=True)
        return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:12]

    def label(self) -> str:
        return (
            f"{self.dataset}/{self.input_mode}/{self.setting.label()}"
            f"/T{self.temperature}/{self.model}"
        )


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    pairs_path: str
    split: SplitSpec

    def load_splits(self, base: Path | None = None):
        path = Path(self.pairs_path)
        if base is not None and not path.is_absolute():
            path = base / path
        return split_dataset(load_pairs(path), self.split)


@dataclass
class GridConfig:
    datasets: list[DatasetSpec]
    modes: list[str] = field(default_factory=lambda: list(MODES))
    settings: list[Setting] = field(
        default_factory=lambda: [FineTuned(), FewShot(), ZeroShot()]
    )
    temperatures: list[float] = field(default_factory=lambda: [0.6, 0.8])
    models: list[str] = field(default_factory=lambda: ["davinci"])
    backend: dict = field(default_factory=lambda: {"kind": "template"})
    connector: str = DEFAULT_CONNECTOR
    instruction: str = DEFAULT_INSTRUCTION
    statement: str = DEFAULT_STATEMENT
    separator: str = DEFAULT_SEPARATOR
    context_limit: int = DEFAULT_CONTEXT_LIMIT
    max_tokens: int = 256
    max_workers: int = 1
    run_id: str = "run"
    base_dir: Path | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> "GridConfig":
        path = Path(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        return cls.from_dict(data, base_dir=path.parent)

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "GridConfig":
        datasets = [
            DatasetSpec(
                name=d["name"],
                pairs_path=d["pairs"],
                split=SplitSpec(
                    train=d["split"]["train"],
                    validation=d["split"]["validation"],
                    test=d["split"]["test"],
                    seed=int(d["split"].get("seed", 0)),
                ),
            )
            for d in data["datasets"]
        ]
        config = cls(datasets=datasets, base_dir=base_dir)
        if "modes" in data:
            config.modes = list(data["modes"])
        if "settings" in data:
            config.settings = [setting_from_dict(s) for s in data["settings"]]
        if "temperatures" in data:
            config.temperatures = [float(t) for t in data["temperatures"]]
        if "models" in data:
            config.models = list(data["models"])
        for key in (
            "backend", "connector", "instruction", "statement", "separator",
            "context_limit", "max_tokens", "max_workers", "run_id",
        ):
            if key in data:
                setattr(config, key, data[key])
        return config

    def mode_of(self, name: str) -> LinearizationMode:
        if name == "tags":
            return TAGS
        if name == "notags":
            return no_tags(self.connector)
        raise RunnerError(f"unknown input mode {name!r}", code="bad-mode")


def plan_grid(config: GridConfig) -> list[ExperimentCell]:
    """Cartesian product of the config axes, in deterministic nested order."""
    axes = {
        "datasets": config.datasets,
        "modes": config.modes,
        "settings": config.settings,
        "temperatures": config.temperatures,
        "models": config.models,
    }
    for name, values in axes.items():
        if not values:
            raise RunnerError(f"axis {name!r} is empty", code="empty-axis")
    cells = []
    for dataset in config.datasets:
        for mode in config.modes:
            for setting in config.settings:
                for temperature in config.temperatures:
                    for model in config.models:
                        cells.append(
                            ExperimentCell(
                                dataset=dataset.name,
                                input_mode=mode,
                                setting=setting,
                                temperature=temperature,
                                model=model,
                            )
                        )
    return cells


@dataclass
class CellResult:
    cell: ExperimentCell
    instances: list[dict]
    aggregate: MetricReport | None
    duration_s: float
    complete: bool

    @property
    def failures(self) -> list[dict]:
        return [r for r in self.instances if "error" in r]


def make_backend(spec: dict, cache: ReplayCache | None = None):
    """Build a backend from its config dict, wrapping it with the cache."""
    kind = spec.get("kind", "template")
    if kind == "template":
        inner = TemplateBackend()
    elif kind == "replay":
        path = spec.get("cache")
        if path is None and cache is None:
            raise RunnerError("replay backend needs a cache path", code="bad-backend")
        return ReplayBackend(cache if path is None else ReplayCache(path))
    elif kind == "remote":
        inner = RemoteBackend(
            spec["base_url"],
            api_key_env=spec.get("api_key_env", "CAUSALTEXT_API_KEY"),
            stop=spec.get("stop"),
        )
    else:
        raise RunnerError(f"unknown backend kind {kind!r}", code="bad-backend")
    if cache is not None:
        return CachingBackend(inner, cache)
    return inner


def _prompt_for(
    cell: ExperimentCell,
    mode_text: str,
    few_shot_block: str | None,
    config: GridConfig,
) -> tuple[str, str]:
    """Return (prompt text, model name) for one test instance."""
    setting = cell.setting
    if isinstance(setting, ZeroShot):
        bundle = build_zero_shot(
            mode_text, config.instruction, context_limit=config.context_limit
        )
        return bundle.text, cell.model
    if isinstance(setting, FewShot):
        text = attach_query(few_shot_block or "", mode_text)
        estimate = estimate_tokens(text)
        if estimate > config.context_limit:
            raise BudgetError(
                f"assembled prompt estimates {estimate} tokens, "
                f"over the {config.context_limit} limit"
            )
        return text, cell.model
    model = setting.model or cell.model
    return mode_text, model


def run_cell(
    cell: ExperimentCell,
    backend,
    splits: tuple[list[PairRecord], list[PairRecord], list[PairRecord]],
    config: GridConfig,
    *,
    out_dir: Path | None = None,
    lexicon: PolarityLexicon | None = None,
) -> CellResult:
    """Generate and score every test instance of one grid cell.

    Per-instance failures are recorded without aborting the cell; existing
    instance records in out_dir are kept and only missing ones re-execute.
    """
    started = time.perf_counter()
    train, _, test = splits
    mode = config.mode_of(cell.input_mode)

    few_shot_block = None
    if isinstance(cell.setting, FewShot):
        examples = sample_examples(train, cell.setting.k, cell.setting.seed)
        examples = [
            PairRecord(prompt=_render_mode(p.prompt, mode), completion=p.completion)
            for p in examples
        ]
        few_shot_block = few_shot_prefix(
            examples, statement=config.statement, separator=config.separator
        )

    cell_dir = None
    done: dict[int, dict] = {}
    if out_dir is not None:
        cell_dir = Path(out_dir) / cell.cell_hash()
        cell_dir.mkdir(parents=True, exist_ok=True)
        instances_file = cell_dir / "instances.jsonl"
        if instances_file.exists():
            for line in instances_file.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    record = json.loads(line)
                    done[record["index"]] = record

    prepared: list[dict] = []
    requests: list[CompletionRequest | None] = []
    components: list[Component | None] = []
    for index, pair in enumerate(test):
        if index in done and "error" not in done[index]:
            prepared.append(done[index])
            requests.append(None)
            components.append(None)
            continue
        try:
            component, _ = parse_linearized(pair.prompt)
            mode_text = linearize(component, mode).text
            prompt, model = _prompt_for(cell, mode_text, few_shot_block, config)
            request = CompletionRequest(
                model=model,
                prompt=prompt,
                temperature=cell.temperature,
                max_tokens=config.max_tokens,
            )
        except CausalTextError as exc:
            prepared.append(
                {"index": index, "reference": pair.completion, "error": exc.code,
                 "message": str(exc)}
            )
            requests.append(None)
            components.append(None)
            continue
        prepared.append(
            {"index": index, "prompt": prompt, "reference": pair.completion}
        )
        requests.append(request)
        components.append(component)

    pending = [r for r in requests if r is not None]
    responses = iter(
        complete_many(pending, backend, max_workers=config.max_workers, return_exceptions=True)
    )

    instances: list[dict] = []
    for record, request, component in zip(prepared, requests, components):
        if request is None:
            instances.append(record)
            continue
        outcome = next(responses)
        if isinstance(outcome, Exception):
            code = outcome.code if isinstance(outcome, CausalTextError) else "backend"
            instances.append(
                {**record, "error": code, "message": str(outcome)}
            )
            continue
        report = score_pair(
            ScoredPair(
                candidate=outcome.text, reference=record["reference"], component=component
            ),
            lexicon,
        )
        instances.append(
            {
                **record,
                "generation": outcome.text,
                "finish_reason": outcome.finish_reason,
                "backend": outcome.backend,
                "scores": report.as_dict(),
            }
        )

    scored = [MetricReport.from_dict(r["scores"]) for r in instances if "scores" in r]
    result = CellResult(
        cell=cell,
        instances=instances,
        aggregate=aggregate(scored) if scored else None,
        duration_s=time.perf_counter() - started,
        complete=all("scores" in r for r in instances) and len(instances) == len(test),
    )
    if cell_dir is not None:
        _persist_cell(cell_dir, result)
    return result


def _render_mode(tags_prompt: str, mode: LinearizationMode) -> str:
    component, _ = parse_linearized(tags_prompt)
    return linearize(component, mode).text


def _persist_cell(cell_dir: Path, result: CellResult) -> None:
    instances_file = cell_dir / "instances.jsonl"
    with instances_file.open("w", encoding="utf-8") as handle:
        for record in result.instances:
            handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
    aggregate_file = cell_dir / "aggregate.json"
    aggregate_file.write_text(
        json.dumps(
            result.aggregate.as_dict() if result.aggregate else None,
            ensure_ascii=False,
            sort_keys=True,
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    meta = {
        "cell": result.cell.as_dict(),
        "hash": result.cell.cell_hash(),
        "instances": len(result.instances),
        "failures": len(result.failures),
        "complete": result.complete,
        "duration_s": result.duration_s,
    }
    (cell_dir / "cell.json").write_text(
        json.dumps(meta, ensure_ascii=False, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def run_grid(
    config: GridConfig,
    *,
    out_dir: Path | None = None,
    backend=None,
    lexicon: PolarityLexicon | None = None,
) -> list[CellResult]:
    """Execute every planned cell sequentially, sharing one replay cache."""
    cells = plan_grid(config)
    if out_dir is not None:
        out_dir = Path(out_dir) / config.run_id
        out_dir.mkdir(parents=True, exist_ok=True)
        cache = ReplayCache(out_dir / "replay_cache.jsonl")
    else:
        cache = None
    if backend is None:
        backend = make_backend(config.backend, cache)
    elif cache is not None and not isinstance(backend, (ReplayBackend, CachingBackend)):
        backend = CachingBackend(backend, cache)
    splits_by_name = {
        spec.name: spec.load_splits(config.base_dir) for spec in config.datasets
    }
    results = []
    for cell in cells:
        results.append(
            run_cell(
                cell,
                backend,
                splits_by_name[cell.dataset],
                config,
                out_dir=out_dir,
                lexicon=lexicon,
            )
        )
    return results


def load_results(run_dir: str | Path) -> list[CellResult]:
    """Rebuild cell results from the records persisted on disk."""
    run_dir = Path(run_dir)
    results = []
    for cell_file in sorted(run_dir.glob("*/cell.json")):
        meta = json.loads(cell_file.read_text(encoding="utf-8"))
        cell_data = meta["cell"]
        cell = ExperimentCell(
            dataset=cell_data["dataset"],
            input_mode=cell_data["input_mode"],
            setting=setting_from_dict(cell_data["setting"]),
            temperature=float(cell_data["temperature"]),
            model=cell_data["model"],
        )
        instances = []
        instances_file = cell_file.parent / "instances.jsonl"
        if instances_file.exists():
            for line in instances_file.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    instances.append(json.loads(line))
        scored = [MetricReport.from_dict(r["scores"]) for r in instances if "scores" in r]
        results.append(
            CellResult(
                cell=cell,
                instances=instances,
                aggregate=aggregate(scored) if scored else None,
                duration_s=float(meta.get("duration_s", 0.0)),
                complete=bool(meta.get("complete", False)),
            )
        )
    return results
