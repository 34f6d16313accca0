"""Prompt assembly for the three training settings, plus dataset splitting.

Zero-shot prompts carry only a task instruction and the test query. Few-shot
prompts prepend k sampled (prompt, completion) examples separated by the
completion-endpoint separator. The fine-tune exporter writes line-delimited
records in the adorned prompt/completion shape those endpoints train on.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence

from .errors import BudgetError, PairsError, PromptError, SplitError

DEFAULT_STATEMENT = "Complete the given prompts"
DEFAULT_SEPARATOR = "\n\n###\n\n"
DEFAULT_INSTRUCTION = (
    "Describe the following causal graph in plain English, expressing whether "
    "each cause increases or decreases each effect."
)
DEFAULT_CONTEXT_LIMIT = 2048
DEFAULT_FEW_SHOT_K = 3
END_SENTINEL = "<end>"


@dataclass(frozen=True)
class PairRecord:
    """One (linearized prompt, reference sentence) pair."""

    prompt: str
    completion: str


def estimate_tokens(text: str) -> int:
    """Endpoint-agnostic token estimate: ceil(chars / 4), monotone in length."""
    return math.ceil(len(text) / 4)


def load_pairs(source: str | Path | IO[str]) -> list[PairRecord]:
    """Read prompt/completion pairs from CSV, stripping the end sentinel."""
    if isinstance(source, Path):
        text = source.read_text(encoding="utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise PairsError("empty pairs file", code="empty-pairs")
    missing = {"prompt", "completion"} - set(reader.fieldnames)
    if missing:
        raise PairsError(f"missing column(s): {', '.join(sorted(missing))}", code="missing-column")
    records: list[PairRecord] = []
    for row_no, row in enumerate(reader, start=2):
        prompt = (row["prompt"] or "").strip()
        completion = (row["completion"] or "").replace(END_SENTINEL, "").strip()
        if not prompt:
            raise PairsError(f"row {row_no}: empty prompt", code="empty-prompt")
        if not completion:
            raise PairsError(f"row {row_no}: empty completion", code="empty-completion")
        records.append(PairRecord(prompt=prompt, completion=completion))
    if not records:
        raise PairsError("pairs file has a header but no rows", code="empty-pairs")
    return records


def write_pairs(records: Iterable[PairRecord], out: IO[str]) -> int:
    """Emit prompt,completion rows; completions may be empty for unlabeled prompts."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["prompt", "completion"])
    count = 0
    for record in records:
        writer.writerow([record.prompt, record.completion])
        count += 1
    return count


@dataclass(frozen=True)
class PromptBundle:
    setting: str
    text: str
    token_estimate: int
    k: int = 0
    seed: int | None = None


def _check_budget(text: str, context_limit: int) -> int:
    estimate = estimate_tokens(text)
    if estimate > context_limit:
        raise BudgetError(
            f"assembled prompt estimates {estimate} tokens, over the {context_limit} limit"
        )
    return estimate


def sample_examples(pairs: Sequence[PairRecord], k: int, seed: int) -> list[PairRecord]:
    """Seeded uniform sample without replacement, fixed for a whole run."""
    if k < 1:
        raise PromptError(f"k must be >= 1 (got {k})", code="bad-k")
    if k > len(pairs):
        raise PromptError(f"k={k} exceeds the {len(pairs)} available pairs", code="bad-k")
    return random.Random(seed).sample(list(pairs), k)


def few_shot_prefix(
    examples: Sequence[PairRecord],
    *,
    statement: str = DEFAULT_STATEMENT,
    separator: str = DEFAULT_SEPARATOR,
) -> str:
    blocks = "".join(
        f"prompt: {pair.prompt}\ncompletion: {pair.completion}{separator}" for pair in examples
    )
    return f"{statement}\n\n{blocks}"


def attach_query(prefix: str, test_prompt: str) -> str:
    return f"{prefix}prompt: {test_prompt}\ncompletion: \n\n"


def build_few_shot(
    pairs: Sequence[PairRecord],
    k: int,
    seed: int,
    test_prompt: str,
    *,
    statement: str = DEFAULT_STATEMENT,
    separator: str = DEFAULT_SEPARATOR,
    context_limit: int = DEFAULT_CONTEXT_LIMIT,
) -> PromptBundle:
    """Assemble a few-shot prompt: statement, k example blocks, the test query."""
    if not test_prompt:
        raise PromptError("test prompt must be non-empty", code="empty-prompt")
    examples = sample_examples(pairs, k, seed)
    text = attach_query(
        few_shot_prefix(examples, statement=statement, separator=separator), test_prompt
    )
    estimate = _check_budget(text, context_limit)
    return PromptBundle(setting="few-shot", text=text, token_estimate=estimate, k=k, seed=seed)


def build_zero_shot(
    test_prompt: str,
    instruction: str = DEFAULT_INSTRUCTION,
    *,
    context_limit: int = DEFAULT_CONTEXT_LIMIT,
) -> PromptBundle:
    """Assemble a zero-shot prompt: instruction plus the bare test query."""
    if not instruction:
        raise PromptError("instruction must be non-empty", code="empty-instruction")
    if not test_prompt:
        raise PromptError("test prompt must be non-empty", code="empty-prompt")
    text = f"{instruction}\n\nprompt: {test_prompt}\ncompletion: "
    estimate = _check_budget(text, context_limit)
    return PromptBundle(setting="zero-shot", text=text, token_estimate=estimate)


def export_finetune(
    pairs: Sequence[PairRecord],
    stop_token: str = "\n",
    *,
    prompt_suffix: str = " ->",
    completion_prefix: str = " ",
) -> list[str]:
    """Render pairs as line-delimited JSON records for fine-tune upload."""
    if not pairs:
        raise PairsError("no pairs to export", code="empty-pairs")
    lines = []
    for pair in pairs:
        record = {
            "prompt": f"{pair.prompt}{prompt_suffix}",
            "completion": f"{completion_prefix}{pair.completion}{stop_token}",
        }
        lines.append(json.dumps(record, ensure_ascii=False))
    return lines


@dataclass(frozen=True)
class SplitSpec:
    """Train/validation/test partition sizes plus the shuffle seed.

    Sizes are either absolute counts (ints) or ratios (floats summing to 1);
    ratios resolve to counts by largest remainder.
    """

    train: int | float
    validation: int | float
    test: int | float
    seed: int = 0

    def resolve(self, total: int) -> tuple[int, int, int]:
        parts = (self.train, self.validation, self.test)
        if all(isinstance(p, int) for p in parts):
            counts = (self.train, self.validation, self.test)
            if sum(counts) != total:
                raise SplitError(
                    f"counts {counts} do not sum to the {total} available pairs",
                    code="bad-counts",
                )
        else:
            ratios = tuple(float(p) for p in parts)
            if not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
                raise SplitError(f"ratios {ratios} do not sum to 1", code="bad-counts")
            floors = [int(r * total) for r in ratios]
            remainders = [r * total - f for r, f in zip(ratios, floors)]
            for _ in range(total - sum(floors)):
                best = max(range(3), key=lambda i: (remainders[i], -i))
                floors[best] += 1
                remainders[best] = -1.0
            counts = tuple(floors)
        if any(c <= 0 for c in counts):
            raise SplitError(f"every partition must be non-empty (got {counts})", code="empty-part")
        return counts  # type: ignore[return-value]


def split_dataset(
    pairs: Sequence[PairRecord], spec: SplitSpec
) -> tuple[list[PairRecord], list[PairRecord], list[PairRecord]]:
    """Seeded shuffle then partition into disjoint train/validation/test."""
    n_train, n_val, n_test = spec.resolve(len(pairs))
    shuffled = list(pairs)
    random.Random(spec.seed).shuffle(shuffled)
    train = shuffled[:n_train]
    validation = shuffled[n_train : n_train + n_val]
    test = shuffled[n_train + n_val :]
    return train, validation, test
