"""Reference-based scoring and agreement statistics.

Native metrics share one token stream (Unicode-normalized, lowercased,
punctuation-split) so their scores are comparable:

* rouge_l: F1 over longest-common-subsequence precision and recall.
* meteor_lite: staged unigram alignment (exact, then stemmed), harmonic
  mean weighted toward recall, fragmentation penalty over chunks. The full
  metric's synonym stage needs a lexical database, hence the "lite" label.
* polarity_accuracy: per-edge check that both concept labels are mentioned
  and a causal cue of the right sign sits between them.

cohen_kappa serves the human-evaluation side. External neural scorers are
reached through a line-delimited adapter and degrade to absent scores.
"""

from __future__ import annotations

import json
import logging
import re
import shlex
import subprocess
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Mapping, Sequence

import httpx

from .errors import AdapterError, MetricError
from .graph import Component, Polarity
from .stemmer import stem

log = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[^\W_]+")

#: Function words ignored when checking how much of a concept label a
#: candidate sentence mentions.
_STOPWORDS = frozenset(
    "a an the of to and or in on for with by at from".split()
)

DEFAULT_INCREASE_CUES = ("increase", "raise", "improve", "boost", "augment", "grow", "more")
DEFAULT_DECREASE_CUES = ("decrease", "reduce", "lower", "lessen", "prevent", "diminish", "less")

LABEL_COVERAGE_THRESHOLD = 0.6

# Search budget for the exact chunk-minimizing alignment; beyond it the
# deterministic greedy solution found first is kept.
_ALIGNMENT_NODE_BUDGET = 200_000


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens; punctuation splits, underscores excluded."""
    normalized = unicodedata.normalize("NFKC", text).lower()
    return _TOKEN_RE.findall(normalized)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        current = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                current[j] = previous[j - 1] + 1
            else:
                current[j] = max(previous[j], current[j - 1])
        previous = current
    return previous[len(b)]


def rouge_l(candidate: str, reference: str) -> float:
    """LCS F1: P = |LCS|/|cand|, R = |LCS|/|ref|, F = 2PR/(P+R)."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return 0.0
    lcs = _lcs_length(cand, ref)
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _stage_budgets(cand: Sequence[str], ref: Sequence[str]):
    """Fixed match counts: exact per surface form, then stemmed on leftovers."""
    def counts(tokens):
        out: dict[str, int] = {}
        for token in tokens:
            out[token] = out.get(token, 0) + 1
        return out

    cand_forms = counts(cand)
    ref_forms = counts(ref)
    exact = {w: min(c, ref_forms.get(w, 0)) for w, c in cand_forms.items()}
    exact = {w: k for w, k in exact.items() if k > 0}
    leftover_c: dict[str, int] = {}
    for w, c in cand_forms.items():
        rest = c - exact.get(w, 0)
        if rest:
            leftover_c[stem(w)] = leftover_c.get(stem(w), 0) + rest
    leftover_r: dict[str, int] = {}
    for w, c in ref_forms.items():
        rest = c - exact.get(w, 0)
        if rest:
            leftover_r[stem(w)] = leftover_r.get(stem(w), 0) + rest
    stemmed = {
        s: min(c, leftover_r.get(s, 0)) for s, c in leftover_c.items() if leftover_r.get(s, 0)
    }
    stemmed = {s: k for s, k in stemmed.items() if k > 0}
    return exact, stemmed


def _align(cand: Sequence[str], ref: Sequence[str]) -> tuple[int, int]:
    """Return (matched count, minimal chunk count) for the staged alignment.

    Exhaustive depth-first search over occurrence pairings; ref choices are
    tried nearest-after-previous first so the first complete solution is the
    greedy monotone one, which bounds the search. Past the node budget the
    best solution found so far is kept (still deterministic).
    """
    exact, stemmed = _stage_budgets(cand, ref)
    total = sum(exact.values()) + sum(stemmed.values())
    if total == 0:
        return 0, 0
    cand_stems = [stem(t) for t in cand]
    ref_stems = [stem(t) for t in ref]
    ref_by_form: dict[str, list[int]] = {}
    for j, token in enumerate(ref):
        ref_by_form.setdefault(token, []).append(j)
    ref_by_stem: dict[str, list[int]] = {}
    for j, s in enumerate(ref_stems):
        ref_by_stem.setdefault(s, []).append(j)
    # Future candidate occurrence counts per form / per stem, for feasibility.
    suffix_form: list[dict[str, int]] = [dict() for _ in range(len(cand) + 1)]
    suffix_stem: list[dict[str, int]] = [dict() for _ in range(len(cand) + 1)]
    for i in range(len(cand) - 1, -1, -1):
        suffix_form[i] = dict(suffix_form[i + 1])
        suffix_form[i][cand[i]] = suffix_form[i].get(cand[i], 0) + 1
        suffix_stem[i] = dict(suffix_stem[i + 1])
        suffix_stem[i][cand_stems[i]] = suffix_stem[i].get(cand_stems[i], 0) + 1

    best = {"chunks": None}
    state_used: set[int] = set()
    budget = {"nodes": 0}

    def ref_feasible(need1: Mapping[str, int], need2: Mapping[str, int]) -> bool:
        for w, k in need1.items():
            if k and sum(1 for j in ref_by_form.get(w, ()) if j not in state_used) < k:
                return False
        for s, k in need2.items():
            if not k:
                continue
            unused = [j for j in ref_by_stem.get(s, ()) if j not in state_used]
            # Refs still owed to stage 1 for their surface form cannot be
            # double-booked by stage 2.
            reserved = sum(need1.get(w, 0) for w in {ref[j] for j in unused})
            if len(unused) - reserved < k:
                return False
        return True

    def search(i, need1, need2, prev, chunks):
        if best["chunks"] is not None and chunks >= best["chunks"]:
            return
        if budget["nodes"] > _ALIGNMENT_NODE_BUDGET and best["chunks"] is not None:
            return
        budget["nodes"] += 1
        if i == len(cand):
            if all(v == 0 for v in need1.values()) and all(v == 0 for v in need2.values()):
                best["chunks"] = chunks
            return
        form = cand[i]
        stem_class = cand_stems[i]
        rest_form = suffix_form[i + 1].get(form, 0)

        def options(indices, reserve_stage1):
            usable = []
            for j in indices:
                if j in state_used:
                    continue
                if reserve_stage1:
                    w = ref[j]
                    free_w = sum(1 for q in ref_by_form.get(w, ()) if q not in state_used)
                    if free_w - 1 < need1.get(w, 0):
                        continue
                usable.append(j)
            if prev is not None:
                usable.sort(key=lambda j: (j != prev[1] + 1, j))
            return usable

        if need1.get(form, 0) > 0:
            for j in options(ref_by_form.get(form, ()), reserve_stage1=False):
                new_need1 = dict(need1)
                new_need1[form] -= 1
                state_used.add(j)
                new_chunks = chunks + (
                    0 if prev is not None and prev[0] == i - 1 and prev[1] == j - 1 else 1
                )
                if ref_feasible(new_need1, need2):
                    search(i + 1, new_need1, need2, (i, j), new_chunks)
                state_used.discard(j)
        # Stage-2 use of this occurrence is allowed only if stage-1 demand for
        # its surface form can still be met by later occurrences.
        if need2.get(stem_class, 0) > 0 and rest_form >= need1.get(form, 0):
            for j in options(ref_by_stem.get(stem_class, ()), reserve_stage1=True):
                new_need2 = dict(need2)
                new_need2[stem_class] -= 1
                state_used.add(j)
                new_chunks = chunks + (
                    0 if prev is not None and prev[0] == i - 1 and prev[1] == j - 1 else 1
                )
                if ref_feasible(need1, new_need2):
                    search(i + 1, need1, new_need2, (i, j), new_chunks)
                state_used.discard(j)
        # Leaving this occurrence unmatched must keep both budgets coverable
        # by the remaining candidate occurrences.
        if rest_form >= need1.get(form, 0):
            feasible = True
            for s, k in need2.items():
                if not k:
                    continue
                capacity = suffix_stem[i + 1].get(s, 0)
                reserved = sum(
                    min(need1.get(w, 0), suffix_form[i + 1].get(w, 0))
                    for w in {cand[q] for q in range(i + 1, len(cand)) if cand_stems[q] == s}
                )
                if capacity - reserved < k:
                    feasible = False
                    break
            if feasible:
                search(i + 1, need1, need2, prev, chunks)

    search(0, dict(exact), dict(stemmed), None, 0)
    if best["chunks"] is None:
        raise MetricError("alignment search failed to produce a matching", code="alignment")
    return total, best["chunks"]


def meteor_lite(candidate: str, reference: str) -> float:
    """Staged-alignment score with the fragmentation penalty.

    F_mean = 10PR / (R + 9P); penalty = 0.5 * (chunks / m)^3;
    score = F_mean * (1 - penalty); zero when nothing matches.
    """
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return 0.0
    matched, chunks = _align(cand, ref)
    if matched == 0:
        return 0.0
    precision = matched / len(cand)
    recall = matched / len(ref)
    f_mean = 10.0 * precision * recall / (recall + 9.0 * precision)
    penalty = 0.5 * (chunks / matched) ** 3
    return f_mean * (1.0 - penalty)


@dataclass(frozen=True)
class PolarityLexicon:
    """Disjoint stem sets of increase and decrease cue words."""

    increase: frozenset[str]
    decrease: frozenset[str]

    def __post_init__(self):
        if not self.increase or not self.decrease:
            raise MetricError("polarity lexicon must list both cue directions", code="empty-lexicon")
        overlap = self.increase & self.decrease
        if overlap:
            raise MetricError(
                f"cue stems in both directions: {sorted(overlap)}", code="lexicon-overlap"
            )

    @classmethod
    def default(cls) -> "PolarityLexicon":
        return cls.from_words(DEFAULT_INCREASE_CUES, DEFAULT_DECREASE_CUES)

    @classmethod
    def from_words(cls, increase, decrease) -> "PolarityLexicon":
        return cls(
            increase=frozenset(stem(w.lower()) for w in increase),
            decrease=frozenset(stem(w.lower()) for w in decrease),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "PolarityLexicon":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls.from_words(data["increase"], data["decrease"])

    def cue_stems(self, polarity: Polarity) -> frozenset[str]:
        return self.increase if polarity is Polarity.POSITIVE else self.decrease


def _content_stems(label: str) -> set[str]:
    tokens = tokenize(label)
    content = [t for t in tokens if t not in _STOPWORDS]
    return {stem(t) for t in (content or tokens)}


def polarity_accuracy(
    component: Component, candidate: str, lexicon: PolarityLexicon | None = None
) -> float:
    """Fraction of edges correctly verbalized in the candidate.

    An edge counts as correct when some cue token of the edge's polarity
    splits the sentence so that at least 60% of the source-label content
    stems occur before it and at least 60% of the target-label content
    stems occur after it.
    """
    lexicon = lexicon or PolarityLexicon.default()
    tokens = tokenize(candidate)
    stems = [stem(t) for t in tokens]
    positions: dict[str, list[int]] = {}
    for index, s in enumerate(stems):
        positions.setdefault(s, []).append(index)
    if not component.edges:
        raise MetricError("component has no edges to score", code="empty-component")

    def coverage(label_stems: set[str], lo: int | None, hi: int | None) -> float:
        hit = 0
        for s in label_stems:
            for pos in positions.get(s, ()):
                if (lo is None or pos < lo) and (hi is None or pos > hi):
                    hit += 1
                    break
        return hit / len(label_stems)

    correct = 0
    for src_label, polarity, tgt_label in component.labeled_edges():
        src_stems = _content_stems(src_label)
        tgt_stems = _content_stems(tgt_label)
        cues = lexicon.cue_stems(polarity)
        ok = False
        for cue_pos, s in enumerate(stems):
            if s not in cues:
                continue
            if (
                coverage(src_stems, cue_pos, None) >= LABEL_COVERAGE_THRESHOLD
                and coverage(tgt_stems, None, cue_pos) >= LABEL_COVERAGE_THRESHOLD
            ):
                ok = True
                break
        correct += ok
    return correct / len(component.edges)


def cohen_kappa(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> float:
    """Chance-corrected agreement between two aligned label sequences."""
    if len(labels_a) != len(labels_b):
        raise MetricError(
            f"label sequences differ in length ({len(labels_a)} vs {len(labels_b)})",
            code="kappa-length",
        )
    if not labels_a:
        raise MetricError("label sequences are empty", code="kappa-empty")
    n = len(labels_a)
    observed = sum(1 for a, b in zip(labels_a, labels_b) if a == b) / n
    categories = set(labels_a) | set(labels_b)
    expected = 0.0
    for category in categories:
        pa = sum(1 for a in labels_a if a == category) / n
        pb = sum(1 for b in labels_b if b == category) / n
        expected += pa * pb
    if expected == 1.0:
        return 1.0
    return (observed - expected) / (1.0 - expected)


@dataclass(frozen=True)
class ScoredPair:
    candidate: str
    reference: str
    component: Component | None = None


@dataclass(frozen=True, eq=True)
class MetricReport:
    rouge_l: float
    meteor_lite: float
    polarity_accuracy: float | None = None
    external: Mapping[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "rouge_l": self.rouge_l,
            "meteor_lite": self.meteor_lite,
            "polarity_accuracy": self.polarity_accuracy,
            "external": dict(self.external),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "MetricReport":
        return cls(
            rouge_l=data["rouge_l"],
            meteor_lite=data["meteor_lite"],
            polarity_accuracy=data.get("polarity_accuracy"),
            external=dict(data.get("external", {})),
        )


def score_pair(pair: ScoredPair, lexicon: PolarityLexicon | None = None) -> MetricReport:
    polarity = None
    if pair.component is not None:
        polarity = polarity_accuracy(pair.component, pair.candidate, lexicon)
    return MetricReport(
        rouge_l=rouge_l(pair.candidate, pair.reference),
        meteor_lite=meteor_lite(pair.candidate, pair.reference),
        polarity_accuracy=polarity,
    )


def aggregate(reports: Sequence[MetricReport]) -> MetricReport:
    """Arithmetic mean per metric; sparse metrics average over their carriers."""
    if not reports:
        raise MetricError("nothing to aggregate", code="empty-aggregate")
    rouge = sum(r.rouge_l for r in reports) / len(reports)
    meteor = sum(r.meteor_lite for r in reports) / len(reports)
    with_polarity = [r.polarity_accuracy for r in reports if r.polarity_accuracy is not None]
    polarity = sum(with_polarity) / len(with_polarity) if with_polarity else None
    names = {name for r in reports for name in r.external}
    external = {}
    for name in sorted(names):
        values = [r.external[name] for r in reports if name in r.external]
        external[name] = sum(values) / len(values)
    return MetricReport(
        rouge_l=rouge, meteor_lite=meteor, polarity_accuracy=polarity, external=external
    )


def external_score(
    pairs: Sequence[ScoredPair],
    adapter: str,
    *,
    timeout: float = 120.0,
    strict: bool = False,
) -> dict[str, list[float]]:
    """Send pairs to an external scorer; failures degrade to absent scores.

    The adapter is either an HTTP(S) URL or a command line. Input: one JSON
    object per line with candidate and reference. Output: one JSON object
    per (pair, metric) in pair order with name and score.
    """
    try:
        return _invoke_adapter(pairs, adapter, timeout=timeout)
    except AdapterError:
        if strict:
            raise
        log.warning("external scorer %r unavailable; scores omitted", adapter, exc_info=True)
        return {}


def _invoke_adapter(
    pairs: Sequence[ScoredPair], adapter: str, *, timeout: float
) -> dict[str, list[float]]:
    payload = "".join(
        json.dumps({"candidate": p.candidate, "reference": p.reference}, ensure_ascii=False) + "\n"
        for p in pairs
    )
    if adapter.startswith(("http://", "https://")):
        try:
            response = httpx.post(
                adapter, content=payload.encode("utf-8"), timeout=timeout,
                headers={"content-type": "application/x-ndjson"},
            )
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise AdapterError(f"adapter endpoint failed: {exc}", code="adapter-unreachable") from exc
        output = response.text
    else:
        try:
            proc = subprocess.run(
                shlex.split(adapter),
                input=payload,
                capture_output=True,
                text=True,
                timeout=timeout,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise AdapterError(f"adapter command failed: {exc}", code="adapter-unreachable") from exc
        if proc.returncode != 0:
            raise AdapterError(
                f"adapter exited {proc.returncode}: {proc.stderr[:200]}",
                code="adapter-unreachable",
            )
        output = proc.stdout
    scores: dict[str, list[float]] = {}
    for line_no, line in enumerate(output.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            name = str(record["name"])
            value = float(record["score"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise AdapterError(f"line {line_no}: malformed adapter output", code="adapter-output") from exc
        scores.setdefault(name, []).append(value)
    if not scores:
        raise AdapterError("adapter produced no scores", code="adapter-output")
    for name, values in scores.items():
        if len(values) != len(pairs):
            raise AdapterError(
                f"metric {name!r}: got {len(values)} scores for {len(pairs)} pairs",
                code="adapter-output",
            )
    return scores
