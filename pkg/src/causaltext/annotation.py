"""Pairwise human-evaluation sessions.

A session compares two generation variants over a sample of shared test
instances. Each task shows the input subgraph plus the two candidate
sentences in a randomized A/B order; annotators pick the better sentence
for faithfulness and for coverage. Which variant produced which sentence
stays server-side: clients never see provenance. Labels append to a log,
and replaying the log reconstructs the exact same statistics.
"""

from __future__ import annotations

import json
import random
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DuplicateLabelError, SessionError, UnknownTaskError
from .linearize import parse_linearized
from .metrics import cohen_kappa

DIMENSIONS = ("faithfulness", "coverage")
CHOICES = ("A", "B")


@dataclass(frozen=True)
class TaskCandidate:
    text: str
    provenance: str  # hidden from annotators


@dataclass(frozen=True)
class AnnotationTask:
    task_id: str
    index: int
    graph_document: dict
    candidate_a: TaskCandidate
    candidate_b: TaskCandidate

    def public_view(self) -> dict:
        """The client-facing shape; deliberately free of provenance."""
        return {
            "task_id": self.task_id,
            "graph": self.graph_document,
            "sentence_a": self.candidate_a.text,
            "sentence_b": self.candidate_b.text,
        }

    def provenance_of(self, choice: str) -> str:
        if choice == "A":
            return self.candidate_a.provenance
        if choice == "B":
            return self.candidate_b.provenance
        raise SessionError(f"choice must be A or B (got {choice!r})", code="bad-choice")

    def as_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "index": self.index,
            "graph": self.graph_document,
            "candidate_a": {"text": self.candidate_a.text, "provenance": self.candidate_a.provenance},
            "candidate_b": {"text": self.candidate_b.text, "provenance": self.candidate_b.provenance},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "AnnotationTask":
        return cls(
            task_id=data["task_id"],
            index=int(data["index"]),
            graph_document=dict(data["graph"]),
            candidate_a=TaskCandidate(**data["candidate_a"]),
            candidate_b=TaskCandidate(**data["candidate_b"]),
        )


@dataclass(frozen=True)
class LabelRecord:
    task_id: str
    annotator_id: str
    faithfulness_choice: str
    coverage_choice: str
    timestamp: str = ""

    def __post_init__(self):
        for choice in (self.faithfulness_choice, self.coverage_choice):
            if choice not in CHOICES:
                raise SessionError(f"choice must be A or B (got {choice!r})", code="bad-choice")
        if not self.timestamp:
            object.__setattr__(
                self, "timestamp", datetime.now(timezone.utc).isoformat(timespec="seconds")
            )

    def as_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "annotator_id": self.annotator_id,
            "faithfulness_choice": self.faithfulness_choice,
            "coverage_choice": self.coverage_choice,
            "timestamp": self.timestamp,
        }


def create_session(
    results_a: Sequence[Mapping],
    results_b: Sequence[Mapping],
    *,
    provenance_a: str,
    provenance_b: str,
    n_samples: int = 20,
    seed: int = 0,
    session_id: str = "session",
) -> "Session":
    """Sample shared instances from two variant runs and build blinded tasks.

    Results are per-instance records (as persisted by the runner); the two
    sets are matched on the instance index and must overlap on at least
    n_samples generated instances.
    """
    by_index_a = {r["index"]: r for r in results_a if "generation" in r}
    by_index_b = {r["index"]: r for r in results_b if "generation" in r}
    shared = sorted(set(by_index_a) & set(by_index_b))
    if not shared:
        raise SessionError("result sets share no instances", code="disjoint-results")
    if n_samples > len(shared):
        raise SessionError(
            f"n_samples={n_samples} exceeds the {len(shared)} shared instances",
            code="too-few-instances",
        )
    rng = random.Random(seed)
    chosen = sorted(rng.sample(shared, n_samples))
    tasks = []
    for position, index in enumerate(chosen):
        record_a = by_index_a[index]
        record_b = by_index_b[index]
        component, _ = parse_linearized(_span_of(record_a))
        first = TaskCandidate(text=record_a["generation"], provenance=provenance_a)
        second = TaskCandidate(text=record_b["generation"], provenance=provenance_b)
        if rng.random() < 0.5:
            first, second = second, first
        tasks.append(
            AnnotationTask(
                task_id=f"t{position:03d}",
                index=index,
                graph_document=component.to_document(),
                candidate_a=first,
                candidate_b=second,
            )
        )
    return Session(session_id=session_id, tasks=tasks, seed=seed)


def _span_of(record: Mapping) -> str:
    prompt = record["prompt"]
    start = prompt.rfind("<S>")
    end = prompt.find("<E>", start)
    if start < 0 or end < 0:
        raise SessionError("instance prompt has no linearized span", code="no-span")
    return prompt[start : end + len("<E>")]


class Session:
    """In-memory session state; persistence is handled by SessionStore."""

    def __init__(self, session_id: str, tasks: Sequence[AnnotationTask], seed: int = 0):
        self.session_id = session_id
        self.tasks = list(tasks)
        self.seed = seed
        self._by_id = {task.task_id: task for task in self.tasks}
        self.labels: list[LabelRecord] = []
        self._labeled: set[tuple[str, str]] = set()

    def task(self, task_id: str) -> AnnotationTask:
        if task_id not in self._by_id:
            raise UnknownTaskError(f"unknown task {task_id!r}")
        return self._by_id[task_id]

    def next_task(self, annotator_id: str) -> AnnotationTask | None:
        for task in self.tasks:
            if (task.task_id, annotator_id) not in self._labeled:
                return task
        return None

    def add_label(self, record: LabelRecord) -> None:
        self.task(record.task_id)
        key = (record.task_id, record.annotator_id)
        if key in self._labeled:
            raise DuplicateLabelError(
                f"annotator {record.annotator_id!r} already labeled {record.task_id}"
            )
        self._labeled.add(key)
        self.labels.append(record)

    def progress(self, annotator_id: str) -> tuple[int, int]:
        done = sum(1 for task_id, ann in self._labeled if ann == annotator_id)
        return done, len(self.tasks)

    def annotators(self) -> list[str]:
        return sorted({record.annotator_id for record in self.labels})

    def compute_stats(self) -> dict:
        """Preference percentages by provenance and kappa per annotator pair."""
        if not self.labels:
            raise SessionError("no labels submitted yet", code="no-labels")
        provenances = sorted(
            {task.candidate_a.provenance for task in self.tasks}
            | {task.candidate_b.provenance for task in self.tasks}
        )
        preference: dict[str, dict[str, float]] = {}
        counts: dict[str, dict[str, int]] = {}
        for dimension in DIMENSIONS:
            tally = {p: 0 for p in provenances}
            for record in self.labels:
                task = self.task(record.task_id)
                choice = getattr(record, f"{dimension}_choice")
                tally[task.provenance_of(choice)] += 1
            total = sum(tally.values())
            counts[dimension] = tally
            preference[dimension] = {
                p: round(100.0 * c / total, 2) if total else 0.0 for p, c in tally.items()
            }
        kappa: dict[str, dict[str, float]] = {d: {} for d in DIMENSIONS}
        annotators = self.annotators()
        by_annotator: dict[str, dict[str, LabelRecord]] = {}
        for record in self.labels:
            by_annotator.setdefault(record.annotator_id, {})[record.task_id] = record
        for i in range(len(annotators)):
            for j in range(i + 1, len(annotators)):
                first, second = annotators[i], annotators[j]
                shared = [
                    task.task_id
                    for task in self.tasks
                    if task.task_id in by_annotator[first] and task.task_id in by_annotator[second]
                ]
                if not shared:
                    continue
                pair_key = f"{first}|{second}"
                for dimension in DIMENSIONS:
                    seq_a = [
                        self.task(t).provenance_of(
                            getattr(by_annotator[first][t], f"{dimension}_choice")
                        )
                        for t in shared
                    ]
                    seq_b = [
                        self.task(t).provenance_of(
                            getattr(by_annotator[second][t], f"{dimension}_choice")
                        )
                        for t in shared
                    ]
                    kappa[dimension][pair_key] = cohen_kappa(seq_a, seq_b)
        return {
            "session_id": self.session_id,
            "n_tasks": len(self.tasks),
            "labels": len(self.labels),
            "completion": {a: self.progress(a)[0] for a in self.annotators()},
            "preference": preference,
            "counts": counts,
            "kappa": kappa,
        }


class SessionStore:
    """File-backed sessions: session.json plus an append-only labels.jsonl.

    Label appends are serialized through one lock and flushed before they
    are acknowledged; restarting the store replays the log.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}

    def _dir(self, session_id: str) -> Path:
        return self.root / session_id

    def save(self, session: Session) -> None:
        directory = self._dir(session.session_id)
        directory.mkdir(parents=True, exist_ok=True)
        payload = {
            "session_id": session.session_id,
            "seed": session.seed,
            "tasks": [task.as_dict() for task in session.tasks],
        }
        (directory / "session.json").write_text(
            json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
        labels_file = directory / "labels.jsonl"
        if not labels_file.exists():
            labels_file.touch()
        self._sessions[session.session_id] = session

    def open(self, session_id: str) -> Session:
        if session_id in self._sessions:
            return self._sessions[session_id]
        directory = self._dir(session_id)
        session_file = directory / "session.json"
        if not session_file.exists():
            raise SessionError(f"unknown session {session_id!r}", code="unknown-session")
        payload = json.loads(session_file.read_text(encoding="utf-8"))
        session = Session(
            session_id=payload["session_id"],
            tasks=[AnnotationTask.from_dict(t) for t in payload["tasks"]],
            seed=int(payload.get("seed", 0)),
        )
        labels_file = directory / "labels.jsonl"
        if labels_file.exists():
            for line in labels_file.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    data = json.loads(line)
                    session.add_label(LabelRecord(**data))
        self._sessions[session_id] = session
        return session

    def list_sessions(self) -> list[str]:
        if not self.root.exists():
            return []
        return sorted(p.parent.name for p in self.root.glob("*/session.json"))

    def next_task(self, session_id: str, annotator_id: str) -> dict:
        session = self.open(session_id)
        task = session.next_task(annotator_id)
        done, total = session.progress(annotator_id)
        if task is None:
            return {"done": True, "progress": {"done": done, "total": total}}
        view = task.public_view()
        view["progress"] = {"done": done, "total": total}
        view["done"] = False
        return view

    def submit(self, session_id: str, record: LabelRecord) -> None:
        session = self.open(session_id)
        with self._lock:
            session.add_label(record)
            labels_file = self._dir(session_id) / "labels.jsonl"
            with labels_file.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(record.as_dict(), ensure_ascii=False) + "\n")
                handle.flush()

    def stats(self, session_id: str) -> dict:
        return self.open(session_id).compute_stats()
