"""Stratified k-fold cross-validation and confusion-matrix reporting."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .classify import decide, train_from_features
from .config import PipelineConfig
from .corpus_io import CorpusManifest, dump_json
from .errors import VerbTrackError
from .pipeline import process_entry

FAILED = "failed"


@dataclass
class FoldPlan:
    k: int
    seed: int
    cells: dict  # verb -> list of k lists of video ids

    def fold_of(self):
        out = {}
        for verb, cells in self.cells.items():
            for i, cell in enumerate(cells):
                for vid in cell:
                    out[vid] = i
        return out

    def test_ids(self, fold):
        return {vid for cells in self.cells.values() for vid in cells[fold]}


def make_folds(manifest: CorpusManifest, k: int = 5, seed: int = 0) -> FoldPlan:
    """Shuffle each verb's videos (seeded) and deal them round-robin into k cells."""
    cells = {}
    for vi, (verb, entries) in enumerate(sorted(manifest.by_verb().items())):
        ids = [e.video_id for e in entries]
        order = np.random.default_rng([seed, vi]).permutation(len(ids))
        cells[verb] = [[ids[j] for j in order[i::k]] for i in range(k)]
    return FoldPlan(k, seed, cells)


@dataclass
class ConfusionMatrix:
    verbs: list
    counts: dict = field(default_factory=dict)  # gold -> predicted -> count

    def __post_init__(self):
        for v in self.verbs:
            self.counts.setdefault(v, {})

    @property
    def columns(self):
        return list(self.verbs) + [FAILED]

    def add(self, gold, predicted):
        row = self.counts.setdefault(gold, {})
        row[predicted] = row.get(predicted, 0) + 1

    def total(self):
        return sum(sum(r.values()) for r in self.counts.values())

    def correct(self):
        return sum(r.get(v, 0) for v, r in self.counts.items())

    @property
    def accuracy(self):
        n = self.total()
        return self.correct() / n if n else 0.0

    def matrix(self):
        return [[self.counts[g].get(p, 0) for p in self.columns] for g in self.verbs]

    def to_dict(self):
        return {"verbs": list(self.verbs), "columns": self.columns, "counts": self.matrix(),
                "total": self.total(), "correct": self.correct(), "accuracy": self.accuracy}

    @classmethod
    def from_dict(cls, d):
        cm = cls(list(d["verbs"]))
        for g, row in zip(d["verbs"], d["counts"]):
            for p, c in zip(d["columns"], row):
                if c:
                    cm.counts[g][p] = c
        return cm

    def render(self):
        """Row-normalised percentages, one row per gold verb."""
        cols = self.columns
        width = max(6, *(len(c) for c in cols))
        lines = [" " * width + "".join(f"{c:>{width + 1}}" for c in cols)]
        for g, row in zip(self.verbs, self.matrix()):
            n = sum(row)
            cells = "".join(f"{(100.0 * c / n if n else 0.0):>{width + 1}.1f}" for c in row)
            lines.append(f"{g:<{width}}{cells}")
        lines.append(f"accuracy {100 * self.accuracy:.1f}% ({self.correct()}/{self.total()})")
        return "\n".join(lines)


def process_corpus(manifest: CorpusManifest, cfg: PipelineConfig, jobs: int = 1) -> dict:
    """Run tracking and feature extraction for every video; results keyed by video id."""
    entries = list(manifest.entries)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(process_entry, entries, [manifest.root] * len(entries),
                                    [cfg] * len(entries), chunksize=4))
    else:
        results = [process_entry(e, manifest.root, cfg) for e in entries]
    return {r.video_id: r for r in results}


@dataclass
class CrossValidation:
    confusion: ConfusionMatrix
    fold_accuracies: list
    labels: dict  # video id -> {predicted, gold, scores, fold}


def cross_validate(manifest: CorpusManifest, cfg: PipelineConfig = PipelineConfig(),
                   results: dict = None, kind: str = None, k: int = None, seed: int = None) -> CrossValidation:
    """Train on k-1 cells of every verb, label the held-out cell, aggregate.

    Videos whose pipeline failed count as errors in a ``failed`` column.
    """
    kind = kind or cfg.classifier
    k = k or cfg.k_folds
    seed = cfg.seed if seed is None else seed
    if results is None:
        results = process_corpus(manifest, cfg, cfg.jobs)
    plan = make_folds(manifest, k, seed)
    gold = {e.video_id: e.verb_label for e in manifest.entries}
    verbs = list(manifest.verbs)
    confusion = ConfusionMatrix(verbs)
    fold_acc = []
    labels = {}
    for fold in range(k):
        test = plan.test_ids(fold)
        train = [(gold[v], r.single, r.pair) for v, r in results.items()
                 if v not in test and r.error is None]
        models = train_from_features(train, verbs, kind, seed * 100 + fold, cfg.hmm_states,
                                     cfg.hmm_restarts, cfg.dtw_zscore)
        hits = n = 0
        for e in manifest.entries:
            if e.video_id not in test:
                continue
            r = results[e.video_id]
            scores = {}
            if r.error is None:
                try:
                    predicted, scores = decide(models, r.single, r.pair)
                except VerbTrackError:
                    predicted = FAILED
            else:
                predicted = FAILED
            confusion.add(e.verb_label, predicted)
            labels[e.video_id] = {"predicted": predicted, "gold": e.verb_label, "fold": fold,
                                  "scores": {v: float(s) for v, s in sorted(scores.items())}}
            hits += predicted == e.verb_label
            n += 1
        fold_acc.append(hits / n if n else 0.0)
    return CrossValidation(confusion, fold_acc, labels)


def write_cv_outputs(run: CrossValidation, cfg: PipelineConfig, out_dir: str) -> str:
    """Write confusion.json, confusion.txt, labels.json and config.json; returns the table."""
    os.makedirs(out_dir, exist_ok=True)
    doc = run.confusion.to_dict()
    doc.update(classifier=cfg.classifier, seed=cfg.seed, k_folds=cfg.k_folds,
               fold_accuracies=run.fold_accuracies)
    dump_json(doc, os.path.join(out_dir, "confusion.json"))
    dump_json(run.labels, os.path.join(out_dir, "labels.json"))
    settings = cfg.to_dict()
    settings.pop("jobs")  # results do not depend on it
    dump_json(settings, os.path.join(out_dir, "config.json"))
    table = run.confusion.render()
    with open(os.path.join(out_dir, "confusion.txt"), "w", encoding="utf-8") as fh:
        fh.write(table + "\n")
    return table


def accuracy_from_labels(labels: dict) -> float:
    """Fraction of videos whose prediction equals the gold verb."""
    if not labels:
        return 0.0
    return sum(1 for r in labels.values() if r["predicted"] == r["gold"]) / len(labels)


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("VERBTRACK_JOBS", "1")))
    except ValueError:
        return 1
