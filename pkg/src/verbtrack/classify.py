"""Per-verb classifier banks and the forced-choice labelling decision.

Every verb gets an agent bank trained on agent-only features of all its
exemplars, plus a pair bank trained on agent+patient features of the
exemplars that have two participants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoExemplars, NoTracks
from .features import video_features
from .timeseries.dtw import DtwBank
from .timeseries.hmm import N_STATES, HmmModel, hmm_loglik, hmm_train

KINDS = ("hmm", "dtw")


@dataclass(eq=False)
class VerbModel:
    verb: str
    kind: str
    agent_bank: object
    pair_bank: object | None = None

    def score(self, single, pair=None):
        """Score a video; returns (score, used_pair_bank).

        HMM scores are log-likelihoods (higher is better); DTW scores are
        nearest-exemplar distances (lower is better).
        """
        if pair is not None and self.pair_bank is not None:
            return _bank_score(self.kind, self.pair_bank, pair), True
        return _bank_score(self.kind, self.agent_bank, single), False

    def to_dict(self):
        return {"verb": self.verb, "kind": self.kind, "agent_bank": self.agent_bank.to_dict(),
                "pair_bank": None if self.pair_bank is None else self.pair_bank.to_dict()}

    @classmethod
    def from_dict(cls, d):
        load = HmmModel.from_dict if d["kind"] == "hmm" else DtwBank.from_dict
        pair = d.get("pair_bank")
        return cls(d["verb"], d["kind"], load(d["agent_bank"]), None if pair is None else load(pair))


def _bank_score(kind, bank, series):
    if kind == "hmm":
        return hmm_loglik(bank, series)
    return float(bank.distances(series).min())


def _train_bank(kind, series, verb, seed, states, restarts, dtw_zscore):
    if kind == "hmm":
        model = hmm_train(series, K=states, seed=seed, restarts=restarts)
        model.metadata["verb"] = verb
        return model
    return DtwBank(series[0].schema, list(series), [verb] * len(series), zscore=dtw_zscore,
                   metadata={"verb": verb, "n_series": len(series)})


def train_from_features(examples, verbs, kind="hmm", seed=0, states=N_STATES, restarts=3,
                        dtw_zscore=False) -> list:
    """Train one VerbModel per verb.

    ``examples`` is a sequence of ``(verb, single_series, pair_series_or_None)``.
    """
    if kind not in KINDS:
        raise ValueError(f"classifier kind must be one of {KINDS}")
    models = []
    for i, verb in enumerate(verbs):
        mine = [(s, p) for v, s, p in examples if v == verb]
        if not mine:
            raise NoExemplars(verb)
        singles = [s for s, _ in mine]
        pairs = [p for _, p in mine if p is not None]
        agent = _train_bank(kind, singles, verb, seed * 1000 + 2 * i, states, restarts, dtw_zscore)
        pair = (_train_bank(kind, pairs, verb, seed * 1000 + 2 * i + 1, states, restarts, dtw_zscore)
                if pairs else None)
        models.append(VerbModel(verb, kind, agent, pair))
    return models


def train_verb_models(manifest, tracks_by_video, kind="hmm", seed=0, states=N_STATES,
                      restarts=3, dtw_zscore=False) -> list:
    """Train per-verb models from a manifest and each video's tracks."""
    examples = []
    for e in manifest.entries:
        tracks = tracks_by_video.get(e.video_id)
        if not tracks:
            continue
        single, pair = video_features(tracks)
        examples.append((e.verb_label, single, pair))
    return train_from_features(examples, manifest.verbs, kind, seed, states, restarts, dtw_zscore)


def decide(models, single, pair=None):
    """Forced-choice verb from precomputed features; returns (verb, scores).

    When a pair series is available only verbs with a pair bank compete,
    unless no verb has one. Ties go to the alphabetically first verb.
    """
    if not models:
        raise NoExemplars("no verb models")
    scores = {}
    used_pair = {}
    for m in models:
        scores[m.verb], used_pair[m.verb] = m.score(single, pair)
    contenders = sorted(scores)
    if pair is not None and any(used_pair.values()):
        contenders = [v for v in contenders if used_pair[v]]
    kind = models[0].kind
    vals = np.array([scores[v] for v in contenders])
    best = int(np.argmax(vals) if kind == "hmm" else np.argmin(vals))
    return contenders[best], scores


def label_video(models, tracks):
    if not tracks:
        raise NoTracks("video has no tracks")
    single, pair = video_features(tracks)
    return decide(models, single, pair if len(tracks) >= 2 else None)
