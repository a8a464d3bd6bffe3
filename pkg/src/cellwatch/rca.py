"""Root-cause diagnosis: nearest-fingerprint matching over symptom sets.

Candidates are restricted to fingerprints whose consequent equals the
degraded KQI actually observed; a diagnosis has to explain the event it is
attached to. Distance is Jaccard on symptom sets, and the ranking order is
total: (distance, confidence desc, support desc, antecedent), so results
never depend on database ordering.
"""

from __future__ import annotations

from dataclasses import dataclass

from .baseline import BaselineModel
from .fingerprints import (
    Fingerprint,
    FingerprintDb,
    SymptomItem,
    _tokens,
    build_transactions,
)
from .ingest import MetricSeries
from .postfilter import AnomalyEvent

UNLABELED = "UNLABELED"


@dataclass
class SymptomSet:
    items: frozenset[SymptomItem]
    consequent: str
    event: AnomalyEvent


@dataclass
class RankedCause:
    cause_label: str | None
    distance: float
    fingerprint: Fingerprint


@dataclass
class Diagnosis:
    ranked: list[RankedCause]
    matched: bool
    match_threshold: float

    def to_json_dict(self) -> dict:
        return {
            "matched": self.matched,
            "match_threshold": self.match_threshold,
            "ranked": [
                {
                    "cause": r.cause_label if r.cause_label is not None else UNLABELED,
                    "distance": r.distance,
                    "antecedent": _tokens(r.fingerprint.antecedent),
                    "confidence": r.fingerprint.confidence,
                    "support_count": r.fingerprint.support_count,
                }
                for r in self.ranked
            ],
        }


def jaccard_distance(a: frozenset[SymptomItem], b: frozenset[SymptomItem]) -> float:
    """1 - |a & b| / |a | b|; two empty sets are at distance 0."""
    union = len(a | b)
    if union == 0:
        return 0.0
    return 1.0 - len(a & b) / union


def diagnose(
    db: FingerprintDb,
    symptoms: SymptomSet,
    k: int = 3,
    match_threshold: float = 0.5,
) -> Diagnosis:
    """Rank the k nearest fingerprints for the symptom set's consequent.

    ``matched`` is true when the nearest candidate is within
    ``match_threshold``; an unmatched diagnosis marks the event as a
    candidate for fresh fingerprint learning.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 <= match_threshold <= 1:
        raise ValueError("match_threshold must be in [0, 1]")
    candidates = [r for r in db.rules if r.consequent == symptoms.consequent]
    scored = [
        RankedCause(
            cause_label=rule.cause_label,
            distance=jaccard_distance(rule.antecedent, symptoms.items),
            fingerprint=rule,
        )
        for rule in candidates
    ]
    scored.sort(
        key=lambda r: (
            r.distance,
            -r.fingerprint.confidence,
            -r.fingerprint.support_count,
            tuple(_tokens(r.fingerprint.antecedent)),
        )
    )
    ranked = scored[:k]
    matched = bool(ranked) and ranked[0].distance <= match_threshold
    return Diagnosis(ranked=ranked, matched=matched, match_threshold=match_threshold)


def symptom_sets_for_events(
    events: list[AnomalyEvent],
    kpi_series: list[MetricSeries],
    model: BaselineModel,
    z_symptom: float = 3.0,
) -> list[SymptomSet]:
    """Extract per-event symptom sets the same way the miner builds transactions."""
    transactions = build_transactions(events, kpi_series, model, z_symptom)
    return [
        SymptomSet(items=t.items, consequent=t.consequent, event=event)
        for event, t in zip(events, transactions)
    ]
