"""Shared test fixtures: independent oracles and random case generators.

The Apriori oracle counts itemsets by scanning transactions for every
candidate subset of the item universe; it never touches the FP-tree code,
so mining results can be checked against it exactly.
"""

from __future__ import annotations

import math

import numpy as np

from cellwatch.baseline import DetectorConfig
from cellwatch.cleaning import CleanConfig
from cellwatch.fingerprints import MineConfig, SymptomItem, SymptomState, Transaction
from cellwatch.fogsim import Scenario, build_topology
from cellwatch.ingest import MetricKind, MetricSeries, Polarity
from cellwatch.postfilter import FilterConfig
from cellwatch import synth

OracleRule = tuple[frozenset[SymptomItem], str, int, int]  # antecedent, consequent, q_count, global_count


def apriori_rare_rules(transactions: list[Transaction], cfg: MineConfig) -> set[OracleRule]:
    """Brute-force enumeration of the rare-rule set (independent oracle)."""
    total = len(transactions)
    if total == 0:
        return set()
    ceiling = math.ceil(cfg.s_max_fraction * total)
    universe = sorted({item for t in transactions for item in t.items})
    consequent_totals: dict[str, int] = {}
    for t in transactions:
        consequent_totals[t.consequent] = consequent_totals.get(t.consequent, 0) + 1

    from itertools import combinations

    rules: set[OracleRule] = set()
    for size in range(1, cfg.max_antecedent + 1):
        for combo in combinations(universe, size):
            candidate = frozenset(combo)
            global_count = sum(1 for t in transactions if candidate <= t.items)
            if global_count == 0:
                continue
            per_q: dict[str, int] = {}
            for t in transactions:
                if candidate <= t.items:
                    per_q[t.consequent] = per_q.get(t.consequent, 0) + 1
            for q, q_count in per_q.items():
                if not cfg.s_min_count <= q_count <= ceiling:
                    continue
                confidence = q_count / global_count
                if confidence < cfg.c_min:
                    continue
                lift = confidence / (consequent_totals[q] / total)
                if lift < cfg.lift_min:
                    continue
                rules.add((candidate, q, q_count, global_count))
    return rules


def random_transactions(rng: np.random.Generator, max_items: int = 12, max_tx: int = 64) -> list[Transaction]:
    n_items = int(rng.integers(2, max_items + 1))
    pool = [
        SymptomItem(f"m{i:02d}", SymptomState.HIGH if rng.random() < 0.5 else SymptomState.LOW)
        for i in range(n_items)
    ]
    n_consequents = int(rng.integers(1, 4))
    consequents = [f"q{j}" for j in range(n_consequents)]
    n_tx = int(rng.integers(1, max_tx + 1))
    txs = []
    for i in range(n_tx):
        k = int(rng.integers(0, min(n_items, 6) + 1))
        chosen = rng.choice(n_items, size=k, replace=False)
        txs.append(
            Transaction(
                items=frozenset(pool[int(c)] for c in chosen),
                consequent=consequents[int(rng.integers(n_consequents))],
                key=(f"cell-{i:03d}", i * 300),
            )
        )
    return txs


def random_mine_config(rng: np.random.Generator) -> MineConfig:
    return MineConfig(
        s_min_count=int(rng.integers(1, 5)),
        s_max_fraction=float(rng.uniform(0.05, 1.0)),
        c_min=float(rng.uniform(0.05, 1.0)),
        lift_min=float(rng.uniform(0.5, 2.0)),
        max_antecedent=int(rng.integers(1, 5)),
    )


def rules_as_oracle_set(rules) -> set[OracleRule]:
    return {(r.antecedent, r.consequent, r.support_count, r.antecedent_count) for r in rules}


def make_series(
    values,
    cell_id: str = "c1",
    metric_name: str = "m1",
    kind: MetricKind = MetricKind.KQI,
    polarity: Polarity = Polarity.HIGHER_IS_WORSE,
    window_len: int = 300,
    start: int = 0,
) -> MetricSeries:
    points = [(start + i * window_len, v) for i, v in enumerate(values)]
    return MetricSeries(
        cell_id=cell_id,
        metric_name=metric_name,
        kind=kind,
        polarity=polarity,
        window_len=window_len,
        points=points,
    )


def random_fog_case(seed: int):
    """A small random (topology, scenario) pair with a 2..8-way fog partition."""
    rng = np.random.default_rng(seed)
    n_fogs = int(rng.integers(2, 9))
    nodes = [{"id": "cloud", "tier": "CLOUD", "parent": None}]
    links = {}
    cells = {}
    cell_idx = 0
    for f in range(n_fogs):
        fog = f"fog-{f}"
        nodes.append({"id": fog, "tier": "FOG", "parent": "cloud"})
        links[fog] = {"bandwidth_bps": float(rng.uniform(1e6, 2e7)), "latency_s": 0.01}
        edge = f"edge-{f}"
        nodes.append({"id": edge, "tier": "EDGE", "parent": fog})
        links[edge] = {"bandwidth_bps": float(rng.uniform(1e5, 5e6)), "latency_s": 0.01}
        for _ in range(int(rng.integers(1, 3))):
            cells[f"cell-{cell_idx:03d}"] = edge
            cell_idx += 1
    topology = build_topology({"nodes": nodes, "links": links, "cells": cells})

    spec = synth.default_spec(
        n_cells=cell_idx,
        days=1.0,
        window_len=1800,
        seed=int(rng.integers(0, 2**31)),
        anomaly_count=int(rng.integers(0, 4)),
        magnitude=8.0,
        calls_per_window=float(rng.choice([0.0, 6.0])),
    )
    spec.anomalies = synth.AutoPlan(count=spec.anomalies.count, magnitude=8.0, min_windows=2, max_windows=5)
    scenario = Scenario(
        spec=spec,
        clean_cfg=CleanConfig(iqr_multiplier=6.0, min_points=8),
        detector_cfg=DetectorConfig(
            bin_count=int(rng.choice([32, 64])),
            tau=3.5,
            min_samples=int(rng.integers(1, 4)),
        ),
        filter_cfg=FilterConfig(
            persistence_m=int(rng.integers(1, 3)),
            persistence_n=3,
            merge_gap=int(rng.integers(0, 3)),
            min_peak_score=3.5,
        ),
        mine_cfg=MineConfig(
            s_min_count=int(rng.integers(1, 3)),
            s_max_fraction=float(rng.uniform(0.3, 1.0)),
            c_min=0.3,
            lift_min=0.8,
            max_antecedent=3,
        ),
        z_symptom=2.5,
    )
    return topology, scenario
