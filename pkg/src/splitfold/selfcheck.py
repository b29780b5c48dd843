"""Randomized property suites behind the `selftest` CLI command."""

from __future__ import annotations

import random

from .folding import fold_sequence, run_folding
from .graphs import splitting_from_edge
from .projection import behrstock_witness, distance1, project
from .randomgen import (positive_automorphism_words, random_marked_rose,
                        random_petal_splitting, random_terse_morphism,
                        standard_rose)
from .spheretrees import (bbc_sphere_tree, canonical_key, consolidate, core,
                          core_key, intersection_number, sphere_tree_of)


def _suite(name, results, passed, total):
    results.append({"name": name, "passed": passed, "total": total})


def run_all(seed: int = 7, n: int = 30) -> list[dict]:
    rng = random.Random(seed)
    results: list[dict] = []

    ok = 0
    for k in range(n):
        rank = rng.choice((2, 3))
        S = random_petal_splitting(rank, rng)
        base = standard_rose(rank)
        try:
            t1 = sphere_tree_of(S, base)
            t2 = bbc_sphere_tree(S, base)
            if core_key(t1) == core_key(t2):
                ok += 1
        except Exception:
            pass
    _suite("oracle_equivalence", results, ok, n)

    ok = 0
    for k in range(n):
        rank = rng.choice((2, 3))
        f = random_terse_morphism(rank, rng)
        try:
            p1 = run_folding(f)
            p2 = fold_sequence(f)
            times = [s.time_before + s.delta for s in p1.steps]
            if times == sorted(set(times)):
                ok += 1
        except Exception:
            pass
    _suite("folding_engine", results, ok, n)

    ok = 0
    for k in range(n):
        rank = 2
        S1 = random_petal_splitting(rank, rng)
        S2 = random_petal_splitting(rank, rng)
        try:
            if intersection_number(S1, S2) == intersection_number(S2, S1):
                ok += 1
        except Exception:
            pass
    _suite("intersection_symmetry", results, ok, n)

    ok = 0
    tried = 0
    for k in range(n):
        rank = rng.choice((2, 3))
        base = standard_rose(rank)
        S = random_petal_splitting(rank, rng)
        edges = sorted(base.graph.edges)
        e0 = rng.choice(edges)
        S0 = splitting_from_edge(base, e0)
        try:
            res = project(S, S0, base)
        except Exception:
            continue
        tried += 1
        if res.defined:
            ok += 1
    _suite("projection_defined", results, ok, max(tried, 1))

    return results
