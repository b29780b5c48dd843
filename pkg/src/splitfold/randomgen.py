"""Deterministic random instances for property suites and the selftest."""

from __future__ import annotations

import random
from fractions import Fraction

from .graphs import MarkedGraph, MetricGraph, Splitting, splitting_from_edge
from .maps import GraphMorphism, is_foldable, make_terse, rose_morphism
from .words import Word

EDGE_NAMES = "abcdefgh"


def standard_rose(rank: int) -> MarkedGraph:
    one = Fraction(1)
    edges = {EDGE_NAMES[i]: ("v", "v", one) for i in range(rank)}
    graph = MetricGraph({"v"}, edges)
    petals = {i + 1: ((EDGE_NAMES[i], 1),) for i in range(rank)}
    return MarkedGraph(rank, graph, "v", petals)


def positive_automorphism_words(rank: int, rng: random.Random,
                                max_len: int = 6, moves: int = 6) -> list[Word]:
    """Images of the generators under a random positive automorphism, with
    word lengths capped."""
    basis = [Word((i,)) for i in range(1, rank + 1)]
    for _ in range(moves):
        i, j = rng.sample(range(rank), 2)
        left = rng.random() < 0.5
        cand = basis[j] * basis[i] if left else basis[i] * basis[j]
        if len(cand.letters) <= max_len:
            basis[i] = cand
    return basis


def marked_rose(rank: int, words: list[Word]) -> MarkedGraph:
    rose = standard_rose(rank)
    petals = {}
    for i, w in enumerate(words, start=1):
        toks = []
        for a in w.letters:
            e = EDGE_NAMES[abs(a) - 1]
            toks.append((e, 1 if a > 0 else -1))
        petals[i] = tuple(toks)
    return MarkedGraph(rank, rose.graph.copy(), "v", petals)


def random_marked_rose(rank: int, rng: random.Random, max_len: int = 6
                       ) -> MarkedGraph:
    return marked_rose(rank, positive_automorphism_words(rank, rng, max_len))


def random_petal_splitting(rank: int, rng: random.Random, max_len: int = 6
                           ) -> Splitting:
    G = random_marked_rose(rank, rng, max_len)
    edge = rng.choice(sorted(G.graph.edges))
    return splitting_from_edge(G, edge)


def random_terse_morphism(rank: int, rng: random.Random, max_len: int = 6,
                          require_foldable: bool = True,
                          tries: int = 60) -> GraphMorphism:
    """A terse difference of markings from a standard rose onto a random
    marked rose."""
    for _ in range(tries):
        cod = random_marked_rose(rank, rng, max_len)
        dom = standard_rose(rank)
        try:
            f = make_terse(rose_morphism(dom, cod))
        except Exception:
            continue
        if not require_foldable or is_foldable(f):
            return f
    raise RuntimeError("could not sample a foldable terse morphism")
