"""Lazy navigation of the universal cover of a marked graph.

A cover vertex is addressed by the reduced edge path from the basepoint
lift; a cover point is (path to the edge's source lift, edge id, rational
parameter).  Deck transformations act by prepending closed basepoint paths
and reducing, so the F_n action goes through the marking petals.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .graphs import EdgePath, EdgeTok, GraphError, MarkedGraph, invert_path, tighten
from .words import Word

VertexPath = EdgePath  # reduced path from the basepoint lift


@dataclass(frozen=True, order=True)
class CoverPoint:
    """A point of the universal cover, in canonical (positive edge) form."""

    path: VertexPath
    edge: str
    t: Fraction

    def key(self):
        return (self.path, self.edge, self.t)


def make_point(G: MarkedGraph, path: EdgePath, edge: str, t: Fraction,
               sign: int = 1) -> CoverPoint:
    """Canonicalize a point given on an oriented edge at parameter t from
    the oriented start; negative orientations are flipped."""
    g = G.graph
    t = Fraction(t)
    if edge not in g.edges:
        raise GraphError(f"unknown edge {edge}")
    ln = g.length(edge)
    if not 0 <= t <= ln:
        raise GraphError(f"parameter {t} outside [0, {ln}]")
    path = tighten(path)
    if sign < 0:
        path = tighten(path + ((edge, -1),))
        t = ln - t
    g.walk(G.basepoint, path)  # validates
    if g.src(edge) != g.walk(G.basepoint, path):
        raise GraphError(f"path does not end at source of {edge}")
    return CoverPoint(path, edge, t)


def vertex_of(G: MarkedGraph, path: EdgePath) -> str:
    return G.graph.walk(G.basepoint, tighten(path))


def deck_path_of_word(G: MarkedGraph, w: Word) -> EdgePath:
    return G.path_of_element(w)


def act_path(deck: EdgePath, p: CoverPoint) -> CoverPoint:
    """Translate a point by a deck transformation given as a closed path."""
    return CoverPoint(tighten(deck + p.path), p.edge, p.t)


def act(G: MarkedGraph, g: Word, p: CoverPoint) -> CoverPoint:
    return act_path(deck_path_of_word(G, g), p)


def edge_lift_endpoints(p: CoverPoint) -> tuple[VertexPath, VertexPath]:
    return p.path, tighten(p.path + ((p.edge, 1),))


def vertex_geodesic(u: VertexPath, v: VertexPath) -> tuple[VertexPath, EdgePath]:
    """Common ancestor path and the tight path from u's endpoint to v's."""
    k = 0
    while k < len(u) and k < len(v) and u[k] == v[k]:
        k += 1
    return u[:k], invert_path(u[k:]) + v[k:]


@dataclass(frozen=True)
class Geodesic:
    """A geodesic between two cover points: optional partial initial and
    final segments around a (possibly empty) chain of full edge lifts."""

    start: CoverPoint
    end: CoverPoint
    length: Fraction
    # segments: list of (source vertex path, edge id, lo, hi) fully ordered
    segments: tuple[tuple[VertexPath, str, Fraction, Fraction], ...]


def geodesic(G: MarkedGraph, p: CoverPoint, q: CoverPoint) -> Geodesic:
    g = G.graph
    if (p.path, p.edge) == (q.path, q.edge):
        lo, hi = sorted((p.t, q.t))
        segs = () if lo == hi else (((p.path), p.edge, lo, hi),)
        return Geodesic(p, q, abs(p.t - q.t), segs)

    lp = g.length(p.edge)
    lq = g.length(q.edge)
    pu, pv = edge_lift_endpoints(p)   # param 0 / lp ends
    qu, qv = edge_lift_endpoints(q)

    best = None
    for (pend, ppartial, pvert) in (((0, p.t, pu)), ((1, lp - p.t, pv))):
        for (qend, qpartial, qvert) in (((0, q.t, qu)), ((1, lq - q.t, qv))):
            _, mid = vertex_geodesic(pvert, qvert)
            total = ppartial + sum(g.length(e) for e, _ in mid) + qpartial
            cand = (total, pend, qend, pvert, mid)
            if best is None or cand[0] < best[0]:
                best = cand
    total, pend, qend, pvert, mid = best

    segs: list[tuple[VertexPath, str, Fraction, Fraction]] = []
    if p.t != 0 and pend == 0:
        segs.append((p.path, p.edge, Fraction(0), p.t))
    elif p.t != lp and pend == 1:
        segs.append((p.path, p.edge, p.t, lp))
    cur = pvert
    for tok in mid:
        e, s = tok
        if s > 0:
            segs.append((cur, e, Fraction(0), g.length(e)))
        else:
            segs.append((tighten(cur + ((e, -1),)), e, Fraction(0), g.length(e)))
        cur = tighten(cur + (tok,))
    if q.t != 0 and qend == 0:
        segs.append((q.path, q.edge, Fraction(0), q.t))
    elif q.t != lq and qend == 1:
        segs.append((q.path, q.edge, q.t, lq))
    return Geodesic(p, q, total, tuple(segs))


def orbit_positions_on_segment(G: MarkedGraph, b: CoverPoint,
                               seg_edge: str, lo: Fraction, hi: Fraction) -> set[Fraction]:
    """Parameters in [lo, hi] of seg_edge (any lift) hit by the orbit of b.

    The orbit of a non-vertex point meets an edge lift iff the lift covers
    the same base edge at the same parameter, so the answer only depends on
    the base edge.
    """
    g = G.graph
    if b.t == 0 or b.t == g.length(b.edge):
        raise GraphError("orbit test requires a non-vertex point")
    if b.edge != seg_edge:
        return set()
    return {b.t} if lo <= b.t <= hi else set()


def orbit_positions_brute(G: MarkedGraph, b: CoverPoint, seg_path: VertexPath,
                          seg_edge: str, lo: Fraction, hi: Fraction,
                          max_len: int) -> set[Fraction]:
    """Brute-force oracle: enumerate deck elements up to letter length and
    collect orbit points landing on the given edge lift."""
    from itertools import product

    out: set[Fraction] = set()
    letters = [i for i in range(1, G.rank + 1)] + [-i for i in range(1, G.rank + 1)]
    seen_words = [Word()]
    for n in range(1, max_len + 1):
        for tup in product(letters, repeat=n):
            w = Word(tup)
            if len(w.letters) == n:
                seen_words.append(w)
    for w in seen_words:
        q = act(G, w, b)
        if (q.path, q.edge) == (tighten(seg_path), seg_edge) and lo <= q.t <= hi:
            out.add(q.t)
    return out
