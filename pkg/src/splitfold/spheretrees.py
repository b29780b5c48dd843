"""Sphere trees: buds in the universal cover, the two moves, consolidation,
cores, evolution along folding paths, and the core-preimage construction.

A sphere tree is stored as its bud set (cover points of the base graph);
the hull is the convex hull of the buds and is recomputed on demand.  Cores
are the full-edge subtrees of hulls and realize Guirardel-core slices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from fractions import Fraction

from . import cover as cov
from .cover import CoverPoint
from .folding import FoldStep, FoldingPath, SmoothStep, smooth_point, smooth_rewrite_path
from .graphs import (EdgePath, EdgeTok, GraphError, MarkedGraph, Splitting,
                     compatible_graph, invert_path, tighten)
from .maps import GraphMorphism, rose_morphism
from .words import Word

EdgeLift = tuple[EdgePath, str]  # (access path of the source vertex, edge id)


class SphereTreeError(ValueError):
    pass


@dataclass(frozen=True)
class SphereTree:
    base: MarkedGraph
    buds: tuple[CoverPoint, ...]
    consolidated: bool = False
    tainted: bool = False  # a homotopy-only (non-innermost) move was used

    def with_buds(self, buds, tainted=None) -> "SphereTree":
        return SphereTree(self.base, tuple(sorted(set(buds))), False,
                          self.tainted if tainted is None else tainted)

    def is_empty(self) -> bool:
        return not self.buds


def make_tree(base: MarkedGraph, buds) -> SphereTree:
    g = base.graph
    for b in buds:
        if b.t == 0 or b.t == g.length(b.edge):
            raise SphereTreeError("buds must be non-vertex points")
    return SphereTree(base, tuple(sorted(set(buds))))


def hull(base: MarkedGraph, buds) -> SphereTree:
    """Spec entry point: define a sphere tree by its bud set."""
    return make_tree(base, buds)


# -- hulls ------------------------------------------------------------------

Interval = tuple[Fraction, Fraction]


@dataclass
class Hull:
    cov: dict[EdgeLift, list[Interval]]

    def full_edges(self, G: MarkedGraph) -> set[EdgeLift]:
        g = G.graph
        return {(path, e) for (path, e), ivs in self.cov.items()
                if ivs and ivs[0] == (0, g.length(e))}

    def covers(self, lift: EdgeLift, t: Fraction) -> bool:
        return any(lo <= t <= hi for lo, hi in self.cov.get(lift, ()))

    def edge_count(self) -> int:
        return len(self.cov)

    def vertices(self, G: MarkedGraph) -> set[EdgePath]:
        g = G.graph
        out: set[EdgePath] = set()
        for (path, e), ivs in self.cov.items():
            for lo, hi in ivs:
                if lo == 0:
                    out.add(path)
                if hi == g.length(e):
                    out.add(tighten(path + ((e, 1),)))
        return out


def _merge_intervals(ivs: list[Interval]) -> list[Interval]:
    ivs = sorted(ivs)
    out: list[Interval] = []
    for lo, hi in ivs:
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def hull_of(tree: SphereTree) -> Hull:
    G = tree.base
    cov_map: dict[EdgeLift, list[Interval]] = {}
    buds = tree.buds
    if len(buds) == 1:
        b = buds[0]
        return Hull({(b.path, b.edge): [(b.t, b.t)]})
    for p, q in itertools.combinations(buds, 2):
        geo = cov.geodesic(G, p, q)
        for path, e, lo, hi in geo.segments:
            cov_map.setdefault((tighten(path), e), []).append((lo, hi))
    return Hull({k: _merge_intervals(v) for k, v in cov_map.items()})


@dataclass(frozen=True)
class CoreTree:
    base: MarkedGraph
    edges: frozenset[EdgeLift]

    def volume(self) -> Fraction:
        g = self.base.graph
        return sum((g.length(e) for _, e in self.edges), Fraction(0))


def core(tree: SphereTree) -> CoreTree:
    if not tree.consolidated:
        raise SphereTreeError("core requires a consolidated sphere tree")
    h = hull_of(tree) if tree.buds else Hull({})
    return CoreTree(tree.base, frozenset(h.full_edges(tree.base)))


# -- canonical forms up to the deck action ---------------------------------

def _anchor_candidates(tree: SphereTree) -> list[EdgePath]:
    pts: set[EdgePath] = set()
    for b in tree.buds:
        pts.add(b.path)
        pts.add(tighten(b.path + ((b.edge, 1),)))
    if len(tree.buds) > 1:
        pts |= hull_of(tree).vertices(tree.base)
    return sorted(pts)


def _deck_to_anchor(tree: SphereTree, anchor: EdgePath) -> EdgePath:
    """Closed loop translating `anchor` onto the spanning-tree lift of its
    underlying graph vertex."""
    G = tree.base
    v = cov.vertex_of(G, anchor)
    _, tree_paths = G.spanning_tree()
    return tighten(tree_paths[v] + invert_path(anchor))


def canonical_key(tree: SphereTree):
    if not tree.buds:
        return ()
    best = None
    for anchor in _anchor_candidates(tree):
        deck = _deck_to_anchor(tree, anchor)
        buds = tuple(sorted(cov.act_path(deck, b).key() for b in tree.buds))
        if best is None or buds < best:
            best = buds
    return best


def core_key(tree: SphereTree):
    """Canonical labelled form of the core subtree (up to deck translation)."""
    if not tree.buds:
        return ()
    full = sorted(hull_of(tree).full_edges(tree.base))
    if not full:
        return ()
    best = None
    for anchor in _anchor_candidates(tree):
        deck = _deck_to_anchor(tree, anchor)
        edges = tuple(sorted((tighten(deck + path), e) for path, e in full))
        if best is None or edges < best:
            best = edges
    return best


def trees_equal_up_to_deck(t1: SphereTree, t2: SphereTree) -> bool:
    return canonical_key(t1) == canonical_key(t2)


# -- moves -------------------------------------------------------------------

def _orbit_blocked(tree_buds, edge: str, lo: Fraction, hi: Fraction,
                   exclude=()) -> bool:
    """Does some bud orbit meet the open base-edge interval (lo, hi)?"""
    for b in tree_buds:
        if b in exclude:
            continue
        if b.edge == edge and lo < b.t < hi:
            return True
    return False


def _lift_directions(G: MarkedGraph, w: EdgePath) -> list[tuple[EdgeTok, EdgeLift]]:
    g = G.graph
    v = cov.vertex_of(G, w)
    out = []
    for e, s in g.directions(v):
        if s > 0:
            out.append(((e, 1), (w, e)))
        else:
            out.append(((e, -1), (tighten(w + ((e, -1),)), e)))
    return out


def _side_param(G: MarkedGraph, d: EdgeTok, t: Fraction) -> Fraction:
    """Distance of edge-parameter t from the d-end of the edge."""
    return t if d[1] > 0 else G.graph.length(d[0]) - t


def _param_at_side(G: MarkedGraph, d: EdgeTok, dist: Fraction) -> Fraction:
    return dist if d[1] > 0 else G.graph.length(d[0]) - dist


def _between_vertex(G: MarkedGraph, d: EdgeTok, t: Fraction) -> Interval:
    """Open interval of edge parameters strictly between the d-end and t."""
    return (Fraction(0), t) if d[1] > 0 else (t, G.graph.length(d[0]))


def buds_adjacent_to(tree: SphereTree, w: EdgePath) -> dict[EdgeTok, CoverPoint]:
    G = tree.base
    out: dict[EdgeTok, CoverPoint] = {}
    for d, lift in _lift_directions(G, w):
        cands = [b for b in tree.buds if (b.path, b.edge) == lift]
        if cands:
            out[d] = min(cands, key=lambda b: _side_param(G, d, b.t))
    return out


def bud_exchange(tree: SphereTree, w: EdgePath, B) -> tuple[SphereTree, bool]:
    """Exchange buds B adjacent to the vertex lift w for buds on the
    complementary edges; returns (new tree, move was innermost)."""
    G = tree.base
    g = G.graph
    w = tighten(w)
    B = set(B)
    adj = buds_adjacent_to(tree, w)
    dirs = _lift_directions(G, w)
    dir_of: dict[CoverPoint, EdgeTok] = {}
    for b in B:
        match = [d for d, lift in dirs if (b.path, b.edge) == lift]
        if not match or adj.get(match[0]) != b:
            raise SphereTreeError("bud is not adjacent to the exchange vertex")
        dir_of[b] = match[0]
    used = set(dir_of.values())

    new_buds = [b for b in tree.buds if b not in B]
    added: list[tuple[EdgeTok, CoverPoint]] = []
    for d, lift in dirs:
        if d in used:
            continue
        dists = [_side_param(G, d, b.t) for b in tree.buds
                 if (b.path, b.edge) == lift and b not in B]
        bound = min(dists) if dists else g.length(d[0])
        pt = CoverPoint(lift[0], lift[1], _param_at_side(G, d, bound / 2))
        new_buds.append(pt)
        added.append((d, pt))

    innermost = bool(B) and bool(added)
    for b, d in list(dir_of.items()) + [(pt, d) for d, pt in added]:
        lo, hi = _between_vertex(G, d, b.t)
        if _orbit_blocked(tree.buds, b.edge, lo, hi, exclude=(b,)):
            innermost = False
    return tree.with_buds(new_buds, tainted=tree.tainted or not innermost), innermost


def bud_cancellation(tree: SphereTree, b1: CoverPoint, b2: CoverPoint
                     ) -> tuple[SphereTree, bool]:
    if b1 == b2 or (b1.path, b1.edge) != (b2.path, b2.edge):
        raise SphereTreeError("cancellation needs two distinct buds on one edge lift")
    lo, hi = sorted((b1.t, b2.t))
    innermost = not _orbit_blocked(tree.buds, b1.edge, lo, hi, exclude=(b1, b2))
    rest = [b for b in tree.buds if b not in (b1, b2)]
    return tree.with_buds(rest, tainted=tree.tainted or not innermost), innermost


# -- consolidation -----------------------------------------------------------

def _find_cancel_pair(base: MarkedGraph, buds):
    by_lift: dict[EdgeLift, list[CoverPoint]] = {}
    for b in buds:
        by_lift.setdefault((b.path, b.edge), []).append(b)
    for lift in sorted(by_lift):
        here = sorted(by_lift[lift], key=lambda b: b.t)
        for b1, b2 in zip(here, here[1:]):
            if not _orbit_blocked(buds, b1.edge, b1.t, b2.t, exclude=(b1, b2)):
                return b1, b2
    return None


def _end_buds(tree: SphereTree, h: Hull) -> set[CoverPoint]:
    out = set()
    for b in tree.buds:
        ivs = h.cov.get((b.path, b.edge), [])
        if not any(lo < b.t < hi for lo, hi in ivs):
            out.add(b)
    return out


def _find_exchange_vertex(tree: SphereTree, h: Hull):
    G = tree.base
    ends = _end_buds(tree, h)
    candidates: set[EdgePath] = set(h.vertices(G))
    for b in tree.buds:
        candidates.add(b.path)
        candidates.add(tighten(b.path + ((b.edge, 1),)))
    for w in sorted(candidates):
        dirs = _lift_directions(G, w)
        if len(dirs) < 3:
            continue
        adj = buds_adjacent_to(tree, w)
        B = []
        missing = 0
        for d, lift in dirs:
            b = adj.get(d)
            if b is not None and b in ends:
                B.append((d, b))
            else:
                missing += 1
        if missing > 1 or len(B) < 2:
            continue
        if all(not _orbit_blocked(tree.buds, b.edge, *_between_vertex(G, d, b.t),
                                  exclude=(b,))
               for d, b in B):
            return w, [b for _, b in B]
    return None


def consolidate(tree: SphereTree) -> SphereTree:
    """Repeatedly cancel innermost same-edge pairs and exchange near-complete
    bud stars until neither simplification applies."""
    if tree.consolidated:
        return tree
    cur = tree
    h0 = hull_of(cur) if cur.buds else Hull({})
    cap = 10 * (len(cur.buds) + h0.edge_count()) + 10
    for _ in range(cap):
        if not cur.buds:
            return replace(cur, consolidated=True)
        pair = _find_cancel_pair(cur.base, cur.buds)
        if pair is not None:
            cur, inner = bud_cancellation(cur, *pair)
            if not inner:
                raise SphereTreeError("consolidation found no innermost pair")
            continue
        h = hull_of(cur)
        found = _find_exchange_vertex(cur, h)
        if found is None:
            return replace(cur, consolidated=True)
        cur, inner = bud_exchange(cur, *found)
        if not inner:
            raise SphereTreeError("consolidation exchange was not innermost")
    raise SphereTreeError("consolidation exceeded its iteration cap")


def normalize(tree: SphereTree, keep=frozenset()) -> SphereTree:
    """Re-parameterize buds to 1/4 from the hull-exterior end of their edge;
    buds in `keep` (exact preimage data) keep their parameters."""
    if not tree.buds:
        return tree
    g = tree.base.graph
    h = hull_of(tree)
    new = []
    for b in tree.buds:
        if b in keep:
            new.append(b)
            continue
        ln = g.length(b.edge)
        ivs = h.cov.get((b.path, b.edge), [])
        if any(lo < b.t < hi for lo, hi in ivs):
            t = ln / 4  # interior bud: canonical placement
        else:
            hull_below = any(lo < b.t and hi == b.t for lo, hi in ivs)
            t = 3 * ln / 4 if hull_below else ln / 4
        new.append(CoverPoint(b.path, b.edge, t))
    out = tree.with_buds(new)
    return replace(out, consolidated=tree.consolidated)


# -- transports through folding steps ----------------------------------------

def _fold_rewrite_path(path: EdgePath, step: FoldStep) -> EdgePath:
    out: list[EdgeTok] = []
    for e, s in path:
        chain = step.edge_pieces[e]
        if s > 0:
            out.extend(t for t, _ in chain)
        else:
            out.extend((t[0], -t[1]) for t, _ in reversed(chain))
    return tighten(out)


def _transport_point(b: CoverPoint, step: FoldStep) -> CoverPoint:
    chain = step.edge_pieces[b.edge]
    path = _fold_rewrite_path(b.path, step)
    off = Fraction(0)
    prefix: list[EdgeTok] = []
    pt = None
    for (tid, tsgn), ln in chain:
        if off < b.t < off + ln:
            local = b.t - off
            if tsgn > 0:
                pt = CoverPoint(tighten(path + tuple(prefix)), tid, local)
            else:
                pt = CoverPoint(tighten(path + tuple(prefix) + ((tid, -1),)),
                                tid, ln - local)
            break
        off += ln
        prefix.append((tid, tsgn))
    if pt is None:
        raise SphereTreeError("bud sits on a fold cut; threat processing missed it")
    for ss in step.smooth_steps:
        pt = _smooth_transport(pt, ss)
    return pt


def _smooth_transport(pt: CoverPoint, ss: SmoothStep) -> CoverPoint:
    e, t = smooth_point(ss, pt.edge, pt.t)
    if e == pt.edge:
        return CoverPoint(smooth_rewrite_path(pt.path, ss), pt.edge, pt.t)
    (e1, s1), (e2, s2) = ss.d1, ss.d2
    # the merged edge starts at x = the far end of d1; (e1, s1) runs v -> x
    if pt.edge == e1:
        extra: EdgePath = ((e1, s1),) if s1 > 0 else ()
    else:
        extra = ((e1, s1),) if s2 > 0 else ((e2, 1), (e1, s1))
    newp = smooth_rewrite_path(tighten(pt.path + extra), ss)
    return CoverPoint(newp, e, t)


# -- evolution ---------------------------------------------------------------

def _step_gates(step: FoldStep) -> dict[EdgeTok, tuple[EdgeTok, ...]]:
    dom = step.dom_before
    emap = step.emap_before

    def dimg(d: EdgeTok) -> EdgePath:
        e, s = d
        return emap[e] if s > 0 else invert_path(emap[e])

    gates: dict[EdgeTok, tuple[EdgeTok, ...]] = {}
    for v in sorted(dom.graph.vertices):
        buckets: dict[EdgeTok, list[EdgeTok]] = {}
        for d in dom.graph.directions(v):
            buckets.setdefault(dimg(d)[0], []).append(d)
        for ds in buckets.values():
            if len(ds) >= 2:
                for d in ds:
                    gates[d] = tuple(sorted(ds))
    return gates


def _side_depth(active: set[EdgeTok], d: EdgeTok, delta: Fraction) -> Fraction:
    return delta if d in active else Fraction(0)


def _free_param(lo: Fraction, hi: Fraction, taken: set[Fraction]) -> Fraction:
    num, den = 1, 2
    while True:
        pos = lo + (hi - lo) * Fraction(num, den)
        if pos not in taken:
            return pos
        num += 2
        if num >= den:
            den *= 2
            num = 1


class _Evolver:
    """Carries a bud set through one fold interval.

    Buds on edges with surviving material slide into it (an equivariant,
    order-preserving isotopy); a bud on an edge consumed entirely leaves it
    by a Bud Exchange at the fold front, with replacements on dying
    directions escaping through their far vertex."""

    def __init__(self, step: FoldStep):
        self.G = step.dom_before
        self.gates = _step_gates(step)
        self.active = set(self.gates)
        self.delta = step.delta
        self.buds: list[CoverPoint] = []

    def window(self, e: str) -> Interval | None:
        """Surviving material of an edge, in plain edge parameters."""
        ln = self.G.graph.length(e)
        lo = _side_depth(self.active, (e, 1), self.delta)
        hi = ln - _side_depth(self.active, (e, -1), self.delta)
        return (lo, hi) if lo < hi else None

    def _params_taken(self, edge: str) -> set[Fraction]:
        return {x.t for x in self.buds if x.edge == edge}

    def add(self, lift: EdgeLift, d: EdgeTok, pos_side: Fraction) -> None:
        self.buds.append(CoverPoint(lift[0], lift[1],
                                    _param_at_side(self.G, d, pos_side)))

    def slide_all(self) -> None:
        """Move every bud on a partially consumed edge into its surviving
        window; buds of one edge orbit move together, preserving order."""
        by_edge: dict[str, list[CoverPoint]] = {}
        for b in self.buds:
            by_edge.setdefault(b.edge, []).append(b)
        for e, family in sorted(by_edge.items()):
            win = self.window(e)
            if win is None:
                continue
            lo, hi = win
            if all(lo < b.t < hi for b in family):
                continue
            family.sort(key=lambda b: (b.t, b.path))
            span = hi - lo
            m = len(family)
            keep = [b for b in self.buds if b.edge != e]
            for i, b in enumerate(family):
                t = lo + span * Fraction(i + 1, m + 1)
                keep.append(CoverPoint(b.path, b.edge, t))
            self.buds = keep

    def _orbit_sides(self, d: EdgeTok) -> list[Fraction]:
        return sorted(_side_param(self.G, d, x.t) for x in self.buds
                      if x.edge == d[0])

    def _place(self, d: EdgeTok, lift: EdgeLift, lo: Fraction,
               hi: Fraction) -> None:
        """Deposit on the germ inside (lo, hi), before any bud orbit of the
        same edge (keeping the exchange innermost)."""
        first = min((t for t in self._orbit_sides(d) if t > lo), default=None)
        if first is not None:
            hi = min(hi, first)
        if hi <= lo:
            raise SphereTreeError("no innermost slot for an exchange deposit")
        taken = {_side_param(self.G, d, x.t) for x in self.buds
                 if x.edge == d[0]}
        self.add(lift, d, _free_param(lo, hi, taken))

    def window_deposit(self, d: EdgeTok, lift: EdgeLift) -> None:
        """A replacement on a surviving germ, placed first from the vertex."""
        win = self.window(d[0])
        ln = self.G.graph.length(d[0])
        lo, hi = win
        if d[1] < 0:
            lo, hi = ln - hi, ln - lo  # to d-side coordinates
        self._place(d, lift, lo, hi)

    def escape(self, d2: EdgeTok, lift2: EdgeLift, s: Fraction) -> None:
        """Replacement for a dying direction: one bud per other germ at the
        far vertex; dying germs there take already-folded positions."""
        if d2[1] > 0:
            far = tighten(lift2[0] + ((lift2[1], 1),))
        else:
            far = lift2[0]
        for d3, lift3 in _lift_directions(self.G, far):
            if lift3 == lift2:
                continue
            ln3 = self.G.graph.length(d3[0])
            if self.window(d3[0]) is not None:
                self.window_deposit(d3, lift3)
            elif d3 in self.active:
                # consumed from this vertex: behind our own front
                self._place(d3, lift3, Fraction(0), min(s, ln3))
            else:
                # consumed toward this vertex: behind the arriving front
                self._place(d3, lift3, ln3 - min(s, ln3), ln3)

    def run(self, start: list[CoverPoint]) -> list[CoverPoint]:
        self.buds = list(start)
        self.slide_all()
        now = Fraction(0)
        for _ in range(200 + 4 * len(start)):
            threats = []
            for b in self.buds:
                if self.window(b.edge) is not None:
                    continue
                for d in ((b.edge, 1), (b.edge, -1)):
                    if d not in self.active:
                        continue
                    s = _side_param(self.G, d, b.t)
                    if now <= s <= self.delta:
                        threats.append((s, b, d))
            if not threats:
                return self.buds
            s, b, d = min(threats, key=lambda x: (x[0], x[1].key(), x[2]))
            now = s
            gate = self.gates[d]
            w = b.path if d[1] > 0 else tighten(b.path + ((b.edge, 1),))
            self.buds.remove(b)
            # replacement on merged material behind the front
            behind = [t for t in self._orbit_sides(d) if t < s]
            lo = max(behind) if behind else Fraction(0)
            self._place(d, (b.path, b.edge), lo, s)
            for d2 in gate:
                if d2 == d:
                    continue
                e2 = d2[0]
                lift2 = (w, e2) if d2[1] > 0 else (tighten(w + ((e2, -1),)), e2)
                if self.window(e2) is not None:
                    self.window_deposit(d2, lift2)
                else:
                    self.escape(d2, lift2, s)
        raise SphereTreeError("evolution exchange cascade exceeded its cap")


def _evolve_through_step(tree: SphereTree, step: FoldStep,
                         post_graph: MarkedGraph) -> SphereTree:
    buds = _Evolver(step).run(list(tree.buds))
    moved = [_transport_point(b, step) for b in buds]
    out = SphereTree(post_graph, tuple(sorted(set(moved))), tainted=tree.tainted)
    return consolidate(out)


def _auto_cancel(G: MarkedGraph, buds: list[CoverPoint]) -> list[CoverPoint]:
    out = sorted(set(buds))
    while True:
        pair = _find_cancel_pair(G, out)
        if pair is None:
            return out
        out = [b for b in out if b not in pair]


def _post_graph(path: FoldingPath, i: int) -> MarkedGraph:
    step = path.steps[i]
    if step.post_dom is not None:
        return step.post_dom
    if i + 1 < len(path.steps):
        return path.steps[i + 1].dom_before
    return path.state.dom


def evolve_steps(tree: SphereTree, path: FoldingPath, start: int, stop: int
                 ) -> SphereTree:
    cur = tree if tree.consolidated else consolidate(tree)
    for i in range(start, stop):
        step = path.steps[i]
        cur = SphereTree(step.dom_before, cur.buds, tainted=cur.tainted)
        cur = _evolve_through_step(cur, step, _post_graph(path, i))
    return cur


def evolve(tree: SphereTree, path: FoldingPath) -> SphereTree:
    """Carry a sphere tree along a folding path, landing on the codomain."""
    cur = evolve_steps(tree, path, 0, len(path.steps))
    return _transport_terminal(cur, path)


def _transport_terminal(tree: SphereTree, path: FoldingPath) -> SphereTree:
    cod = path.initial.codomain
    new_buds = []
    for b in tree.buds:
        toks = tuple((path.iso_edges[e][0], path.iso_edges[e][1] * s)
                     for e, s in b.path)
        ne, ns = path.iso_edges[b.edge]
        if ns > 0:
            p = tighten(path.base_prefix + toks)
            t = b.t
        else:
            p = tighten(path.base_prefix + toks + ((ne, -1),))
            t = cod.graph.length(ne) - b.t
        new_buds.append(CoverPoint(p, ne, t))
    out = SphereTree(cod, tuple(sorted(set(new_buds))), tainted=tree.tainted)
    return consolidate(out)


# -- constructions -----------------------------------------------------------

def sphere_tree_of(S: Splitting, base: MarkedGraph) -> SphereTree:
    """Folding-path construction: a single bud on the distinguished edge of a
    compatible graph, evolved along the terse folding path onto the base."""
    from .folding import run_folding
    from .maps import make_terse

    Y, dist = compatible_graph(S)
    if S.kind != "hnn":
        raise SphereTreeError(
            "no terse morphism from an amalgam blow-up onto a rose base is "
            "constructible; use bbc_sphere_tree")
    f = make_terse(rose_morphism(Y, base))
    fold_path = run_folding(f)
    start_graph = fold_path.steps[0].dom_before if fold_path.steps else fold_path.state.dom
    mid = start_graph.graph.length(dist) / 2
    start = replace(make_tree(start_graph, [CoverPoint((), dist, mid)]),
                    consolidated=True)
    return evolve(start, fold_path)


def bbc_sphere_tree(S: Splitting, base: MarkedGraph,
                    psi: GraphMorphism | None = None) -> SphereTree:
    """Core-preimage construction: buds are the preimages of the midpoint of
    the identity-coset lift of the distinguished edge under a difference of
    markings psi: base -> compatible_graph(S)."""
    Y, dist = compatible_graph(S)
    if psi is None:
        if len(base.graph.vertices) != 1:
            raise SphereTreeError("bbc_sphere_tree builds psi only for rose "
                                  "bases; pass a morphism explicitly otherwise")
        psi = rose_morphism(base, Y)
    for e in base.graph.edges:
        if not psi.emap[e]:
            raise SphereTreeError("psi must be injective on edges")
    mid = Y.graph.length(dist) / 2
    buds = preimages_of_point(psi, CoverPoint((), dist, mid))
    if not buds:
        raise SphereTreeError("empty preimage tree (inessential sphere)")
    return consolidate(make_tree(base, buds))


def preimages_of_point(psi: GraphMorphism, q: CoverPoint) -> list[CoverPoint]:
    """All domain cover points mapping to the codomain cover point q under
    the basepoint-fixing lift of psi (basepath must be trivial)."""
    if psi.basepath:
        raise SphereTreeError("preimage solving requires a trivial basepath")
    dom, cod = psi.domain, psi.codomain
    cg = cod.graph
    out = []
    for e in sorted(dom.graph.edges):
        img = psi.emap[e]
        L = sum((cg.length(k) for k, _ in img), Fraction(0))
        le = dom.graph.length(e)
        off = Fraction(0)
        for i, (eid, s) in enumerate(img):
            lam = cg.length(eid)
            if eid == q.edge:
                rel = tuple(img[:i]) if s > 0 else tuple(img[: i + 1])
                target = tighten(q.path + invert_path(rel))
                u = _solve_access(psi, target, dom.graph.src(e))
                if u is not None:
                    local = q.t if s > 0 else lam - q.t
                    out.append(CoverPoint(u, e, (off + local) * le / L))
            off += lam
    return sorted(set(out))


def _solve_access(psi: GraphMorphism, target: EdgePath, dom_vertex: str
                  ) -> EdgePath | None:
    """A path u from the domain basepoint to a lift of dom_vertex whose
    tightened psi-image equals `target`, or None."""
    dom, cod = psi.domain, psi.codomain
    try:
        if cod.graph.walk(cod.basepoint, target) != psi.vmap[dom_vertex]:
            return None
    except GraphError:
        return None
    _, tree_paths = dom.spanning_tree()
    tau = tree_paths[dom_vertex]
    c = tighten(target + invert_path(tighten(psi.path_image(tau))))
    try:
        if cod.graph.walk(cod.basepoint, c) != cod.basepoint:
            return None
        w = cod.element_of_path(c)
    except GraphError:
        return None
    delta = dom.path_of_element(w)
    u = tighten(delta + tau)
    if tighten(psi.path_image(u)) != target:
        return None
    return u


def is_single_bud_on(tree: SphereTree, edge_id: str) -> bool:
    return len(tree.buds) == 1 and tree.buds[0].edge == edge_id


# -- intersection numbers ------------------------------------------------------

def core_edge_count(tree: SphereTree, edge_id: str) -> int:
    return sum(1 for _, e in core(tree).edges if e == edge_id)


def intersection_number(S1: Splitting, other, base: MarkedGraph | None = None) -> int:
    """Number of full lifts of the dual edge of `other` inside the core of
    S1's sphere tree: the Guirardel-core cell count along one slice."""
    if isinstance(other, Splitting):
        base2, dist = compatible_graph(other)
        return core_edge_count(bbc_sphere_tree(S1, base2), dist)
    if base is None:
        raise SphereTreeError("intersection against an edge orbit needs the base")
    return core_edge_count(bbc_sphere_tree(S1, base), other)


# -- recovering the splitting represented by a sphere tree --------------------

def crossing_parity_vector(tree: SphereTree, g_path: EdgePath) -> frozenset[EdgePath]:
    """Deck classes of the tree's sphere lifts crossed oddly along a closed
    basepoint path."""
    marks: dict[str, list[CoverPoint]] = {}
    for b in tree.buds:
        marks.setdefault(b.edge, []).append(b)
    odd: set[EdgePath] = set()
    W: EdgePath = ()
    for tok in g_path:
        e, s = tok
        src = W if s > 0 else tighten(W + ((e, -1),))
        for b in marks.get(e, ()):
            h = tighten(src + invert_path(b.path))
            odd.symmetric_difference_update({h})
        W = tighten(W + (tok,))
    return frozenset(odd)


def _hop_vector(tree: SphereTree, b0: CoverPoint) -> frozenset[EdgePath]:
    """Crossing classes along the path from the basepoint lift to a point
    just past the bud b0."""
    marks: dict[str, list[CoverPoint]] = {}
    for b in tree.buds:
        marks.setdefault(b.edge, []).append(b)
    odd: set[EdgePath] = set()
    W: EdgePath = ()
    for tok in b0.path:
        e, s = tok
        src = W if s > 0 else tighten(W + ((e, -1),))
        for b in marks.get(e, ()):
            h = tighten(src + invert_path(b.path))
            odd.symmetric_difference_update({h})
        W = tighten(W + (tok,))
    # partial segment [0, b0.t] of b0's edge from W == b0.path
    for b in marks.get(b0.edge, ()):
        if b.t <= b0.t:
            h = tighten(b0.path + invert_path(b.path))
            odd.symmetric_difference_update({h})
    return frozenset(odd)


def _translate_vector(g_path: EdgePath, vec) -> frozenset[EdgePath]:
    return frozenset(tighten(g_path + h) for h in vec)


def _vertex_member(tree: SphereTree, g: Word) -> bool:
    p = tree.base.path_of_element(g)
    return not crossing_parity_vector(tree, p)


def _stable_ok(tree: SphereTree, g: Word) -> bool:
    p = tree.base.path_of_element(g)
    return crossing_parity_vector(tree, p) == frozenset({()})


def _second_factor_member(tree: SphereTree, g: Word, hop) -> bool:
    p = tree.base.path_of_element(g)
    v = crossing_parity_vector(tree, p)
    return v == hop ^ _translate_vector(p, hop)


def _words_up_to(rank: int, max_len: int):
    from itertools import product

    letters = list(range(1, rank + 1)) + [-i for i in range(1, rank + 1)]
    for n in range(1, max_len + 1):
        for tup in product(letters, repeat=n):
            w = Word(tup)
            if len(w.letters) == n:
                yield w


def extract_splitting(tree: SphereTree) -> Splitting:
    """The one-edge splitting of the sphere a consolidated tree represents,
    recovered from crossing parities of deck translates."""
    from . import stallings

    if tree.is_empty():
        raise SphereTreeError("empty sphere tree has no splitting")
    if not tree.consolidated:
        tree = consolidate(tree)
    seen = set()
    for b in tree.buds:
        key = (b.edge, b.t)
        if key in seen:
            raise SphereTreeError("bud orbits collide; not an embedded sphere")
        seen.add(key)
    rank = tree.base.rank
    total_odd = any(
        sum(1 for b in tree.buds for tok in tree.base.petals[i]
            if tok[0] == b.edge) % 2
        for i in range(1, rank + 1))
    hop = _hop_vector(tree, tree.buds[0])
    diam = max((len(b.path) for b in tree.buds), default=0)
    for max_len in (diam + 2, 2 * diam + 4, 2 * diam + 6):
        members: list[Word] = []
        second: list[Word] = []
        stable: Word | None = None
        for w in _words_up_to(rank, max_len):
            if _vertex_member(tree, w):
                members.append(w)
            elif total_odd and stable is None and _stable_ok(tree, w):
                stable = w
            elif not total_odd and _second_factor_member(tree, w, hop):
                second.append(w)
        if total_odd:
            basis = _subgroup_basis(members, rank)
            if basis is None or stable is None:
                continue
            if stallings.is_basis(basis + [stable], rank):
                return Splitting(rank, "hnn", (tuple(basis),), stable)
        else:
            b1 = _subgroup_basis(members, rank)
            b2 = _subgroup_basis(second, rank)
            if b1 is None or b2 is None:
                continue
            if stallings.is_basis(b1 + b2, rank):
                return Splitting(rank, "amalgam", (tuple(b1), tuple(b2)), None)
    raise SphereTreeError("failed to recover the sphere's splitting")


def _subgroup_basis(members, rank) -> list[Word] | None:
    from . import stallings

    members = [w for w in members if w]
    if not members:
        return None
    core_g = stallings.CoreGraph(members)
    r = core_g.rank()
    if r == 0:
        return None
    prev: dict[int, tuple[int, int] | None] = {core_g.base: None}
    order = [core_g.base]
    queue = [core_g.base]
    while queue:
        v = queue.pop(0)
        for lab in sorted(core_g.adj[v]):
            u = core_g.adj[v][lab]
            if u not in prev:
                prev[u] = (v, lab)
                queue.append(u)
                order.append(u)

    def path_to(v):
        letters = []
        while prev[v] is not None:
            v, lab = prev[v]
            letters.append(lab)
        return list(reversed(letters))

    basis = []
    for v in order:
        for lab in sorted(core_g.adj[v]):
            if lab < 0:
                continue
            u = core_g.adj[v][lab]
            if prev.get(u) == (v, lab) or prev.get(v) == (u, -lab):
                continue
            w = Word(path_to(v) + [lab] + [-x for x in reversed(path_to(u))])
            if w:
                basis.append(w)
    dedup = []
    seen = set()
    for w in basis:
        if w.letters not in seen and w.inverse().letters not in seen:
            seen.add(w.letters)
            dedup.append(w)
    if len(dedup) != r:
        return None
    return dedup
