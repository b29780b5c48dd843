"""Event-driven folding of all illegal turns at unit speed.

A fold state carries a mutable working copy of the domain and codomain; at
each critical time every illegal gate has its initial segments of length
delta identified, after subdividing the codomain so that cut points land on
vertices.  Every step records enough rewriting data to transport sphere
trees and to trace gates backward.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .graphs import (EdgePath, EdgeTok, GraphError, MarkedGraph, MetricGraph,
                     invert_path, tighten)
from .maps import GraphMorphism, MapError, check_difference_of_markings

MAX_EVENTS = 10_000


class FoldingError(ValueError):
    pass


class FoldingComplete(FoldingError):
    """Raised by next_event when no illegal turn remains."""


@dataclass
class FoldEvent:
    time: Fraction
    kind: str  # "vertex_collision" | "gate_split"
    data: dict


@dataclass
class SmoothStep:
    """Removal of a degree-2 vertex: (e1,-s1).(e2,s2) becomes (new,+1)."""

    vertex: str
    d1: EdgeTok
    d2: EdgeTok
    new_edge: str
    len1: Fraction
    len2: Fraction


@dataclass
class FoldStep:
    time_before: Fraction
    delta: Fraction
    events: list[FoldEvent]
    dom_before: MarkedGraph
    emap_before: dict[str, EdgePath]
    cod_before: MarkedGraph
    # old edge id -> ordered pieces [(token in post-merge graph, length)]
    edge_pieces: dict[str, list[tuple[EdgeTok, Fraction]]]
    vertex_map: dict[str, str]
    smooth_steps: list[SmoothStep]
    cod_splits: list[tuple[str, str, str]] = field(default_factory=list)
    post_dom: MarkedGraph | None = None
    post_emap: dict[str, EdgePath] | None = None
    mid_dom: MarkedGraph | None = None  # post-merge, pre-smoothing
    mid_emap: dict[str, EdgePath] | None = None


@dataclass
class FoldingPath:
    initial: GraphMorphism
    steps: list[FoldStep]
    state: "FoldState"
    terminal_smooth: list[SmoothStep] = field(default_factory=list)
    # terminal identification onto the original codomain
    iso_edges: dict[str, EdgeTok] = field(default_factory=dict)
    iso_vertices: dict[str, str] = field(default_factory=dict)
    base_prefix: EdgePath = ()

    @property
    def events(self) -> list[FoldEvent]:
        return [ev for st in self.steps for ev in st.events]


class FoldState:
    def __init__(self, f: GraphMorphism):
        self.dom = f.domain.copy()
        self.cod = f.codomain.copy()
        self.emap = dict(f.emap)
        self.basepath = f.basepath
        self.time = Fraction(0)
        self._fresh = itertools.count(1)
        self.cod_split_log: list[tuple[str, str, str]] = []

    def morphism(self) -> GraphMorphism:
        return GraphMorphism(self.dom, self.cod, self._vmap(), dict(self.emap),
                             self.basepath)

    def _vmap(self) -> dict[str, str]:
        vm = {}
        cg = self.cod.graph
        for v in self.dom.graph.vertices:
            vm[v] = None
        # vertex images recovered by walking edge images
        vm[self.dom.basepoint] = self._base_image()
        changed = True
        dg = self.dom.graph
        while changed:
            changed = False
            for e in dg.edges:
                src, dst = dg.src(e), dg.dst(e)
                img = self.emap[e]
                if vm[src] is not None and vm[dst] is None:
                    vm[dst] = cg.walk(vm[src], img)
                    changed = True
                elif vm[dst] is not None and vm[src] is None:
                    vm[src] = cg.walk(vm[dst], invert_path(img))
                    changed = True
        return vm

    def _base_image(self) -> str:
        # basepath runs from the image of the domain basepoint to cod basepoint
        return self.cod.graph.walk(self.cod.basepoint, invert_path(self.basepath))

    # -- gate structure ---------------------------------------------------

    def direction_image(self, d: EdgeTok) -> EdgePath:
        e, s = d
        return self.emap[e] if s > 0 else invert_path(self.emap[e])

    def gates(self) -> dict[str, list[tuple[EdgeTok, ...]]]:
        out: dict[str, list[tuple[EdgeTok, ...]]] = {}
        dg = self.dom.graph
        for v in sorted(dg.vertices):
            buckets: dict[EdgeTok, list[EdgeTok]] = {}
            for d in dg.directions(v):
                img = self.direction_image(d)
                if not img:
                    raise FoldingError(f"constant edge image on {d[0]}")
                buckets.setdefault(img[0], []).append(d)
            out[v] = [tuple(sorted(buckets[k])) for k in sorted(buckets)]
        return out

    def illegal_gates(self) -> list[tuple[str, tuple[EdgeTok, ...]]]:
        return [(v, g) for v, gs in self.gates().items() for g in gs if len(g) >= 2]


def _lcp_length(state: FoldState, d1: EdgeTok, d2: EdgeTok) -> Fraction:
    cg = state.cod.graph
    p1, p2 = state.direction_image(d1), state.direction_image(d2)
    total = Fraction(0)
    for t1, t2 in zip(p1, p2):
        if t1 != t2:
            break
        total += cg.length(t1[0])
    return total


def _candidates(state: FoldState, groups: list[tuple[str, tuple[EdgeTok, ...]]]):
    """Critical-delta candidates: (delta, kind, payload)."""
    dg = state.dom.graph
    cands = []
    active: dict[EdgeTok, tuple[str, tuple[EdgeTok, ...]]] = {}
    for v, g in groups:
        for d in g:
            active[d] = (v, g)
        for d1, d2 in itertools.combinations(g, 2):
            cands.append((_lcp_length(state, d1, d2), "gate_split",
                          {"vertex": v, "turn": [d1, d2]}))
    for e in sorted(dg.edges):
        ends = int((e, 1) in active) + int((e, -1) in active)
        if ends:
            cands.append((dg.length(e) / ends, "vertex_collision",
                          {"edge": e, "consumed_ends": ends}))
    return cands


def next_event(state: FoldState) -> tuple[Fraction, list[FoldEvent]]:
    groups = state.illegal_gates()
    if not groups:
        raise FoldingComplete("no illegal turns; folding path complete")
    cands = _candidates(state, groups)
    delta = min(c[0] for c in cands)
    if delta <= 0:
        raise FoldingError("nonpositive critical time")
    t = state.time + delta
    events = [FoldEvent(t, kind, data) for d, kind, data in cands if d == delta]
    return t, events


# -- the quotient ---------------------------------------------------------

def _subdivide_cod(state: FoldState, edge: str, pos: Fraction) -> None:
    cg = state.cod.graph
    src, dst, ln = cg.edges[edge]
    if not 0 < pos < ln:
        raise FoldingError("bad codomain subdivision position")
    n = next(state._fresh)
    mid = f"@{n}"
    a, b = f"{edge}:{n}a", f"{edge}:{n}b"
    del cg.edges[edge]
    cg.vertices.add(mid)
    cg.flagged.add(mid)
    cg.edges[a] = (src, mid, pos)
    cg.edges[b] = (mid, dst, ln - pos)
    table = {(edge, 1): ((a, 1), (b, 1)), (edge, -1): ((b, -1), (a, -1))}

    def rw(path: EdgePath) -> EdgePath:
        out: list[EdgeTok] = []
        for tok in path:
            out.extend(table.get(tok, (tok,)))
        return tuple(out)

    state.emap = {e: rw(p) for e, p in state.emap.items()}
    state.cod.petals = {i: rw(p) for i, p in state.cod.petals.items()}
    state.basepath = rw(state.basepath)
    state.cod_split_log.append((edge, a, b))


def _align_prefixes(state: FoldState, groups, delta: Fraction) -> None:
    """Subdivide the codomain so every group's delta-prefix is token-aligned."""
    cg = state.cod.graph
    for v, g in groups:
        while True:
            img = state.direction_image(g[0])
            acc = Fraction(0)
            needs = None
            for tok in img:
                ln = cg.length(tok[0])
                if acc + ln > delta:
                    if acc < delta:
                        off = delta - acc if tok[1] > 0 else acc + ln - delta
                        needs = (tok[0], off)
                    break
                acc += ln
                if acc == delta:
                    break
            if needs is None:
                break
            _subdivide_cod(state, *needs)


def _token_prefix(state: FoldState, d: EdgeTok, delta: Fraction) -> EdgePath:
    cg = state.cod.graph
    img = state.direction_image(d)
    acc = Fraction(0)
    out = []
    for tok in img:
        if acc == delta:
            break
        out.append(tok)
        acc += cg.length(tok[0])
    if acc != delta:
        raise FoldingError("prefix not aligned")
    return tuple(out)


def apply_fold(state: FoldState, groups: list[tuple[str, tuple[EdgeTok, ...]]],
               delta: Fraction, events: list[FoldEvent]) -> FoldStep:
    dom_before = state.dom.copy()
    emap_before = dict(state.emap)
    cod_before = state.cod.copy()
    time_before = state.time
    vol_before = state.dom.graph.volume()
    split_mark = len(state.cod_split_log)

    _align_prefixes(state, groups, delta)
    dg = state.dom.graph

    # 1. subdivide domain edges at cut positions
    consumed: dict[str, list[int]] = {}
    for v, g in groups:
        for e, s in g:
            consumed.setdefault(e, []).append(s)
    pieces: dict[str, list[tuple[str, Fraction]]] = {}
    piece_graph_edges: dict[str, tuple[str, str, Fraction]] = {}
    piece_images: dict[str, EdgePath] = {}
    for e in sorted(dg.edges):
        src, dst, ln = dg.edges[e]
        cuts = set()
        if e in consumed:
            if 1 in consumed[e] and delta < ln:
                cuts.add(delta)
            if -1 in consumed[e] and ln - delta > 0:
                cuts.add(ln - delta)
        cuts = sorted(c for c in cuts if 0 < c < ln)
        if not cuts and e not in consumed:
            piece_graph_edges[e] = (src, dst, ln)
            pieces[e] = [(e, ln)]
            piece_images[e] = state.emap[e]
            continue
        bounds = [Fraction(0)] + cuts + [ln]
        img = state.emap[e]
        cg = state.cod.graph
        ids = []
        cur = src
        img_pos = 0
        img_acc = Fraction(0)
        for i in range(len(bounds) - 1):
            lo, hi = bounds[i], bounds[i + 1]
            pid = e if len(bounds) == 2 else f"{e}~{next(state._fresh)}"
            nxt = dst if hi == ln else f"x{next(state._fresh)}"
            if hi != ln and nxt not in dg.vertices:
                pass
            piece_graph_edges[pid] = (cur, nxt, hi - lo)
            # split the image at hi - lo metric length
            seg = []
            need = hi - lo
            acc = Fraction(0)
            while acc < need:
                tok = img[img_pos]
                seg.append(tok)
                acc += cg.length(tok[0])
                img_pos += 1
            if acc != need:
                raise FoldingError("image split misaligned")
            piece_images[pid] = tuple(seg)
            ids.append((pid, hi - lo, cur, nxt))
            cur = nxt
        pieces[e] = [(pid, ln_) for pid, ln_, _, _ in ids]

    # assemble intermediate graph (pre-merge)
    new_vertices = set(dg.vertices)
    for e, segs in piece_graph_edges.items():
        new_vertices.add(segs[0])
        new_vertices.add(segs[1])

    # 2. per-group merges
    parent: dict[str, str] = {v: v for v in new_vertices}

    def find(v: str) -> str:
        r = v
        while parent[r] != r:
            r = parent[r]
        while parent[v] != r:
            parent[v], v = r, parent[v]
        return r

    def union(a: str, b: str) -> None:
        ra, rb = find(a), find(b)
        if ra == rb:
            return
        if rb < ra:
            ra, rb = rb, ra
        parent[rb] = ra

    tok_rewrite: dict[EdgeTok, EdgeTok] = {}
    dead: set[str] = set()
    for v, g in groups:
        segs = []
        for e, s in g:
            plist = pieces[e]
            if s > 0:
                pid = plist[0][0]
                orient = 1
            else:
                pid = plist[-1][0]
                orient = -1
            src, dst, _ = piece_graph_edges[pid]
            far = dst if orient > 0 else src
            segs.append((pid, orient, far))
        keeper, korient, _ = min(segs)
        for pid, orient, far in segs:
            union(far, segs[0][2])
            if pid != keeper:
                dead.add(pid)
                tok_rewrite[(pid, orient)] = (keeper, korient)
                tok_rewrite[(pid, -orient)] = (keeper, -korient)
    for (pid, o), (kid, ko) in tok_rewrite.items():
        img_p = piece_images[pid] if o > 0 else invert_path(piece_images[pid])
        img_k = piece_images[kid] if ko > 0 else invert_path(piece_images[kid])
        if img_p != img_k:
            raise FoldingError("fold identified segments with different images")

    # 3. rebuild the graph
    final_edges: dict[str, tuple[str, str, Fraction]] = {}
    for pid, (src, dst, ln) in piece_graph_edges.items():
        if pid in dead:
            continue
        final_edges[pid] = (find(src), find(dst), ln)
    final_vertices = {find(src) for src, dst, _ in final_edges.values()}
    final_vertices |= {find(dst) for src, dst, _ in final_edges.values()}
    final_vertices.add(find(dom_before.basepoint))

    flagged = {find(v) for v in dg.flagged if find(v) in final_vertices}
    new_graph = MetricGraph(final_vertices, final_edges, flagged)

    def rewrite_tok(tok: EdgeTok) -> EdgeTok:
        return tok_rewrite.get(tok, tok)

    def rewrite_path(path: EdgePath) -> EdgePath:
        out: list[EdgeTok] = []
        for e, s in path:
            chain = pieces[e] if s > 0 else [(p, l) for p, l in reversed(pieces[e])]
            for pid, _ in chain:
                out.append(rewrite_tok((pid, s)))
        return tighten(out)

    basepoint = find(dom_before.basepoint)
    petals = {i: rewrite_path(p) for i, p in dom_before.petals.items()}
    state.dom = MarkedGraph(dom_before.rank, new_graph, basepoint, petals)
    state.emap = {pid: piece_images[pid] for pid in final_edges}
    state.time = time_before + delta

    edge_pieces = {e: [(rewrite_tok((pid, 1)), ln) for pid, ln in plist]
                   for e, plist in pieces.items()}
    vertex_map = {v: find(v) for v in dg.vertices}

    step = FoldStep(time_before, delta, events, dom_before, emap_before,
                    cod_before, edge_pieces, vertex_map, [],
                    cod_splits=state.cod_split_log[split_mark:])
    step.mid_dom = state.dom
    step.mid_emap = dict(state.emap)

    _smooth_working(state, step)

    if state.dom.graph.volume() >= vol_before:
        raise FoldingError("volume did not decrease across a fold event")
    for v, gs in state.gates().items():
        if len(gs) < 2:
            raise FoldingError(f"vertex {v} lost its train track structure")
    step.post_dom = state.dom
    step.post_emap = state.emap
    return step


def _smooth_working(state: FoldState, step: FoldStep) -> None:
    """Remove non-basepoint degree-2 vertices created by the fold."""
    while True:
        dg = state.dom.graph
        target = None
        for v in sorted(dg.vertices):
            if v == state.dom.basepoint:
                continue
            dirs = dg.directions(v)
            if len(dirs) == 2 and dirs[0][0] != dirs[1][0]:
                target = (v, dirs[0], dirs[1])
                break
        if target is None:
            return
        v, d1, d2 = target
        (e1, s1), (e2, s2) = d1, d2
        n = f"m{next(state._fresh)}"
        a1, b1 = dg.tok_endpoints((e1, -s1))  # a1 -> v
        a2, b2 = dg.tok_endpoints((e2, s2))   # v -> b2
        len1, len2 = dg.length(e1), dg.length(e2)
        img = tuple(state.direction_image((e1, -s1))) + tuple(state.direction_image((e2, s2)))
        if tighten(img) != img:
            raise FoldingError("smoothing would create a non-tight image")
        new_edges = {e: val for e, val in dg.edges.items() if e not in (e1, e2)}
        new_edges[n] = (a1, b2, len1 + len2)
        verts = set(dg.vertices) - {v}
        flagged = set(dg.flagged) - {v}
        graph = MetricGraph(verts, new_edges, flagged)
        ss = SmoothStep(v, d1, d2, n, len1, len2)

        def rw(path: EdgePath) -> EdgePath:
            return smooth_rewrite_path(path, ss)

        petals = {i: rw(p) for i, p in state.dom.petals.items()}
        state.dom = MarkedGraph(state.dom.rank, graph, state.dom.basepoint, petals)
        emap = {e: p for e, p in state.emap.items() if e not in (e1, e2)}
        emap[n] = img
        state.emap = emap
        step.smooth_steps.append(ss)


def smooth_rewrite_path(path: EdgePath, ss: SmoothStep) -> EdgePath:
    (e1, s1), (e2, s2) = ss.d1, ss.d2
    out: list[EdgeTok] = []
    i = 0
    toks = list(path)
    while i < len(toks):
        t = toks[i]
        if i + 1 < len(toks):
            pair = (t, toks[i + 1])
            if pair == ((e1, -s1), (e2, s2)):
                out.append((ss.new_edge, 1))
                i += 2
                continue
            if pair == ((e2, -s2), (e1, s1)):
                out.append((ss.new_edge, -1))
                i += 2
                continue
        if t[0] in (e1, e2):
            raise FoldingError("stray token through a smoothed vertex")
        out.append(t)
        i += 1
    return tighten(out)


def smooth_point(ss: SmoothStep, edge: str, t: Fraction) -> tuple[str, Fraction]:
    """Map a point on e1/e2 to its position on the merged edge."""
    (e1, s1), (e2, s2) = ss.d1, ss.d2
    if edge == e1:
        local = ss.len1 - t if s1 > 0 else t
        return ss.new_edge, local
    if edge == e2:
        local = t if s2 > 0 else ss.len2 - t
        return ss.new_edge, ss.len1 + local
    return edge, t


def fold_step(state: FoldState) -> FoldStep:
    t, events = next_event(state)
    groups = state.illegal_gates()
    delta = t - state.time
    return apply_fold(state, groups, delta, events)


def run_folding(f: GraphMorphism) -> FoldingPath:
    for e in f.domain.graph.edges:
        if f.slope(e) != 1:
            raise FoldingError(f"edge {e} has slope {f.slope(e)}; run make_terse first")
    state = FoldState(f)
    path = FoldingPath(f, [], state)
    for _ in range(MAX_EVENTS):
        try:
            path.steps.append(fold_step(state))
        except FoldingComplete:
            _identify_terminal(path)
            return path
    raise FoldingError("event cap exceeded")


def _identify_terminal(path: FoldingPath) -> None:
    """Check the terminal graph is the codomain; build the identification."""
    state = path.state
    # smooth any remaining flagged codomain subdivisions back
    # (domain already smoothed during the run)
    cod = state.cod
    # merge split codomain edges: repeatedly smooth flagged degree-2 vertices,
    # restoring original edges where the split ids allow
    while True:
        cg = cod.graph
        target = None
        for v in sorted(cg.flagged):
            dirs = cg.directions(v)
            if len(dirs) == 2 and dirs[0][0] != dirs[1][0]:
                target = (v, dirs[0], dirs[1])
                break
        if target is None:
            break
        v, d1, d2 = target
        (e1, s1), (e2, s2) = d1, d2
        n = f"c{next(state._fresh)}"
        a1, _ = cg.tok_endpoints((e1, -s1))
        _, b2 = cg.tok_endpoints((e2, s2))
        ss = SmoothStep(v, d1, d2, n, cg.length(e1), cg.length(e2))
        new_edges = {e: val for e, val in cg.edges.items() if e not in (e1, e2)}
        new_edges[n] = (a1, b2, ss.len1 + ss.len2)
        graph = MetricGraph(set(cg.vertices) - {v}, new_edges, set(cg.flagged) - {v})
        cod = MarkedGraph(cod.rank, graph,
                          cod.basepoint,
                          {i: smooth_rewrite_path(p, ss) for i, p in cod.petals.items()})
        state.emap = {e: smooth_rewrite_path(p, ss) for e, p in state.emap.items()}
        state.basepath = smooth_rewrite_path(state.basepath, ss)
        path.terminal_smooth.append(ss)
    state.cod = cod

    original = path.initial.codomain
    # match the smoothed codomain onto the original by petal comparison:
    # both are the same graph up to edge renames introduced by split/merge.
    iso = _match_graphs(cod, original)
    if iso is None:
        raise FoldingError("terminal codomain does not match the original")
    edge_iso, vertex_iso = iso

    # each terminal domain edge must map to a single codomain token
    dom_edge_iso: dict[str, EdgeTok] = {}
    for e, img in state.emap.items():
        if len(img) != 1:
            raise FoldingError("terminal map is not edge-to-edge")
        tok = img[0]
        mapped = edge_iso[tok[0]]
        dom_edge_iso[e] = (mapped[0], mapped[1] * tok[1])
        if state.dom.graph.length(e) != original.graph.length(mapped[0]):
            raise FoldingError("terminal edge lengths disagree")
    used = {tok[0] for tok in dom_edge_iso.values()}
    if used != set(original.graph.edges) or len(used) != len(dom_edge_iso):
        raise FoldingError("terminal map is not an edge bijection")
    path.iso_edges = dom_edge_iso
    vm = {}
    dgf = state.dom.graph
    for e, (ce, cs) in dom_edge_iso.items():
        src, dst = (dgf.src(e), dgf.dst(e))
        csrc, cdst = original.graph.tok_endpoints((ce, cs))
        if vm.setdefault(src, csrc) != csrc or vm.setdefault(dst, cdst) != cdst:
            raise FoldingError("terminal vertex identification inconsistent")
    path.iso_vertices = vm

    # difference-of-markings certificate through the identification
    final = GraphMorphism(
        state.dom, original, vm,
        {e: (tok,) for e, tok in dom_edge_iso.items()},
        _map_path_tokens(state.basepath, edge_iso))
    if not check_difference_of_markings(final):
        raise FoldingError("terminal graph is not marking-equivalent to the codomain")
    path.base_prefix = tighten(invert_path(final.basepath))


def _map_path_tokens(path: EdgePath, edge_iso: dict[str, EdgeTok]) -> EdgePath:
    out = []
    for e, s in path:
        ne, ns = edge_iso[e]
        out.append((ne, ns * s))
    return tuple(out)


def _match_graphs(a: MarkedGraph, b: MarkedGraph):
    """Identify two marked graphs that differ only by edge/vertex renames and
    possible edge reversals, anchored at the basepoint and petals."""
    ag, bg = a.graph, b.graph
    if len(ag.edges) != len(bg.edges) or len(ag.vertices) != len(bg.vertices):
        return None
    if {i: p for i, p in a.petals.items()} is None:
        return None
    edge_iso: dict[str, EdgeTok] = {}
    vertex_iso: dict[str, str] = {a.basepoint: b.basepoint}
    # petal-guided traversal: walk both petal families in parallel
    frontier = []
    for i in sorted(a.petals):
        pa, pb = a.petals[i], b.petals[i]
        if len(pa) != len(pb):
            return None
        frontier.append((pa, pb, a.basepoint, b.basepoint))
    for pa, pb, va, vb in frontier:
        ca, cb = va, vb
        for ta, tb in zip(pa, pb):
            ea, sa = ta
            eb, sb = tb
            prev = edge_iso.get(ea)
            if prev is None:
                edge_iso[ea] = (eb, sb * sa)
            elif prev != (eb, sb * sa):
                return None
            na = ag.tok_endpoints(ta)[1]
            nb = bg.tok_endpoints(tb)[1]
            if vertex_iso.setdefault(na, nb) != nb:
                return None
            ca, cb = na, nb
    if len(edge_iso) != len(ag.edges):
        return None
    for e, (eb, s) in edge_iso.items():
        if ag.length(e) != bg.length(eb):
            return None
    return edge_iso, vertex_iso


# -- discrete oracle ------------------------------------------------------

def fold_sequence(f: GraphMorphism) -> FoldingPath:
    """Stallings-style sequence of maximal folds; the discrete cross-check."""
    from .maps import is_foldable

    if not is_foldable(f):
        raise FoldingError("map is not foldable (< 3 gates at some vertex)")
    for e in f.domain.graph.edges:
        if not f.emap[e]:
            raise FoldingError("foldable map must be nonconstant on edges")
    state = FoldState(f)
    path = FoldingPath(f, [], state)
    for _ in range(MAX_EVENTS):
        groups = state.illegal_gates()
        if not groups:
            _identify_terminal(path)
            return path
        best = None
        for v, g in groups:
            for d1, d2 in itertools.combinations(g, 2):
                lcp = _lcp_length(state, d1, d2)
                dg = state.dom.graph
                if d1[0] == d2[0]:
                    cap = dg.length(d1[0]) / 2
                else:
                    cap = min(dg.length(d1[0]), dg.length(d2[0]))
                ln = min(lcp, cap)
                key = (-ln, v, d1, d2)
                if best is None or key < best[0]:
                    best = (key, v, (d1, d2), ln)
        _, v, pair, ln = best
        ev = [FoldEvent(state.time + ln, "maximal_fold",
                        {"vertex": v, "turn": list(pair)})]
        path.steps.append(apply_fold(state, [(v, pair)], ln, ev))
    raise FoldingError("fold cap exceeded")
