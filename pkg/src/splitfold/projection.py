"""Submanifold projection by chopping sphere trees, plus the constructive
Behrstock and bounded-geodesic-image machinery."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from . import cover as cov
from . import spheretrees as st
from .cover import CoverPoint
from .folding import FoldingPath, FoldStep, smooth_rewrite_path
from .graphs import (EdgePath, EdgeTok, GraphError, MarkedGraph, Splitting,
                     invert_path, splitting_eq, splitting_from_edge, tighten)
from .maps import GraphMorphism
from .spheretrees import (EdgeLift, Hull, SphereTree, bbc_sphere_tree,
                          canonical_key, consolidate, extract_splitting,
                          hull_of, intersection_number, make_tree, normalize)

KIND_SPHERE = "sphere"
KIND_DISK = "disk"
KIND_OTHER = "other"


class ProjectionError(ValueError):
    pass


@dataclass(frozen=True)
class ChopPoint:
    lift: EdgeLift
    t: Fraction


@dataclass
class ChoppedPiece:
    base: MarkedGraph
    buds: tuple[CoverPoint, ...]
    atoms: dict[EdgeLift, list[tuple[Fraction, Fraction]]]
    chops: tuple[tuple[ChopPoint, int], ...]  # (point, side: -1 below, +1 above)
    kind: str
    chop_count: int

    def tree(self) -> SphereTree:
        return consolidate(make_tree(self.base, self.buds))


@dataclass
class ProjectionResult:
    pieces: list[ChoppedPiece]
    caps: dict[int, list[SphereTree]]
    essential: list[bool]
    defined: bool


def chop(tree: SphereTree, edge_id: str, param: Fraction | None = None,
         renormalize: bool = True) -> list[ChoppedPiece]:
    """Cut the hull at its interior crossings of the given edge orbit (at the
    midpoint unless another parameter is given); return the pieces."""
    if not tree.consolidated:
        raise ProjectionError("chop requires a consolidated sphere tree")
    G = tree.base
    g = G.graph
    if param is None:
        param = g.length(edge_id) / 2
    if renormalize:
        tree = normalize(tree)
    for b in tree.buds:
        if b.edge == edge_id and b.t == param:
            raise ProjectionError("bud sits exactly at a chop point")
    h = hull_of(tree) if tree.buds else Hull({})

    atoms: list[tuple[EdgeLift, Fraction, Fraction]] = []
    chop_points: list[ChopPoint] = []
    for lift, ivs in sorted(h.cov.items()):
        _, e = lift
        for lo, hi in ivs:
            cuts = []
            if e == edge_id and lo < param < hi:
                cuts = [param]
                chop_points.append(ChopPoint(lift, param))
            bounds = [lo] + cuts + [hi]
            for a, b in zip(bounds, bounds[1:]):
                atoms.append((lift, a, b))
    if not atoms and tree.buds:
        b = tree.buds[0]
        atoms = [((b.path, b.edge), b.t, b.t)]

    parent = list(range(len(atoms)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        parent[find(i)] = find(j)

    cutset = {(cp.lift, cp.t) for cp in chop_points}
    keymap: dict = {}
    for i, (lift, lo, hi) in enumerate(atoms):
        path, e = lift
        for t in (lo, hi):
            if (lift, t) in cutset:
                continue
            if t == 0:
                key = ("v", path)
            elif t == g.length(e):
                key = ("v", tighten(path + ((e, 1),)))
            else:
                key = ("p", lift, t)
            if key in keymap:
                union(i, keymap[key])
            else:
                keymap[key] = i

    groups: dict[int, list[int]] = {}
    for i in range(len(atoms)):
        groups.setdefault(find(i), []).append(i)

    pieces = []
    for root in sorted(groups):
        idxs = groups[root]
        cov_map: dict[EdgeLift, list[tuple[Fraction, Fraction]]] = {}
        for i in idxs:
            lift, lo, hi = atoms[i]
            cov_map.setdefault(lift, []).append((lo, hi))
        buds = tuple(b for b in tree.buds
                     if _in_cov(cov_map, (b.path, b.edge), b.t))
        chops = []
        for cp in chop_points:
            for i in idxs:
                lift, lo, hi = atoms[i]
                if lift == cp.lift and hi == cp.t and lo < cp.t:
                    chops.append((cp, -1))
                if lift == cp.lift and lo == cp.t and hi > cp.t:
                    chops.append((cp, 1))
        count = len(chops)
        kind = KIND_SPHERE if count == 0 else KIND_DISK if count == 1 else KIND_OTHER
        pieces.append(ChoppedPiece(G, buds, cov_map, tuple(chops), kind, count))
    return pieces


def _in_cov(cov_map, lift, t) -> bool:
    return any(lo <= t <= hi for lo, hi in cov_map.get(lift, ()))


def _place_param(lo: Fraction, hi: Fraction, avoid: set[Fraction]) -> Fraction:
    """A parameter strictly inside (lo, hi) distinct from the avoid set."""
    num = 1
    den = 2
    while True:
        pos = lo + (hi - lo) * Fraction(num, den)
        if pos not in avoid:
            return pos
        num += 2
        if num >= den:
            den *= 2
            num = 1


def cap(piece: ChoppedPiece, side: int) -> SphereTree:
    """Cap a disk piece: the chop point is replaced by a bud on the chosen
    side of the chopped edge (0 = the piece's side, 1 = the far side)."""
    if piece.kind != KIND_DISK:
        raise ProjectionError("cap requires a disk piece")
    (cp, piece_side), = piece.chops
    g = piece.base.graph
    eid = cp.lift[1]
    ln = g.length(eid)
    on_lift = sorted(b.t for b in piece.buds if (b.path, b.edge) == cp.lift)
    orbit = {b.t for b in piece.buds if b.edge == eid}
    below = (side == 0) == (piece_side < 0)
    if below:
        lo = max([t for t in on_lift if t < cp.t], default=Fraction(0))
        pos = _place_param(lo, cp.t, orbit)
    else:
        hi = min([t for t in on_lift if t > cp.t], default=ln)
        pos = _place_param(cp.t, hi, orbit)
    bud = CoverPoint(cp.lift[0], eid, pos)
    return consolidate(make_tree(piece.base, set(piece.buds) | {bud}))


def is_boundary_parallel(capped: SphereTree, edge_id: str) -> bool:
    return st.is_single_bud_on(capped, edge_id)


def resolve_dual_edge(S: Splitting, base: MarkedGraph) -> str:
    """The edge of `base` dual to S (via provenance or splitting equality)."""
    if S.provenance is not None:
        G, e = S.provenance
        if G is base or (G.rank == base.rank and G.graph.edges == base.graph.edges
                         and G.petals == base.petals):
            return e
    for e in sorted(base.graph.edges):
        try:
            cand = splitting_from_edge(base, e)
        except GraphError:
            continue
        if splitting_eq(cand, S):
            return e
    raise ProjectionError("base does not contain the dual edge of the splitting")


def project(S: Splitting, S0: Splitting, base: MarkedGraph) -> ProjectionResult:
    """Innermost components of S cut along the boundary sphere S0."""
    if S0.kind != "hnn":
        raise ProjectionError("chop boundary must be nonseparating (hnn)")
    e0 = resolve_dual_edge(S0, base)
    if splitting_eq(S, S0):
        raise ProjectionError("projection of a sphere to its own complement is undefined")
    return project_tree(bbc_sphere_tree(S, base), e0)


def project_tree(tree: SphereTree, e0: str) -> ProjectionResult:
    pieces = [p for p in chop(tree, e0) if p.kind in (KIND_SPHERE, KIND_DISK)]
    caps: dict[int, list[SphereTree]] = {}
    essential: list[bool] = []
    for i, p in enumerate(pieces):
        if p.kind == KIND_SPHERE:
            essential.append(bool(p.buds))
        else:
            cs = [cap(p, 0), cap(p, 1)]
            caps[i] = cs
            essential.append(any(not c.is_empty() and not is_boundary_parallel(c, e0)
                                 for c in cs))
    return ProjectionResult(pieces, caps, essential, any(essential))


# -- disjointness certificates -------------------------------------------------

@dataclass
class Distance1Cert:
    ok: bool
    kind: str
    detail: dict = field(default_factory=dict)


def distance1_cert(A, B) -> Distance1Cert:
    """Adjacency certified by vanishing intersection numbers both ways."""
    SA = A if isinstance(A, Splitting) else extract_splitting(A)
    SB = B if isinstance(B, Splitting) else extract_splitting(B)
    i1 = intersection_number(SA, SB)
    i2 = intersection_number(SB, SA)
    return Distance1Cert(i1 == 0 and i2 == 0, "intersection",
                         {"i": i1, "i_sym": i2})


def distance1(A, B) -> bool:
    return distance1_cert(A, B).ok


# -- Behrstock ------------------------------------------------------------------

@dataclass
class BehrstockWitness:
    side: str  # "X" or "Xp"
    chain: list[dict]


def _essential_objects(proj: ProjectionResult) -> list[SphereTree]:
    out = []
    for i, p in enumerate(proj.pieces):
        if not proj.essential[i]:
            continue
        if p.kind == KIND_SPHERE:
            t = p.tree()
            if not t.is_empty():
                out.append(t)
        else:
            eid = p.chops[0][0].lift[1]
            for c in proj.caps[i]:
                if not c.is_empty() and not is_boundary_parallel(c, eid):
                    out.append(c)
                    break
    return out


def behrstock_witness(X_bound: Splitting, Xp_bound: Splitting, S: Splitting,
                      base: MarkedGraph) -> BehrstockWitness:
    """Constructive Behrstock disjunction: a chain of at most three adjacency
    facts on one side."""
    if X_bound.kind != "hnn":
        raise ProjectionError("X must exhaust: its boundary is nonseparating")
    e = resolve_dual_edge(X_bound, base)
    ep = resolve_dual_edge(Xp_bound, base)

    if distance1(S, Xp_bound):
        return BehrstockWitness("Xp", [
            {"fact": "distance1", "left": "S", "right": "bd(X')"}])

    proj_bx = project(X_bound, Xp_bound, base)
    proj_s = project(S, Xp_bound, base)
    if proj_bx.defined and proj_s.defined:
        for dx, ds in itertools.product(_essential_objects(proj_bx),
                                        _essential_objects(proj_s)):
            cert = distance1_cert(dx, ds)
            if cert.ok:
                return BehrstockWitness("Xp", [
                    {"fact": "diameter1", "about": "pi_X'[bd X]"},
                    {"fact": "distance1", "left": "D_X", "right": "D_S",
                     "detail": cert.detail},
                    {"fact": "diameter1", "about": "pi_X'[S]"},
                ])

    tree_s = bbc_sphere_tree(S, base)
    s_by_x = [p for p in chop(tree_s, e) if p.kind in (KIND_SPHERE, KIND_DISK)]
    s_by_xp = chop(tree_s, ep)
    for d in s_by_x:
        container = _containing_piece(d, s_by_xp)
        if container is None or container.kind not in (KIND_SPHERE, KIND_DISK):
            continue
        d_obj = d.tree() if d.kind == KIND_SPHERE else cap(d, 0)
        if d_obj.is_empty():
            continue
        cert = distance1_cert(d_obj, Xp_bound)
        if cert.ok:
            return BehrstockWitness("X", [
                {"fact": "diameter1", "about": "pi_X[bd X']"},
                {"fact": "distance1", "left": "bd(X')", "right": "D",
                 "detail": cert.detail},
                {"fact": "diameter1", "about": "pi_X[S]"},
            ])
    raise ProjectionError("no Behrstock witness found on either side")


def _containing_piece(d: ChoppedPiece, pieces: list[ChoppedPiece]):
    for p in pieces:
        if all(_iv_contained(p.atoms.get(lift, []), ivs)
               for lift, ivs in d.atoms.items()):
            return p
    return None


def _iv_contained(host, ivs) -> bool:
    return all(any(lo2 <= lo and hi <= hi2 for lo2, hi2 in host)
               for lo, hi in ivs)


# -- bounded geodesic image -----------------------------------------------------

@dataclass
class BgiReport:
    trivial: bool
    N: Fraction | None = None
    event_index: int | None = None
    gate: tuple[EdgeTok, ...] = ()
    vertex: str = ""
    spheres: list[dict] = field(default_factory=list)
    structural_ok: bool = False
    pairwise: list[dict] = field(default_factory=list)
    pairwise_ok: bool = False


def _descendants(path: FoldingPath, upto_step: int, edge: str) -> set[str]:
    desc = {edge}
    for step in path.steps[:upto_step]:
        for old, a, b in step.cod_splits:
            if old in desc:
                desc.discard(old)
                desc.update((a, b))
    return desc


def _min_occurrence(emap: dict[str, EdgePath], tokens: set[str]) -> int:
    best = None
    for tok in tokens:
        n = sum(1 for p in emap.values() for e, _ in p if e == tok)
        best = n if best is None else min(best, n)
    return best if best is not None else 0


def _post_cod(path: FoldingPath, i: int) -> MarkedGraph:
    if i + 1 < len(path.steps):
        return path.steps[i + 1].cod_before
    return path.state.cod


def bgi_construct(path: FoldingPath, S: Splitting) -> BgiReport:
    """Last-appearance time, pulled-back gate, the two-bud spheres and the
    structural/pairwise certificates from the bounded-geodesic-image proof."""
    cod = path.initial.codomain
    if S.kind != "hnn":
        raise ProjectionError("bounded geodesic image needs a nonseparating sphere")
    e_hat = resolve_dual_edge(S, cod)

    dom0 = path.initial.domain
    for e in sorted(dom0.graph.edges):
        try:
            if splitting_eq(splitting_from_edge(dom0, e), S):
                return BgiReport(trivial=True)
        except GraphError:
            continue

    E = None
    for i, step in enumerate(path.steps):
        desc = _descendants(path, i + 1, e_hat)
        if _min_occurrence(step.post_emap, desc) == 1:
            E = i
            break
    if E is None:
        raise ProjectionError("dual edge never singly covered along the path")
    stepE = path.steps[E]
    desc_before = _descendants(path, E, e_hat)

    creating = _creating_gate(stepE, desc_before)
    G_N = stepE.dom_before
    v_N = _gate_vertex(G_N, creating)
    _, tree_paths = G_N.spanning_tree()
    w_N = tree_paths[v_N]
    d_N, dp_N = creating[0], creating[1]

    traced = _trace_gate_back(path, E, w_N, d_N, dp_N, creating)
    spheres = []
    structural_all = True
    evolved = []
    for i, (w_i, d_i, gate_i) in enumerate(traced):
        G_i = path.steps[i].dom_before if i < len(path.steps) else G_N
        dpp = _complement_direction(G_i, w_i, gate_i)
        tree = _two_bud_tree(G_i, w_i, d_i, dpp)
        ev = st.evolve_steps(tree, path, i, E)
        ok = _structural_check(ev, w_N, d_N, creating, G_N)
        structural_all = structural_all and ok
        spheres.append({"index": i, "vertex_lift": w_i, "direction": d_i,
                        "other": dpp, "structural_ok": ok})
        evolved.append(ev)

    report = BgiReport(False, stepE.time_before + stepE.delta, E,
                       creating, v_N, spheres, structural_all)

    postG = st._post_graph(path, E)
    post_cod = _post_cod(path, E)
    star_edge, star_param = _materialized_edge(
        stepE.post_emap, _descendants(path, E + 1, e_hat), post_cod)
    projs = []
    for ev in evolved:
        through = st.evolve_steps(ev, path, E, E + 1)
        pieces = [p for p in chop(through, star_edge, star_param)
                  if p.kind in (KIND_SPHERE, KIND_DISK)]
        projs.append((through, pieces))
    ok_all = True
    for i, j in itertools.combinations(range(len(projs)), 2):
        cert = _pairwise_cert(projs[i], projs[j], stepE, d_N, postG)
        ok_all = ok_all and cert["ok"]
        report.pairwise.append({"pair": [i, j], **cert})
    report.pairwise_ok = ok_all
    return report


def _creating_gate(stepE: FoldStep, desc_before: set[str]):
    gates = sorted({g for g in st._step_gates(stepE).values()})
    cgl = stepE.cod_before.graph
    for g in gates:
        d0 = g[0]
        img = (stepE.emap_before[d0[0]] if d0[1] > 0
               else invert_path(stepE.emap_before[d0[0]]))
        acc = Fraction(0)
        toks = []
        for tok in img:
            if acc >= stepE.delta:
                break
            toks.append(tok)
            acc += cgl.length(tok[0])
        if any(t[0] in desc_before for t in toks):
            return g
    raise ProjectionError("no gate creates the dual edge at its last time")


def _gate_vertex(G: MarkedGraph, gate) -> str:
    e, s = gate[0]
    return G.graph.src(e) if s > 0 else G.graph.dst(e)


def _complement_direction(G: MarkedGraph, w: EdgePath, gate) -> EdgeTok:
    for d, _ in st._lift_directions(G, w):
        if d not in gate:
            return d
    raise ProjectionError("gate exhausts all directions at its vertex")


def _two_bud_tree(G: MarkedGraph, w: EdgePath, d1: EdgeTok, d2: EdgeTok
                  ) -> SphereTree:
    lifts = dict(st._lift_directions(G, w))
    buds = []
    for d in (d1, d2):
        lift = lifts[d]
        ln = G.graph.length(d[0])
        buds.append(CoverPoint(lift[0], lift[1], st._param_at_side(G, d, ln / 4)))
    return st.make_tree(G, buds)


def _trace_gate_back(path: FoldingPath, E: int, w_N: EdgePath, d_N: EdgeTok,
                     dp_N: EdgeTok, gate_N):
    """Per step index 0..E: (vertex lift, direction toward the surviving end,
    containing gate) evolving to the chosen turn at the last time."""
    stepE = path.steps[E]
    G_N = stepE.dom_before
    eps = stepE.delta / 2
    lifts = dict(st._lift_directions(G_N, w_N))
    pts = []
    for d in (d_N, dp_N):
        lift = lifts[d]
        dist = min(eps, G_N.graph.length(d[0]) / 2)
        pts.append(CoverPoint(lift[0], lift[1], st._param_at_side(G_N, d, dist)))
    p_N, pp_N = pts

    sets: dict[int, tuple[set[CoverPoint], set[CoverPoint]]] = {
        E: ({p_N}, {pp_N})}
    for i in range(E - 1, -1, -1):
        A, B = sets[i + 1]
        sets[i] = (_pullback_points(path.steps[i], A),
                   _pullback_points(path.steps[i], B))

    result = []
    for i in range(E):
        A0, B0 = sets[i]
        found = _turn_on_geodesic(path, i, E, A0, B0, w_N, d_N, dp_N)
        if found is None:
            raise ProjectionError("gate pullback found no evolving turn")
        result.append(found)
    result.append((w_N, d_N, tuple(sorted(gate_N))))
    return result


def _pullback_points(step: FoldStep, points) -> set[CoverPoint]:
    m = GraphMorphism(step.dom_before, step.mid_dom,
                      {v: step.vertex_map[v]
                       for v in step.dom_before.graph.vertices},
                      {e: tuple(t for t, _ in step.edge_pieces[e])
                       for e in step.dom_before.graph.edges}, ())
    out: set[CoverPoint] = set()
    for q in points:
        q0 = q
        for ss in reversed(step.smooth_steps):
            q0 = _unsmooth_point(q0, ss)
        out.update(st.preimages_of_point(m, q0))
    return out


def _unsmooth_point(pt: CoverPoint, ss) -> CoverPoint:
    (e1, s1), (e2, s2) = ss.d1, ss.d2
    expand = {(ss.new_edge, 1): ((e1, -s1), (e2, s2)),
              (ss.new_edge, -1): ((e2, -s2), (e1, s1))}

    def expath(path: EdgePath) -> EdgePath:
        out = []
        for tok in path:
            out.extend(expand.get(tok, (tok,)))
        return tighten(out)

    if pt.edge != ss.new_edge:
        return CoverPoint(expath(pt.path), pt.edge, pt.t)
    if pt.t == ss.len1:
        raise ProjectionError("cannot pull a point back onto a smoothed vertex")
    base = expath(pt.path)
    if pt.t < ss.len1:
        # first leg traverses e1 as (e1, -s1)
        if s1 > 0:
            return CoverPoint(tighten(base + ((e1, -1),)), e1, ss.len1 - pt.t)
        return CoverPoint(base, e1, pt.t)
    local = pt.t - ss.len1
    if s2 > 0:
        return CoverPoint(tighten(base + ((e1, -s1),)), e2, local)
    return CoverPoint(tighten(base + ((e1, -s1), (e2, -1))), e2, ss.len2 - local)


def _turn_on_geodesic(path: FoldingPath, i: int, E: int, A0, B0,
                      w_N, d_N, dp_N):
    G = path.steps[i].dom_before
    for p0, q0 in itertools.product(sorted(A0), sorted(B0)):
        geo = cov.geodesic(G, p0, q0)
        marks = []
        for x in sorted(A0 | B0):
            pos = _arc_position(geo, x)
            if pos is not None:
                marks.append((pos, x in A0, x))
        marks.sort(key=lambda m: m[0])
        for k in range(len(marks) - 1):
            if marks[k][1] and not marks[k + 1][1]:
                turn = _first_evolving_turn(path, i, E, G, geo,
                                            marks[k][0], marks[k + 1][0],
                                            w_N, d_N, dp_N)
                if turn is not None:
                    return turn
    return None


def _arc_position(geo, x: CoverPoint):
    acc = Fraction(0)
    for pathv, e, lo, hi in geo.segments:
        if (tighten(pathv), e) == (x.path, x.edge) and lo <= x.t <= hi:
            return acc + abs(x.t - lo)
        acc += hi - lo
    return None


def _first_evolving_turn(path: FoldingPath, i: int, E: int, G, geo,
                         lo: Fraction, hi: Fraction, w_N, d_N, dp_N):
    acc = Fraction(0)
    verts = []
    for pathv, e, a, b in geo.segments:
        for t, vert in ((a, tighten(pathv)), (b, tighten(pathv + ((e, 1),)))):
            if t == 0 or t == G.graph.length(e):
                pos = acc + abs(t - a)
                if lo < pos < hi:
                    verts.append((pos, vert))
        acc += b - a
    seen = set()
    for pos, vert in sorted(verts, key=lambda v: v[0]):
        if vert in seen:
            continue
        seen.add(vert)
        germs = _germs_at(G, geo, vert)
        if len(germs) != 2:
            continue
        d1, d2 = germs
        landing = _transport_turn(path, i, E, vert, d1, d2)
        if landing is None:
            continue
        v_end, pair = landing
        if v_end == tighten(w_N) and set(pair.values()) == {d_N, dp_N}:
            # direction toward the d_N side
            toward = d1 if pair[d1] == d_N else d2
            gate = st._step_gates(path.steps[i]).get(toward, (toward,))
            return vert, toward, tuple(sorted(set(gate)))
    return None


def _germs_at(G: MarkedGraph, geo, vert: EdgePath):
    germs = []
    for pathv, e, a, b in geo.segments:
        src = tighten(pathv)
        dst = tighten(pathv + ((e, 1),))
        if src == vert and a == 0:
            germs.append((e, 1))
        if dst == vert and b == G.graph.length(e):
            germs.append((e, -1))
    uniq = []
    for g in germs:
        if g not in uniq:
            uniq.append(g)
    return uniq


def _transport_turn(path: FoldingPath, i: int, E: int, vert: EdgePath,
                    d1: EdgeTok, d2: EdgeTok):
    """Push the turn forward; returns (final vertex lift, {original germ ->
    final germ}) or None when the turn dies."""
    cur_v = vert
    cur = {d1: d1, d2: d2}
    for j in range(i, E):
        step = path.steps[j]
        res = {}
        vs = set()
        for orig, d in cur.items():
            r = _transport_germ(step, cur_v, d)
            if r is None:
                return None
            v2, nd = r
            vs.add(v2)
            res[orig] = nd
        if len(vs) != 1:
            return None
        cur_v = vs.pop()
        cur = res
        if len(set(cur.values())) != 2:
            return None
    return cur_v, {orig: nd for orig, nd in cur.items()}


def _transport_germ(step: FoldStep, vert: EdgePath, d: EdgeTok):
    chain = step.edge_pieces[d[0]]
    if d[1] > 0:
        tok = chain[0][0]
    else:
        t0, s0 = chain[-1][0]
        tok = (t0, -s0)
    newv = st._fold_rewrite_path(vert, step)
    for ss in step.smooth_steps:
        tok = _smooth_germ(ss, tok)
        if tok is None:
            return None
        try:
            newv = smooth_rewrite_path(newv, ss)
        except Exception:
            return None
    return newv, tok


def _smooth_germ(ss, tok: EdgeTok):
    (e1, s1), (e2, s2) = ss.d1, ss.d2
    if tok[0] not in (e1, e2):
        return tok
    if tok == (e1, -s1):
        return (ss.new_edge, 1)
    if tok == (e2, -s2):
        return (ss.new_edge, -1)
    # germ based at the smoothed vertex: the turn dies with the vertex
    return None


def _structural_check(tree: SphereTree, w_N: EdgePath, d_N: EdgeTok,
                      gate, G_N: MarkedGraph) -> bool:
    h = hull_of(tree) if tree.buds else Hull({})
    ends = st._end_buds(tree, h)
    adj = st.buds_adjacent_to(tree, tighten(w_N))
    b = adj.get(d_N)
    if b is None or b not in ends:
        return False
    for bud in tree.buds:
        if bud == b:
            continue
        if _first_germ_from(tighten(w_N), bud) in gate:
            return False
    return True


def _first_germ_from(w: EdgePath, b: CoverPoint) -> EdgeTok:
    u = b.path
    k = 0
    while k < len(w) and k < len(u) and w[k] == u[k]:
        k += 1
    if k < len(w):
        t = w[k]
        return (t[0], -t[1])
    if k < len(u):
        return u[k]
    return (b.edge, 1)


def _materialized_edge(post_emap, desc: set[str], post_cod: MarkedGraph
                       ) -> tuple[str, Fraction]:
    cg = post_cod.graph
    for tok in sorted(desc):
        hits = [(e, i) for e, p in sorted(post_emap.items())
                for i, (eid, _) in enumerate(p) if eid == tok]
        if len(hits) == 1:
            e, idx = hits[0]
            img = post_emap[e]
            off = sum((cg.length(eid) for eid, _ in img[:idx]), Fraction(0))
            return e, off + cg.length(tok) / 2
    raise ProjectionError("no singly covered descendant token after the event")


def _pairwise_cert(pi, pj, stepE: FoldStep, d_N: EdgeTok,
                   postG: MarkedGraph) -> dict:
    tree_i, _ = pi
    tree_j, _ = pj
    if canonical_key(tree_i) == canonical_key(tree_j):
        return {"ok": True, "kind": "equal-projection", "links": 0}
    chain = stepE.edge_pieces.get(d_N[0])
    if chain is None:
        return {"ok": False, "kind": "missing-direction"}
    tok = chain[0][0] if d_N[1] > 0 else chain[-1][0]
    eid = tok[0]
    for ss in stepE.smooth_steps:
        if eid in (ss.d1[0], ss.d2[0]):
            eid = ss.new_edge
    if eid not in postG.graph.edges:
        return {"ok": False, "kind": "missing-direction"}
    ln = postG.graph.length(eid)
    blocked: list[tuple[Fraction, Fraction]] = []
    for t in (tree_i, tree_j):
        h = hull_of(t) if t.buds else Hull({})
        for (pth, e2), ivs in h.cov.items():
            if e2 == eid:
                blocked.extend(ivs)
    anchor = _gap_param(blocked, ln)
    if anchor is None:
        return {"ok": False, "kind": "no-gap-anchor"}
    return {"ok": True, "kind": "fiber-anchor", "links": 2,
            "edge": eid, "param": str(anchor)}


def _gap_param(blocked, ln: Fraction):
    cur = Fraction(0)
    for lo, hi in sorted(blocked):
        if lo > cur:
            return (cur + lo) / 2
        cur = max(cur, hi)
    if cur < ln:
        return (cur + ln) / 2
    return None
