"""Morphisms between marked graphs and their train-track data."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .graphs import (EdgePath, EdgeTok, GraphError, MarkedGraph, invert_path,
                     path_to_text, tighten)


class MapError(ValueError):
    pass


@dataclass
class GraphMorphism:
    """A map sending vertices to vertices and edges to tight edge paths,
    linear on each edge.  ``basepath`` runs from the image of the domain
    basepoint to the codomain basepoint."""

    domain: MarkedGraph
    codomain: MarkedGraph
    vmap: dict[str, str]
    emap: dict[str, EdgePath]
    basepath: EdgePath = ()

    def __post_init__(self):
        dg, cg = self.domain.graph, self.codomain.graph
        for v in dg.vertices:
            if self.vmap.get(v) not in cg.vertices:
                raise MapError(f"vertex {v} has no valid image")
        for e in dg.edges:
            img = self.emap.get(e)
            if img is None:
                raise MapError(f"edge {e} has no image")
            if tighten(img) != img:
                raise MapError(f"image of {e} is not tight")
            start = self.vmap[dg.src(e)]
            if cg.walk(start, img) != self.vmap[dg.dst(e)]:
                raise MapError(f"image of {e} does not join the image endpoints")
        cg.walk(self.vmap[self.domain.basepoint], self.basepath)

    def copy(self) -> "GraphMorphism":
        return GraphMorphism(self.domain.copy(), self.codomain.copy(),
                             dict(self.vmap), dict(self.emap), self.basepath)

    def image_length(self, e: str) -> Fraction:
        cg = self.codomain.graph
        return sum((cg.length(k) for k, _ in self.emap[e]), Fraction(0))

    def direction_image(self, d: EdgeTok) -> EdgePath:
        e, s = d
        return self.emap[e] if s > 0 else invert_path(self.emap[e])

    def first_direction(self, d: EdgeTok) -> EdgeTok:
        img = self.direction_image(d)
        if not img:
            raise MapError(f"edge {d[0]} has constant image; direction undefined")
        return img[0]

    def path_image(self, path: EdgePath) -> EdgePath:
        toks: list[EdgeTok] = []
        for d in path:
            toks.extend(self.direction_image(d))
        return tuple(toks)

    def slope(self, e: str) -> Fraction:
        return self.image_length(e) / self.domain.graph.length(e)


def gates(f: GraphMorphism) -> dict[str, list[tuple[EdgeTok, ...]]]:
    """Partition of directions at each domain vertex by image direction."""
    out: dict[str, list[tuple[EdgeTok, ...]]] = {}
    dg = f.domain.graph
    for v in sorted(dg.vertices):
        buckets: dict[EdgeTok, list[EdgeTok]] = {}
        for d in dg.directions(v):
            buckets.setdefault(f.first_direction(d), []).append(d)
        out[v] = [tuple(sorted(buckets[k])) for k in sorted(buckets)]
    return out


def turn_is_legal(f: GraphMorphism, d1: EdgeTok, d2: EdgeTok) -> bool:
    return f.first_direction(d1) != f.first_direction(d2)


def is_train_track(f: GraphMorphism) -> bool:
    return all(len(gs) >= 2 for gs in gates(f).values())


def is_foldable(f: GraphMorphism) -> bool:
    return all(len(gs) >= 3 for gs in gates(f).values())


def tension(f: GraphMorphism) -> dict:
    """Slopes, the tension subgraph, and the optimality verdict."""
    dg = f.domain.graph
    slopes = {e: f.slope(e) for e in dg.edges}
    mx = max(slopes.values())
    sub = sorted(e for e, s in slopes.items() if s == mx)
    sub_set = set(sub)
    # degree within the tension subgraph
    ok_degree = True
    verts = {v for e in sub for v in (dg.src(e), dg.dst(e))}
    for v in verts:
        deg = sum(1 for d in dg.directions(v) if d[0] in sub_set)
        if deg == 1:
            ok_degree = False
    # induced gate structure restricted to the subgraph has >= 2 gates
    ok_gates = True
    for v in verts:
        firsts = {f.first_direction(d) for d in dg.directions(v) if d[0] in sub_set}
        if len(firsts) < 2:
            ok_gates = False
    return {
        "slopes": slopes,
        "subgraph": sub,
        "is_optimal": ok_degree and ok_gates,
    }


def check_difference_of_markings(f: GraphMorphism) -> bool:
    """True iff basepath^-1 . f(petal) . basepath tightens to the codomain
    petal for every generator."""
    for i in range(1, f.domain.rank + 1):
        img = f.path_image(f.domain.petals[i])
        conj = tighten(invert_path(f.basepath) + tuple(img) + f.basepath)
        if conj != f.codomain.petals[i]:
            return False
    return True


def make_terse(f: GraphMorphism) -> GraphMorphism:
    """Rescale domain edge lengths to the image path lengths (all slopes 1)."""
    dg = f.domain.graph
    new_edges = {}
    for e, (src, dst, _) in dg.edges.items():
        ln = f.image_length(e)
        if ln == 0:
            raise MapError(f"edge {e} has constant image; cannot rescale")
        new_edges[e] = (src, dst, ln)
    from .graphs import MetricGraph

    ng = MetricGraph(dg.vertices, new_edges, dg.flagged)
    dom = MarkedGraph(f.domain.rank, ng, f.domain.basepoint, dict(f.domain.petals))
    return GraphMorphism(dom, f.codomain, dict(f.vmap), dict(f.emap), f.basepath)


def rose_morphism(domain: MarkedGraph, codomain: MarkedGraph) -> GraphMorphism:
    """The difference-of-markings morphism from a rose domain, sending each
    petal edge to the codomain path carrying the same group element."""
    dg = domain.graph
    if len(dg.vertices) != 1:
        raise MapError("rose_morphism needs a one-vertex domain")
    emap = {}
    for e in dg.edges:
        w = domain.element_of_path(((e, 1),))
        img = codomain.path_of_element(w)
        if not img:
            raise MapError(f"edge {e} would have constant image")
        emap[e] = img
    vmap = {domain.basepoint: codomain.basepoint}
    f = GraphMorphism(domain, codomain, vmap, emap, ())
    if not check_difference_of_markings(f):
        raise MapError("constructed map is not a difference of markings")
    return f


def identity_morphism(G: MarkedGraph) -> GraphMorphism:
    return GraphMorphism(G, G, {v: v for v in G.graph.vertices},
                         {e: ((e, 1),) for e in G.graph.edges}, ())
