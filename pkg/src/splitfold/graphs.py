"""Marked metric graphs, collapses, and one-edge free splittings.

Edge paths are tuples of signed tokens (edge_id, +-1); text form uses the
edge id with a leading "-" for reversed traversal ("e1 -e2").  All lengths
are exact rationals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from . import stallings
from .words import Word

EdgeTok = tuple[str, int]
EdgePath = tuple[EdgeTok, ...]


class GraphError(ValueError):
    pass


def parse_path(text: str) -> EdgePath:
    toks = []
    for part in text.split():
        if part.startswith("-"):
            toks.append((part[1:], -1))
        else:
            toks.append((part, 1))
    return tuple(toks)


def path_to_text(path: EdgePath) -> str:
    return " ".join(e if s > 0 else f"-{e}" for e, s in path)


def invert_path(path: EdgePath) -> EdgePath:
    return tuple((e, -s) for e, s in reversed(path))


def tighten(path: Iterable[EdgeTok]) -> EdgePath:
    out: list[EdgeTok] = []
    for tok in path:
        if out and out[-1][0] == tok[0] and out[-1][1] == -tok[1]:
            out.pop()
        else:
            out.append(tok)
    return tuple(out)


class MetricGraph:
    """Connected graph with positive rational edge lengths.

    ``flagged`` marks degree-2 subdivision vertices allowed in working
    copies; a graph representing a point of outer space has none.
    """

    def __init__(self, vertices: Iterable[str], edges: dict[str, tuple[str, str, Fraction]],
                 flagged: Iterable[str] = ()):
        self.vertices = set(vertices)
        self.edges = {e: (src, dst, Fraction(ln)) for e, (src, dst, ln) in edges.items()}
        self.flagged = set(flagged)
        for e, (src, dst, ln) in self.edges.items():
            if src not in self.vertices or dst not in self.vertices:
                raise GraphError(f"edge {e} has unknown endpoint")
            if ln <= 0:
                raise GraphError(f"edge {e} has nonpositive length {ln}")

    def copy(self) -> "MetricGraph":
        return MetricGraph(self.vertices, dict(self.edges), self.flagged)

    def src(self, e: str) -> str:
        return self.edges[e][0]

    def dst(self, e: str) -> str:
        return self.edges[e][1]

    def length(self, e: str) -> Fraction:
        return self.edges[e][2]

    def tok_endpoints(self, tok: EdgeTok) -> tuple[str, str]:
        e, s = tok
        src, dst, _ = self.edges[e]
        return (src, dst) if s > 0 else (dst, src)

    def directions(self, v: str) -> list[EdgeTok]:
        """Half-edges at v: (e,+1) if e starts at v, (e,-1) if e ends at v."""
        out = []
        for e in sorted(self.edges):
            src, dst, _ = self.edges[e]
            if src == v:
                out.append((e, 1))
            if dst == v:
                out.append((e, -1))
        return out

    def degree(self, v: str) -> int:
        return len(self.directions(v))

    def is_connected(self) -> bool:
        if not self.vertices:
            return False
        seen = set()
        stack = [next(iter(sorted(self.vertices)))]
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            for e, s in self.directions(v):
                src, dst, _ = self.edges[e]
                stack.append(dst if s > 0 else src)
        return seen == self.vertices

    def betti(self) -> int:
        return len(self.edges) - len(self.vertices) + 1

    def volume(self) -> Fraction:
        return sum((ln for _, _, ln in self.edges.values()), Fraction(0))

    def walk(self, start: str, path: EdgePath) -> str:
        v = start
        for tok in path:
            a, b = self.tok_endpoints(tok)
            if a != v:
                raise GraphError(f"path breaks at {tok} (at {v}, edge runs {a}->{b})")
            v = b
        return v


@dataclass
class MarkedGraph:
    """A point of unprojectivized outer space: metric graph + marking petals.

    ``petals[i]`` is the closed tight edge path at the basepoint carrying the
    i-th free generator (1-based).
    """

    rank: int
    graph: MetricGraph
    basepoint: str
    petals: dict[int, EdgePath]

    def copy(self) -> "MarkedGraph":
        return MarkedGraph(self.rank, self.graph.copy(), self.basepoint,
                           dict(self.petals))

    def spanning_tree(self) -> tuple[set[str], dict[str, EdgePath]]:
        """Deterministic BFS tree from the basepoint.

        Returns (tree edge ids, path-from-basepoint per vertex)."""
        g = self.graph
        paths: dict[str, EdgePath] = {self.basepoint: ()}
        tree: set[str] = set()
        queue = [self.basepoint]
        while queue:
            v = queue.pop(0)
            for e, s in g.directions(v):
                a, b = g.tok_endpoints((e, s))
                if b not in paths:
                    paths[b] = paths[v] + ((e, s),)
                    tree.add(e)
                    queue.append(b)
        if set(paths) != g.vertices:
            raise GraphError("graph is disconnected")
        return tree, paths

    def x_letters(self) -> list[str]:
        tree, _ = self.spanning_tree()
        return sorted(e for e in self.graph.edges if e not in tree)

    def path_x_word(self, path: EdgePath) -> Word:
        """Image of a closed basepoint path in F(X), X = non-tree edges."""
        xs = {e: i for i, e in enumerate(self.x_letters(), start=1)}
        return Word(s * xs[e] for e, s in path if e in xs)

    def petal_x_words(self) -> list[Word]:
        return [self.path_x_word(self.petals[i]) for i in range(1, self.rank + 1)]

    def marking_is_iso(self) -> bool:
        n = self.graph.betti()
        if n != self.rank:
            return False
        return stallings.is_basis(self.petal_x_words(), n)

    def x_expressions(self) -> list[Word]:
        """For each non-tree edge, the F_n word its tree-loop represents."""
        exprs = stallings.express_in_basis(self.petal_x_words(), self.graph.betti())
        if exprs is None:
            raise GraphError("marking is not an isomorphism")
        return exprs

    def element_of_path(self, path: EdgePath) -> Word:
        """F_n element represented by a closed tight path at the basepoint."""
        xw = self.path_x_word(path)
        exprs = self.x_expressions()
        letters: list[int] = []
        for a in xw.letters:
            w = exprs[abs(a) - 1]
            letters.extend(w.letters if a > 0 else w.inverse().letters)
        return Word(letters)

    def path_of_element(self, w: Word) -> EdgePath:
        """A tight closed basepoint path representing w (via the petals)."""
        toks: list[EdgeTok] = []
        for a in w.letters:
            p = self.petals[abs(a)]
            toks.extend(p if a > 0 else invert_path(p))
        return tighten(toks)


def validate_marked_graph(G: MarkedGraph) -> dict:
    g = G.graph
    if not g.is_connected():
        raise GraphError("graph is disconnected")
    degrees = {v: g.degree(v) for v in sorted(g.vertices)}
    ok = True
    for v, d in degrees.items():
        if d < 3 and v not in g.flagged:
            ok = False
    petals_ok = True
    for i in range(1, G.rank + 1):
        p = G.petals.get(i)
        if p is None or tighten(p) != p:
            petals_ok = False
            continue
        try:
            if g.walk(G.basepoint, p) != G.basepoint:
                petals_ok = False
        except GraphError:
            petals_ok = False
    marking = petals_ok and G.marking_is_iso()
    return {
        "ok": ok and petals_ok and marking and g.betti() == G.rank,
        "betti": g.betti(),
        "volume": g.volume(),
        "degrees": degrees,
        "marking_is_iso": marking,
    }


def collapse(G: MarkedGraph, forest: Iterable[str]) -> MarkedGraph:
    """Collapse a forest of edges; markings are rewritten and re-tightened."""
    forest = set(forest)
    g = G.graph
    for e in forest:
        if e not in g.edges:
            raise GraphError(f"unknown edge {e}")
        if g.src(e) == g.dst(e):
            raise GraphError(f"edge {e} is a loop; not a forest")
    parent = {v: v for v in g.vertices}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for e in sorted(forest):
        a, b = find(g.src(e)), find(g.dst(e))
        if a == b:
            raise GraphError(f"forest contains a cycle through {e}")
        # keep the lexicographically smaller representative
        if b < a:
            a, b = b, a
        parent[b] = a
    verts = {find(v) for v in g.vertices}
    edges = {e: (find(src), find(dst), ln)
             for e, (src, dst, ln) in g.edges.items() if e not in forest}
    new_graph = MetricGraph(verts, edges,
                            flagged={find(v) for v in g.flagged if find(v) in verts})
    petals = {i: tighten(t for t in G.petals[i] if t[0] not in forest)
              for i in G.petals}
    return MarkedGraph(G.rank, new_graph, find(G.basepoint), petals)


@dataclass(frozen=True)
class Splitting:
    """A one-edge free splitting: HNN over a corank-1 free factor, or an
    amalgam of two factors; vertex bases and stable letter are F_n words."""

    rank: int
    kind: str  # "hnn" | "amalgam"
    vertex_bases: tuple[tuple[Word, ...], ...]
    stable: Word | None
    provenance: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("hnn", "amalgam"):
            raise GraphError(f"bad splitting kind {self.kind}")
        if self.kind == "hnn" and (self.stable is None or len(self.vertex_bases) != 1):
            raise GraphError("hnn splitting needs one vertex basis and a stable letter")
        if self.kind == "amalgam" and (self.stable is not None or len(self.vertex_bases) != 2):
            raise GraphError("amalgam splitting needs two vertex bases, no stable letter")

    def basis_words(self) -> list[Word]:
        words = [w for basis in self.vertex_bases for w in basis]
        if self.stable is not None:
            words.append(self.stable)
        return words


def splitting_from_edge(G: MarkedGraph, e: str) -> Splitting:
    """The one-edge splitting dual to edge e of G."""
    g = G.graph
    if e not in g.edges:
        raise GraphError(f"unknown edge {e}")
    # spanning forest of G - e
    rest = MetricGraph(g.vertices, {k: v for k, v in g.edges.items() if k != e})
    comp = {v: v for v in g.vertices}

    def find(v):
        while comp[v] != comp[comp[v]]:
            comp[v] = comp[comp[v]]
        while comp[v] != v:
            v = comp[v]
        return v

    for k in sorted(rest.edges):
        a, b = find(rest.src(k)), find(rest.dst(k))
        if a != b:
            comp[max(a, b)] = min(a, b)
    separating = find(g.src(e)) != find(g.dst(e))

    # Build a spanning tree avoiding e when possible.
    sub = MarkedGraph(G.rank, g, G.basepoint, G.petals)
    if not separating:
        # force BFS to avoid e by searching on G - e
        helper = MarkedGraph(G.rank, rest, G.basepoint, G.petals)
        tree, _ = helper.spanning_tree()
    else:
        tree, _ = sub.spanning_tree()
        if e not in tree:
            raise GraphError("internal: separating edge missing from spanning tree")
    xs = sorted(k for k in g.edges if k not in tree and k != e)
    if not separating:
        xs_all = sorted(xs + [e])
    else:
        xs_all = xs
    # express the non-tree loops in F_n
    x_index = {k: i for i, k in enumerate(xs_all, start=1)}
    mu = []
    for i in range(1, G.rank + 1):
        mu.append(Word(s * x_index[k] for k, s in G.petals[i] if k in x_index))
    exprs = stallings.express_in_basis(mu, len(xs_all))
    if exprs is None:
        raise GraphError("marking is not an isomorphism")
    nu = {k: exprs[x_index[k] - 1] for k in xs_all}

    if not separating:
        basis = tuple(nu[k] for k in xs)
        if not basis:
            raise GraphError("dual sphere is inessential (trivial vertex group)")
        return Splitting(G.rank, "hnn", (basis,), nu[e], provenance=(G, e))

    # amalgam: split the non-tree edges by component of G - e
    side_of = {v: find(v) for v in g.vertices}
    base_side = side_of[G.basepoint]
    basis1 = tuple(nu[k] for k in xs if side_of[g.src(k)] == base_side)
    basis2 = tuple(nu[k] for k in xs if side_of[g.src(k)] != base_side)
    if not basis1 or not basis2:
        raise GraphError("dual sphere is inessential (a side is trivial)")
    return Splitting(G.rank, "amalgam", (basis1, basis2), None, provenance=(G, e))


DIST_EDGE = "t"


def compatible_graph(S: Splitting) -> tuple[MarkedGraph, str]:
    """A marked graph refining S: the rose/wedge blow-up of the vertex
    bases, with the distinguished edge dual to S.  Returns (graph, edge)."""
    words = S.basis_words()
    exprs = stallings.express_in_basis(words, S.rank)
    if exprs is None:
        raise GraphError("splitting data does not define a free basis")
    one = Fraction(1)
    if S.kind == "hnn":
        basis = S.vertex_bases[0]
        names = [f"v{i+1}" for i in range(len(basis))] + [DIST_EDGE]
        edges = {nm: ("w", "w", one) for nm in names}
        graph = MetricGraph({"w"}, edges)
        tok_of = {j: ((names[j - 1], 1),) for j in range(1, len(words) + 1)}
        basepoint = "w"
    else:
        b1, b2 = S.vertex_bases
        names1 = [f"u{i+1}" for i in range(len(b1))]
        names2 = [f"w{i+1}" for i in range(len(b2))]
        edges = {nm: ("u", "u", one) for nm in names1}
        edges.update({nm: ("w", "w", one) for nm in names2})
        edges[DIST_EDGE] = ("u", "w", one)
        graph = MetricGraph({"u", "w"}, edges)
        tok_of = {}
        for j in range(1, len(b1) + 1):
            tok_of[j] = ((names1[j - 1], 1),)
        for j in range(1, len(b2) + 1):
            tok_of[len(b1) + j] = ((DIST_EDGE, 1), (names2[j - 1], 1), (DIST_EDGE, -1))
        basepoint = "u"
    petals = {}
    for i in range(1, S.rank + 1):
        toks: list[EdgeTok] = []
        for a in exprs[i - 1].letters:
            seg = tok_of[abs(a)]
            toks.extend(seg if a > 0 else invert_path(seg))
        petals[i] = tighten(toks)
    return MarkedGraph(S.rank, graph, basepoint, petals), DIST_EDGE


def splitting_eq(S1: Splitting, S2: Splitting) -> bool:
    """Equality of splittings via the single-bud criterion."""
    from . import spheretrees

    if S1.rank != S2.rank:
        raise GraphError("rank mismatch")
    if S1.kind != S2.kind:
        return False
    base, dist = compatible_graph(S2)
    try:
        tree = spheretrees.bbc_sphere_tree(S1, base)
    except GraphError:
        return False
    return spheretrees.is_single_bud_on(tree, dist)


def splitting_eq_oracle(S1: Splitting, S2: Splitting) -> bool:
    """Independent Stallings-based check: vertex-group conjugacy plus
    stable-letter double coset (HNN) or factor-pair conjugacy (amalgam)."""
    if S1.rank != S2.rank:
        raise GraphError("rank mismatch")
    if S1.kind != S2.kind:
        return False
    if S1.kind == "hnn":
        v1 = list(S1.vertex_bases[0])
        v2 = list(S2.vertex_bases[0])
        t1, t2 = S1.stable, S2.stable
        for g in stallings.conjugators(v1, v2):
            u = g.inverse() * t2 * g
            if stallings.in_double_coset(v1, t1, u):
                return True
            if stallings.in_double_coset(v1, t1, u.inverse()):
                return True
        return False
    # amalgam: need a single conjugator matching the factor pair (either pairing)
    a1, b1 = ([*S1.vertex_bases[0]], [*S1.vertex_bases[1]])
    a2, b2 = ([*S2.vertex_bases[0]], [*S2.vertex_bases[1]])
    for w1, w2, u1, u2 in ((a1, b1, a2, b2), (a1, b1, b2, a2)):
        # want g with g w1 g^-1 = u1 and g w2 g^-1 = u2
        for g1 in stallings.conjugators(w1, u1):
            # remaining freedom: g = g1 v, v in <w1>; need v w2 v^-1 ~ g1^-1 u2 g1
            target = [g1.inverse() * x * g1 for x in u2]
            for h in stallings.conjugators(w2, target):
                # need h^-1 in <w1> <w2>  (h v2 in <w1> for some v2)
                if stallings.in_product(w1, w2, h.inverse()):
                    return True
    return False
