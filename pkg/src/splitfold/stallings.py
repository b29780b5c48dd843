"""Stallings graphs for finitely generated subgroups of free groups.

Three services used across the engine:

* ``express_in_basis`` -- folding with edge memories: given claimed basis
  words, either certify they form a basis and express each alphabet letter
  in them, or report failure.  This is how marking isomorphisms are
  inverted exactly.
* membership / conjugacy of subgroups via core graphs, plus stable-letter
  double cosets via a Benois-saturated automaton.  Together these form the
  independent splitting-equality oracle.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Sequence

from .words import Word


class FoldGraph:
    """Directed multigraph with positive labels; optional F(Z) edge weights."""

    def __init__(self):
        self.next_vertex = 0
        self.edges: dict[int, tuple[int, int, int, Word]] = {}  # id -> (src, dst, label, weight)
        self.next_edge = 0
        self.incident: dict[int, set[int]] = {}

    def new_vertex(self) -> int:
        v = self.next_vertex
        self.next_vertex += 1
        self.incident[v] = set()
        return v

    def add_edge(self, src: int, dst: int, label: int, weight: Word = Word()) -> int:
        e = self.next_edge
        self.next_edge += 1
        self.edges[e] = (src, dst, label, weight)
        self.incident[src].add(e)
        self.incident[dst].add(e)
        return e

    def remove_edge(self, e: int) -> None:
        src, dst, _, _ = self.edges.pop(e)
        self.incident[src].discard(e)
        self.incident[dst].discard(e)

    def add_cycle(self, base: int, word: Word, weight_symbol: int) -> None:
        """Attach a cycle at ``base`` spelling ``word``; the crossing value of
        the whole cycle is the single symbol ``weight_symbol``."""
        if not word.letters:
            raise ValueError("cannot attach an empty relator cycle")
        cur = base
        n = len(word.letters)
        for i, a in enumerate(word.letters):
            nxt = base if i == n - 1 else self.new_vertex()
            w = Word((weight_symbol,)) if i == 0 else Word()
            if a > 0:
                self.add_edge(cur, nxt, a, w)
            else:
                # traversing the stored edge backwards must contribute w
                self.add_edge(nxt, cur, -a, w.inverse())
            cur = nxt

    def _regauge(self, dead: int, kept: int, gamma: Word) -> None:
        """Move ``dead``'s edges to ``kept``; gamma = crossing value of the
        (collapsing) canonical path kept -> dead."""
        for e in list(self.incident[dead]):
            src, dst, lab, w = self.edges[e]
            if src == dead and dst == dead:
                w = gamma * w * gamma.inverse()
                src = dst = kept
            elif src == dead:
                w = gamma * w
                src = kept
            elif dst == dead:
                w = w * gamma.inverse()
                dst = kept
            self.incident[src].add(e)
            self.incident[dst].add(e)
            self.edges[e] = (src, dst, lab, w)
        self.incident[dead].discard(0)
        # drop stale incidences
        self.incident[dead] = set()

    def fold(self, base: int, track_weights: bool = True) -> bool:
        """Fold to an immersion.  Returns False when a weight relation is
        detected (the generating set is not free on the cycles)."""
        while True:
            violation = self._find_violation()
            if violation is None:
                return True
            e1, e2, out = violation
            s1, d1, lab, w1 = self.edges[e1]
            s2, d2, _, w2 = self.edges[e2]
            if out:
                a, b = d1, d2
                gamma = w1.inverse() * w2
            else:
                a, b = s1, s2
                gamma = w1 * w2.inverse()
            if a == b:
                if track_weights and w1 != w2:
                    return False
                self.remove_edge(e2)
                continue
            if b == base:
                a, b = b, a
                e1, e2 = e2, e1
                _, _, _, w1b = self.edges[e1]
                _, _, _, w2b = self.edges[e2]
                gamma = (w1b.inverse() * w2b) if out else (w1b * w2b.inverse())
            self.remove_edge(e2)
            self._regauge(b, a, gamma)

    def _find_violation(self):
        buckets: dict[tuple[int, int, bool], int] = {}
        for e, (src, dst, lab, _) in self.edges.items():
            for key in ((src, lab, True), (dst, lab, False)):
                if key in buckets:
                    other = buckets[key]
                    if other != e:
                        return (other, e, key[2])
                else:
                    buckets[key] = e
        return None

    def live_vertices(self) -> set[int]:
        vs = set()
        for src, dst, _, _ in self.edges.values():
            vs.add(src)
            vs.add(dst)
        return vs


def express_in_basis(words: Sequence[Word], alphabet_size: int) -> list[Word] | None:
    """Treat ``words`` as images of free symbols Z_1..Z_k in F(alphabet).

    If they form a basis of F(alphabet_size), return, for each alphabet
    letter a_j (1-based), the word over Z-indices expressing a_j; else None.
    """
    if len(words) != alphabet_size:
        return None
    g = FoldGraph()
    base = g.new_vertex()
    for j, w in enumerate(words, start=1):
        if not w.letters:
            return None
        g.add_cycle(base, w, j)
    if not g.fold(base):
        return None
    if g.live_vertices() not in (set(), {base}):
        return None
    seen: dict[int, Word] = {}
    for src, dst, lab, w in g.edges.values():
        if src != base or dst != base or lab in seen:
            return None
        seen[lab] = w
    if set(seen) != set(range(1, alphabet_size + 1)):
        return None
    return [seen[j] for j in range(1, alphabet_size + 1)]


def is_basis(words: Sequence[Word], alphabet_size: int) -> bool:
    return express_in_basis(words, alphabet_size) is not None


class CoreGraph:
    """Folded based core graph of a finitely generated subgroup."""

    def __init__(self, generators: Iterable[Word]):
        g = FoldGraph()
        base = g.new_vertex()
        gens = [w for w in generators if w.letters]
        for w in gens:
            g.add_cycle(base, w, 1)
        g.fold(base, track_weights=False)
        self.base = base
        # adjacency map: vertex -> {signed label -> vertex}
        self.adj: dict[int, dict[int, int]] = {base: {}}
        for src, dst, lab, _ in g.edges.values():
            self.adj.setdefault(src, {})[lab] = dst
            self.adj.setdefault(dst, {})[-lab] = src
        self._trim()

    def _trim(self) -> None:
        # remove degree-1 vertices other than the basepoint (spur trimming)
        changed = True
        while changed:
            changed = False
            for v in list(self.adj):
                if v == self.base:
                    continue
                if len(self.adj[v]) == 1:
                    ((lab, u),) = self.adj[v].items()
                    del self.adj[v]
                    del self.adj[u][-lab]
                    changed = True

    def read(self, w: Word, start: int | None = None) -> int | None:
        v = self.base if start is None else start
        for a in w.letters:
            nxt = self.adj.get(v, {}).get(a)
            if nxt is None:
                return None
            v = nxt
        return v

    def contains(self, w: Word) -> bool:
        return self.read(w) == self.base

    def rank(self) -> int:
        edges = sum(len(d) for d in self.adj.values()) // 2
        return edges - len(self.adj) + 1

    def cyclic_core(self) -> tuple[dict[int, dict[int, int]], int, Word]:
        """Strip the basepoint spur; return (core adjacency, attach vertex,
        spur word base->attach)."""
        adj = {v: dict(d) for v, d in self.adj.items()}
        spur: list[int] = []
        v = self.base
        while len(adj[v]) == 1:
            ((lab, u),) = adj[v].items()
            spur.append(lab)
            del adj[v]
            del adj[u][-lab]
            v = u
        return adj, v, Word(spur)


def _graph_isomorphisms(adj1, adj2):
    """Yield label-preserving isomorphisms between small labeled graphs."""
    if len(adj1) != len(adj2):
        return
    deg1 = sorted(len(d) for d in adj1.values())
    deg2 = sorted(len(d) for d in adj2.values())
    if deg1 != deg2:
        return
    vs1 = sorted(adj1)
    if not vs1:
        yield {}
        return
    start = vs1[0]
    for cand in adj2:
        if len(adj2[cand]) != len(adj1[start]):
            continue
        mapping = {start: cand}
        stack = [start]
        ok = True
        while stack and ok:
            v = stack.pop()
            for lab, u in adj1[v].items():
                tgt = adj2[mapping[v]].get(lab)
                if tgt is None:
                    ok = False
                    break
                if u in mapping:
                    if mapping[u] != tgt:
                        ok = False
                        break
                else:
                    mapping[u] = tgt
                    stack.append(u)
        if ok and len(mapping) == len(adj1):
            used = set(mapping.values())
            if len(used) == len(adj1):
                yield mapping


def conjugators(h1: Sequence[Word], h2: Sequence[Word]):
    """Yield elements g with g <h1> g^-1 = <h2> (possibly none)."""
    c1 = CoreGraph(h1)
    c2 = CoreGraph(h2)
    adj1, p1, s1 = c1.cyclic_core()
    adj2, p2, s2 = c2.cyclic_core()
    for iso in _graph_isomorphisms(adj1, adj2):
        # path word p2 -> iso(p1) inside core2
        tau = _path_word(adj2, p2, iso[p1])
        if tau is None:
            continue
        yield s2 * tau * s1.inverse()


def _path_word(adj, src, dst) -> Word | None:
    if src == dst:
        return Word()
    prev: dict[int, tuple[int, int]] = {src: (src, 0)}
    queue = [src]
    while queue:
        v = queue.pop(0)
        for lab, u in adj[v].items():
            if u not in prev:
                prev[u] = (v, lab)
                if u == dst:
                    letters = []
                    x = dst
                    while x != src:
                        x, lab2 = prev[x]
                        letters.append(lab2)
                    return Word(reversed(letters))
                queue.append(u)
    return None


class _NFA:
    """Small NFA over signed letters with Benois reduced-word saturation."""

    def __init__(self):
        self.trans: dict[tuple[int, int], set[int]] = {}
        self.eps: dict[int, set[int]] = {}
        self.n_states = 0

    def state(self) -> int:
        s = self.n_states
        self.n_states += 1
        return s

    def add(self, s: int, a: int, t: int) -> None:
        self.trans.setdefault((s, a), set()).add(t)

    def add_eps(self, s: int, t: int) -> None:
        self.eps.setdefault(s, set()).add(t)

    def _eps_closure(self, states: set[int]) -> set[int]:
        out = set(states)
        stack = list(states)
        while stack:
            s = stack.pop()
            for t in self.eps.get(s, ()):
                if t not in out:
                    out.add(t)
                    stack.append(t)
        return out

    def saturate(self) -> None:
        changed = True
        while changed:
            changed = False
            closures = {s: self._eps_closure({s}) for s in range(self.n_states)}
            for (s, a), targets in list(self.trans.items()):
                mids = set()
                for t in targets:
                    mids |= closures[t]
                for m in mids:
                    for u in self.trans.get((m, -a), ()):  # read a then a^-1
                        if u not in self.eps.get(s, set()):
                            self.add_eps(s, u)
                            changed = True

    def accepts(self, w: Word, start: int, accept: int) -> bool:
        cur = self._eps_closure({start})
        for a in w.letters:
            nxt: set[int] = set()
            for s in cur:
                nxt |= self.trans.get((s, a), set())
            if not nxt:
                return False
            cur = self._eps_closure(nxt)
        return accept in cur


def _attach_core(nfa: _NFA, core: CoreGraph) -> dict[int, int]:
    ids = {}
    for v in core.adj:
        ids[v] = nfa.state()
    for v, d in core.adj.items():
        for lab, u in d.items():
            if lab > 0:
                nfa.add(ids[v], lab, ids[u])
                nfa.add(ids[u], -lab, ids[v])
    return ids


def in_double_coset(h: Sequence[Word], t: Word, z: Word) -> bool:
    """Decide z in H t H for H = <h>, via a Benois-saturated automaton."""
    core1 = CoreGraph(h)
    core2 = CoreGraph(h)
    nfa = _NFA()
    ids1 = _attach_core(nfa, core1)
    ids2 = _attach_core(nfa, core2)
    cur = nfa.state()
    nfa.add_eps(ids1[core1.base], cur)
    for a in t.letters:
        nxt = nfa.state()
        nfa.add(cur, a, nxt)
        cur = nxt
    nfa.add_eps(cur, ids2[core2.base])
    nfa.saturate()
    return nfa.accepts(z, ids1[core1.base], ids2[core2.base])


def in_product(h1: Sequence[Word], h2: Sequence[Word], z: Word) -> bool:
    """Decide z in H1 H2."""
    core1 = CoreGraph(h1)
    core2 = CoreGraph(h2)
    nfa = _NFA()
    ids1 = _attach_core(nfa, core1)
    ids2 = _attach_core(nfa, core2)
    nfa.add_eps(ids1[core1.base], ids2[core2.base])
    nfa.saturate()
    return nfa.accepts(z, ids1[core1.base], ids2[core2.base])
