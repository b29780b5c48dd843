"""DOT and matplotlib renderings of graphs, sphere trees, and fold logs."""

from __future__ import annotations

import math
import os
from fractions import Fraction

from .graphs import MarkedGraph, path_to_text
from .spheretrees import SphereTree, hull_of
from .words import letter_to_char


def frac(x: Fraction) -> str:
    f = Fraction(x)
    return f"{f.numerator}/{f.denominator}"


def graph_to_dot(G: MarkedGraph, name: str = "G") -> str:
    lines = [f'digraph "{name}" {{']
    for v in sorted(G.graph.vertices):
        shape = "doublecircle" if v == G.basepoint else "circle"
        lines.append(f'  "{v}" [shape={shape}];')
    for e in sorted(G.graph.edges):
        src, dst, ln = G.graph.edges[e]
        lines.append(f'  "{src}" -> "{dst}" [label="{e} ({frac(ln)})"];')
    for i in sorted(G.petals):
        gen = letter_to_char(i)
        lines.append(f'  // petal {gen}: {path_to_text(G.petals[i])}')
    lines.append("}")
    return "\n".join(lines)


def tree_to_dot(tree: SphereTree, name: str = "T") -> str:
    """Hull edges with buds drawn as filled nodes and core edges bold."""
    h = hull_of(tree) if tree.buds else None
    lines = [f'graph "{name}" {{', '  node [shape=point];']
    if h is None:
        lines.append("}")
        return "\n".join(lines)
    g = tree.base.graph
    full = h.full_edges(tree.base)

    def nid(kind, *parts):
        return '"' + kind + ":" + "|".join(str(p) for p in parts) + '"'

    for (path, e), ivs in sorted(h.cov.items()):
        key = path_to_text(path) or "*"
        for lo, hi in ivs:
            style = "bold" if (path, e) in full else "solid"
            a = nid("p", key, e, lo)
            b = nid("p", key, e, hi)
            lines.append(f'  {a} -- {b} [label="{e}[{frac(lo)},{frac(hi)}]", '
                         f'style={style}];')
    for b in tree.buds:
        key = path_to_text(b.path) or "*"
        n = nid("bud", key, b.edge, b.t)
        lines.append(f'  {n} [shape=circle, style=filled, fillcolor=red, '
                     f'label="{b.edge}@{frac(b.t)}"];')
        lines.append(f'  {n} -- {nid("p", key, b.edge, b.t)} [style=dotted];')
    lines.append("}")
    return "\n".join(lines)


def write_dot(path: str, content: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(content)


def _mpl():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_graph(G: MarkedGraph, out_path: str, title: str = "") -> None:
    """Circular layout; loops drawn as small circles beside their vertex."""
    plt = _mpl()
    verts = sorted(G.graph.vertices)
    n = len(verts)
    pos = {}
    for i, v in enumerate(verts):
        ang = 2 * math.pi * i / max(n, 1)
        pos[v] = (math.cos(ang), math.sin(ang))
    fig, ax = plt.subplots(figsize=(5, 5))
    loops_seen = {}
    for e in sorted(G.graph.edges):
        src, dst, ln = G.graph.edges[e]
        x1, y1 = pos[src]
        if src == dst:
            k = loops_seen.get(src, 0)
            loops_seen[src] = k + 1
            r = 0.18 + 0.12 * k
            circ = plt.Circle((x1 + r, y1 + r), r, fill=False, color="tab:blue")
            ax.add_patch(circ)
            ax.annotate(e, (x1 + 2 * r, y1 + 2 * r), fontsize=9)
        else:
            x2, y2 = pos[dst]
            ax.annotate("", (x2, y2), (x1, y1),
                        arrowprops=dict(arrowstyle="->", color="tab:blue"))
            ax.annotate(e, ((x1 + x2) / 2, (y1 + y2) / 2), fontsize=9)
    for v in verts:
        x, y = pos[v]
        mark = "s" if v == G.basepoint else "o"
        ax.plot([x], [y], mark, color="black", markersize=8)
        ax.annotate(v, (x, y - 0.14), fontsize=9, ha="center")
    ax.set_title(title)
    ax.set_aspect("equal")
    ax.axis("off")
    os.makedirs(os.path.dirname(out_path) or ".", exist_ok=True)
    fig.savefig(out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def render_tree(tree: SphereTree, out_path: str, title: str = "") -> None:
    """Radial drawing of the hull with buds marked and core edges bold."""
    plt = _mpl()
    fig, ax = plt.subplots(figsize=(6, 6))
    if tree.buds:
        h = hull_of(tree)
        full = h.full_edges(tree.base)
        nodes: dict = {}

        def locate(key):
            if key not in nodes:
                k = len(nodes)
                ang = k * 2.399963  # golden angle placement
                r = 0.25 + 0.22 * math.sqrt(k)
                nodes[key] = (r * math.cos(ang), r * math.sin(ang))
            return nodes[key]

        for (path, e), ivs in sorted(h.cov.items()):
            for lo, hi in ivs:
                a = locate((path, e, lo))
                b = locate((path, e, hi))
                lw = 2.8 if (path, e) in full else 1.2
                ax.plot([a[0], b[0]], [a[1], b[1]], "-", color="tab:gray",
                        linewidth=lw)
                ax.annotate(e, ((a[0] + b[0]) / 2, (a[1] + b[1]) / 2),
                            fontsize=7, color="tab:gray")
        for b in tree.buds:
            x, y = locate((b.path, b.edge, b.t))
            ax.plot([x], [y], "o", color="tab:red", markersize=7)
    ax.set_title(title or f"sphere tree ({len(tree.buds)} buds)")
    ax.set_aspect("equal")
    ax.axis("off")
    os.makedirs(os.path.dirname(out_path) or ".", exist_ok=True)
    fig.savefig(out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def render_events(events, out_path: str, title: str = "fold events") -> None:
    """Timeline of fold events along a folding path."""
    plt = _mpl()
    fig, ax = plt.subplots(figsize=(7, 2.4))
    kinds = sorted({ev.kind for ev in events}) or ["none"]
    lane = {k: i for i, k in enumerate(kinds)}
    for ev in events:
        t = float(ev.time)
        y = lane[ev.kind]
        ax.plot([t], [y], "o", color="tab:blue")
    ax.set_yticks(range(len(kinds)))
    ax.set_yticklabels(kinds)
    ax.set_xlabel("time")
    ax.set_title(title)
    os.makedirs(os.path.dirname(out_path) or ".", exist_ok=True)
    fig.savefig(out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)
