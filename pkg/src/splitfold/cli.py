"""Command-line front end: scenario files in, canonical JSON out, with
optional DOT and matplotlib figure emission."""

from __future__ import annotations

import json
import os
import random
import sys
from fractions import Fraction

import click

from . import report
from .cover import CoverPoint
from .folding import FoldingError, fold_sequence, run_folding
from .graphs import (GraphError, MarkedGraph, MetricGraph, Splitting,
                     parse_path, path_to_text, splitting_eq,
                     splitting_from_edge, validate_marked_graph)
from .maps import GraphMorphism, MapError, gates as map_gates, make_terse, tension
from .projection import (ProjectionError, behrstock_witness, bgi_construct,
                         distance1_cert, project, resolve_dual_edge)
from .report import frac
from .spheretrees import (SphereTree, SphereTreeError, bbc_sphere_tree,
                          canonical_key, core, core_key, core_edge_count,
                          intersection_number, sphere_tree_of)
from .words import Word, WordError

DOMAIN_ERRORS = (GraphError, MapError, FoldingError, SphereTreeError,
                 ProjectionError, WordError, KeyError)


class Scenario:
    def __init__(self, data: dict):
        self.rank = int(data["rank"])
        self.graphs: dict[str, MarkedGraph] = {}
        for name, g in data.get("graphs", {}).items():
            self.graphs[name] = self._graph(g)
        self.splittings: dict[str, Splitting] = {}
        for name, s in data.get("splittings", {}).items():
            G = self.graphs[s["graph"]]
            self.splittings[name] = splitting_from_edge(G, s["edge"])
        self.morphisms: dict[str, GraphMorphism] = {}
        for name, m in data.get("morphisms", {}).items():
            dom = self.graphs[m["domain"]]
            cod = self.graphs[m["codomain"]]
            vmap = dict(m.get("vmap") or
                        {dom.basepoint: cod.basepoint})
            emap = {e: parse_path(p) for e, p in m["emap"].items()}
            basepath = parse_path(m.get("basepath", ""))
            self.morphisms[name] = GraphMorphism(dom, cod, vmap, emap, basepath)

    def _graph(self, g: dict) -> MarkedGraph:
        edges = {}
        for e in g["edges"]:
            edges[e["id"]] = (e["from"], e["to"], Fraction(e["len"]))
        graph = MetricGraph(set(g["vertices"]), edges, g.get("flagged", ()))
        petals = {}
        for gen, path in g["petals"].items():
            idx = ord(gen) - ord("a") + 1
            petals[idx] = parse_path(path)
        return MarkedGraph(self.rank, graph, g["basepoint"], petals)

    def graph(self, name: str) -> MarkedGraph:
        if name not in self.graphs:
            raise GraphError(f"unknown graph {name!r}")
        return self.graphs[name]

    def splitting(self, name: str) -> Splitting:
        if name not in self.splittings:
            raise GraphError(f"unknown splitting {name!r}")
        return self.splittings[name]

    def morphism(self, name: str) -> GraphMorphism:
        if name not in self.morphisms:
            raise GraphError(f"unknown morphism {name!r}")
        return self.morphisms[name]


def load_scenario(path: str) -> Scenario:
    try:
        with open(path) as fh:
            data = json.load(fh)
        return Scenario(data)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        click.echo(json.dumps({"usage_error": f"unparsable scenario: {exc}"}),
                   err=True)
        sys.exit(2)


def jsonify(obj):
    if isinstance(obj, Fraction):
        return frac(obj)
    if isinstance(obj, dict):
        return {str(k): jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonify(x) for x in obj]
    if isinstance(obj, CoverPoint):
        return {"vertex": path_to_text(obj.path), "dir": obj.edge,
                "t": frac(obj.t)}
    if isinstance(obj, Word):
        return obj.to_text()
    return obj


def emit(obj, quiet=False):
    if not quiet:
        click.echo(json.dumps(jsonify(obj), sort_keys=True))


def run_command(fn):
    try:
        fn()
    except DOMAIN_ERRORS as exc:
        click.echo(json.dumps({"error": {"type": type(exc).__name__,
                                         "message": str(exc)}}))
        sys.exit(1)


def common_options(fn):
    fn = click.option("--seed", type=int, default=0, show_default=True)(fn)
    fn = click.option("--dot", "dot_dir", type=click.Path(), default=None)(fn)
    fn = click.option("--fig", "fig_dir", type=click.Path(), default=None)(fn)
    fn = click.option("--quiet", is_flag=True, default=False)(fn)
    return fn


@click.group()
def main():
    """Sphere-tree calculus for free splittings."""


@main.command()
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--graph", "graph_name", default=None)
@common_options
def validate(scenario, graph_name, seed, dot_dir, fig_dir, quiet):
    """Validate a marked graph: betti, volume, degrees, marking check."""
    def go():
        sc = load_scenario(scenario)
        name = graph_name or sorted(sc.graphs)[0]
        G = sc.graph(name)
        rep = validate_marked_graph(G)
        if dot_dir:
            report.write_dot(os.path.join(dot_dir, f"{name}.dot"),
                             report.graph_to_dot(G, name))
        if fig_dir:
            report.render_graph(G, os.path.join(fig_dir, f"{name}.png"), name)
        emit(rep, quiet)
    run_command(go)


@main.command()
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--morphism", "morphism_name", required=True)
@common_options
def gates(scenario, morphism_name, seed, dot_dir, fig_dir, quiet):
    """Gate structure and tension data of a morphism."""
    def go():
        sc = load_scenario(scenario)
        f = sc.morphism(morphism_name)
        gs = {v: [[f"{e}{'+' if s > 0 else '-'}" for e, s in gate]
                  for gate in gate_list]
              for v, gate_list in map_gates(f).items()}
        ten = tension(f)
        emit({"gates": gs, "slopes": ten["slopes"],
              "tension_subgraph": ten["subgraph"],
              "is_optimal": ten["is_optimal"]}, quiet)
    run_command(go)


@main.command()
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--morphism", "morphism_name", required=True)
@click.option("--terse/--no-terse", default=True,
              help="rescale to a terse map before folding")
@common_options
def fold(scenario, morphism_name, terse, seed, dot_dir, fig_dir, quiet):
    """Run the event-driven folding path; emit the event log as JSON lines."""
    def go():
        sc = load_scenario(scenario)
        f = sc.morphism(morphism_name)
        if terse:
            f = make_terse(f)
        path = run_folding(f)
        for i, step in enumerate(path.steps):
            for ev in step.events:
                if not quiet:
                    click.echo(json.dumps(jsonify(
                        {"t": ev.time, "kind": ev.kind, "data": ev.data}),
                        sort_keys=True))
            if dot_dir:
                report.write_dot(
                    os.path.join(dot_dir, f"event{i:03d}.dot"),
                    report.graph_to_dot(step.dom_before, f"t{i}"))
        if fig_dir:
            report.render_events(path.events,
                                 os.path.join(fig_dir, "events.png"))
            report.render_graph(path.initial.codomain,
                                os.path.join(fig_dir, "terminal.png"),
                                "terminal")
        emit({"events": len(path.events),
              "terminal_volume": path.state.dom.graph.volume(),
              "terminal_marking_ok": True}, quiet)
    run_command(go)


@main.command()
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--morphism", "morphism_name", required=True)
@common_options
def foldseq(scenario, morphism_name, seed, dot_dir, fig_dir, quiet):
    """Discrete maximal-fold sequence (the folding oracle)."""
    def go():
        sc = load_scenario(scenario)
        f = make_terse(sc.morphism(morphism_name))
        path = fold_sequence(f)
        emit({"folds": len(path.steps),
              "terminal_volume": path.state.dom.graph.volume()}, quiet)
    run_command(go)


@main.command()
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--splitting", "splitting_name", required=True)
@click.option("--base", "base_name", required=True)
@click.option("--method", type=click.Choice(["evolve", "bbc", "both"]),
              default="both", show_default=True)
@common_options
def spheretree(scenario, splitting_name, base_name, method, seed, dot_dir,
               fig_dir, quiet):
    """Sphere tree of a splitting with respect to a base graph."""
    def go():
        sc = load_scenario(scenario)
        S = sc.splitting(splitting_name)
        base = sc.graph(base_name)
        out = {}
        trees = {}
        if method in ("evolve", "both"):
            trees["evolve"] = sphere_tree_of(S, base)
        if method in ("bbc", "both"):
            trees["bbc"] = bbc_sphere_tree(S, base)
        for k, t in trees.items():
            out[k] = {"buds": list(t.buds),
                      "core_edges": sorted(
                          [path_to_text(p) or "*", e] for p, e in core(t).edges)}
        if method == "both":
            out["core_equal"] = core_key(trees["evolve"]) == core_key(trees["bbc"])
        tree = trees.get("bbc") or trees.get("evolve")
        if dot_dir:
            report.write_dot(os.path.join(dot_dir, "spheretree.dot"),
                             report.tree_to_dot(tree, splitting_name))
        if fig_dir:
            report.render_tree(tree,
                               os.path.join(fig_dir, "spheretree.png"),
                               f"{splitting_name} over {base_name}")
        emit(out, quiet)
    run_command(go)


@main.command(name="core")
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--splitting", "splitting_name", required=True)
@click.option("--base", "base_name", required=True)
@common_options
def core_cmd(scenario, splitting_name, base_name, seed, dot_dir, fig_dir, quiet):
    """Guirardel-core slice (full-edge subtree) of a sphere tree."""
    def go():
        sc = load_scenario(scenario)
        tree = bbc_sphere_tree(sc.splitting(splitting_name), sc.graph(base_name))
        c = core(tree)
        emit({"edges": sorted([path_to_text(p) or "*", e] for p, e in c.edges),
              "volume": c.volume()}, quiet)
    run_command(go)


@main.command()
@click.argument("scenario", type=click.Path(exists=True))
@click.argument("s1")
@click.argument("s2")
@common_options
def intersect(scenario, s1, s2, seed, dot_dir, fig_dir, quiet):
    """Intersection number of two splittings, with the symmetric check."""
    def go():
        sc = load_scenario(scenario)
        a, b = sc.splitting(s1), sc.splitting(s2)
        i = intersection_number(a, b)
        j = intersection_number(b, a)
        emit({"i": str(i), "sym_check": str(j)}, quiet)
    run_command(go)


@main.command(name="project")
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--sphere", "sphere_name", required=True)
@click.option("--boundary", "boundary_name", required=True)
@click.option("--base", "base_name", required=True)
@common_options
def project_cmd(scenario, sphere_name, boundary_name, base_name, seed,
                dot_dir, fig_dir, quiet):
    """Submanifold projection of a sphere to the complement of another."""
    def go():
        sc = load_scenario(scenario)
        res = project(sc.splitting(sphere_name), sc.splitting(boundary_name),
                      sc.graph(base_name))
        pieces = []
        for i, p in enumerate(res.pieces):
            pieces.append({"kind": p.kind, "chop_count": p.chop_count,
                           "buds": list(p.buds),
                           "essential": res.essential[i]})
        if fig_dir:
            for i, p in enumerate(res.pieces):
                t = p.tree()
                if not t.is_empty():
                    report.render_tree(
                        t, os.path.join(fig_dir, f"piece{i}.png"),
                        f"piece {i} ({p.kind})")
        emit({"defined": res.defined, "pieces": pieces}, quiet)
    run_command(go)


@main.command()
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--x", "x_name", required=True)
@click.option("--xp", "xp_name", required=True)
@click.option("--sphere", "sphere_name", required=True)
@click.option("--base", "base_name", required=True)
@common_options
def behrstock(scenario, x_name, xp_name, sphere_name, base_name, seed,
              dot_dir, fig_dir, quiet):
    """Constructive Behrstock witness: a chain of at most 3 adjacency facts."""
    def go():
        sc = load_scenario(scenario)
        w = behrstock_witness(sc.splitting(x_name), sc.splitting(xp_name),
                              sc.splitting(sphere_name), sc.graph(base_name))
        emit({"side": w.side, "chain": w.chain,
              "chain_length": len(w.chain)}, quiet)
    run_command(go)


@main.command()
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--morphism", "morphism_name", required=True)
@click.option("--sphere", "sphere_name", required=True)
@common_options
def bgi(scenario, morphism_name, sphere_name, seed, dot_dir, fig_dir, quiet):
    """Bounded-geodesic-image construction along a terse folding path."""
    def go():
        sc = load_scenario(scenario)
        f = make_terse(sc.morphism(morphism_name))
        path = run_folding(f)
        rep = bgi_construct(path, sc.splitting(sphere_name))
        if rep.trivial:
            emit({"trivial": True,
                  "note": "dual edge present initially; distance <= 2"}, quiet)
            return
        emit({"trivial": False, "N": rep.N, "event_index": rep.event_index,
              "vertex": rep.vertex,
              "gate": [f"{e}{'+' if s > 0 else '-'}" for e, s in rep.gate],
              "spheres": [{k: jsonify(v) if k != "vertex_lift" else
                           path_to_text(v) for k, v in s.items()}
                          for s in rep.spheres],
              "structural_ok": rep.structural_ok,
              "pairwise_ok": rep.pairwise_ok,
              "pairwise": rep.pairwise}, quiet)
    run_command(go)


@main.command()
@click.option("--quick", is_flag=True, default=False)
@common_options
def selftest(quick, seed, dot_dir, fig_dir, quiet):
    """Run the property suites and report pass counts."""
    def go():
        from . import selfcheck

        results = selfcheck.run_all(seed=seed or 7,
                                    n=10 if quick else 30)
        ok = all(r["passed"] == r["total"] for r in results)
        emit({"ok": ok, "suites": results}, quiet)
        if not ok:
            sys.exit(1)
    run_command(go)


if __name__ == "__main__":
    main()
