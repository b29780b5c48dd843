"""Sphere-tree calculus for free splittings of free groups.

Core surfaces: reduced words, marked metric graphs and one-edge splittings,
universal-cover navigation, graph morphisms with train-track data, the
event-driven folding engine, sphere trees with their moves and cores, and
submanifold projection with the Behrstock and bounded-geodesic-image
constructions.
"""

from .words import Word, compose, invert, reduce
from .graphs import (MarkedGraph, MetricGraph, Splitting, collapse,
                     compatible_graph, splitting_eq, splitting_eq_oracle,
                     splitting_from_edge, validate_marked_graph)
from .cover import CoverPoint, act, geodesic, orbit_positions_on_segment
from .maps import (GraphMorphism, check_difference_of_markings, gates,
                   make_terse, rose_morphism, tension)
from .folding import (FoldEvent, FoldingPath, FoldState, fold_sequence,
                      fold_step, next_event, run_folding)
from .spheretrees import (CoreTree, SphereTree, bbc_sphere_tree,
                          bud_cancellation, bud_exchange, consolidate, core,
                          evolve, extract_splitting, hull, intersection_number,
                          normalize, sphere_tree_of)
from .projection import (BehrstockWitness, BgiReport, ChoppedPiece,
                         ProjectionResult, behrstock_witness, bgi_construct,
                         cap, chop, distance1, project)

__version__ = "0.1.0"
