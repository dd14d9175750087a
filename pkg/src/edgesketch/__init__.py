"""Streaming per-node graph sketches with sketch-only graph analytics."""

from edgesketch.core import exp_draw, hash_unit, kernel_update, next_order_stat
from edgesketch.models import EdgeSketcher, SketchLinkPredictor, SketchLouvain
from edgesketch.sketch import (
    EdgeKey,
    IngestReport,
    Sketch,
    SketchStore,
    WeightedEdge,
    build_store,
    ingest_edge,
    ingest_stream,
    merge_sketches,
    merge_stores,
)

__all__ = [
    "EdgeKey",
    "EdgeSketcher",
    "IngestReport",
    "Sketch",
    "SketchLinkPredictor",
    "SketchLouvain",
    "SketchStore",
    "WeightedEdge",
    "build_store",
    "exp_draw",
    "hash_unit",
    "ingest_edge",
    "ingest_stream",
    "kernel_update",
    "merge_sketches",
    "merge_stores",
    "next_order_stat",
]

__version__ = "0.1.0"
