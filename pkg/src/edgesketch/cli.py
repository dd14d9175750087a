"""Command line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 incompatible sketches.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from edgesketch import community, fileio, reconstruction
from edgesketch.estimators import (
    cardinality_se,
    degree_estimates,
    estimate_density,
    estimate_edge_count,
    estimate_volume,
)
from edgesketch.exceptions import (
    EdgeSketchError,
    NoDataError,
    UnsupportedConfigurationError,
)
from edgesketch.graphgen import SbmConfig, corate_aggregate, corate_stream, sbm_generate
from edgesketch.sketch import MODES, SketchStore, ingest_stream, merge_stores

logger = logging.getLogger("edgesketch")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INCOMPATIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sketch_size(text):
    m = int(text)
    if m < 3:
        raise argparse.ArgumentTypeError(f"m must be at least 3, got {m}")
    return m


def _positive_int(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {n}")
    return n


def _salt(text):
    return int(text, 0)


# -- build / merge --------------------------------------------------------------


def auto_tag(edges):
    """Number repeated node pairs 1, 2, ... in stream order (untagged rows only).

    Done before sharding so every shard sees the same tags a single pass
    would assign.
    """
    edges = edges.copy()
    counts = {}
    for i in np.flatnonzero(edges[:, 3] == 0):
        u, v = int(edges[i, 0]), int(edges[i, 1])
        key = (min(u, v), max(u, v))
        counts[key] = counts.get(key, 0) + 1
        edges[i, 3] = counts[key]
    return edges


def _tree_merge(stores):
    while len(stores) > 1:
        nxt = [merge_stores(stores[i], stores[i + 1]) for i in range(0, len(stores) - 1, 2)]
        if len(stores) % 2:
            nxt.append(stores[-1])
        stores = nxt
    return stores[0]


def sharded_build(edges, m, salt, mode, parallel_edges, shards):
    """Round-robin split, concurrent shard builds, pairwise merge."""
    if parallel_edges:
        edges = auto_tag(edges)

    def build(i):
        store = SketchStore(m, salt, mode, parallel_edges)
        ingest_stream(store, edges[i::shards])
        return store

    if shards == 1:
        return build(0)
    with ThreadPoolExecutor(shards) as pool:
        parts = list(pool.map(build, range(shards)))
    return _tree_merge(parts)


def cmd_build(args):
    ef = fileio.read_edges(args.input)
    mode = args.mode or ef.mode
    store = sharded_build(ef.stream(), args.m, args.salt, mode, args.parallel_edges, args.shards)
    fileio.write_sketch(args.output, store, compact=args.compact)
    print(f"nodes={len(store)}\tedges={len(ef)}\tm={store.m}\tmode={mode}")


def cmd_merge(args):
    a = fileio.read_sketch(args.a)
    b = fileio.read_sketch(args.b)
    fileio.write_sketch(args.output, merge_stores(a, b), compact=args.compact)


# -- stats ------------------------------------------------------------------------


def cmd_stats(args):
    store = fileio.read_sketch(args.sketch)
    if len(store) == 0:
        print("no data: the sketch file holds no nodes")
        return
    deg = degree_estimates(store)
    se = cardinality_se(store.m)
    lines = [f"nodes={len(store)}", f"m={store.m}", f"mode={store.mode}", f"se_bound={se!r}"]
    if not store.directed:
        vol = estimate_volume(store, store.node_ids.tolist())
        lines.append(f"volume={vol.value!r}")
        if not store.has_self_loops:
            lines.append(f"edge_count={estimate_edge_count(store).value!r}")
            if args.n is not None:
                lines.append(f"density={estimate_density(store, args.n).value!r}")
    if args.nodes:
        ids = dict(zip(store.node_ids.tolist(), deg.tolist()))
        for v in args.nodes:
            if v not in ids:
                raise NoDataError(f"node {v} has no sketch")
            lines.append(f"degree[{v}]={ids[v]!r}")
    counts, edges = np.histogram(deg, bins=args.bins)
    for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
        lines.append(f"hist[{lo:.6g},{hi:.6g})={c}")
    print("\n".join(lines))


# -- louvain / reconstruct ----------------------------------------------------------


def cmd_louvain(args):
    store = fileio.read_sketch(args.sketch)
    if store.directed:
        raise UnsupportedConfigurationError("louvain needs an undirected sketch")
    config = community.LouvainConfig(seed=args.seed)
    if args.split_half:
        partition, estimate = community.split_half_modularity(store, config)
        logger.info("split-half cross evaluations: %s", estimate.cross_evaluations)
    else:
        result = community.louvain_run(store, config)
        partition, estimate = result.partition, result.modularity
        logger.info("moves per level: %s; %.3fs", result.level_moves, result.seconds)
    text = fileio.format_partition(partition, estimate.value)
    _emit(args.output, text)


def _parse_grid(grid, truth_size):
    out = []
    for tok in grid.split(","):
        tok = tok.strip()
        if tok.endswith("%"):
            if truth_size is None:
                raise UsageError("percentage t values need --truth")
            out.append((tok, max(1, round(float(tok[:-1]) / 100.0 * truth_size))))
        else:
            t = int(tok)
            if t < 1:
                raise UsageError(f"t values must be positive, got {t}")
            out.append((tok, t))
    return out


def cmd_reconstruct(args):
    if args.t_grid and not args.truth:
        raise UsageError("precision needs --truth")
    store = fileio.read_sketch(args.sketch)
    scored = reconstruction.score_pairs(
        store, args.k, args.alpha, policy=args.policy, workers=args.workers
    )
    if args.output:
        _emit(args.output, fileio.format_scores(scored))
    if args.truth:
        truth = fileio.read_edges(args.truth).edge_set()
        grid = _parse_grid(args.t_grid or "10%,25%,50%,75%,100%", len(truth))
        curve = reconstruction.precision_curve(scored, truth, [t for _, t in grid])
        sys.stdout.write(fileio.format_precision(zip((g for g, _ in grid), curve)))


def _emit(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


# -- generators ------------------------------------------------------------------------


def cmd_sbm_gen(args):
    cfg = SbmConfig(args.n, args.b, args.p, args.q, args.weights, args.seed)
    graph, stream = sbm_generate(cfg)
    _emit(args.output, fileio.format_edges(stream, "undirected"))
    if args.labels:
        _emit(args.labels, fileio.format_labels(graph.labels))


def _read_pairs(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise fileio.ParseError(f"line {lineno}: expected 'user item'", position=lineno)
            yield int(parts[0]), int(parts[1])


def cmd_corate(args):
    pairs = _read_pairs(args.input)
    if args.aggregate:
        weights = corate_aggregate(pairs)
        rows = [(i, j, float(w)) for (i, j), w in sorted(weights.items())]
    else:
        rows = [(e.u, e.v, e.weight, e.tag) for e in corate_stream(pairs)]
    _emit(args.output, fileio.format_edges(rows, "undirected"))


# -- entry point ---------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="edgesketch", description="Streaming graph sketches and sketch-only analytics.")
    common = _Parser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build", parents=[common], help="sketch a text edge stream")
    b.add_argument("input")
    b.add_argument("-o", "--output", required=True)
    b.add_argument("--m", type=_sketch_size, default=64)
    b.add_argument("--salt", type=_salt, default=0)
    b.add_argument("--shards", type=_positive_int, default=1)
    b.add_argument("--mode", choices=MODES, default=None)
    b.add_argument("--parallel-edges", action="store_true")
    b.add_argument("--compact", action="store_true", help="drop the tag word from sampled edges")
    b.set_defaults(func=cmd_build)

    mg = sub.add_parser("merge", parents=[common], help="merge two sketch files")
    mg.add_argument("a")
    mg.add_argument("b")
    mg.add_argument("-o", "--output", required=True)
    mg.add_argument("--compact", action="store_true")
    mg.set_defaults(func=cmd_merge)

    st = sub.add_parser("stats", parents=[common], help="degree, volume, edge count and density estimates")
    st.add_argument("sketch")
    st.add_argument("--nodes", type=int, nargs="*", default=[])
    st.add_argument("--n", type=int, default=None, help="node universe size for density")
    st.add_argument("--bins", type=_positive_int, default=10)
    st.set_defaults(func=cmd_stats)

    lv = sub.add_parser("louvain", parents=[common], help="community detection on a sketch")
    lv.add_argument("sketch")
    lv.add_argument("-o", "--output", default="-")
    lv.add_argument("--seed", type=int, default=0)
    lv.add_argument("--split-half", action="store_true")
    lv.set_defaults(func=cmd_louvain)

    rc = sub.add_parser("reconstruct", parents=[common], help="rank node pairs and measure precision")
    rc.add_argument("sketch")
    rc.add_argument("-o", "--output", default=None, help="scored pairs TSV")
    rc.add_argument("--k", type=int, default=4)
    rc.add_argument("--alpha", type=float, default=0.2)
    rc.add_argument("--t-grid", default=None, help="comma list of counts or percentages of |E|")
    rc.add_argument("--truth", default=None, help="edge stream with the true edges")
    rc.add_argument("--policy", choices=reconstruction.POLICIES, default="khop")
    rc.add_argument("--workers", type=_positive_int, default=1)
    rc.set_defaults(func=cmd_reconstruct)

    sg = sub.add_parser("sbm-gen", parents=[common], help="generate a stochastic block model edge stream")
    sg.add_argument("--n", type=_positive_int, required=True)
    sg.add_argument("--b", type=_positive_int, required=True)
    sg.add_argument("--p", type=float, required=True)
    sg.add_argument("--q", type=float, required=True)
    sg.add_argument("--weights", choices=("exp", "unit"), default="exp")
    sg.add_argument("--seed", type=int, default=0)
    sg.add_argument("-o", "--output", default="-")
    sg.add_argument("--labels", default=None, help="write 'node<TAB>block' here")
    sg.set_defaults(func=cmd_sbm_gen)

    cr = sub.add_parser("corate", parents=[common], help="item co-rating stream from 'user item' lines")
    cr.add_argument("input")
    cr.add_argument("-o", "--output", default="-")
    cr.add_argument("--aggregate", action="store_true", help="sum co-ratings exactly instead of tagging")
    cr.set_defaults(func=cmd_corate)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except UsageError as exc:
        print(f"edgesketch: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EdgeSketchError as exc:
        print(f"edgesketch: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"edgesketch: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
