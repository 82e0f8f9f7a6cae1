"""Command-line pipeline: stats, embed, plot, cluster, compare, export.

Each stage persists its artefacts (distance matrix, embedding, images,
bundles) so expensive steps are never recomputed implicitly, writes a
provenance JSON with the resolved configuration beside its outputs, and
writes everything atomically (no partial files on error).

Exit codes: 1 usage/domain errors, 2 I/O errors, 3 numerical errors.
"""

from __future__ import annotations

import argparse
import os
import re
import sys

import numpy as np

from . import __version__
from . import cluster as cluster_mod
from . import compare as compare_mod
from . import embed as embed_mod
from . import features as features_mod
from . import metric as metric_mod
from . import render as render_mod
from ._util import atomic_write_json
from .corpus import FORMATS, corpus_from_texts, corpus_stats, load_corpus
from .errors import DomainError, NumericalError, UsageError

# highlight palette: generic rules cycle through these, in order
HIGHLIGHT_CYCLE = ("#1f77b4", "#e377c2", "#9467bd", "#ff7f0e", "#17becf")
YEAR_1900S_COLOR = "#d62728"
YEAR_2000S_COLOR = "#1f77b4"
NUMERIC_SEQ_COLOR = "#d62728"
KEYBOARD_SEQ_COLOR = "#1f77b4"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); keep usage errors at 1
        raise UsageError(message)


def _workers(value: int | None) -> int | None:
    if value is not None:
        return value
    env = os.environ.get("PASSVIZ_WORKERS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"PASSVIZ_WORKERS must be an integer, got {env!r}")
    return os.cpu_count()


def _parse_char_at(value: str) -> tuple[int, str]:
    pos, sep, ch = value.partition(":")
    if not sep or len(ch) != 1:
        raise UsageError(f"--char-at expects POS:CHAR (e.g. 1:a or -1:1), got {value!r}")
    try:
        return int(pos), ch
    except ValueError:
        raise UsageError(f"--char-at position must be an integer, got {pos!r}")


def _provenance(command: str, config: dict, outputs: list[str]) -> None:
    doc = {
        "command": command,
        "config": config,
        "outputs": [os.path.basename(p) for p in outputs],
        "passviz_version": __version__,
    }
    for path in outputs:
        atomic_write_json(f"{path}.provenance.json", doc)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="passviz", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_input(p, required=True):
        p.add_argument("--input", required=required, help="corpus dump file")
        p.add_argument("--format", default="plain", choices=FORMATS)

    p_stats = sub.add_parser("stats", help="corpus statistics")
    add_input(p_stats)
    p_stats.add_argument("--out", help="write the report JSON here instead of stdout")

    p_embed = sub.add_parser("embed", help="corpus -> anchors -> distance matrix -> t-SNE")
    add_input(p_embed)
    p_embed.add_argument("--anchors", type=int, default=2000, help="anchor count N (default 2000)")
    p_embed.add_argument("--seed", type=int, default=0)
    p_embed.add_argument("--weight-anchors-by-count", action="store_true",
                         help="sample anchors weighted by occurrence counts")
    p_embed.add_argument("--perplexity", type=float, default=30.0)
    p_embed.add_argument("--iterations", type=int, default=1000)
    p_embed.add_argument("--early-exaggeration", type=float, default=12.0,
                         help="input-affinity multiplier for the opening phase")
    p_embed.add_argument("--early-exaggeration-iters", type=int, default=None,
                         help="length of that phase (default min(250, iterations // 2))")
    p_embed.add_argument("--theta", type=float, default=None,
                         help="0 = exact gradient; default 0.5 above 5000 points")
    p_embed.add_argument("--learning-rate", default="auto")
    p_embed.add_argument("--batch-rows", type=int, default=metric_mod.DEFAULT_BATCH_ROWS)
    p_embed.add_argument("--workers", type=int, default=None,
                         help="thread count for the matrix build (env PASSVIZ_WORKERS)")
    p_embed.add_argument("--out", required=True,
                         help="output prefix; writes PREFIX.pvdm and PREFIX.pvem")

    p_plot = sub.add_parser("plot", help="render an embedding to SVG/PNG")
    add_input(p_plot)
    p_plot.add_argument("--embedding", required=True, help="PVEM file from `embed`")
    p_plot.add_argument("--color-by", default="length",
                        choices=("length", "digit_ratio", "digit_position", "highlight"))
    p_plot.add_argument("--regex", help="hide passwords not matching this regex")
    p_plot.add_argument("--contains", "--highlight-contains", dest="contains", action="append",
                        default=[], help="highlight passwords containing this substring")
    p_plot.add_argument("--char-at", action="append", default=[], metavar="POS:CHAR",
                        help="highlight passwords with CHAR at POS (negative = from the end)")
    p_plot.add_argument("--highlight-years", action="store_true",
                        help="highlight 1900-1999 in red, 2000-2099 in blue")
    p_plot.add_argument("--highlight-sequences", action="store_true",
                        help="highlight numeric sequences in red, keyboard runs in blue")
    p_plot.add_argument("--filter-contains", help="hide passwords without this substring")
    p_plot.add_argument("--filter-char-at", metavar="POS:CHAR",
                        help="hide passwords without CHAR at POS")
    p_plot.add_argument("--filter-years", action="store_true", help="hide passwords without a year")
    p_plot.add_argument("--filter-sequences", action="store_true",
                        help="hide passwords without numeric/keyboard sequences")
    p_plot.add_argument("--point-size", type=float, default=3.0)
    p_plot.add_argument("--width", type=int, default=880)
    p_plot.add_argument("--height", type=int, default=660)
    p_plot.add_argument("--out", required=True, help="image path (.svg or .png)")

    p_cluster = sub.add_parser("cluster", help="cluster an embedding and annotate it")
    add_input(p_cluster)
    p_cluster.add_argument("--embedding", required=True)
    p_cluster.add_argument("--method", required=True, choices=("kmeans", "dbscan", "optics"))
    p_cluster.add_argument("--k", type=int, default=8, help="kmeans cluster count")
    p_cluster.add_argument("--eps", type=float, default=0.5, help="dbscan radius / optics eps-cut")
    p_cluster.add_argument("--min-pts", type=int, default=5)
    p_cluster.add_argument("--xi", type=float, default=0.05)
    p_cluster.add_argument("--seed", type=int, default=0)
    p_cluster.add_argument("--privacy", action="store_true", help="omit centre passwords")
    p_cluster.add_argument("--annotate-majority-length", action="store_true")
    p_cluster.add_argument("--out", required=True,
                           help="output prefix; writes PREFIX.clusters.json and PREFIX.svg")

    p_compare = sub.add_parser("compare", help="intersection and digit profiles of two corpora")
    p_compare.add_argument("--input-a", required=True)
    p_compare.add_argument("--input-b", required=True)
    p_compare.add_argument("--format-a", default="plain", choices=FORMATS)
    p_compare.add_argument("--format-b", default="plain", choices=FORMATS)
    p_compare.add_argument("--include-shared", action="store_true",
                           help="list the shared passwords in the report (sensitive)")
    p_compare.add_argument("--shared-out",
                           help="also write the shared passwords as a plain corpus file, "
                                "ready for the standard embed pipeline")
    p_compare.add_argument("--out", required=True,
                           help="output prefix; writes PREFIX.intersection.json and PREFIX.profiles.svg")

    p_export = sub.add_parser("export", help="write the viewer bundle JSON")
    add_input(p_export)
    p_export.add_argument("--embedding", required=True)
    p_export.add_argument("--privacy", action="store_true", help="omit password texts")
    p_export.add_argument("--max-points", type=int, default=render_mod.DEFAULT_BUNDLE_CAP)
    p_export.add_argument("--full", action="store_true", help="disable downsampling")
    p_export.add_argument("--seed", type=int, default=0)
    p_export.add_argument("--cluster-method", choices=("kmeans", "dbscan", "optics"))
    p_export.add_argument("--k", type=int, default=8)
    p_export.add_argument("--eps", type=float, default=0.5)
    p_export.add_argument("--min-pts", type=int, default=5)
    p_export.add_argument("--xi", type=float, default=0.05)
    p_export.add_argument("--out", required=True, help="bundle JSON path")

    return parser


def _load_embedding_and_corpus(args):
    corpus = load_corpus(args.input, args.format)
    embedding = embed_mod.load_embedding(args.embedding)
    if len(embedding) != len(corpus):
        raise DomainError(
            f"embedding has {len(embedding)} rows but the corpus has {len(corpus)} records; "
            "did you pass the corpus the embedding was built from?"
        )
    return embedding, corpus


def _run_clustering(args, embedding):
    if args.method == "kmeans":
        return cluster_mod.kmeans(embedding, args.k, seed=args.seed)
    if args.method == "dbscan":
        return cluster_mod.dbscan(embedding, args.eps, args.min_pts)
    return cluster_mod.optics(embedding, max(args.min_pts, 2), xi=args.xi)


def cmd_stats(args) -> int:
    report = corpus_stats(load_corpus(args.input, args.format)).to_dict()
    if args.out:
        atomic_write_json(args.out, report)
        _provenance("stats", {"input": args.input, "format": args.format}, [args.out])
    else:
        from ._util import canonical_json

        sys.stdout.write(canonical_json(report))
    return 0


def cmd_embed(args) -> int:
    corpus = load_corpus(args.input, args.format)
    if len(corpus) == 0:
        raise DomainError(f"{args.input}: corpus is empty")
    if args.anchors > len(corpus):
        print(
            f"warning: requested {args.anchors} anchors but the corpus has only "
            f"{len(corpus)} unique passwords; using all of them",
            file=sys.stderr,
        )
    anchors = metric_mod.select_anchors(
        corpus, args.anchors, args.seed, weight_by_count=args.weight_anchors_by_count
    )
    matrix = metric_mod.build_distance_matrix(
        corpus, anchors, workers=_workers(args.workers), batch_rows=args.batch_rows
    )
    lr = args.learning_rate
    if lr != "auto":
        try:
            lr = float(lr)
        except ValueError:
            raise UsageError(f"--learning-rate must be 'auto' or a number, got {lr!r}")
    ee_iters = args.early_exaggeration_iters
    if ee_iters is None:
        ee_iters = min(250, args.iterations // 2)
    params = embed_mod.TsneParams(
        perplexity=args.perplexity,
        iterations=args.iterations,
        early_exaggeration_factor=args.early_exaggeration,
        early_exaggeration_iters=ee_iters,
        learning_rate=lr,
        seed=args.seed,
        theta=args.theta,
    )
    embedding = embed_mod.tsne_embed(matrix, params)

    matrix_path = f"{args.out}.pvdm"
    embedding_path = f"{args.out}.pvem"
    metric_mod.save_distance_matrix(matrix, matrix_path)
    embed_mod.save_embedding(embedding, embedding_path)
    config = {
        "input": args.input,
        "format": args.format,
        "anchors": args.anchors,
        "seed": args.seed,
        "weight_anchors_by_count": args.weight_anchors_by_count,
        "tsne": embedding.params.to_dict(),
        "anchor_hash": anchors.hash_hex,
    }
    _provenance("embed", config, [matrix_path, embedding_path])
    print(f"embedded {len(corpus)} passwords against {len(anchors)} anchors "
          f"(KL {embedding.kl_start:.4f} -> {embedding.kl_final:.4f})")
    return 0


def _highlight_rules(args, texts) -> list[render_mod.HighlightRule]:
    rules = []
    cycle = iter(HIGHLIGHT_CYCLE)

    def next_color():
        try:
            return next(cycle)
        except StopIteration:
            return HIGHLIGHT_CYCLE[-1]

    for needle in args.contains:
        rules.append(render_mod.HighlightRule(
            label=f"contains {needle!r}", color=next_color(),
            mask=tuple(needle in t for t in texts),
        ))
    for spec in args.char_at:
        pos, ch = _parse_char_at(spec)
        rules.append(render_mod.HighlightRule(
            label=f"char {pos} = {ch!r}", color=next_color(),
            mask=tuple(features_mod.char_at(t, pos, ch) for t in texts),
        ))
    if args.highlight_years:
        year_hits = [features_mod.find_years(t) for t in texts]
        rules.append(render_mod.HighlightRule(
            label="year 1900-1999", color=YEAR_1900S_COLOR,
            mask=tuple(any(1900 <= v <= 1999 for v, _ in h) for h in year_hits),
        ))
        rules.append(render_mod.HighlightRule(
            label="year 2000-2099", color=YEAR_2000S_COLOR,
            mask=tuple(any(2000 <= v <= 2099 for v, _ in h) for h in year_hits),
        ))
    if args.highlight_sequences:
        rules.append(render_mod.HighlightRule(
            label="numeric sequence", color=NUMERIC_SEQ_COLOR,
            mask=tuple(features_mod.has_numeric_sequence(t) for t in texts),
        ))
        rules.append(render_mod.HighlightRule(
            label="keyboard sequence", color=KEYBOARD_SEQ_COLOR,
            mask=tuple(features_mod.has_keyboard_sequence(t) for t in texts),
        ))
    return rules


def _filter_mask(args, texts) -> np.ndarray:
    mask = np.ones(len(texts), dtype=bool)
    if args.regex:
        try:
            pattern = re.compile(args.regex)
        except re.error as exc:
            raise UsageError(f"invalid --regex at position {exc.pos}: {exc.msg}")
        mask &= np.array([pattern.search(t) is not None for t in texts])
    if args.filter_contains:
        mask &= np.array([args.filter_contains in t for t in texts])
    if args.filter_char_at:
        pos, ch = _parse_char_at(args.filter_char_at)
        mask &= np.array([features_mod.char_at(t, pos, ch) for t in texts])
    if args.filter_years:
        mask &= np.array([bool(features_mod.find_years(t)) for t in texts])
    if args.filter_sequences:
        mask &= np.array([
            features_mod.has_numeric_sequence(t) or features_mod.has_keyboard_sequence(t)
            for t in texts
        ])
    return mask


def cmd_plot(args) -> int:
    embedding, corpus = _load_embedding_and_corpus(args)
    texts = corpus.texts()
    mask = _filter_mask(args, texts)
    if not mask.any():
        raise DomainError("all points were filtered out; nothing to plot")
    kept = np.flatnonzero(mask)
    kept_texts = [texts[i] for i in kept]
    coords = embedding.coords[kept]
    table = [features_mod.extract_features(t) for t in kept_texts]

    rules = _highlight_rules(args, kept_texts)
    color_mode = args.color_by
    if rules and color_mode != "highlight":
        color_mode = "highlight"
    if color_mode == "highlight" and not rules:
        raise UsageError("highlight mode needs at least one highlight flag")
    spec = render_mod.RenderSpec(
        color_mode=color_mode,
        highlight_rules=tuple(rules),
        point_size=args.point_size,
        width=args.width,
        height=args.height,
    )
    render_mod.render_scatter(coords, table, spec, args.out)
    config = {
        "input": args.input,
        "format": args.format,
        "embedding": args.embedding,
        "color_by": color_mode,
        "regex": args.regex,
        "contains": args.contains,
        "char_at": args.char_at,
        "highlight_years": args.highlight_years,
        "highlight_sequences": args.highlight_sequences,
        "filters": {
            "contains": args.filter_contains,
            "char_at": args.filter_char_at,
            "years": args.filter_years,
            "sequences": args.filter_sequences,
        },
        "points_plotted": int(mask.sum()),
    }
    _provenance("plot", config, [args.out])
    print(f"plotted {int(mask.sum())} of {len(texts)} passwords to {args.out}")
    return 0


def cmd_cluster(args) -> int:
    embedding, corpus = _load_embedding_and_corpus(args)
    assignment = _run_clustering(args, embedding)
    centers = cluster_mod.center_passwords(assignment, embedding, corpus)
    majority = cluster_mod.majority_length_labels(assignment, corpus)

    clusters_doc = cluster_metadata(assignment, centers, majority, privacy=args.privacy)
    json_path = f"{args.out}.clusters.json"
    atomic_write_json(json_path, clusters_doc)

    annotations = []
    if args.annotate_majority_length:
        for cid in assignment.cluster_ids():
            cx, cy = assignment.centroids[cid]
            annotations.append((float(cx), float(cy), str(majority[cid][0])))
    table = features_mod.feature_table(corpus)
    spec = render_mod.RenderSpec(
        color_mode="cluster",
        cluster_labels=tuple(int(l) for l in assignment.labels),
        annotations=tuple(annotations),
        annotate_majority_length=args.annotate_majority_length,
    )
    svg_path = f"{args.out}.svg"
    render_mod.render_scatter(embedding, table, spec, svg_path)

    config = {
        "input": args.input,
        "format": args.format,
        "embedding": args.embedding,
        "method": args.method,
        "k": args.k,
        "eps": args.eps,
        "min_pts": args.min_pts,
        "xi": args.xi,
        "seed": args.seed,
        "privacy": args.privacy,
    }
    _provenance("cluster", config, [json_path, svg_path])
    n_noise = int((assignment.labels == -1).sum())
    print(f"{assignment.method}: {assignment.n_clusters} clusters, {n_noise} noise points")
    return 0


def cluster_metadata(assignment, centers, majority, privacy: bool = False) -> dict:
    clusters = []
    for cid in assignment.cluster_ids():
        text, idx = centers[cid]
        entry = {
            "id": cid,
            "centroid": [float(v) for v in assignment.centroids[cid]],
            "center_index": idx,
            "majority_length": majority[cid][0],
            "majority_share": majority[cid][1],
            "size": int((assignment.labels == cid).sum()),
        }
        if not privacy:
            entry["center_text"] = text
        clusters.append(entry)
    params = {k: v for k, v in assignment.params_used.items()
              if k not in ("reachability", "ordering", "inertia_history")}
    return {
        "method": assignment.method,
        "params": params,
        "labels": [int(l) for l in assignment.labels],
        "clusters": clusters,
    }


def _profiles_svg(profiles, name_a: str, name_b: str, width=640, height=360) -> bytes:
    """Paired bar chart of the two decile histograms; deterministic SVG."""
    from xml.sax.saxutils import escape as esc

    margin, gap = 40, 4
    n = len(profiles.deciles)
    slot = (width - 2 * margin) / n
    bar = (slot - gap) / 2
    top = max(max(profiles.share_a), max(profiles.share_b), 1.0)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    for i, d in enumerate(profiles.deciles):
        x0 = margin + i * slot
        for offset, share, color in ((0, profiles.share_a[i], "#1f77b4"),
                                     (bar, profiles.share_b[i], "#ff7f0e")):
            h = (height - 2 * margin) * share / top
            y = height - margin - h
            out.append(
                f'<rect x="{x0 + offset:.2f}" y="{y:.2f}" width="{bar:.2f}" '
                f'height="{h:.2f}" fill="{color}"/>'
            )
        out.append(
            f'<text x="{x0 + slot / 2:.2f}" y="{height - margin + 14}" font-size="10" '
            f'text-anchor="middle" font-family="sans-serif">{d}</text>'
        )
    out.append(f'<rect x="{margin}" y="8" width="10" height="10" fill="#1f77b4"/>')
    out.append(f'<text x="{margin + 14}" y="17" font-size="11" font-family="sans-serif">{esc(name_a)}</text>')
    out.append(f'<rect x="{margin + 160}" y="8" width="10" height="10" fill="#ff7f0e"/>')
    out.append(f'<text x="{margin + 174}" y="17" font-size="11" font-family="sans-serif">{esc(name_b)}</text>')
    out.append("</svg>")
    return "\n".join(out).encode("utf-8")


def cmd_compare(args) -> int:
    a = load_corpus(args.input_a, args.format_a)
    b = load_corpus(args.input_b, args.format_b)
    report = compare_mod.intersect(a, b)
    profiles = compare_mod.compare_digit_profiles(a, b)

    json_path = f"{args.out}.intersection.json"
    doc = report.to_dict(include_shared=args.include_shared)
    doc["digit_profiles"] = profiles.to_dict()
    atomic_write_json(json_path, doc)

    svg_path = f"{args.out}.profiles.svg"
    from ._util import atomic_write_bytes

    atomic_write_bytes(svg_path, _profiles_svg(profiles, a.name, b.name))

    outputs = [json_path, svg_path]
    if args.shared_out:
        atomic_write_bytes(args.shared_out, ("\n".join(report.shared) + "\n").encode("utf-8"))
        outputs.append(args.shared_out)

    config = {
        "input_a": args.input_a,
        "input_b": args.input_b,
        "format_a": args.format_a,
        "format_b": args.format_b,
        "include_shared": args.include_shared,
        "shared_out": args.shared_out,
    }
    _provenance("compare", config, outputs)
    print(f"intersection: {report.count} shared passwords "
          f"({report.pct_of_a:.2f}% of {a.name}, {report.pct_of_b:.2f}% of {b.name})")
    return 0


def cmd_export(args) -> int:
    embedding, corpus = _load_embedding_and_corpus(args)
    table = features_mod.feature_table(corpus)
    clusters = None
    if args.cluster_method:
        cl_args = argparse.Namespace(
            method=args.cluster_method, k=args.k, eps=args.eps,
            min_pts=args.min_pts, xi=args.xi, seed=args.seed,
        )
        assignment = _run_clustering(cl_args, embedding)
        centers = cluster_mod.center_passwords(assignment, embedding, corpus)
        majority = cluster_mod.majority_length_labels(assignment, corpus)
        clusters = cluster_metadata(assignment, centers, majority, privacy=args.privacy)
    bundle = render_mod.build_bundle(
        embedding, table, corpus,
        privacy=args.privacy, max_points=args.max_points, full=args.full,
        seed=args.seed, clusters=clusters,
    )
    render_mod.write_bundle(bundle, args.out)
    config = {
        "input": args.input,
        "format": args.format,
        "embedding": args.embedding,
        "privacy": args.privacy,
        "max_points": args.max_points,
        "full": args.full,
        "seed": args.seed,
        "cluster_method": args.cluster_method,
        "points_exported": len(bundle.points),
    }
    _provenance("export", config, [args.out])
    print(f"exported {len(bundle.points)} points to {args.out}")
    return 0


COMMANDS = {
    "stats": cmd_stats,
    "embed": cmd_embed,
    "plot": cmd_plot,
    "cluster": cmd_cluster,
    "compare": cmd_compare,
    "export": cmd_export,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except (UsageError, DomainError, re.error) as exc:
        print(f"passviz: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"passviz: i/o error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"passviz: numerical error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
