"""Static scatter images of embeddings and the JSON bundle the viewer
consumes.

SVG is the primary, test-facing output: it is generated directly with
fixed number formatting and explicit hex colours on every glyph, so
identical inputs produce byte-identical files. PNG (via matplotlib) is a
convenience with the same colour assignment.
"""

from __future__ import annotations

import colorsys
import os
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from ._util import atomic_write_bytes, canonical_json
from ._validation import as_coords
from .errors import DomainError, SchemaVersionError, UsageError
from .features import PasswordFeatures

SCHEMA_VERSION = 1
DEFAULT_BUNDLE_CAP = 50000
LONG_LENGTH_BUCKET = 15  # lengths >= this share one "15+" bucket

# 12-colour qualitative cycle for categorical modes (lengths, clusters)
CATEGORICAL_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
)
NOISE_COLOR = "#c8c8c8"
BASE_COLOR = "#c8c8c8"

COLOR_MODES = ("length", "digit_ratio", "digit_position", "highlight", "cluster")


def _hex(rgb: tuple[float, float, float]) -> str:
    return "#%02x%02x%02x" % tuple(int(round(255 * max(0.0, min(1.0, v)))) for v in rgb)


def ramp_red_green(t: float) -> str:
    """Dark red (no digits) to dark green (all digits) through orange, by
    rotating the HSV hue from 0 to 120 degrees."""
    t = max(0.0, min(1.0, t))
    return _hex(colorsys.hsv_to_rgb(t / 3.0, 1.0, 0.55 - 0.05 * t))


def ramp_blue(t: float) -> str:
    """Light blue (digits at the start) to dark blue (digits at the end)."""
    t = max(0.0, min(1.0, t))
    a = (0xAD, 0xD8, 0xE6)
    b = (0x00, 0x00, 0x8B)
    return _hex(tuple((a[i] + (b[i] - a[i]) * t) / 255.0 for i in range(3)))


@dataclass(frozen=True)
class HighlightRule:
    """A labelled predicate outcome: `mask[i]` says whether point i gets
    `color`. Later rules override earlier ones on the same point, so an
    explicit "both" rule can be appended after two single-property rules."""

    label: str
    color: str
    mask: tuple[bool, ...]


@dataclass(frozen=True)
class RenderSpec:
    color_mode: str = "length"
    highlight_rules: tuple[HighlightRule, ...] = ()
    point_size: float = 3.0
    width: int = 880
    height: int = 660
    annotate_majority_length: bool = False
    background: str = "#ffffff"
    cluster_labels: tuple[int, ...] | None = None
    annotations: tuple[tuple[float, float, str], ...] = ()

    def __post_init__(self):
        if self.color_mode not in COLOR_MODES:
            raise UsageError(f"unknown colour mode {self.color_mode!r}; expected one of {COLOR_MODES}")
        if self.color_mode == "highlight" and not self.highlight_rules:
            raise DomainError("highlight mode needs at least one rule")
        if self.point_size <= 0 or self.width <= 0 or self.height <= 0:
            raise DomainError("point size and canvas dimensions must be positive")


def _length_bucket(length: int) -> str:
    return f"{LONG_LENGTH_BUCKET}+" if length >= LONG_LENGTH_BUCKET else str(length)


def point_colors(features: list[PasswordFeatures], spec: RenderSpec) -> tuple[list[str], list[tuple[str, str]]]:
    """Per-point hex colours plus legend entries (label, colour) for the
    spec's colour mode."""
    n = len(features)
    if spec.color_mode == "length":
        buckets = sorted(
            {min(f.length, LONG_LENGTH_BUCKET) for f in features}
        )
        color_of = {b: CATEGORICAL_PALETTE[i % len(CATEGORICAL_PALETTE)] for i, b in enumerate(buckets)}
        colors = [color_of[min(f.length, LONG_LENGTH_BUCKET)] for f in features]
        legend = [(_length_bucket(b), color_of[b]) for b in buckets]
        return colors, legend
    if spec.color_mode == "digit_ratio":
        colors = [ramp_red_green(f.digit_ratio) for f in features]
        return colors, [("0% digits", ramp_red_green(0.0)), ("100% digits", ramp_red_green(1.0))]
    if spec.color_mode == "digit_position":
        colors = [ramp_blue(f.digit_position_ratio) for f in features]
        return colors, [("digits at start", ramp_blue(0.0)), ("digits at end", ramp_blue(1.0))]
    if spec.color_mode == "highlight":
        colors = [BASE_COLOR] * n
        for rule in spec.highlight_rules:
            if len(rule.mask) != n:
                raise DomainError(f"highlight rule {rule.label!r} mask is not aligned with the points")
            for i, hit in enumerate(rule.mask):
                if hit:
                    colors[i] = rule.color
        legend = [("other", BASE_COLOR)] + [(r.label, r.color) for r in spec.highlight_rules]
        return colors, legend
    # cluster mode
    labels = spec.cluster_labels
    if labels is None or len(labels) != n:
        raise DomainError("cluster colour mode needs cluster_labels aligned with the points")
    ids = sorted(set(labels) - {-1})
    color_of = {c: CATEGORICAL_PALETTE[i % len(CATEGORICAL_PALETTE)] for i, c in enumerate(ids)}
    colors = [color_of.get(l, NOISE_COLOR) for l in labels]
    legend = [(f"cluster {c}", color_of[c]) for c in ids]
    if -1 in labels:
        legend.append(("noise", NOISE_COLOR))
    return colors, legend


def _fit_transform(coords: np.ndarray, width: int, height: int, margin: float = 40.0):
    """Map data coordinates into pixel space, preserving aspect ratio."""
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)
    scale = min((width - 2 * margin) / span[0], (height - 2 * margin) / span[1])
    mid_data = (lo + hi) / 2.0
    mid_px = np.array([width / 2.0, height / 2.0])

    def to_px(xy: np.ndarray) -> np.ndarray:
        offset = (xy - mid_data) * scale
        # flip y so larger data-y renders upwards
        return np.column_stack([mid_px[0] + offset[:, 0], mid_px[1] - offset[:, 1]])

    return to_px


def _svg_document(px: np.ndarray, colors: list[str], legend: list[tuple[str, str]],
                  spec: RenderSpec) -> bytes:
    out = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{spec.width}" height="{spec.height}" '
        f'viewBox="0 0 {spec.width} {spec.height}">'
    )
    out.append(f'<rect x="0" y="0" width="{spec.width}" height="{spec.height}" fill="{spec.background}"/>')
    out.append('<g class="points">')
    r = f"{spec.point_size:.2f}"
    for (x, y), color in zip(px, colors):
        out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r}" fill="{color}"/>')
    out.append("</g>")
    out.append('<g class="legend" font-family="sans-serif" font-size="12">')
    for i, (label, color) in enumerate(legend):
        y = 16 + 16 * i
        out.append(f'<rect x="8" y="{y - 10}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="22" y="{y}">{escape(label)}</text>')
    out.append("</g>")
    if spec.annotations:
        out.append('<g class="annotations" font-family="sans-serif" font-size="14" '
                   'font-weight="bold" text-anchor="middle">')
        for x, y, text in spec.annotations:
            out.append(f'<text x="{x:.2f}" y="{y:.2f}">{escape(text)}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out).encode("utf-8")


def render_scatter(e, features: list[PasswordFeatures], spec: RenderSpec, out: str | os.PathLike) -> None:
    """Write a scatter image of the embedding, coloured per the spec.

    The output format follows the file extension: .svg (deterministic,
    byte-stable) or .png. Every point is drawn exactly once; annotation
    positions are given in data coordinates and converted alongside the
    points.
    """
    coords = as_coords(e)
    if len(features) != coords.shape[0]:
        raise DomainError(
            f"feature table has {len(features)} rows but the embedding has {coords.shape[0]}"
        )
    out = os.fspath(out)
    ext = os.path.splitext(out)[1].lower()
    if ext not in (".svg", ".png"):
        raise UsageError(f"unknown image extension {ext!r}; expected .svg or .png")
    colors, legend = point_colors(features, spec)
    to_px = _fit_transform(coords, spec.width, spec.height)
    px = to_px(coords)
    ann_px = []
    for x, y, text in spec.annotations:
        p = to_px(np.array([[x, y]]))[0]
        ann_px.append((float(p[0]), float(p[1]), text))
    spec_px = RenderSpec(
        color_mode=spec.color_mode,
        highlight_rules=spec.highlight_rules,
        point_size=spec.point_size,
        width=spec.width,
        height=spec.height,
        annotate_majority_length=spec.annotate_majority_length,
        background=spec.background,
        cluster_labels=spec.cluster_labels,
        annotations=tuple(ann_px),
    )
    if ext == ".svg":
        atomic_write_bytes(out, _svg_document(px, colors, legend, spec_px))
        return
    _write_png(px, colors, legend, spec_px, out)


def _write_png(px: np.ndarray, colors: list[str], legend: list[tuple[str, str]],
               spec: RenderSpec, out: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.lines import Line2D

    fig, ax = plt.subplots(figsize=(spec.width / 100.0, spec.height / 100.0), dpi=100)
    ax.set_xlim(0, spec.width)
    ax.set_ylim(spec.height, 0)  # pixel coordinates, y down
    ax.set_facecolor(spec.background)
    ax.scatter(px[:, 0], px[:, 1], s=spec.point_size**2, c=colors, linewidths=0)
    handles = [Line2D([], [], marker="o", linestyle="", color=c, label=l) for l, c in legend]
    ax.legend(handles=handles, loc="upper left", fontsize=8)
    for x, y, text in spec.annotations:
        ax.annotate(text, (x, y), ha="center", fontweight="bold")
    ax.set_xticks([])
    ax.set_yticks([])
    import io

    buf = io.BytesIO()
    fig.savefig(buf, format="png")
    plt.close(fig)
    atomic_write_bytes(out, buf.getvalue())


# ---------------------------------------------------------------------------
# export bundle


@dataclass(frozen=True)
class ExportBundle:
    """Self-contained embedding + features document for the viewer."""

    schema_version: int
    corpus_name: str
    points: list[dict]
    provenance: dict
    clusters: dict | None = None

    def to_dict(self) -> dict:
        doc = {
            "schema_version": self.schema_version,
            "corpus": self.corpus_name,
            "provenance": self.provenance,
            "points": self.points,
        }
        if self.clusters is not None:
            doc["clusters"] = self.clusters
        return doc


def build_bundle(e, features: list[PasswordFeatures], c, privacy: bool = False,
                 max_points: int = DEFAULT_BUNDLE_CAP, full: bool = False, seed: int = 0,
                 clusters: dict | None = None) -> ExportBundle:
    """Assemble the export bundle, downsampling to `max_points` by default
    (seeded, count-weighted) because the viewer targets smaller sets; pass
    ``full=True`` to export everything. ``privacy=True`` omits password
    texts."""
    coords = as_coords(e)
    texts = [r.text for r in c.records]
    counts = np.array([r.count for r in c.records], dtype=np.float64)
    m = coords.shape[0]
    if len(features) != m or len(texts) != m:
        raise DomainError("embedding, features, and corpus are not aligned")

    if full or m <= max_points:
        keep = np.arange(m)
        downsampled = False
    else:
        rs = np.random.RandomState(seed)
        keep = np.sort(rs.choice(m, size=max_points, replace=False, p=counts / counts.sum()))
        downsampled = True

    points = []
    for i in keep.tolist():
        f = features[i]
        point = {
            "i": i,
            "x": float(coords[i, 0]),
            "y": float(coords[i, 1]),
            "length": f.length,
            "digit_ratio": f.digit_ratio,
            "digit_position_ratio": f.digit_position_ratio,
            "flags": f.flags(),
        }
        if not privacy:
            point["text"] = texts[i]
        points.append(point)

    params = getattr(e, "params", None)
    provenance = {
        "anchor_hash": getattr(e, "anchor_hash", b"").hex(),
        "tsne": params.to_dict() if params is not None else None,
        "kl_start": getattr(e, "kl_start", None),
        "kl_final": getattr(e, "kl_final", None),
        "total_points": m,
        "downsampled": downsampled,
        "privacy": privacy,
    }
    if clusters is not None and downsampled:
        clusters = None  # labels would no longer align with the points
    return ExportBundle(
        schema_version=SCHEMA_VERSION,
        corpus_name=c.name,
        points=points,
        provenance=provenance,
        clusters=clusters,
    )


def write_bundle(bundle: ExportBundle, path) -> None:
    atomic_write_bytes(path, canonical_json(bundle.to_dict()).encode("utf-8"))


def read_bundle(path) -> ExportBundle:
    import json

    with open(path, "rb") as fh:
        doc = json.loads(fh.read().decode("utf-8"))
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"{path}: bundle schema version {version!r} is not supported (expected {SCHEMA_VERSION})"
        )
    return ExportBundle(
        schema_version=version,
        corpus_name=doc["corpus"],
        points=doc["points"],
        provenance=doc["provenance"],
        clusters=doc.get("clusters"),
    )
