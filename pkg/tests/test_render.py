import xml.etree.ElementTree as ET

import numpy as np
import pytest

from passviz.corpus import corpus_from_texts
from passviz.errors import DomainError, SchemaVersionError, UsageError
from passviz.features import extract_features, feature_table
from passviz.render import (
    HighlightRule,
    RenderSpec,
    build_bundle,
    point_colors,
    ramp_blue,
    ramp_red_green,
    read_bundle,
    render_scatter,
    write_bundle,
)

SVG_NS = "{http://www.w3.org/2000/svg}"


def svg_circles(path):
    root = ET.parse(path).getroot()
    return root.findall(f".//{SVG_NS}circle")


def svg_legend_texts(path):
    root = ET.parse(path).getroot()
    legend = [g for g in root.findall(f"{SVG_NS}g") if g.get("class") == "legend"]
    return [t.text for t in legend[0].findall(f"{SVG_NS}text")]


@pytest.fixture
def three_points(tmp_path):
    coords = np.array([[0.0, 0.0], [4.0, 1.0], [2.0, 5.0]])
    texts = ["abc", "wxyz1", "hello123"]
    return coords, [extract_features(t) for t in texts], texts


class TestScatter:
    def test_length_mode_structure(self, three_points, tmp_path):
        coords, feats, _ = three_points
        out = tmp_path / "len.svg"
        render_scatter(coords, feats, RenderSpec(color_mode="length"), out)
        assert out.exists()
        assert len(svg_circles(out)) == 3  # glyphs only; the legend uses rects
        root = ET.parse(out).getroot()
        points = [g for g in root.findall(f"{SVG_NS}g") if g.get("class") == "points"][0]
        assert len(points.findall(f"{SVG_NS}circle")) == 3
        assert set(svg_legend_texts(out)) == {"3", "5", "8"}

    def test_every_point_drawn_once_in_every_mode(self, three_points, tmp_path):
        coords, feats, texts = three_points
        for mode in ("length", "digit_ratio", "digit_position"):
            out = tmp_path / f"{mode}.svg"
            render_scatter(coords, feats, RenderSpec(color_mode=mode), out)
            root = ET.parse(out).getroot()
            points = [g for g in root.findall(f"{SVG_NS}g") if g.get("class") == "points"][0]
            assert len(points.findall(f"{SVG_NS}circle")) == 3

    def test_deterministic_bytes(self, three_points, tmp_path):
        coords, feats, _ = three_points
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        render_scatter(coords, feats, RenderSpec(color_mode="digit_ratio"), a)
        render_scatter(coords, feats, RenderSpec(color_mode="digit_ratio"), b)
        assert a.read_bytes() == b.read_bytes()

    def test_highlight_rule_precedence(self, tmp_path):
        texts = ["password1", "apple", "sample1"]
        coords = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        feats = [extract_features(t) for t in texts]
        second_a = tuple(len(t) > 1 and t[1] == "a" for t in texts)
        last_1 = tuple(t.endswith("1") for t in texts)
        both = tuple(a and b for a, b in zip(second_a, last_1))
        spec = RenderSpec(
            color_mode="highlight",
            highlight_rules=(
                HighlightRule("second letter a", "#0000ff", second_a),
                HighlightRule("last letter 1", "#ffc0cb", last_1),
                HighlightRule("both", "#800080", both),
            ),
        )
        colors, legend = point_colors(feats, spec)
        # password1 and sample1: 'a' second AND end '1' -> the "both" rule
        # wins by list order; apple matches neither (its *first* letter is
        # 'a', second is 'p') and keeps the base colour
        assert colors == ["#800080", "#c8c8c8", "#800080"]
        assert [l for l, _ in legend] == ["other", "second letter a", "last letter 1", "both"]
        out = tmp_path / "hl.svg"
        render_scatter(coords, feats, spec, out)
        fills = [c.get("fill") for c in svg_circles(out)]
        assert fills[:3] == ["#800080", "#c8c8c8", "#800080"]

    def test_digit_ratio_endpoints(self, tmp_path):
        texts = ["0000", "aaaa"]
        coords = np.array([[0.0, 0.0], [1.0, 1.0]])
        feats = [extract_features(t) for t in texts]
        colors, _ = point_colors(feats, RenderSpec(color_mode="digit_ratio"))
        assert colors[0] == ramp_red_green(1.0)
        assert colors[1] == ramp_red_green(0.0)
        assert colors[0] != colors[1]

    def test_ramps_are_ordered(self):
        # dark red -> orange -> dark green; light blue -> dark blue
        assert ramp_red_green(0.0) != ramp_red_green(0.5) != ramp_red_green(1.0)
        assert ramp_blue(0.0) == "#add8e6" and ramp_blue(1.0) == "#00008b"

    def test_cluster_mode_with_noise(self, three_points, tmp_path):
        coords, feats, _ = three_points
        spec = RenderSpec(color_mode="cluster", cluster_labels=(0, 1, -1))
        out = tmp_path / "cl.svg"
        render_scatter(coords, feats, spec, out)
        assert "noise" in svg_legend_texts(out)

    def test_annotations_rendered(self, three_points, tmp_path):
        coords, feats, _ = three_points
        spec = RenderSpec(color_mode="length", annotations=((2.0, 2.0, "8"),))
        out = tmp_path / "ann.svg"
        render_scatter(coords, feats, spec, out)
        root = ET.parse(out).getroot()
        ann = [g for g in root.findall(f"{SVG_NS}g") if g.get("class") == "annotations"]
        assert ann and ann[0].findall(f"{SVG_NS}text")[0].text == "8"

    def test_png_output(self, three_points, tmp_path):
        coords, feats, _ = three_points
        out = tmp_path / "img.png"
        render_scatter(coords, feats, RenderSpec(color_mode="length"), out)
        assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_unknown_extension_rejected(self, three_points, tmp_path):
        coords, feats, _ = three_points
        with pytest.raises(UsageError):
            render_scatter(coords, feats, RenderSpec(), tmp_path / "img.bmp")

    def test_misaligned_features_rejected(self, three_points, tmp_path):
        coords, feats, _ = three_points
        with pytest.raises(DomainError):
            render_scatter(coords, feats[:2], RenderSpec(), tmp_path / "img.svg")

    def test_highlight_mode_requires_rules(self):
        with pytest.raises(DomainError):
            RenderSpec(color_mode="highlight")

    def test_escaping_in_legend(self, tmp_path):
        coords = np.array([[0.0, 0.0], [1.0, 1.0]])
        texts = ["a<b&c", "plain"]
        feats = [extract_features(t) for t in texts]
        rule = HighlightRule('contains "<&"', "#ff0000", (True, False))
        out = tmp_path / "esc.svg"
        render_scatter(coords, feats, RenderSpec(color_mode="highlight", highlight_rules=(rule,)), out)
        ET.parse(out)  # parses despite special characters


class TestBundle:
    def make(self, n=100, privacy=False, **kwargs):
        rs = np.random.RandomState(0)
        from oracles import random_password

        texts = sorted({random_password(rs) for _ in range(n * 2)})[:n]
        c = corpus_from_texts(texts, name="bundletest")
        coords = rs.randn(n, 2).astype(np.float32)
        table = feature_table(c)
        return build_bundle(coords, table, c, privacy=privacy, **kwargs), c

    def test_round_trip_byte_equal(self, tmp_path):
        bundle, _ = self.make(100)
        p1, p2 = tmp_path / "b1.json", tmp_path / "b2.json"
        write_bundle(bundle, p1)
        write_bundle(read_bundle(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_privacy_omits_texts(self):
        bundle, _ = self.make(20, privacy=True)
        assert all("text" not in p for p in bundle.points)
        assert bundle.provenance["privacy"] is True

    def test_points_aligned_and_flagged(self):
        bundle, c = self.make(30)
        assert len(bundle.points) == 30
        for p in bundle.points:
            record = c.records[p["i"]]
            assert p["text"] == record.text
            assert p["length"] == len(record.text)
            assert set(p["flags"]) == {
                "year_1900s", "year_2000s", "numeric_sequence", "keyboard_sequence",
            }

    def test_downsampling_cap(self):
        bundle, _ = self.make(60, max_points=25)
        assert len(bundle.points) == 25
        assert bundle.provenance["downsampled"] is True
        indices = [p["i"] for p in bundle.points]
        assert indices == sorted(indices)

    def test_full_flag_disables_cap(self):
        bundle, _ = self.make(60, max_points=25, full=True)
        assert len(bundle.points) == 60

    def test_schema_version_enforced(self, tmp_path):
        bundle, _ = self.make(5)
        path = tmp_path / "b.json"
        write_bundle(bundle, path)
        doc = path.read_text().replace('"schema_version":1', '"schema_version":99')
        path.write_text(doc)
        with pytest.raises(SchemaVersionError):
            read_bundle(path)
