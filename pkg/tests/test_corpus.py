import pytest

from passviz.corpus import (
    Corpus,
    corpus_from_texts,
    corpus_stats,
    load_corpus,
    sample_corpus,
)
from passviz.errors import UsageError


def write(tmp_path, name, content, binary=False):
    path = tmp_path / name
    if binary:
        path.write_bytes(content)
    else:
        path.write_text(content, encoding="utf-8")
    return path


class TestLoadCorpus:
    def test_dedup_and_counts(self, tmp_path):
        path = write(tmp_path, "a.txt", "abc\nabc\nxyz\n")
        c = load_corpus(path)
        assert [(r.text, r.count, r.index) for r in c.records] == [("abc", 2, 0), ("xyz", 1, 1)]
        assert c.raw_total == 3 and c.skipped == 0

    def test_user_colon_password_extraction(self, tmp_path):
        path = write(tmp_path, "a.txt", "u1:hello123\nu2:hello123\n")
        c = load_corpus(path, format="user-colon-password")
        assert len(c) == 1
        assert c.records[0].text == "hello123" and c.records[0].count == 2

    def test_colon_in_password_splits_on_first(self, tmp_path):
        path = write(tmp_path, "a.txt", "user:pa:ss\n")
        c = load_corpus(path, format="user-colon-password")
        assert c.records[0].text == "pa:ss"

    def test_line_without_colon_is_skipped(self, tmp_path):
        path = write(tmp_path, "a.txt", "nocolon\nu:x\n")
        c = load_corpus(path, format="user-colon-password")
        assert c.skipped == 1 and len(c) == 1

    def test_empty_lines_are_skipped_and_counted(self, tmp_path):
        path = write(tmp_path, "a.txt", "abc\n\nxyz\n")
        c = load_corpus(path)
        assert c.raw_total == 3 and c.skipped == 1 and len(c) == 2

    def test_no_trailing_newline(self, tmp_path):
        path = write(tmp_path, "a.txt", "abc\nxyz")
        c = load_corpus(path)
        assert c.raw_total == 2 and len(c) == 2

    def test_crlf_terminators(self, tmp_path):
        path = write(tmp_path, "a.txt", b"abc\r\nxy z \r\n", binary=True)
        c = load_corpus(path)
        assert [r.text for r in c.records] == ["abc", "xy z "]  # spaces kept

    def test_undecodable_lines_counted_not_repaired(self, tmp_path):
        path = write(tmp_path, "a.txt", b"good\n\xff\xfe\nalso\n", binary=True)
        c = load_corpus(path)
        assert c.skipped == 1
        assert [r.text for r in c.records] == ["good", "also"]

    def test_conservation_invariant(self, tmp_path):
        path = write(tmp_path, "a.txt", b"a\na\nb\n\n\xff\nc\n", binary=True)
        c = load_corpus(path)
        assert sum(r.count for r in c.records) + c.skipped == c.raw_total

    def test_case_sensitive_unicode_dedup(self, tmp_path):
        path = write(tmp_path, "a.txt", "Pass\npass\npäss\npäss\n")
        c = load_corpus(path)
        assert [r.text for r in c.records] == ["Pass", "pass", "päss"]
        assert c.records[2].count == 2

    def test_unknown_format_is_usage_error(self, tmp_path):
        path = write(tmp_path, "a.txt", "x\n")
        with pytest.raises(UsageError):
            load_corpus(path, format="csv")

    def test_missing_file_is_os_error(self, tmp_path):
        with pytest.raises(OSError):
            load_corpus(tmp_path / "absent.txt")

    def test_determinism(self, tmp_path):
        path = write(tmp_path, "a.txt", "b\na\nc\nb\n")
        assert load_corpus(path) == load_corpus(path)

    def test_idempotence_no_duplicates(self, tmp_path):
        path = write(tmp_path, "a.txt", "a\nb\nc\n")
        assert all(r.count == 1 for r in load_corpus(path).records)

    def test_first_appearance_order(self, tmp_path):
        path = write(tmp_path, "a.txt", "zz\naa\nmm\n")
        assert [r.text for r in load_corpus(path).records] == ["zz", "aa", "mm"]


class TestStats:
    def test_histogram(self):
        c = corpus_from_texts(["abc", "wxyz"])
        s = corpus_stats(c)
        assert s.length_histogram == {3: 1, 4: 1}
        assert (s.min_length, s.max_length) == (3, 4)

    def test_empty_corpus(self):
        c = Corpus(name="none", records=(), raw_total=0, skipped=0)
        s = corpus_stats(c)
        assert s.length_histogram == {} and s.unique == 0
        assert s.min_length is None and s.max_length is None

    def test_uniform_synthetic(self):
        import numpy as np

        rs = np.random.RandomState(5)
        alphabet = list("abcdefghijklmnopqrstuvwxyz0123456789")
        texts = {"".join(rs.choice(alphabet, size=8)) for _ in range(1200)}
        c = corpus_from_texts(sorted(texts)[:1000])
        s = corpus_stats(c)
        assert s.length_histogram == {8: 1000}
        assert sum(s.length_histogram.values()) == len(c)


class TestSample:
    def test_full_sample_keeps_everything(self):
        c = corpus_from_texts([f"pw{i:03d}" for i in range(10)])
        s = sample_corpus(c, 10, seed=3)
        assert sorted(r.text for r in s.records) == sorted(r.text for r in c.records)
        assert [r.index for r in s.records] == list(range(10))

    def test_deterministic(self):
        c = corpus_from_texts([f"pw{i:03d}" for i in range(10)])
        assert sample_corpus(c, 3, seed=42) == sample_corpus(c, 3, seed=42)

    def test_different_seeds_differ(self):
        c = corpus_from_texts([f"pw{i:04d}" for i in range(100)])
        a = {r.text for r in sample_corpus(c, 30, seed=1).records}
        b = {r.text for r in sample_corpus(c, 30, seed=2).records}
        assert a != b

    def test_k_larger_than_corpus_clamps(self):
        c = corpus_from_texts(["a1", "b2", "c3"])
        assert len(sample_corpus(c, 50, seed=0)) == 3
