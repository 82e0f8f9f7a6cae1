import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for `import oracles`

from oracles import random_password


@pytest.fixture
def tiny_corpus_file(tmp_path):
    path = tmp_path / "tiny.txt"
    path.write_text("hello123\npassword1\nhello123\nqwerty99\n", encoding="utf-8")
    return path


def write_synthetic_corpus(path, n: int, seed: int) -> int:
    """Distinct password-shaped strings, one per line; returns the count."""
    rs = np.random.RandomState(seed)
    seen = set()
    while len(seen) < n:
        seen.add(random_password(rs))
    lines = sorted(seen)
    rs.shuffle(lines)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return len(lines)


@pytest.fixture(scope="session")
def blob_data():
    """3 well-separated Gaussian blobs of 100 points each in 20-d
    (separation ~10x the blob radius)."""
    rs = np.random.RandomState(7)
    blobs = []
    for c in range(3):
        center = np.zeros(20)
        center[c] = 45.0
        blobs.append(center + rs.randn(100, 20))
    X = np.vstack(blobs)
    labels = np.repeat(np.arange(3), 100)
    return X, labels
