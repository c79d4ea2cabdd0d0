import numpy as np
import pytest

from drmanifold.imaging import preprocess
from drmanifold.store import FeatureStore
from drmanifold.synthetic import fundus_image, write_corpus

SMALL_H, SMALL_W = 32, 48


def small_store(per_class=20, seed=11, prep="GRH"):
    """A synthetic feature store at a reduced canvas, built in memory."""
    rng = np.random.default_rng(seed)
    imgs, labels = [], []
    for label in range(5):
        for _ in range(per_class):
            rgb = fundus_image(label, rng, SMALL_H, SMALL_W)
            imgs.append(preprocess(rgb, prep, SMALL_H, SMALL_W))
            labels.append(label)
    n = len(labels)
    return FeatureStore(np.stack(imgs), np.array(labels), np.arange(n), tuple(f"img{i}" for i in range(n)), prep)


@pytest.fixture(scope="session")
def store_grh():
    return small_store()


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """Twenty images per class on disk at a reduced canvas, plus its manifest."""
    root = tmp_path_factory.mktemp("corpus")
    return write_corpus(root, per_class=20, seed=4, height=SMALL_H, width=SMALL_W)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
