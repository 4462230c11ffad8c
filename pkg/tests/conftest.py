import numpy as np
import pytest

from rvqstream.bench import SyntheticCorpusSpec, gen_corpus
from rvqstream.rvq import Codebook, RvqStack, TrainConfig, train_codebooks

# acceptance tests append (criterion, passed, detail) here
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


def make_stack(k=8, dim=4, depth=16, seed=0, scale_decay=0.5, pin_zero=True):
    """Hand-built stack with random entries; acoustic layers shrink geometrically."""
    rng = np.random.default_rng(seed)
    layers = []
    for i in range(depth):
        entries = rng.standard_normal((k, dim)) * (scale_decay ** i) * 3.0
        if i > 0 and pin_zero:
            entries[0] = 0.0
        layers.append(Codebook.from_entries(entries, layer_index=i, pinned_zero=pin_zero and i > 0))
    return RvqStack(layers)


@pytest.fixture(scope="session")
def small_corpus():
    return gen_corpus(SyntheticCorpusSpec(frames=600, dim=6, components=5, seed=11, sigma=0.7)).frames


@pytest.fixture(scope="session")
def trained_stack(small_corpus):
    cfg = TrainConfig(codebook_size=16, dim=6, depth=16, epochs=8, seed=5)
    return train_codebooks(small_corpus, cfg)
