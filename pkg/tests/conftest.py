import numpy as np
import pytest

from scrub.dataio import SynthConfig, split_dataset, synth_generate


@pytest.fixture(scope="session")
def small_pair():
    """Two split synthetic domains, d=16, 3+3 planted directions."""
    cfg = SynthConfig(dim=16, n_per_domain=1500, seed=11)
    datasets, truth = synth_generate(cfg, ["en", "fr"])
    return [split_dataset(ds, seed=5) for ds in datasets], truth


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1][1:].rstrip(":"))):
            terminalreporter.write_line(line)
