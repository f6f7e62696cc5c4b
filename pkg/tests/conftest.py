import numpy as np
import pytest

from vidconsist.denoiser import ConditioningEmbedding, init_model
from vidconsist.schedule import build_schedule


@pytest.fixture
def paper_sched():
    return build_schedule(1000, 8.5e-4, 1.2e-2)


@pytest.fixture
def small_sched():
    return build_schedule(10, 8.5e-4, 1.2e-2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_emb(seed, h_dim=3, c_dim=2):
    r = np.random.default_rng(seed)
    return ConditioningEmbedding(r.standard_normal(h_dim), r.standard_normal(c_dim))


@pytest.fixture
def tiny_model():
    return init_model((3, 2, 2), 5, (3, 2), seed=7, t_dim=4, T=10)


@pytest.fixture
def emb():
    return make_emb(99)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
