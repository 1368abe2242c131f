import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(autouse=True)
def single_worker(monkeypatch):
    monkeypatch.setenv("RIESZLAB_THREADS", "1")
    monkeypatch.delenv("RIESZLAB_MAX_PANELS", raising=False)
