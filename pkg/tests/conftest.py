# Запуск: pytest tests/ -s
# Тяжелые ансамбли: pytest tests/ --heavy

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "path_transport"))

from src.geometry import EuclideanModel, HyperbolicModel, SphereModel, ou_potential  # noqa: E402
from src.stochastic import EnsembleSpec  # noqa: E402

SEED = 20240917


def pytest_addoption(parser):
    parser.addoption(
        "--heavy",
        action="store_true",
        default=False,
        help="Запускать тесты с большими ансамблями путей",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--heavy"):
        return
    skip = pytest.mark.skip(reason="Нужен флаг --heavy")
    for item in items:
        if "heavy" in item.keywords:
            item.add_marker(skip)


def pytest_configure(config):
    config.addinivalue_line("markers", "heavy: большие ансамбли путей")


@pytest.fixture
def seed():
    return SEED


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture
def flat_model():
    return EuclideanModel(2)


@pytest.fixture
def ou_model():
    return EuclideanModel(2, drift=ou_potential(2, 0.7))


@pytest.fixture
def hyperbolic_model():
    return HyperbolicModel(2, curvature=1.0)


@pytest.fixture
def sphere_model():
    return SphereModel(2, radius=1.0)


@pytest.fixture
def small_spec():
    return EnsembleSpec(horizon=1.0, n_steps=32, n_paths=64, seed=SEED)
