import numpy as np
import pytest

from ustatlab.grids import Grid
from ustatlab.potentials import ModelSpec, ProductPair, QuadraticPair, TripleProduct, quadratic


@pytest.fixture
def grid():
    return Grid(-8.0, 8.0, 801)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def gaussian_model():
    return ModelSpec(1, quadratic(0.5), [QuadraticPair(0.5)])


@pytest.fixture
def free_model():
    return ModelSpec(1, quadratic(0.5), [])


@pytest.fixture
def triple_model():
    return ModelSpec(1, quadratic(0.5), [TripleProduct(0.1)])


@pytest.fixture
def product_model():
    return ModelSpec(1, quadratic(0.0), [ProductPair(1.0)])


_VERDICTS = {}


@pytest.fixture
def criterion():
    """record(k, ok, detail): store and print one verdict line per acceptance criterion."""
    def record(k, ok, detail=""):
        line = f"CRITERION {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS[k] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[k])
