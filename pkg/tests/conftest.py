import pytest

from src.array_model import AngleGrid, ArrayGeometry, build_dictionary


@pytest.fixture
def ula15():
    return ArrayGeometry(n_sensors=15, spacing=0.5)


@pytest.fixture
def grid181():
    return AngleGrid()


@pytest.fixture
def dictionary15(ula15, grid181):
    return build_dictionary(ula15, grid181)


@pytest.fixture
def coarse_grid():
    """Grade de 19 pontos, -90° a 90° com passo de 10°."""
    return AngleGrid(step_deg=10.0)
