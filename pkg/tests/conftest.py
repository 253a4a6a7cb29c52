import numpy as np
import pytest

from quasiflow.geometry import CircleSpec, Container, EllipseSpec, build_reference_curve


@pytest.fixture
def unit_disk():
    return Container(1.0)


@pytest.fixture
def circle04():
    return build_reference_curve(CircleSpec(0.4), Container(1.0), n=128)


@pytest.fixture
def circle05():
    return build_reference_curve(CircleSpec(0.5), Container(1.0), n=128)


@pytest.fixture
def ellipse():
    return build_reference_curve(EllipseSpec(0.5, 0.4), Container(1.0), n=256)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
