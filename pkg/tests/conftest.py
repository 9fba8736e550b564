import math

import numpy as np
import pytest

from app.models import (
    BinaryShift,
    BlockSource,
    CirclePoint,
    CircleRotation,
    ConstantSource,
    DoublingMap,
    ProductPoint,
    ProductSystem,
    ShiftPoint,
)

PHI = (math.sqrt(5.0) - 1.0) / 2.0


@pytest.fixture
def rotation():
    return CircleRotation(alpha=PHI)


@pytest.fixture
def doubling():
    return DoublingMap()


@pytest.fixture
def constant_shift():
    return BinaryShift(source=ConstantSource(symbol=0))


@pytest.fixture
def block_shift():
    return BinaryShift(source=BlockSource(base=2))


@pytest.fixture
def product(rotation, constant_shift):
    return ProductSystem(left=rotation, right=constant_shift)


@pytest.fixture
def product_point():
    return ProductPoint(left=CirclePoint(position=0.1), right=ShiftPoint(source=ConstantSource()))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
