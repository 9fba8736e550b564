import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import approx

from app.models import (
    BinaryShift,
    BlockSource,
    CirclePoint,
    CircleRotation,
    ConstantSource,
    DoublingMap,
    ExplicitSource,
    PeriodicSource,
    ProductPoint,
    ProductSystem,
    ShiftPoint,
    SturmianSource,
)
from app.services import systems_service
from app.services.systems_service import SystemsService
from app.services.systems_service import NAMED_ALPHAS, SHIFT_DEPTH, parse_alpha
from app.utils.errors import ConfigError, DomainError, SystemMismatchError

from conftest import PHI

FIBONACCI_ALPHA = (3.0 - math.sqrt(5.0)) / 2.0


def word(source, start, stop):
    return "".join(str(int(s)) for s in systems_service.symbols(source, start, stop))


# -- parsing ---------------------------------------------------------------

@pytest.mark.parametrize(
    "text, expected",
    [
        ("rotation:phi", CircleRotation(alpha=PHI)),
        ("rotation:sqrt2", CircleRotation(alpha=math.sqrt(2) - 1)),
        ("rotation:0.25", CircleRotation(alpha=0.25)),
        ("doubling", DoublingMap()),
        ("shift", BinaryShift()),
        ("shift:constant:1", BinaryShift(source=ConstantSource(symbol=1))),
        ("shift:periodic:011", BinaryShift(source=PeriodicSource(word="011"))),
        ("shift:block", BinaryShift(source=BlockSource(base=2))),
        ("shift:block:3", BinaryShift(source=BlockSource(base=3))),
        ("shift:sturmian:phi", BinaryShift(source=SturmianSource(alpha=PHI))),
    ],
)
def test_parse_system_shorthands(text, expected):
    assert systems_service.parse_system(text) == expected


def test_parse_system_json():
    spec = {"kind": "product", "left": {"kind": "rotation", "alpha": 0.3}, "right": {"kind": "doubling"}}
    sys = systems_service.parse_system(json.dumps(spec))
    assert sys == ProductSystem(left=CircleRotation(alpha=0.3), right=DoublingMap())


@pytest.mark.parametrize("text", ["torus:2", "rotation:abc", "rotation:1.5", "shift:foo", "{\"kind\": \"baker\"}", "{"])
def test_parse_system_errors(text):
    with pytest.raises(ConfigError):
        systems_service.parse_system(text)


def test_named_alphas():
    assert parse_alpha("phi") == NAMED_ALPHAS["phi"] == PHI
    assert parse_alpha(" SQRT2 ") == math.sqrt(2) - 1
    assert parse_alpha(0.5) == 0.5


def test_parse_point(rotation, constant_shift):
    assert systems_service.parse_point(rotation, "0.25") == CirclePoint(position=0.25)
    assert systems_service.parse_point(rotation, "1.25") == CirclePoint(position=0.25)
    assert systems_service.parse_point(constant_shift, "3") == ShiftPoint(source=ConstantSource(), offset=3)
    with pytest.raises(ConfigError):
        systems_service.parse_point(constant_shift, "-1")
    with pytest.raises(SystemMismatchError):
        systems_service.parse_point(rotation, json.dumps({"kind": "shift", "source": {"kind": "constant"}}))


# -- symbol sources ----------------------------------------------------------

def test_sturmian_fixture_is_the_fibonacci_word():
    source = SturmianSource(alpha=FIBONACCI_ALPHA, x0=FIBONACCI_ALPHA)
    assert word(source, 0, 13) == "0100101001001"


def test_periodic_and_constant_sources():
    assert word(PeriodicSource(word="011"), 0, 7) == "0110110"
    assert word(PeriodicSource(word="011"), 2, 5) == "101"
    assert word(ConstantSource(symbol=1), 5, 9) == "1111"


def test_block_source_blocks():
    # blocks of length 1, 2, 4, 8 carrying 0, 1, 0, 1
    assert word(BlockSource(base=2), 0, 15) == "011000011111111"
    assert word(BlockSource(base=3), 0, 13) == "0111000000000"


def test_explicit_source_extensions():
    assert word(ExplicitSource(word="101", extension="zeros"), 0, 6) == "101000"
    assert word(ExplicitSource(word="101", extension="ones"), 0, 6) == "101111"
    assert word(ExplicitSource(word="10", extension="repeat"), 0, 6) == "101010"
    random_source = ExplicitSource(word="1", extension="random", seed=7)
    assert word(random_source, 0, 5000) == word(random_source, 0, 5000)
    assert word(random_source, 4000, 4200) == word(random_source, 0, 5000)[4000:4200]
    tail = systems_service.symbols(random_source, 1, 20001)
    assert 0.45 < tail.mean() < 0.55


def test_explicit_repeat_needs_word():
    with pytest.raises(ValueError):
        ExplicitSource(word="", extension="repeat")


# -- stepping ------------------------------------------------------------------

def test_rotation_orbit(rotation):
    orbit = systems_service.orbit_batch(rotation, CirclePoint(position=0.0), 0, 4)
    assert orbit == approx([0.0, PHI, (2 * PHI) % 1, (3 * PHI) % 1], abs=1e-15)


def test_rotation_angles_do_not_drift(rotation):
    k = 10 ** 7
    orbit = systems_service.orbit_batch(rotation, CirclePoint(position=0.0), k, k + 1)
    expected = float((Fraction(PHI) * k) % 1)
    assert orbit[0] == approx(expected, abs=1e-12)


def test_doubling_one_third_alternates(doubling):
    orbit = systems_service.orbit_batch(doubling, CirclePoint(position=1 / 3), 0, 20)
    expected = [1 / 3 if k % 2 == 0 else 2 / 3 for k in range(20)]
    assert orbit == approx(expected, abs=1e-9)


def test_doubling_does_not_collapse_with_random_tail(doubling):
    p = CirclePoint(position=0.3, tail_seed=11)
    orbit = systems_service.orbit_batch(doubling, p, 0, 5000)
    assert orbit[1000:].max() > 0.9
    assert orbit[1000:].min() < 0.1
    assert orbit[1] == approx(0.6, abs=1e-12)


def test_advance_and_offsets(rotation, constant_shift, product, product_point):
    p = systems_service.advance(rotation, CirclePoint(position=0.1), 5)
    assert p.offset == 5
    assert systems_service.coordinate(rotation, p) == approx((0.1 + 5 * PHI) % 1, abs=1e-14)
    q = systems_service.step(constant_shift, ShiftPoint(source=ConstantSource()))
    assert q.offset == 1
    r = systems_service.advance(product, product_point, 3)
    assert r.left.offset == 3 and r.right.offset == 3
    with pytest.raises(DomainError):
        systems_service.advance(rotation, p, -1)


def test_orbit_segment_matches_batch(rotation):
    x = CirclePoint(position=0.2)
    segment = systems_service.orbit_segment(rotation, x, 2, 6)
    batch = systems_service.orbit_batch(rotation, x, 2, 6)
    assert [systems_service.coordinate(rotation, p) for p in segment] == approx(batch.tolist(), abs=1e-15)


@pytest.mark.parametrize("fixture", ["rotation", "doubling", "block_shift", "product"])
def test_orbits_are_reproducible(fixture, request):
    sys = request.getfixturevalue(fixture)
    x = systems_service.sample_point(sys, np.random.default_rng(11))
    first = systems_service.orbit_segment(sys, x, 3, 40)
    again = SystemsService().orbit_segment(sys, x, 3, 40)
    assert first == again
    a = systems_service.orbit_batch(sys, x, 0, 5000)
    b = SystemsService().orbit_batch(sys, x, 0, 5000)
    if isinstance(a, tuple):
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    else:
        assert np.array_equal(a, b)


def test_head_symbol(block_shift):
    p = ShiftPoint(source=BlockSource(), offset=1)
    assert systems_service.head_symbol(block_shift, p) == 1


def test_mismatch_is_rejected(rotation, constant_shift):
    with pytest.raises(SystemMismatchError):
        systems_service.orbit_batch(rotation, ShiftPoint(source=ConstantSource()), 0, 3)
    with pytest.raises(SystemMismatchError):
        systems_service.distance(constant_shift, CirclePoint(), CirclePoint())


# -- metric ---------------------------------------------------------------------

def test_circle_distance_is_scaled_arc(rotation):
    d = systems_service.distance(rotation, CirclePoint(position=0.0), CirclePoint(position=0.25))
    assert d == approx(0.5)
    d = systems_service.distance(rotation, CirclePoint(position=0.05), CirclePoint(position=0.95))
    assert d == approx(0.2)


def test_shift_distance_first_disagreement(constant_shift):
    x = ShiftPoint(source=ConstantSource(symbol=0))
    y = ShiftPoint(source=ExplicitSource(word="0001"))
    assert systems_service.distance(constant_shift, x, y) == 0.125
    assert systems_service.distance(constant_shift, x, ShiftPoint(source=ConstantSource(symbol=1))) == 1.0
    assert systems_service.distance(constant_shift, x, x) == 0.0


def test_product_distance_is_max(product):
    x = ProductPoint(left=CirclePoint(position=0.0), right=ShiftPoint(source=ConstantSource()))
    y = ProductPoint(left=CirclePoint(position=0.1), right=ShiftPoint(source=ExplicitSource(word="01")))
    assert systems_service.distance(product, x, y) == approx(0.5)


def test_pair_distance_trace_rotation_is_constant(rotation):
    t = systems_service.pair_distance_trace(rotation, CirclePoint(position=0.0), CirclePoint(position=0.25), 1000)
    assert t.bound == 1.0
    assert np.allclose(t.values, 0.5, atol=1e-12)


def test_pairwise_distance_shape(doubling):
    a = systems_service.orbit_batch(doubling, CirclePoint(position=0.1), 0, 5)
    b = systems_service.orbit_batch(doubling, CirclePoint(position=0.7), 0, 3)
    assert systems_service.pairwise_distance(doubling, a, b).shape == (5, 3)


def test_diameter_bound(rotation, constant_shift, product):
    assert systems_service.diameter_bound(rotation) == 1.0
    assert systems_service.diameter_bound(constant_shift) == 1.0
    assert systems_service.diameter_bound(product) == 1.0


@settings(deadline=None, max_examples=50)
@given(st.integers(min_value=0, max_value=2 ** 32), st.integers(min_value=1, max_value=40))
def test_shift_distance_is_ultrametric(seed, depth):
    rng = np.random.default_rng(seed)
    sys = BinaryShift()
    x = systems_service.sample_point(sys, rng)
    y = systems_service.perturb(sys, x, 2.0 ** -depth, rng)
    z = systems_service.sample_point(sys, rng) if depth % 2 else systems_service.perturb(sys, y, 2.0 ** -(depth // 2), rng)
    for p, q, r in [(x, y, z), (y, z, x), (z, x, y)]:
        assert systems_service.distance(sys, p, r) <= max(
            systems_service.distance(sys, p, q), systems_service.distance(sys, q, r)
        )


@settings(deadline=None)
@given(st.floats(min_value=0.0, max_value=1.0, exclude_max=True), st.floats(min_value=0.0, max_value=1.0, exclude_max=True))
def test_rotation_is_an_isometry(p, q):
    sys = CircleRotation(alpha=PHI)
    x, y = CirclePoint(position=p), CirclePoint(position=q)
    d = systems_service.distance(sys, x, y)
    for k in (1, 7, 1000):
        moved = systems_service.distance(sys, systems_service.advance(sys, x, k), systems_service.advance(sys, y, k))
        assert moved == approx(d, abs=1e-12)


# -- observables -----------------------------------------------------------------

def test_named_observables(rotation, block_shift):
    cos = systems_service.observable(rotation, "cos")
    t = systems_service.observable_trace(rotation, CirclePoint(position=0.0), cos, 0, 3)
    assert t.values == approx([1.0, math.cos(2 * math.pi * PHI), math.cos(4 * math.pi * PHI)])
    head = systems_service.observable(block_shift, "head")
    t = systems_service.observable_trace(block_shift, ShiftPoint(source=BlockSource()), head, 0, 7)
    assert t.values.tolist() == [0, 1, 1, 0, 0, 0, 0]
    with pytest.raises(ConfigError):
        systems_service.observable(rotation, "head")


def test_distance_observable(rotation):
    f = systems_service.distance_observable(rotation, CirclePoint(position=0.5))
    batch = np.array([0.5, 0.25, 0.0])
    assert f(batch) == approx([0.0, 0.5, 1.0])


# -- sampling --------------------------------------------------------------------

@pytest.mark.parametrize("fixture", ["rotation", "doubling", "constant_shift", "product"])
def test_sample_point_kind(fixture, request, rng):
    sys = request.getfixturevalue(fixture)
    p = systems_service.sample_point(sys, rng)
    systems_service._check_point(sys, p)


@settings(deadline=None, max_examples=50)
@given(st.floats(min_value=1e-6, max_value=0.5), st.integers(min_value=0, max_value=2 ** 32))
def test_perturb_circle_hits_target(target, seed):
    rng = np.random.default_rng(seed)
    sys = CircleRotation(alpha=PHI)
    x = systems_service.sample_point(sys, rng)
    y = systems_service.perturb(sys, x, target, rng)
    assert systems_service.distance(sys, x, y) == approx(target, abs=1e-12)


@settings(deadline=None, max_examples=50)
@given(st.floats(min_value=2.0 ** -63, max_value=1.0), st.integers(min_value=0, max_value=2 ** 32))
def test_perturb_shift_stays_inside(target, seed):
    rng = np.random.default_rng(seed)
    sys = BinaryShift()
    x = systems_service.sample_point(sys, rng)
    y = systems_service.perturb(sys, x, target, rng)
    d = systems_service.distance(sys, x, y)
    assert 0.0 < d <= target
    assert d > target / 2


def test_perturb_doubling_keeps_distance(doubling, rng):
    x = systems_service.sample_point(doubling, rng)
    y = systems_service.perturb(doubling, x, 2.0 ** -10, rng)
    assert systems_service.distance(doubling, x, y) == approx(2.0 ** -10, rel=1e-6)


def test_perturb_rejects_non_positive(rotation):
    with pytest.raises(DomainError):
        systems_service.perturb(rotation, CirclePoint(), 0.0, np.random.default_rng(0))


def test_perturb_shift_floor(constant_shift, product, product_point):
    rng = np.random.default_rng(3)
    floor = systems_service.perturbation_floor(constant_shift)
    assert floor == 2.0 ** -(SHIFT_DEPTH - 1)
    assert systems_service.perturbation_floor(product) == floor
    assert systems_service.perturbation_floor(CircleRotation(alpha=PHI)) == 0.0

    x = ShiftPoint(source=ConstantSource(symbol=0))
    y = systems_service.perturb(constant_shift, x, floor, rng)
    assert systems_service.distance(constant_shift, x, y) == floor
    with pytest.raises(DomainError):
        systems_service.perturb(constant_shift, x, floor / 2, rng)
    with pytest.raises(DomainError):
        systems_service.perturb(product, product_point, 1e-30, rng)


# -- probes ---------------------------------------------------------------------

def test_default_probes_circle(rotation):
    probes = systems_service.default_probes(rotation, 3)
    assert [p.position for p in probes] == approx([0.25, 0.5, 0.75])


def test_default_probes_shift_are_distinct(constant_shift):
    probes = systems_service.default_probes(constant_shift, 16)
    words = [p.source.word for p in probes]
    assert words[:6] == ["0", "1", "01", "10", "001", "010"]
    batch = systems_service.stack_points(constant_shift, probes)
    distances = systems_service.pairwise_distance(constant_shift, batch, batch)
    assert np.all(distances[~np.eye(16, dtype=bool)] > 0)


def test_default_probes_product(product):
    probes = systems_service.default_probes(product, 4)
    assert len(probes) == 4
    assert all(isinstance(p, ProductPoint) for p in probes)
