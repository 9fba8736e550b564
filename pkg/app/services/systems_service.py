"""Compact metric systems: circle rotation, doubling map, binary shift, products"""
import itertools
import json
import logging
import math
from functools import lru_cache
from typing import Callable, Dict, List, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import TypeAdapter, ValidationError

from app.models.domain import RealTrace
from app.models.schemas import (
    BinaryShift,
    BlockSource,
    CirclePoint,
    CircleRotation,
    ConstantSource,
    DoublingMap,
    ExplicitSource,
    PeriodicSource,
    PointRef,
    ProductPoint,
    ProductSystem,
    ShiftPoint,
    SturmianSource,
    SymbolSource,
    SystemSpec,
)
from app.utils.errors import ConfigError, DomainError, SystemMismatchError

logger = logging.getLogger(__name__)

# Shift distances below 2^-SHIFT_DEPTH are treated as 0
SHIFT_DEPTH = 64
# Leading binary digits taken from a doubling point's position
POSITION_DIGITS = 64
# Digits resolved into a float coordinate
COORDINATE_DIGITS = 53
RANDOM_BLOCK = 4096

NAMED_ALPHAS: Dict[str, float] = {
    "phi": (math.sqrt(5.0) - 1.0) / 2.0,
    "sqrt2": math.sqrt(2.0) - 1.0,
}

Batch = Union[np.ndarray, Tuple["Batch", "Batch"]]
Observable = Callable[[Batch], np.ndarray]

_system_adapter = TypeAdapter(SystemSpec)
_point_adapter = TypeAdapter(PointRef)


def parse_alpha(text: Union[str, float]) -> float:
    """Rotation number from a float or a named constant (phi, sqrt2)"""
    if isinstance(text, (int, float)):
        return float(text)
    name = text.strip().lower()
    if name in NAMED_ALPHAS:
        return NAMED_ALPHAS[name]
    try:
        return float(name)
    except ValueError:
        raise ConfigError(f"Unknown rotation number '{text}'. Use a float, 'phi' or 'sqrt2'.")


@lru_cache(maxsize=256)
def _random_block(seed: int, block: int) -> np.ndarray:
    digits = np.random.default_rng([seed, block]).integers(
        0, 2, size=RANDOM_BLOCK, dtype=np.uint8
    )
    digits.setflags(write=False)
    return digits


def _random_digits(seed: int, start: int, stop: int) -> np.ndarray:
    """Digits start..stop-1 of the seeded stream; independent of the request size"""
    if stop <= start:
        return np.zeros(0, dtype=np.uint8)
    first, last = start // RANDOM_BLOCK, (stop - 1) // RANDOM_BLOCK
    stream = np.concatenate([_random_block(seed, b) for b in range(first, last + 1)])
    offset = first * RANDOM_BLOCK
    return stream[start - offset:stop - offset]


def _rotation_angles(alpha: float, k: np.ndarray) -> np.ndarray:
    """frac(k * alpha) without the drift of k * alpha in double precision.

    alpha is split into a 26-bit head and a tail; k * head is exact for
    k < 2**27 so its fractional part carries no rounding.
    """
    head = math.floor(alpha * 2.0 ** 26) / 2.0 ** 26
    tail = alpha - head
    k = np.asarray(k, dtype=np.float64)
    return (np.fmod(k * head, 1.0) + k * tail) % 1.0


class SystemsService:
    """Stepping, distances and orbit batches for every SystemSpec kind"""

    # -- parsing ----------------------------------------------------------

    def parse_system(self, text: str) -> SystemSpec:
        """System from JSON or from a shorthand such as rotation:phi or shift:block"""
        text = text.strip()
        if text.startswith("{"):
            try:
                return _system_adapter.validate_python(json.loads(text))
            except (json.JSONDecodeError, ValidationError) as e:
                raise ConfigError(f"Invalid system JSON: {e}")

        parts = text.split(":")
        kind = parts[0].lower()
        try:
            if kind == "rotation" and len(parts) == 2:
                return CircleRotation(alpha=parse_alpha(parts[1]))
            if kind == "doubling" and len(parts) == 1:
                return DoublingMap()
            if kind == "shift":
                return BinaryShift(source=self._parse_source(parts[1:]))
        except (ValidationError, ValueError) as e:
            raise ConfigError(f"Invalid system '{text}': {e}")
        raise ConfigError(
            f"Unknown system '{text}'. Expected rotation:<alpha>, doubling, "
            "shift:constant:<s>, shift:periodic:<word>, shift:sturmian:<alpha> or shift:block[:<base>]"
        )

    @staticmethod
    def _parse_source(parts: List[str]) -> SymbolSource:
        if not parts:
            return ConstantSource()
        kind, args = parts[0].lower(), parts[1:]
        if kind == "constant" and len(args) <= 1:
            return ConstantSource(symbol=int(args[0]) if args else 0)
        if kind == "periodic" and len(args) == 1:
            return PeriodicSource(word=args[0])
        if kind == "sturmian" and len(args) in (1, 2):
            x0 = float(args[1]) if len(args) == 2 else 0.0
            return SturmianSource(alpha=parse_alpha(args[0]), x0=x0)
        if kind == "block" and len(args) <= 1:
            return BlockSource(base=int(args[0]) if args else 2)
        raise ConfigError(f"Unknown symbol source '{':'.join(parts)}'")

    def parse_point(self, sys: SystemSpec, text: str) -> PointRef:
        """Point from JSON, a circle position, or a shift offset of the system's source"""
        text = text.strip()
        if text.startswith("{"):
            try:
                point = _point_adapter.validate_python(json.loads(text))
            except (json.JSONDecodeError, ValidationError) as e:
                raise ConfigError(f"Invalid point JSON: {e}")
            self._check_point(sys, point)
            return point
        if isinstance(sys, (CircleRotation, DoublingMap)):
            return CirclePoint(position=parse_alpha(text))
        if isinstance(sys, BinaryShift):
            try:
                offset = int(text)
            except ValueError:
                raise ConfigError(f"Shift points are given as a non-negative offset, got '{text}'")
            if offset < 0:
                raise ConfigError("Shift offsets must be non-negative")
            return ShiftPoint(source=sys.source, offset=offset)
        raise ConfigError("Product points must be given as JSON")

    def reference_point(self, sys: SystemSpec) -> PointRef:
        """Default start point of a fixture"""
        if isinstance(sys, (CircleRotation, DoublingMap)):
            return CirclePoint(position=0.0)
        if isinstance(sys, BinaryShift):
            return ShiftPoint(source=sys.source)
        return ProductPoint(left=self.reference_point(sys.left), right=self.reference_point(sys.right))

    # -- validation -------------------------------------------------------

    def _check_point(self, sys: SystemSpec, p: PointRef) -> None:
        if isinstance(sys, (CircleRotation, DoublingMap)):
            ok = isinstance(p, CirclePoint)
        elif isinstance(sys, BinaryShift):
            ok = isinstance(p, ShiftPoint)
        elif isinstance(sys, ProductSystem):
            ok = isinstance(p, ProductPoint)
            if ok:
                self._check_point(sys.left, p.left)
                self._check_point(sys.right, p.right)
        else:
            raise ConfigError(f"Unknown system kind {type(sys).__name__}")
        if not ok:
            raise SystemMismatchError(
                f"Point of kind '{p.kind}' does not belong to a '{sys.kind}' system"
            )

    # -- symbols ----------------------------------------------------------

    @staticmethod
    def symbols(source: SymbolSource, start: int, stop: int) -> np.ndarray:
        """Symbols s_start..s_{stop-1} of a source as uint8"""
        count = max(stop - start, 0)
        k = np.arange(start, stop, dtype=np.int64)
        if isinstance(source, ConstantSource):
            return np.full(count, source.symbol, dtype=np.uint8)
        if isinstance(source, PeriodicSource):
            word = np.frombuffer(source.word.encode(), dtype=np.uint8) - ord("0")
            return word[k % word.size]
        if isinstance(source, SturmianSource):
            kk = np.arange(start, stop + 1, dtype=np.float64)
            floors = np.floor(kk * source.alpha + source.x0)
            return np.diff(floors).astype(np.uint8)
        if isinstance(source, BlockSource):
            ends = [1]
            length = 1
            while ends[-1] < stop:
                length *= source.base
                ends.append(ends[-1] + length)
            block = np.searchsorted(np.asarray(ends, dtype=np.int64), k, side="right")
            return (block % 2).astype(np.uint8)
        if isinstance(source, ExplicitSource):
            word = np.frombuffer(source.word.encode(), dtype=np.uint8) - ord("0")
            out = np.zeros(count, dtype=np.uint8)
            inside = k < word.size
            out[inside] = word[k[inside]]
            rest = k[~inside]
            if rest.size:
                if source.extension == "ones":
                    out[~inside] = 1
                elif source.extension == "repeat":
                    out[~inside] = word[rest % word.size]
                elif source.extension == "random":
                    out[~inside] = _random_digits(source.seed, int(rest[0]), int(rest[-1]) + 1)
            return out
        raise ConfigError(f"Unknown symbol source {type(source).__name__}")

    # -- doubling digits --------------------------------------------------

    @staticmethod
    def _doubling_digits(p: CirclePoint, start: int, stop: int) -> np.ndarray:
        """Binary digits start..stop-1 of the expansion behind a doubling point"""
        mantissa = int(p.position * 2.0 ** POSITION_DIGITS)
        head = np.array(
            [(mantissa >> (POSITION_DIGITS - 1 - i)) & 1 for i in range(POSITION_DIGITS)],
            dtype=np.uint8,
        )
        out = np.zeros(max(stop - start, 0), dtype=np.uint8)
        lo, hi = max(start, 0), min(stop, POSITION_DIGITS)
        if hi > lo:
            out[lo - start:hi - start] = head[lo:hi]
        if p.tail_seed is not None and stop > POSITION_DIGITS:
            lo = max(start, POSITION_DIGITS)
            out[lo - start:] = _random_digits(p.tail_seed, lo - POSITION_DIGITS, stop - POSITION_DIGITS)
        return out

    def _doubling_coordinates(self, p: CirclePoint, first: int, count: int) -> np.ndarray:
        digits = self._doubling_digits(p, first, first + count + COORDINATE_DIGITS - 1)
        kernel = 0.5 ** np.arange(1, COORDINATE_DIGITS + 1, dtype=np.float64)
        return np.correlate(digits.astype(np.float64), kernel, mode="valid")

    # -- points and orbits ------------------------------------------------

    def advance(self, sys: SystemSpec, p: PointRef, k: int) -> PointRef:
        """T^k p"""
        if k < 0:
            raise DomainError("cannot iterate backwards")
        self._check_point(sys, p)
        if isinstance(p, ProductPoint):
            return ProductPoint(
                left=self.advance(sys.left, p.left, k),
                right=self.advance(sys.right, p.right, k),
            )
        return p.model_copy(update={"offset": p.offset + k})

    def step(self, sys: SystemSpec, p: PointRef) -> PointRef:
        return self.advance(sys, p, 1)

    def coordinate(self, sys: SystemSpec, p: CirclePoint) -> float:
        """Position in [0, 1) of a circle point"""
        self._check_point(sys, p)
        if not isinstance(sys, (CircleRotation, DoublingMap)):
            raise SystemMismatchError("coordinates are defined for circle systems only")
        return float(self.orbit_batch(sys, p, 0, 1)[0])

    def head_symbol(self, sys: BinaryShift, p: ShiftPoint) -> int:
        self._check_point(sys, p)
        return int(self.symbols(p.source, p.offset, p.offset + 1)[0])

    def orbit_batch(self, sys: SystemSpec, p: PointRef, m: int, n: int) -> Batch:
        """Vectorised representation of T^m p, ..., T^{n-1} p.

        Circle systems give positions in [0, 1); the shift gives an (n-m, 64)
        array of leading symbols; products give a pair of batches.
        """
        if not 0 <= m < n:
            raise DomainError(f"invalid orbit window (m={m}, n={n})")
        self._check_point(sys, p)
        if isinstance(sys, CircleRotation):
            k = np.arange(p.offset + m, p.offset + n, dtype=np.int64)
            return (p.position + _rotation_angles(sys.alpha, k)) % 1.0
        if isinstance(sys, DoublingMap):
            return self._doubling_coordinates(p, p.offset + m, n - m)
        if isinstance(sys, BinaryShift):
            syms = self.symbols(p.source, p.offset + m, p.offset + n + SHIFT_DEPTH - 1)
            return sliding_window_view(syms, SHIFT_DEPTH)
        return (
            self.orbit_batch(sys.left, p.left, m, n),
            self.orbit_batch(sys.right, p.right, m, n),
        )

    def orbit_segment(self, sys: SystemSpec, p: PointRef, m: int, n: int) -> List[PointRef]:
        """(T^m p, ..., T^{n-1} p)"""
        if not 0 <= m < n:
            raise DomainError(f"invalid orbit window (m={m}, n={n})")
        return [self.advance(sys, p, k) for k in range(m, n)]

    def batch_size(self, sys: SystemSpec, batch: Batch) -> int:
        if isinstance(sys, ProductSystem):
            return self.batch_size(sys.left, batch[0])
        return int(batch.shape[0])

    def batch_labels(self, sys: SystemSpec, batch: Batch) -> List[str]:
        """Text form of each row: circle position, 64-symbol word, or 'left|right'"""
        if isinstance(sys, (CircleRotation, DoublingMap)):
            return [format(float(t), ".17g") for t in batch]
        if isinstance(sys, BinaryShift):
            return ["".join(map(str, row)) for row in batch.astype(np.int64).tolist()]
        left = self.batch_labels(sys.left, batch[0])
        right = self.batch_labels(sys.right, batch[1])
        return [f"{a}|{b}" for a, b in zip(left, right)]

    def stack_points(self, sys: SystemSpec, points: List[PointRef]) -> Batch:
        """Batch holding one row per point"""
        if isinstance(sys, ProductSystem):
            return (
                self.stack_points(sys.left, [p.left for p in points]),
                self.stack_points(sys.right, [p.right for p in points]),
            )
        rows = [self.orbit_batch(sys, p, 0, 1) for p in points]
        return np.concatenate(rows, axis=0)

    # -- metric -----------------------------------------------------------

    def _distance(self, sys: SystemSpec, a: Batch, b: Batch) -> np.ndarray:
        if isinstance(sys, (CircleRotation, DoublingMap)):
            gap = np.abs(a - b)
            return sys.metric_scale * np.minimum(gap, 1.0 - gap)
        if isinstance(sys, BinaryShift):
            disagree = a != b
            first = np.argmax(disagree, axis=-1)
            found = disagree.any(axis=-1)
            return np.where(found, sys.metric_scale * 0.5 ** first, 0.0)
        return np.maximum(
            self._distance(sys.left, a[0], b[0]),
            self._distance(sys.right, a[1], b[1]),
        )

    def batch_distance(self, sys: SystemSpec, a: Batch, b: Batch) -> np.ndarray:
        """Elementwise distances between two equally long batches"""
        return self._distance(sys, a, b)

    def _expand(self, sys: SystemSpec, batch: Batch, axis: int) -> Batch:
        if isinstance(sys, ProductSystem):
            return (self._expand(sys.left, batch[0], axis), self._expand(sys.right, batch[1], axis))
        return np.expand_dims(batch, axis)

    def pairwise_distance(self, sys: SystemSpec, a: Batch, b: Batch) -> np.ndarray:
        """Matrix d(a_i, b_j)"""
        return self._distance(sys, self._expand(sys, a, 1), self._expand(sys, b, 0))

    def distance(self, sys: SystemSpec, p: PointRef, q: PointRef) -> float:
        a = self.orbit_batch(sys, p, 0, 1)
        b = self.orbit_batch(sys, q, 0, 1)
        return float(self.batch_distance(sys, a, b)[0])

    def pair_distance_trace(self, sys: SystemSpec, p: PointRef, q: PointRef, n: int) -> RealTrace:
        """d(T^{k-1}p, T^{k-1}q) for k = 1..n"""
        if n < 1:
            raise DomainError(f"trace length must be positive, got {n}")
        values = self.batch_distance(sys, self.orbit_batch(sys, p, 0, n), self.orbit_batch(sys, q, 0, n))
        return RealTrace(values=np.clip(values, 0.0, 1.0), bound=1.0)

    def diameter_bound(self, sys: SystemSpec) -> float:
        if isinstance(sys, (CircleRotation, DoublingMap)):
            return sys.metric_scale / 2.0
        if isinstance(sys, BinaryShift):
            return sys.metric_scale
        return max(self.diameter_bound(sys.left), self.diameter_bound(sys.right))

    # -- observables ------------------------------------------------------

    def observable(self, sys: SystemSpec, name: str) -> Observable:
        """Named continuous observables: cos, sin, coordinate (circle), head (shift)"""
        circle = isinstance(sys, (CircleRotation, DoublingMap))
        if circle and name == "cos":
            return lambda batch: np.cos(2.0 * np.pi * batch)
        if circle and name == "sin":
            return lambda batch: np.sin(2.0 * np.pi * batch)
        if circle and name == "coordinate":
            return lambda batch: np.asarray(batch, dtype=np.float64)
        if isinstance(sys, BinaryShift) and name == "head":
            return lambda batch: batch[:, 0].astype(np.float64)
        raise ConfigError(f"Observable '{name}' is not defined on a '{sys.kind}' system")

    def distance_observable(self, sys: SystemSpec, probe: PointRef) -> Observable:
        """x -> d(x, probe)"""
        probe_batch = self.orbit_batch(sys, probe, 0, 1)
        return lambda batch: self.pairwise_distance(sys, batch, probe_batch)[:, 0]

    def observable_trace(
        self, sys: SystemSpec, p: PointRef, f: Observable, m: int, n: int, bound: float = 1.0
    ) -> RealTrace:
        """f(T^k p) for k = m..n-1"""
        return RealTrace(values=f(self.orbit_batch(sys, p, m, n)), bound=bound)

    # -- sampling ---------------------------------------------------------

    def sample_point(self, sys: SystemSpec, rng: np.random.Generator) -> PointRef:
        """Draw from the natural measure: Lebesgue on circles, Bernoulli(1/2) on the shift"""
        if isinstance(sys, CircleRotation):
            return CirclePoint(position=float(rng.random()))
        if isinstance(sys, DoublingMap):
            return CirclePoint(position=float(rng.random()), tail_seed=int(rng.integers(2 ** 62)))
        if isinstance(sys, BinaryShift):
            return ShiftPoint(source=ExplicitSource(extension="random", seed=int(rng.integers(2 ** 62))))
        return ProductPoint(left=self.sample_point(sys.left, rng), right=self.sample_point(sys.right, rng))

    def perturb(
        self, sys: SystemSpec, p: PointRef, target: float, rng: np.random.Generator
    ) -> PointRef:
        """A point q with 0 < d(p, q) <= target, built explicitly.

        Circles: d(p, q) = target exactly (up to rounding). Shift: the largest
        2^-j not exceeding target, by copying j symbols and flipping the next;
        targets below perturbation_floor(sys) are rejected.
        """
        if target <= 0:
            raise DomainError("perturbation distance must be positive")
        self._check_point(sys, p)
        floor = self.perturbation_floor(sys)
        if target < floor:
            raise DomainError(
                f"perturbation distance {target:g} is below {floor:g}, "
                f"the closest distinct points at shift depth {SHIFT_DEPTH}"
            )
        if isinstance(sys, (CircleRotation, DoublingMap)):
            arc = min(target / sys.metric_scale, 0.5)
            sign = 1.0 if rng.random() < 0.5 else -1.0
            if isinstance(sys, CircleRotation):
                return p.model_copy(update={"position": (p.position + sign * arc) % 1.0})
            base = self.coordinate(sys, p)
            return CirclePoint(position=(base + sign * arc) % 1.0, tail_seed=int(rng.integers(2 ** 62)))
        if isinstance(sys, BinaryShift):
            j = max(0, math.ceil(math.log2(sys.metric_scale / target)))
            prefix = self.symbols(p.source, p.offset, p.offset + j + 1)
            prefix[-1] = 1 - prefix[-1]
            word = "".join(str(int(s)) for s in prefix)
            return ShiftPoint(
                source=ExplicitSource(word=word, extension="random", seed=int(rng.integers(2 ** 62)))
            )
        return ProductPoint(
            left=self.perturb(sys.left, p.left, target, rng),
            right=self.perturb(sys.right, p.right, target, rng),
        )

    def perturbation_floor(self, sys: SystemSpec) -> float:
        """Smallest positive distance perturb can realize"""
        if isinstance(sys, (CircleRotation, DoublingMap)):
            return 0.0
        if isinstance(sys, BinaryShift):
            return sys.metric_scale * 2.0 ** -(SHIFT_DEPTH - 1)
        return max(self.perturbation_floor(sys.left), self.perturbation_floor(sys.right))

    # -- test-family probes ------------------------------------------------

    def default_probes(self, sys: SystemSpec, count: int) -> List[PointRef]:
        """Equispaced circle probes j/(J+1); canonical periodic words on the shift"""
        if count < 1:
            raise DomainError("a test family needs at least one probe")
        if isinstance(sys, (CircleRotation, DoublingMap)):
            return [CirclePoint(position=j / (count + 1)) for j in range(1, count + 1)]
        if isinstance(sys, BinaryShift):
            probes: List[PointRef] = []
            seen = set()
            for length in itertools.count(1):
                for letters in itertools.product("01", repeat=length):
                    word = "".join(letters)
                    key = (word * (SHIFT_DEPTH // length + 1))[:SHIFT_DEPTH]
                    if key in seen:
                        continue
                    seen.add(key)
                    probes.append(ShiftPoint(source=PeriodicSource(word=word)))
                    if len(probes) == count:
                        return probes
        left = self.default_probes(sys.left, count)
        right = self.default_probes(sys.right, count)
        return [ProductPoint(left=a, right=b) for a, b in zip(left, right)]


# Global instance
systems_service = SystemsService()
