"""Двусторонние подсдвиги конечного типа на периодических в обе стороны точках.

Точка y = (… L L L) C (R R R …) хранится как тройка слов и индекс ``start``
первой буквы ядра C. Метрика d(x, y) = 2^(-min{|j| : x_j != y_j}).
"""
from dataclasses import dataclass, field
from itertools import product
from math import lcm
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple
import logging

import numpy as np

from .system_descriptor import SystemDescriptor, check_direction

logger = logging.getLogger(__name__)

Word = Tuple[int, ...]


def _primitive_root(word: Word) -> Word:
    n = len(word)
    for p in range(1, n + 1):
        if n % p == 0 and word[:p] * (n // p) == word:
            return word[:p]
    return word


@dataclass(frozen=True)
class SymbolicPoint:
    left: Word
    core: Word
    right: Word
    start: int = 0

    def __post_init__(self):
        left, core, right = tuple(self.left), tuple(self.core), tuple(self.right)
        if not left or not right:
            raise ValueError("Периодические слова точки не могут быть пустыми")
        left, right = _primitive_root(left), _primitive_root(right)
        start = int(self.start)
        # Поглощение ядра периодическими частями
        while core and core[-1] == right[-1]:
            core = core[:-1]
            right = right[-1:] + right[:-1]
        while core and core[0] == left[0]:
            core = core[1:]
            start += 1
            left = left[1:] + left[:1]
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "core", core)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "start", start)

    @classmethod
    def parse(cls, left: str, core: str, right: str, start: int = 0) -> "SymbolicPoint":
        return cls(tuple(int(c) for c in left), tuple(int(c) for c in core), tuple(int(c) for c in right), start)

    @property
    def end(self) -> int:
        return self.start + len(self.core)

    def symbol(self, j: int) -> int:
        if j < self.start:
            return self.left[(j - self.start) % len(self.left)]
        if j < self.end:
            return self.core[j - self.start]
        return self.right[(j - self.end) % len(self.right)]

    def symbols(self, lo: int, hi: int) -> Word:
        return tuple(self.symbol(j) for j in range(lo, hi))

    def shift(self, n: int = 1) -> "SymbolicPoint":
        """σ^n: (σy)_j = y_{j+1}."""
        return SymbolicPoint(self.left, self.core, self.right, self.start - n)

    def window(self, other: Optional["SymbolicPoint"] = None) -> Tuple[int, int]:
        '''
        Полуинтервал индексов, совпадение на котором равносильно равенству
        последовательностей (вне него обе периодичны с общим периодом).
        '''
        points = [self] if other is None else [self, other]
        lo = min(p.start for p in points)
        hi = max(p.end for p in points)
        left_period = lcm(*(len(p.left) for p in points))
        right_period = lcm(*(len(p.right) for p in points))
        return lo - left_period, hi + right_period

    def same_sequence(self, other: "SymbolicPoint") -> bool:
        lo, hi = self.window(other)
        return self.symbols(lo, hi) == other.symbols(lo, hi)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymbolicPoint):
            return NotImplemented
        return self.same_sequence(other)

    def __hash__(self) -> int:
        return hash((self.left_canonical(), self.right_canonical()))

    def left_canonical(self) -> Word:
        return min(self.left[i:] + self.left[:i] for i in range(len(self.left)))

    def right_canonical(self) -> Word:
        return min(self.right[i:] + self.right[:i] for i in range(len(self.right)))

    def agrees_on(self, other: "SymbolicPoint", lower: Optional[int] = None, upper: Optional[int] = None) -> bool:
        """Совпадение x_j = y_j для всех lower < j < upper (None означает бесконечную границу)."""
        lo, hi = self.window(other)
        left_period = lcm(len(self.left), len(other.left))
        right_period = lcm(len(self.right), len(other.right))
        a = lower + 1 if lower is not None else None
        b = upper
        if a is None:
            a = min(lo, (hi if b is None else b) - left_period)
        if b is None:
            b = max(hi, a + right_period)
        if a >= b:
            return True
        return self.symbols(a, b) == other.symbols(a, b)

    def first_disagreement(self, other: "SymbolicPoint") -> Optional[int]:
        """Наименьшее |j| с x_j != y_j или None для равных последовательностей."""
        lo, hi = self.window(other)
        bound = max(abs(lo), abs(hi)) + 1
        for r in range(bound + 1):
            for j in ((0,) if r == 0 else (-r, r)):
                if self.symbol(j) != other.symbol(j):
                    return r
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "left": "".join(map(str, self.left)),
            "core": "".join(map(str, self.core)),
            "right": "".join(map(str, self.right)),
            "start": self.start,
        }


def shift_distance(x: SymbolicPoint, y: SymbolicPoint) -> float:
    r = x.first_disagreement(y)
    return 0.0 if r is None else 2.0 ** (-r)


@dataclass(frozen=True)
class CylinderSet:
    '''
    Множество точек, совпадающих с reference на индексах lower < j < upper.
    '''
    reference: SymbolicPoint
    lower: Optional[int] = None
    upper: Optional[int] = None

    def contains(self, y: SymbolicPoint) -> bool:
        return self.reference.agrees_on(y, self.lower, self.upper)

    def __contains__(self, y: SymbolicPoint) -> bool:
        return self.contains(y)

    def to_dict(self) -> Dict[str, Any]:
        return {"reference": self.reference.to_dict(), "lower": self.lower, "upper": self.upper}


@dataclass(frozen=True)
class SubshiftDescriptor:
    alphabet_size: int
    transitions: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        k = int(self.alphabet_size)
        rows = tuple(tuple(int(v) for v in row) for row in self.transitions)
        if k < 2 or k > 10:
            raise ValueError(f"Размер алфавита должен быть от 2 до 10: {k}")
        if len(rows) != k or any(len(row) != k for row in rows):
            raise ValueError(f"Матрица переходов должна иметь форму {k}×{k}")
        if any(v not in (0, 1) for row in rows for v in row):
            raise ValueError("Матрица переходов должна состоять из 0 и 1")
        object.__setattr__(self, "transitions", rows)

    @classmethod
    def full_shift(cls, k: int = 2) -> "SubshiftDescriptor":
        return cls(k, tuple(tuple(1 for _ in range(k)) for _ in range(k)))

    @classmethod
    def golden_mean(cls) -> "SubshiftDescriptor":
        """Сдвиг без подслова 11."""
        return cls(2, ((1, 1), (1, 0)))

    def allowed_pair(self, a: int, b: int) -> bool:
        return 0 <= a < self.alphabet_size and 0 <= b < self.alphabet_size and self.transitions[a][b] == 1

    def is_allowed(self, x: SymbolicPoint) -> bool:
        lo = x.start - len(x.left) - 1
        hi = x.end + len(x.right) + 1
        word = x.symbols(lo, hi)
        return all(self.allowed_pair(a, b) for a, b in zip(word, word[1:]))

    def cycles(self, max_length: int = 3) -> List[Word]:
        """Примитивные допустимые циклы длины не больше max_length."""
        out = []
        for length in range(1, max_length + 1):
            for word in product(range(self.alphabet_size), repeat=length):
                cyclic = word + word[:1]
                if _primitive_root(word) == word and all(self.allowed_pair(a, b) for a, b in zip(cyclic, cyclic[1:])):
                    out.append(word)
        return out

    def sample_points(self, rng: np.random.Generator, count: int, core_length: int = 6,
                      max_period: int = 3) -> List[SymbolicPoint]:
        cycles = self.cycles(max_period)
        if not cycles:
            raise ValueError("Подсдвиг не содержит периодических точек малого периода")
        points: List[SymbolicPoint] = []
        attempts = 0
        while len(points) < count:
            attempts += 1
            if attempts > 1000 * max(count, 1):
                raise RuntimeError("Не удалось сэмплировать допустимые точки подсдвига")
            left = cycles[rng.integers(len(cycles))]
            right = cycles[rng.integers(len(cycles))]
            core = tuple(int(s) for s in rng.integers(self.alphabet_size, size=int(rng.integers(core_length + 1))))
            point = SymbolicPoint(left, core, right, int(rng.integers(-core_length, 1)))
            if self.is_allowed(point):
                points.append(point)
        return points

    def to_dict(self) -> Dict[str, Any]:
        return {"alphabet_size": self.alphabet_size, "transitions": [list(r) for r in self.transitions]}


def local_stable_set(sub: SubshiftDescriptor, x: SymbolicPoint, m: int) -> CylinderSet:
    """W^s_ε(x) при ε = 2^(-m): совпадение на всех индексах j > -m."""
    if m < 1:
        raise ValueError(f"m должно быть положительным: {m}")
    if not sub.is_allowed(x):
        raise ValueError("Точка не принадлежит подсдвигу")
    return CylinderSet(x, lower=-m, upper=None)


def local_unstable_set(sub: SubshiftDescriptor, x: SymbolicPoint, m: int) -> CylinderSet:
    """W^u_ε(x) при ε = 2^(-m): совпадение на всех индексах j < m."""
    if m < 1:
        raise ValueError(f"m должно быть положительным: {m}")
    if not sub.is_allowed(x):
        raise ValueError("Точка не принадлежит подсдвигу")
    return CylinderSet(x, lower=None, upper=m)


def stable_inequality_holds(x: SymbolicPoint, y: SymbolicPoint, m: int, direction: str = "forward") -> bool:
    '''
    Прямая проверка определения: d(σ^i x, σ^i y) <= 2^(-m) для всех i >= 0
    (или i <= 0 для неустойчивого множества). Достаточно конечного числа i,
    после которого расстояния периодичны.
    '''
    check_direction(direction)
    eps = 2.0 ** (-m)
    lo, hi = x.window(y)
    sign = 1 if direction == "forward" else -1
    bound = max(abs(lo), abs(hi)) + m + 1
    period = lcm(len(x.left), len(y.left), len(x.right), len(y.right))
    for i in range(bound + period + 1):
        if shift_distance(x.shift(sign * i), y.shift(sign * i)) > eps:
            return False
    return True


@dataclass
class ExpansivityReport:
    e: float
    horizon: int
    separations: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def counterexample_candidates(self) -> List[int]:
        return [s["pair"] for s in self.separations if s["status"] == "counterexample_candidate"]

    @property
    def all_separated(self) -> bool:
        return all(s["status"] in ("separated", "invalid") for s in self.separations)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "e": self.e,
            "horizon": self.horizon,
            "separations": self.separations,
            "counterexample_candidates": self.counterexample_candidates,
        }


def expansivity_check(sub: SubshiftDescriptor, e: float, horizon: int,
                      witnesses: Sequence[Tuple[SymbolicPoint, SymbolicPoint]]) -> ExpansivityReport:
    if not 0 < e < 1:
        raise ValueError(f"Константа разделения должна лежать в (0, 1): {e}")
    report = ExpansivityReport(e=float(e), horizon=int(horizon))
    for index, (x, y) in enumerate(witnesses):
        if not (sub.is_allowed(x) and sub.is_allowed(y)):
            raise ValueError(f"Пара {index} содержит точку вне подсдвига")
        if x == y:
            report.separations.append({"pair": index, "status": "invalid", "n": None})
            continue
        found = None
        for r in range(horizon + 1):
            for n in ((0,) if r == 0 else (r, -r)):
                if shift_distance(x.shift(n), y.shift(n)) > e:
                    found = n
                    break
            if found is not None:
                break
        if found is None:
            logger.warning(f"Пара {index} не разделилась за горизонт {horizon}")
            report.separations.append({"pair": index, "status": "counterexample_candidate", "n": None})
        else:
            report.separations.append({"pair": index, "status": "separated", "n": found})
    return report


class Subshift(SystemDescriptor):
    '''
    Сдвиг σ на подсдвиге конечного типа. Состояния задаются SymbolicPoint;
    для учёта покрытия точка вкладывается в [0,1) чередованием
    координат y_0, y_{-1}, y_1, y_{-2}, … как цифр в системе счисления по основанию алфавита.
    '''
    kind = "Subshift"

    def __init__(self, sub: SubshiftDescriptor, metadata: Optional[Dict[str, Any]] = None):
        super().__init__(1, metadata)
        self.sub = sub
        self._digits = int(np.ceil(53 / np.log2(sub.alphabet_size)))
        self._weights = float(sub.alphabet_size) ** -np.arange(1, self._digits + 1)

    def check_state(self, x) -> SymbolicPoint:
        if not isinstance(x, SymbolicPoint):
            raise ValueError(f"Состояние подсдвига должно быть SymbolicPoint, получено {type(x).__name__}")
        return x

    def apply(self, x):
        return self.check_state(x).shift(1)

    def apply_inverse(self, x):
        return self.check_state(x).shift(-1)

    def apply_many(self, xs):
        return [self.apply(x) for x in xs]

    def apply_inverse_many(self, xs):
        return [self.apply_inverse(x) for x in xs]

    def orbit(self, x0, steps: int, direction: str = "forward", chunk_size: int = 4096) -> Iterator[List[SymbolicPoint]]:
        check_direction(direction)
        x = self.check_state(x0)
        if not self.sub.is_allowed(x):
            raise ValueError("Начальная точка не принадлежит подсдвигу")
        sign = 1 if direction == "forward" else -1
        for start in range(0, steps + 1, chunk_size):
            yield [x.shift(sign * k) for k in range(start, min(start + chunk_size, steps + 1))]

    def _interleaved(self, x: SymbolicPoint) -> List[int]:
        out = []
        r = 0
        while len(out) < self._digits:
            out.append(x.symbol(r) if r == 0 else x.symbol(-r))
            if r > 0 and len(out) < self._digits:
                out.append(x.symbol(r))
            r += 1
        return out[: self._digits]

    def embed(self, states) -> np.ndarray:
        values = np.array([self._interleaved(x) for x in states], dtype=float).reshape(-1, self._digits)
        points = values @ self._weights
        points[points >= 1.0] = 0.0
        return points.reshape(-1, 1)

    def state_distance(self, x, y) -> float:
        return shift_distance(x, y)

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "dimension": self.dimension, "subshift": self.sub.to_dict()}
