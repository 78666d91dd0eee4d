from abc import ABC, abstractmethod
from typing import Any, Dict, Iterator, List, Optional, Sequence
import copy
import logging

import numpy as np
import sympy

from ..torus.torus_geometry import torus_distance, wrap_array
from .exact_vector import ExactVector

logger = logging.getLogger(__name__)

DIRECTIONS = ("forward", "backward")


def check_direction(direction: str) -> str:
    if direction not in DIRECTIONS:
        raise ValueError(f"Неизвестное направление: {direction}, ожидалось одно из {DIRECTIONS}")
    return direction


class SystemDescriptor(ABC):
    '''
    Базовый класс неизменяемого описания дискретной системы (гомеоморфизма) на торе
    или в пространстве сдвигов. Состояния торических систем хранятся как массивы numpy формы (n,).
    '''
    kind: str = "System"

    def __init__(self, dimension: int, metadata: Optional[Dict[str, Any]] = None):
        if dimension < 1:
            raise ValueError(f"Размерность системы должна быть положительной: {dimension}")
        self.dimension = int(dimension)
        self._metadata = dict(metadata or {})

    # Шаг отображения

    @abstractmethod
    def apply(self, x):
        ...

    @abstractmethod
    def apply_inverse(self, x):
        ...

    def apply_many(self, xs: np.ndarray) -> np.ndarray:
        return np.array([self.apply(x) for x in np.asarray(xs, dtype=float)])

    def apply_inverse_many(self, xs: np.ndarray) -> np.ndarray:
        return np.array([self.apply_inverse(x) for x in np.asarray(xs, dtype=float)])

    def step(self, x, direction: str = "forward"):
        return self.apply(x) if check_direction(direction) == "forward" else self.apply_inverse(x)

    def check_state(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=float)
        if arr.shape != (self.dimension,):
            raise ValueError(
                f"Состояние формы {arr.shape} не соответствует системе {self.kind} размерности {self.dimension}"
            )
        return wrap_array(arr)

    def orbit(self, x0, steps: int, direction: str = "forward", chunk_size: int = 4096) -> Iterator[np.ndarray]:
        '''
        Генератор орбиты x_0, x_1, …, x_steps кусками по chunk_size состояний.
        Первый кусок начинается с самого x_0.
        '''
        check_direction(direction)
        if steps < 0:
            raise ValueError(f"Число шагов должно быть неотрицательным: {steps}")
        x = self.check_state(x0)
        produced = 0
        total = steps + 1
        while produced < total:
            size = min(chunk_size, total - produced)
            chunk = np.empty((size, self.dimension))
            start = 0
            if produced == 0:
                chunk[0] = x
                start = 1
            for i in range(start, size):
                x = self.step(x, direction)
                chunk[i] = x
            produced += size
            yield chunk

    # Геометрия пространства состояний

    def embed(self, states) -> np.ndarray:
        """Точки пространства состояний в [0,1)^d для учёта покрытия."""
        return np.asarray(states, dtype=float).reshape(-1, self.dimension)

    @property
    def embedding_dimension(self) -> int:
        return self.dimension

    def state_distance(self, x, y) -> float:
        return torus_distance(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def tangent(self, x) -> Optional[np.ndarray]:
        """Матрица Якоби шага, если она известна точно."""
        return None

    def known_fixed_points(self) -> List[np.ndarray]:
        return []

    def flow_speed(self, x) -> Optional[float]:
        return None

    # Метаданные и отчёты

    def metadata(self) -> Dict[str, Any]:
        return copy.deepcopy(self._metadata)

    def with_metadata(self, **entries) -> "SystemDescriptor":
        clone = copy.copy(self)
        clone._metadata = {**self._metadata, **entries}
        return clone

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "dimension": self.dimension}

    def independence_declarations(self) -> Dict[str, str]:
        return {}

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(dimension={self.dimension})"


def as_integer_matrix(matrix: Sequence[Sequence[int]]) -> sympy.Matrix:
    m = sympy.Matrix(matrix)
    if m.rows != m.cols or m.rows == 0:
        raise ValueError(f"Ожидалась квадратная непустая матрица, получена форма {m.shape}")
    for entry in m:
        if not entry.is_integer:
            raise ValueError(f"Матрица должна быть целочисленной, найден элемент {entry}")
    return m


class Translation(SystemDescriptor):
    '''
    Сдвиг тора x ↦ x + a. Орбита вычисляется в замкнутой форме x_0 + k·a mod 1,
    рациональная часть a считается точно в целых числах.
    '''
    kind = "Translation"

    def __init__(self, a: ExactVector, flow_time: Optional[sympy.Rational] = None,
                 metadata: Optional[Dict[str, Any]] = None):
        super().__init__(a.dimension, metadata)
        self.a = a
        self.flow_time = sympy.Rational(flow_time) if flow_time is not None else None
        if self.flow_time is not None and self.flow_time <= 0:
            raise ValueError(f"Время потока должно быть положительным: {flow_time}")
        self._numeric = a.numeric()
        rational = a.rational_part()
        self._num = np.array([int(c.p) for c in rational], dtype=object)
        self._den = np.array([int(c.q) for c in rational], dtype=object)
        if a.basis.names:
            symbolic = np.array([[float(c) for c in row[1:]] for row in a.coefficients], dtype=float)
            self._irrational_numeric = symbolic @ np.array(a.basis.values, dtype=float)
        else:
            self._irrational_numeric = np.zeros(self.dimension)

    def apply(self, x):
        return wrap_array(self.check_state(x) + self._numeric)

    def apply_inverse(self, x):
        return wrap_array(self.check_state(x) - self._numeric)

    def apply_many(self, xs):
        return wrap_array(np.asarray(xs, dtype=float) + self._numeric)

    def apply_inverse_many(self, xs):
        return wrap_array(np.asarray(xs, dtype=float) - self._numeric)

    def offsets(self, ks: np.ndarray) -> np.ndarray:
        '''
        Сдвиги k·a mod 1 для массива целых k: рациональная часть точно,
        иррациональная в плавающей точке.
        '''
        ks = np.asarray(ks, dtype=np.int64)
        out = np.empty((len(ks), self.dimension))
        for j in range(self.dimension):
            p, q = int(self._num[j]), int(self._den[j])
            residues = np.mod(ks.astype(object) * p, q).astype(np.int64)
            out[:, j] = residues / q
        out += np.mod(np.outer(ks.astype(float), self._irrational_numeric), 1.0)
        return wrap_array(out)

    def orbit(self, x0, steps: int, direction: str = "forward", chunk_size: int = 4096) -> Iterator[np.ndarray]:
        check_direction(direction)
        if steps < 0:
            raise ValueError(f"Число шагов должно быть неотрицательным: {steps}")
        x = self.check_state(x0)
        sign = 1 if direction == "forward" else -1
        for start in range(0, steps + 1, chunk_size):
            ks = np.arange(start, min(start + chunk_size, steps + 1), dtype=np.int64)
            yield wrap_array(x + self.offsets(sign * ks))

    def tangent(self, x) -> np.ndarray:
        return np.eye(self.dimension)

    def known_fixed_points(self) -> List[np.ndarray]:
        '''
        При a = 0 неподвижна каждая точка тора: возвращается представитель 0,
        а describe() отмечает вырожденный случай флагом fixes_every_point.
        '''
        if self.a.is_zero():
            return [np.zeros(self.dimension)]
        return []

    def flow_speed(self, x) -> Optional[float]:
        if self.flow_time is None:
            return None
        return float(np.linalg.norm(self._numeric)) / float(self.flow_time)

    def describe(self) -> Dict[str, Any]:
        out = {"kind": self.kind, "dimension": self.dimension, "a": self.a.to_strings()}
        if self.a.is_zero():
            out["fixes_every_point"] = True
        if self.flow_time is not None:
            out["flow_time"] = str(self.flow_time)
        return out

    def independence_declarations(self) -> Dict[str, str]:
        return self.a.basis.declaration()


class AffineMap(SystemDescriptor):
    '''
    Аффинное отображение тора T(x) = a + M·x, det M = ±1.
    '''
    kind = "Affine"

    def __init__(self, matrix: Sequence[Sequence[int]], a: ExactVector,
                 metadata: Optional[Dict[str, Any]] = None):
        m = as_integer_matrix(matrix)
        if a.dimension != m.rows:
            raise ValueError(f"Размерность вектора сдвига {a.dimension} не совпадает с матрицей {m.shape}")
        det = m.det()
        if det not in (1, -1):
            raise ValueError(f"Определитель матрицы должен быть ±1, получено {det}")
        super().__init__(m.rows, metadata)
        self.matrix = m
        self.a = a
        self._m = np.array(m.tolist(), dtype=float)
        self._m_inv = np.array(m.inv().tolist(), dtype=float)
        self._a = a.numeric()

    def apply(self, x):
        return wrap_array(self._m @ self.check_state(x) + self._a)

    def apply_inverse(self, x):
        return wrap_array(self._m_inv @ (self.check_state(x) - self._a))

    def apply_many(self, xs):
        return wrap_array(np.asarray(xs, dtype=float) @ self._m.T + self._a)

    def apply_inverse_many(self, xs):
        return wrap_array((np.asarray(xs, dtype=float) - self._a) @ self._m_inv.T)

    def tangent(self, x) -> np.ndarray:
        return self._m.copy()

    def known_fixed_points(self) -> List[np.ndarray]:
        if self.a.is_zero():
            return [np.zeros(self.dimension)]
        return []

    def describe(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "dimension": self.dimension,
            "matrix": [[int(v) for v in row] for row in self.matrix.tolist()],
            "a": self.a.to_strings(),
        }

    def independence_declarations(self) -> Dict[str, str]:
        return self.a.basis.declaration()


class Automorphism(AffineMap):
    kind = "Automorphism"

    def __init__(self, matrix: Sequence[Sequence[int]], metadata: Optional[Dict[str, Any]] = None):
        n = len(matrix)
        super().__init__(matrix, ExactVector.zeros(n), metadata)

    def describe(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "dimension": self.dimension,
            "matrix": [[int(v) for v in row] for row in self.matrix.tolist()],
        }


class ProductSystem(SystemDescriptor):
    '''
    Произведение систем f×g, действующее покомпонентно на (x, y).
    '''
    kind = "Product"

    def __init__(self, left: SystemDescriptor, right: SystemDescriptor,
                 metadata: Optional[Dict[str, Any]] = None):
        for factor in (left, right):
            if factor.kind == "Subshift":
                raise ValueError("Произведение с пространством сдвигов не поддерживается")
        super().__init__(left.dimension + right.dimension, metadata)
        self.left = left
        self.right = right

    def _split(self, x):
        x = self.check_state(x)
        return x[: self.left.dimension], x[self.left.dimension:]

    def apply(self, x):
        u, v = self._split(x)
        return np.concatenate([self.left.apply(u), self.right.apply(v)])

    def apply_inverse(self, x):
        u, v = self._split(x)
        return np.concatenate([self.left.apply_inverse(u), self.right.apply_inverse(v)])

    def apply_many(self, xs):
        xs = np.asarray(xs, dtype=float)
        k = self.left.dimension
        return np.hstack([self.left.apply_many(xs[:, :k]), self.right.apply_many(xs[:, k:])])

    def apply_inverse_many(self, xs):
        xs = np.asarray(xs, dtype=float)
        k = self.left.dimension
        return np.hstack([self.left.apply_inverse_many(xs[:, :k]), self.right.apply_inverse_many(xs[:, k:])])

    def orbit(self, x0, steps: int, direction: str = "forward", chunk_size: int = 4096) -> Iterator[np.ndarray]:
        u, v = self._split(x0)
        left = self.left.orbit(u, steps, direction, chunk_size)
        right = self.right.orbit(v, steps, direction, chunk_size)
        for a, b in zip(left, right):
            yield np.hstack([a, b])

    def tangent(self, x) -> Optional[np.ndarray]:
        u, v = self._split(x)
        tl, tr = self.left.tangent(u), self.right.tangent(v)
        if tl is None or tr is None:
            return None
        out = np.zeros((self.dimension, self.dimension))
        k = self.left.dimension
        out[:k, :k] = tl
        out[k:, k:] = tr
        return out

    def known_fixed_points(self) -> List[np.ndarray]:
        return [
            np.concatenate([p, q])
            for p in self.left.known_fixed_points()
            for q in self.right.known_fixed_points()
        ]

    def flow_speed(self, x) -> Optional[float]:
        u, v = self._split(x)
        sl, sr = self.left.flow_speed(u), self.right.flow_speed(v)
        if sl is None or sr is None:
            return None
        return float(np.hypot(sl, sr))

    def describe(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "dimension": self.dimension,
            "left": self.left.describe(),
            "right": self.right.describe(),
        }

    def independence_declarations(self) -> Dict[str, str]:
        return {**self.left.independence_declarations(), **self.right.independence_declarations()}
