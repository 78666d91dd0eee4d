from dataclasses import dataclass
from typing import Sequence, Tuple, Union
import logging
import math

import numpy as np

logger = logging.getLogger(__name__)

METRICS = ("euclidean", "max")


@dataclass(frozen=True)
class TorusPoint:
    '''
    Точка плоского тора T^n: n координат из полуинтервала [0, 1).
    '''
    coords: Tuple[float, ...]

    def __post_init__(self):
        coords = tuple(float(c) for c in self.coords)
        if len(coords) == 0:
            raise ValueError("Размерность точки тора должна быть не меньше 1")
        for c in coords:
            if not math.isfinite(c) or c < 0.0 or c >= 1.0:
                raise ValueError(f"Координата {c} вне полуинтервала [0, 1)")
        object.__setattr__(self, "coords", coords)

    @property
    def dimension(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.array(self.coords, dtype=float)

    def __len__(self) -> int:
        return len(self.coords)


@dataclass(frozen=True)
class Displacement:
    '''
    Вектор смещения (значение векторного поля) без ограничений на компоненты.
    '''
    components: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(float(c) for c in self.components))

    @property
    def dimension(self) -> int:
        return len(self.components)

    def as_array(self) -> np.ndarray:
        return np.array(self.components, dtype=float)

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))


PointLike = Union[TorusPoint, Sequence[float], np.ndarray]


def _as_array(x: PointLike) -> np.ndarray:
    if isinstance(x, TorusPoint):
        return x.as_array()
    return np.asarray(x, dtype=float)


def wrap_array(v: np.ndarray) -> np.ndarray:
    """Покомпонентная редукция по модулю 1 в [0, 1) для массива любой формы."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("Нельзя свернуть на тор вектор с бесконечными компонентами")
    w = np.mod(v, 1.0)
    # np.mod(-1e-17, 1.0) == 1.0 в двоичной арифметике
    w[w >= 1.0] = 0.0
    return w


def wrap(v: PointLike) -> TorusPoint:
    arr = _as_array(v)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"Ожидался вектор размерности n >= 1, получена форма {arr.shape}")
    return TorusPoint(tuple(wrap_array(arr)))


def minimal_displacement(x: PointLike, y: PointLike) -> np.ndarray:
    """Представитель y - x с компонентами в [-1/2, 1/2)."""
    a, b = _as_array(x), _as_array(y)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"Несовпадение размерностей: {a.shape[-1]} и {b.shape[-1]}")
    d = np.mod(b - a + 0.5, 1.0) - 0.5
    return d


def torus_distance(x: PointLike, y: PointLike, metric: str = "euclidean") -> Union[float, np.ndarray]:
    # Евклидова длина покомпонентно минимального представителя разности;
    # метрика "max" нужна для рассуждений на сетке
    a, b = _as_array(x), _as_array(y)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"Несовпадение размерностей: {a.shape[-1]} и {b.shape[-1]}")
    diff = np.abs(a - b) % 1.0
    diff = np.minimum(diff, 1.0 - diff)
    if metric == "euclidean":
        d = np.sqrt(np.sum(diff * diff, axis=-1))
    elif metric == "max":
        d = np.max(diff, axis=-1)
    else:
        raise ValueError(f"Неизвестная метрика: {metric}, поддерживаются {METRICS}")
    if np.ndim(d) == 0:
        return float(d)
    return d
