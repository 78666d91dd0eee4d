from typing import Any, Dict, List, Tuple, Union
import logging

import numpy as np

from .torus_geometry import TorusPoint

logger = logging.getLogger(__name__)


class CoverageGrid:
    '''
    Класс CoverageGrid ведёт учёт посещённых ячеек ε-сетки на торе T^n:
    m ячеек на ось, доля покрытия |occupancy| / m^n не убывает при записи.
    '''
    def __init__(self, resolution: int, dimension: int):
        if resolution < 1:
            raise ValueError(f"Разрешение сетки должно быть положительным: {resolution}")
        if dimension < 1:
            raise ValueError(f"Размерность должна быть не меньше 1: {dimension}")
        self.resolution = int(resolution)
        self.dimension = int(dimension)
        self.shape = (self.resolution,) * self.dimension
        self.occupancy = np.zeros(self.resolution ** self.dimension, dtype=bool)
        self.visit_count = 0

    @property
    def total_cells(self) -> int:
        return self.occupancy.size

    @property
    def visited_cell_count(self) -> int:
        return int(np.count_nonzero(self.occupancy))

    @property
    def fraction(self) -> float:
        return self.visited_cell_count / self.total_cells

    def is_complete(self, threshold: float = 1.0) -> bool:
        return self.fraction >= threshold

    def cell_of(self, x: Union[TorusPoint, np.ndarray]) -> Tuple[int, ...]:
        arr = x.as_array() if isinstance(x, TorusPoint) else np.asarray(x, dtype=float)
        return tuple(int(i) for i in self._cells(arr.reshape(1, -1))[0])

    def _cells(self, points: np.ndarray) -> np.ndarray:
        if points.shape[1] != self.dimension:
            raise ValueError(
                f"Размерность точки {points.shape[1]} не совпадает с размерностью сетки {self.dimension}"
            )
        cells = np.floor(points * self.resolution).astype(np.int64)
        return np.clip(cells, 0, self.resolution - 1)

    def record(self, x: Union[TorusPoint, np.ndarray]) -> "CoverageGrid":
        arr = x.as_array() if isinstance(x, TorusPoint) else np.asarray(x, dtype=float)
        return self.record_many(arr.reshape(1, -1))

    def record_many(self, points: np.ndarray) -> "CoverageGrid":
        points = np.asarray(points, dtype=float)
        if points.size == 0:
            return self
        cells = self._cells(points.reshape(-1, self.dimension))
        flat = np.ravel_multi_index(tuple(cells.T), self.shape)
        self.occupancy[flat] = True
        self.visit_count += len(flat)
        return self

    def merge(self, other: "CoverageGrid") -> "CoverageGrid":
        # Объединение занятости: ассоциативно и коммутативно
        if other.resolution != self.resolution or other.dimension != self.dimension:
            raise ValueError("Нельзя объединить сетки разного разрешения или размерности")
        merged = self.copy()
        merged.occupancy |= other.occupancy
        merged.visit_count += other.visit_count
        return merged

    def copy(self) -> "CoverageGrid":
        clone = CoverageGrid(self.resolution, self.dimension)
        clone.occupancy = self.occupancy.copy()
        clone.visit_count = self.visit_count
        return clone

    def occupied_cells(self) -> List[Tuple[int, ...]]:
        flat = np.flatnonzero(self.occupancy)
        return [tuple(int(i) for i in idx) for idx in zip(*np.unravel_index(flat, self.shape))]

    def same_occupancy(self, other: "CoverageGrid") -> bool:
        return bool(np.array_equal(self.occupancy, other.occupancy))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "resolution": self.resolution,
            "visited_cell_count": self.visited_cell_count,
            "fraction": self.fraction,
        }
