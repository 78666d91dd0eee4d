from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union
import logging

import numpy as np
from scipy import ndimage, sparse

from ..config import Config
from ..systems.system_descriptor import SystemDescriptor

logger = logging.getLogger(__name__)

HEADER_SIZE = 16
FLAG_PERIODIC = 1


@dataclass(frozen=True)
class RasterDomain:
    '''
    Прямоугольная область [lower, upper]^n, разбитая на resolution ячеек по
    каждой оси. periodic=True означает тор: грани склеены.
    '''
    dimension: int
    resolution: int
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    periodic: bool

    def __post_init__(self):
        if self.dimension < 1 or self.resolution < 1:
            raise ValueError(f"Некорректная сетка: размерность {self.dimension}, разрешение {self.resolution}")
        if len(self.lower) != self.dimension or len(self.upper) != self.dimension:
            raise ValueError("Границы области не согласованы с размерностью")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise ValueError(f"Пустая область: {self.lower} .. {self.upper}")

    @classmethod
    def torus(cls, dimension: int, resolution: int) -> "RasterDomain":
        return cls(dimension, resolution, (0.0,) * dimension, (1.0,) * dimension, True)

    @classmethod
    def box(cls, dimension: int, resolution: int, lower: float = 0.0, upper: float = 1.0) -> "RasterDomain":
        return cls(dimension, resolution, (float(lower),) * dimension, (float(upper),) * dimension, False)

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.resolution,) * self.dimension

    @property
    def cell_count(self) -> int:
        return self.resolution ** self.dimension

    @property
    def cell_width(self) -> np.ndarray:
        return (np.array(self.upper) - np.array(self.lower)) / self.resolution

    def cells_of(self, points: np.ndarray) -> np.ndarray:
        """Плоские индексы ячеек; -1 для точек вне области (только для box)."""
        points = np.asarray(points, dtype=float).reshape(-1, self.dimension)
        lo, hi = np.array(self.lower), np.array(self.upper)
        rel = (points - lo) / (hi - lo)
        if self.periodic:
            rel = np.mod(rel, 1.0)
        idx = np.floor(rel * self.resolution).astype(np.int64)
        if self.periodic:
            idx = np.mod(idx, self.resolution)
            return np.ravel_multi_index(tuple(idx.T), self.shape)
        # правая граница области принадлежит последней ячейке
        idx[(rel == 1.0)] = self.resolution - 1
        inside = np.all((idx >= 0) & (idx < self.resolution), axis=1)
        out = np.full(len(points), -1, dtype=np.int64)
        if inside.any():
            out[inside] = np.ravel_multi_index(tuple(idx[inside].T), self.shape)
        return out

    def cell_samples(self, samples_per_axis: int) -> np.ndarray:
        '''
        Точки выборки формы (cell_count, s^n, n): внутренние узлы (j + 1/2)/s
        каждой ячейки.
        '''
        s = samples_per_axis
        offsets = (np.arange(s) + 0.5) / s
        sub = np.array(list(product(offsets, repeat=self.dimension)), dtype=float)
        corners = np.stack(np.unravel_index(np.arange(self.cell_count), self.shape), axis=1).astype(float)
        unit = (corners[:, None, :] + sub[None, :, :]) / self.resolution
        lo, hi = np.array(self.lower), np.array(self.upper)
        return lo + unit * (hi - lo)

    def face_neighbors(self, flat: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        '''
        Соседи по граням для массива плоских индексов (с учётом склейки на торе).
        Возвращает пары (позиция во входном массиве, индекс соседа).
        '''
        flat = np.asarray(flat, dtype=np.int64)
        idx = np.stack(np.unravel_index(flat, self.shape), axis=1)
        positions, neighbors = [], []
        for axis in range(self.dimension):
            for step in (-1, 1):
                moved = idx.copy()
                moved[:, axis] += step
                if self.periodic:
                    moved[:, axis] %= self.resolution
                    ok = np.ones(len(flat), dtype=bool)
                else:
                    ok = (moved[:, axis] >= 0) & (moved[:, axis] < self.resolution)
                positions.append(np.flatnonzero(ok))
                neighbors.append(np.ravel_multi_index(tuple(moved[ok].T), self.shape))
        return np.concatenate(positions), np.concatenate(neighbors)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dimension": self.dimension,
            "resolution": self.resolution,
            "lower": list(self.lower),
            "upper": list(self.upper),
            "periodic": self.periodic,
        }


class RasterSet:
    '''
    Класс RasterSet хранит подмножество области как булеву маску ячеек.
    Операции объединения, пересечения и дополнения точны на растре;
    замыкание расширяет множество на одну ячейку по граням, внутренность двойственно сужает.
    '''
    def __init__(self, domain: RasterDomain, mask: Optional[np.ndarray] = None):
        self.domain = domain
        if mask is None:
            mask = np.zeros(domain.shape, dtype=bool)
        mask = np.asarray(mask, dtype=bool)
        if mask.size != domain.cell_count:
            raise ValueError(f"Размер маски {mask.shape} не соответствует сетке {domain.shape}")
        self.mask = mask.reshape(domain.shape).copy()

    # Построители

    @classmethod
    def empty(cls, domain: RasterDomain) -> "RasterSet":
        return cls(domain)

    @classmethod
    def full(cls, domain: RasterDomain) -> "RasterSet":
        return cls(domain, np.ones(domain.shape, dtype=bool))

    @classmethod
    def box(cls, domain: RasterDomain, lows: Sequence[float], highs: Sequence[float]) -> "RasterSet":
        '''
        Ячейки, пересекающие замкнутый параллелепипед [lows, highs].
        '''
        lows, highs = np.asarray(lows, dtype=float), np.asarray(highs, dtype=float)
        if lows.shape != (domain.dimension,) or highs.shape != (domain.dimension,):
            raise ValueError("Границы параллелепипеда не согласованы с размерностью области")
        if np.any(highs < lows):
            raise ValueError(f"Пустой параллелепипед: {lows} .. {highs}")
        lo, hi = np.array(domain.lower), np.array(domain.upper)
        rel_lo = (lows - lo) / (hi - lo) * domain.resolution
        rel_hi = (highs - lo) / (hi - lo) * domain.resolution
        axes = []
        for a, b in zip(rel_lo, rel_hi):
            first = int(np.floor(a))
            last = int(np.ceil(b)) - 1 if b > np.floor(b) else int(b)
            cells = np.arange(first, last + 1)
            if domain.periodic:
                cells = np.unique(np.mod(cells, domain.resolution))
            else:
                cells = cells[(cells >= 0) & (cells < domain.resolution)]
            axes.append(cells)
        mask = np.zeros(domain.shape, dtype=bool)
        mask[np.ix_(*axes)] = True
        return cls(domain, mask)

    @classmethod
    def interval(cls, domain: RasterDomain, lo: float, hi: float) -> "RasterSet":
        if domain.dimension != 1:
            raise ValueError("Отрезок задаётся только на одномерной области")
        return cls.box(domain, [lo], [hi])

    @classmethod
    def disk(cls, domain: RasterDomain, center: Sequence[float], radius: float) -> "RasterSet":
        """Ячейки, центр которых лежит в открытом шаре."""
        if radius <= 0:
            raise ValueError(f"Радиус должен быть положительным: {radius}")
        centers = domain.cell_samples(1)[:, 0, :]
        diff = centers - np.asarray(center, dtype=float)
        if domain.periodic:
            diff = np.mod(diff + 0.5, 1.0) - 0.5
        inside = np.linalg.norm(diff, axis=1) < radius
        return cls(domain, inside)

    @classmethod
    def points(cls, domain: RasterDomain, points: Sequence[Sequence[float]]) -> "RasterSet":
        flat = domain.cells_of(np.asarray(points, dtype=float))
        if np.any(flat < 0):
            raise ValueError("Точка вне области растра")
        mask = np.zeros(domain.cell_count, dtype=bool)
        mask[flat] = True
        return cls(domain, mask)

    # Алгебра множеств

    def _check(self, other: "RasterSet"):
        if other.domain != self.domain:
            raise ValueError("Операция над растрами разных областей")

    def union(self, other: "RasterSet") -> "RasterSet":
        self._check(other)
        return RasterSet(self.domain, self.mask | other.mask)

    def intersection(self, other: "RasterSet") -> "RasterSet":
        self._check(other)
        return RasterSet(self.domain, self.mask & other.mask)

    def difference(self, other: "RasterSet") -> "RasterSet":
        self._check(other)
        return RasterSet(self.domain, self.mask & ~other.mask)

    def complement(self) -> "RasterSet":
        return RasterSet(self.domain, ~self.mask)

    __or__ = union
    __and__ = intersection
    __sub__ = difference

    def __invert__(self) -> "RasterSet":
        return self.complement()

    def issubset(self, other: "RasterSet") -> bool:
        self._check(other)
        return not np.any(self.mask & ~other.mask)

    def __le__(self, other: "RasterSet") -> bool:
        return self.issubset(other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterSet):
            return NotImplemented
        return self.domain == other.domain and bool(np.array_equal(self.mask, other.mask))

    def __hash__(self):
        return hash((self.domain, self.mask.tobytes()))

    def is_empty(self) -> bool:
        return not self.mask.any()

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.mask))

    @property
    def flat(self) -> np.ndarray:
        return self.mask.reshape(-1)

    def closure(self) -> "RasterSet":
        structure = ndimage.generate_binary_structure(self.domain.dimension, 1)
        if self.domain.periodic:
            padded = np.pad(self.mask, 1, mode="wrap")
            grown = ndimage.binary_dilation(padded, structure=structure)
            core = tuple(slice(1, -1) for _ in range(self.domain.dimension))
            return RasterSet(self.domain, grown[core])
        return RasterSet(self.domain, ndimage.binary_dilation(self.mask, structure=structure))

    def interior(self) -> "RasterSet":
        return self.complement().closure().complement()

    def components(self) -> Tuple[np.ndarray, int]:
        '''
        Метки компонент связности по граням; на торе метки, встречающиеся на
        противоположных гранях, объединяются.
        '''
        structure = ndimage.generate_binary_structure(self.domain.dimension, 1)
        labels, count = ndimage.label(self.mask, structure=structure)
        if not self.domain.periodic or count <= 1:
            return labels, count
        parent = list(range(count + 1))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for axis in range(self.domain.dimension):
            first = np.take(labels, 0, axis=axis)
            last = np.take(labels, -1, axis=axis)
            for a, b in zip(first.reshape(-1), last.reshape(-1)):
                if a and b:
                    ra, rb = find(int(a)), find(int(b))
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
        roots = np.array([find(i) for i in range(count + 1)])
        merged = roots[labels]
        unique = np.unique(merged[merged > 0])
        relabel = np.zeros(count + 1, dtype=np.int64)
        relabel[unique] = np.arange(1, len(unique) + 1)
        return relabel[merged], len(unique)

    def is_connected(self) -> bool:
        _, count = self.components()
        return count == 1

    def component_containing(self, seed: "RasterSet") -> "RasterSet":
        """Объединение компонент, пересекающих seed."""
        self._check(seed)
        labels, _ = self.components()
        hit = np.unique(labels[seed.mask & self.mask])
        hit = hit[hit > 0]
        return RasterSet(self.domain, np.isin(labels, hit))

    # Ввод-вывод

    def run_lengths(self) -> np.ndarray:
        '''
        Длины серий по плоской маске (порядок C), начиная с серии нулей
        (возможно, нулевой длины).
        '''
        flat = self.flat.astype(np.int8)
        change = np.flatnonzero(np.diff(flat)) + 1
        bounds = np.concatenate([[0], change, [flat.size]])
        runs = np.diff(bounds)
        if flat.size and flat[0]:
            runs = np.concatenate([[0], runs])
        return runs.astype("<u4")

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        flags = FLAG_PERIODIC if self.domain.periodic else 0
        header = Config.RASTER_MAGIC + np.array(
            [self.domain.dimension, self.domain.resolution, flags], dtype="<u4"
        ).tobytes()
        with open(path, "wb") as f:
            f.write(header)
            f.write(self.run_lengths().tobytes())
        logger.debug(f"Растр сохранён в {path}: {self.count} ячеек")
        return path

    @classmethod
    def load(cls, path: Union[str, Path], lower: float = 0.0, upper: float = 1.0) -> "RasterSet":
        '''
        Загружает растр; границы box-области в файле не хранятся и передаются явно.
        '''
        data = Path(path).read_bytes()
        if len(data) < HEADER_SIZE or data[:4] != Config.RASTER_MAGIC:
            raise ValueError(f"Файл {path} не является растром PMRS")
        dimension, resolution, flags = (int(v) for v in np.frombuffer(data[4:HEADER_SIZE], dtype="<u4"))
        if flags & FLAG_PERIODIC:
            domain = RasterDomain.torus(dimension, resolution)
        else:
            domain = RasterDomain.box(dimension, resolution, lower, upper)
        runs = np.frombuffer(data[HEADER_SIZE:], dtype="<u4").astype(np.int64)
        if runs.sum() != domain.cell_count:
            raise ValueError(f"Сумма серий {runs.sum()} не равна числу ячеек {domain.cell_count}")
        values = np.arange(len(runs)) % 2 == 1
        return cls(domain, np.repeat(values, runs))

    def to_dict(self) -> Dict[str, Any]:
        return {"domain": self.domain.to_dict(), "cell_count": self.count}

    def __repr__(self) -> str:
        return f"RasterSet(resolution={self.domain.resolution}, dimension={self.domain.dimension}, cells={self.count})"


PointMap = Callable[[np.ndarray], np.ndarray]


class RasterMap:
    '''
    Класс RasterMap строит внешнюю аппроксимацию отображения на растре:
    образ ячейки содержит ячейки образов s^n точек выборки и их соседей по граням.
    Переходы хранятся в разреженной матрице T[c, d] = 1, если d в образе c.
    '''
    def __init__(self, fn: PointMap, domain: RasterDomain, samples_per_axis: int = Config.RASTER_SAMPLES_PER_AXIS,
                 name: str = "custom", system: Optional[SystemDescriptor] = None):
        if samples_per_axis < 1:
            raise ValueError(f"Число точек выборки на ось должно быть положительным: {samples_per_axis}")
        self.fn = fn
        self.domain = domain
        self.samples_per_axis = samples_per_axis
        self.name = name
        self.system = system
        self.transitions = self._build()

    def _build(self) -> sparse.csr_matrix:
        d = self.domain
        pts = d.cell_samples(self.samples_per_axis)
        k = pts.shape[1]
        images = np.asarray(self.fn(pts.reshape(-1, d.dimension)), dtype=float)
        targets = d.cells_of(images)
        sources = np.repeat(np.arange(d.cell_count), k)
        keep = targets >= 0
        dropped = int((~keep).sum())
        if dropped:
            logger.debug(f"Растровое отображение {self.name}: {dropped} образов вне области отброшены")
        sources, targets = sources[keep], targets[keep]
        base = sparse.csr_matrix(
            (np.ones(len(sources), dtype=np.int32), (sources, targets)), shape=(d.cell_count, d.cell_count)
        )
        base.sum_duplicates()
        rows, cols = base.nonzero()
        # расширение каждого образа на одну ячейку по граням
        positions, neighbor_cols = d.face_neighbors(cols)
        all_rows = np.concatenate([rows, rows[positions]])
        all_cols = np.concatenate([cols, neighbor_cols])
        out = sparse.csr_matrix(
            (np.ones(len(all_rows), dtype=np.int32), (all_rows, all_cols)), shape=(d.cell_count, d.cell_count)
        )
        out.sum_duplicates()
        out.data[:] = 1
        return out

    # Именованные отображения

    @classmethod
    def from_system(cls, sys: SystemDescriptor, resolution: int,
                    samples_per_axis: int = Config.RASTER_SAMPLES_PER_AXIS) -> "RasterMap":
        if sys.kind == "Subshift":
            raise ValueError("Растровое отображение строится только для систем на торе")
        domain = RasterDomain.torus(sys.dimension, resolution)
        return cls(sys.apply_many, domain, samples_per_axis, name=sys.kind, system=sys)

    @classmethod
    def named(cls, name: str, domain: RasterDomain, samples_per_axis: int = Config.RASTER_SAMPLES_PER_AXIS,
              **params) -> "RasterMap":
        if name == "identity":
            fn = lambda x: x
        elif name == "doubling":
            if not domain.periodic:
                raise ValueError("Удвоение определено на торе")
            fn = lambda x: np.mod(2.0 * x, 1.0)
        elif name == "rotation":
            if not domain.periodic:
                raise ValueError("Поворот окружности (сдвиг тора) определён на торе")
            alpha = np.broadcast_to(np.asarray(params.get("alpha", np.sqrt(2.0) - 1.0), dtype=float), (domain.dimension,))
            fn = lambda x: np.mod(x + alpha, 1.0)
        elif name == "scaling":
            factor = float(params.get("factor", 0.5))
            fn = lambda x: factor * x
        elif name == "rotation90":
            if domain.dimension != 2:
                raise ValueError("Поворот на 90° определён на плоскости")
            fn = lambda x: np.stack([-x[:, 1], x[:, 0]], axis=1)
        else:
            raise ValueError(f"Неизвестное отображение: {name}, поддерживаются {sorted(NAMED_MAPS)}")
        return cls(fn, domain, samples_per_axis, name=name)

    # Образы и прообразы

    def image(self, S: RasterSet) -> RasterSet:
        self._check(S)
        hit = self.transitions.T.dot(S.flat.astype(np.int32)) > 0
        return RasterSet(self.domain, hit)

    def preimage(self, S: RasterSet) -> RasterSet:
        '''
        Внешний прообраз: ячейки, образ которых пересекает S.
        '''
        self._check(S)
        hit = self.transitions.dot(S.flat.astype(np.int32)) > 0
        return RasterSet(self.domain, hit)

    def _check(self, S: RasterSet):
        if S.domain != self.domain:
            raise ValueError("Растр и отображение заданы на разных сетках")

    def describe(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "domain": self.domain.to_dict(),
            "samples_per_axis": self.samples_per_axis,
            "transitions": int(self.transitions.nnz),
        }


NAMED_MAPS = ("identity", "doubling", "rotation", "scaling", "rotation90")
