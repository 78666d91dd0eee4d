from itertools import product
from typing import Any, Callable, Dict, Optional, Sequence
import logging

import numpy as np

from ..torus.torus_geometry import Displacement, TorusPoint, torus_distance, wrap
from ..systems.exact_vector import ExactVector

logger = logging.getLogger(__name__)


def _exp_bump(t: np.ndarray) -> np.ndarray:
    # φ(d) = exp(1 - 1/(1 - (1 - d/r)^2)), t = d/r
    out = np.ones_like(t)
    inside = t < 1.0
    u = 1.0 - t[inside]
    denom = 1.0 - u * u
    values = np.zeros_like(u)
    positive = denom > 0.0
    values[positive] = np.exp(1.0 - 1.0 / denom[positive])
    out[inside] = values
    return out


def _smoothstep(t: np.ndarray) -> np.ndarray:
    # h(t) / (h(t) + h(1 - t)), h(t) = exp(-1/t)
    def h(v):
        res = np.zeros_like(v)
        pos = v > 0.0
        res[pos] = np.exp(-1.0 / v[pos])
        return res

    out = np.ones_like(t)
    inside = t < 1.0
    a, b = h(t[inside]), h(1.0 - t[inside])
    out[inside] = a / (a + b)
    return out


PROFILES: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "exp_bump": _exp_bump,
    "smoothstep": _smoothstep,
}

PROFILE_FORMULAS = {
    "exp_bump": "exp(1 - 1/(1 - (1 - d/r)^2)) for d < r, 1 otherwise",
    "smoothstep": "h(d/r)/(h(d/r) + h(1 - d/r)), h(t) = exp(-1/t), 1 for d >= r",
}


class SlowedLinearField:
    '''
    Класс SlowedLinearField задаёт замедленное линейное поле V(x) = Φ(x)·γ на T^n:
    Φ есть произведение радиальных гладких "шапочек" вокруг центров, Φ(центр) = 0,
    Φ = 1 вне шаров радиуса r. Траектории V лежат на прямых направления γ.
    '''
    def __init__(self, frequencies: ExactVector, centers: Sequence[TorusPoint] = (),
                 bump_radius: float = 0.1, profile: str = "exp_bump"):
        n = frequencies.dimension
        if n < 2:
            raise ValueError(f"Размерность поля должна быть не меньше 2: {n}")
        if not 0.0 < bump_radius <= 0.25:
            raise ValueError(f"Радиус шапочки должен лежать в (0, 1/4]: {bump_radius}")
        if profile not in PROFILES:
            raise ValueError(f"Неизвестный профиль: {profile}, поддерживаются {sorted(PROFILES)}")
        centers = tuple(c if isinstance(c, TorusPoint) else wrap(np.asarray(c, dtype=float)) for c in centers)
        for c in centers:
            if c.dimension != n:
                raise ValueError(f"Размерность центра {c.dimension} не совпадает с размерностью поля {n}")
        self.frequencies = frequencies
        self.dimension = n
        self.centers = centers
        self.bump_radius = float(bump_radius)
        self.profile = profile
        self.gamma = frequencies.numeric()
        if np.linalg.norm(self.gamma) == 0.0:
            raise ValueError("Вектор частот не может быть нулевым")
        self._center_array = np.array([c.coords for c in centers], dtype=float).reshape(-1, n)
        self._phi = PROFILES[profile]
        if centers and self.balls_cover_torus():
            raise ValueError("Шары вокруг центров покрывают тор: нет области, где V = γ")
        logger.debug(f"Замедленное поле: γ={self.gamma}, центров {len(centers)}, r={self.bump_radius}, профиль {profile}")

    @property
    def center_array(self) -> np.ndarray:
        return self._center_array.copy()

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.gamma))

    def phi(self, d) -> np.ndarray:
        """Профиль шапочки как функция расстояния до центра."""
        d = np.asarray(d, dtype=float)
        return self._phi(np.atleast_1d(d / self.bump_radius)).reshape(d.shape)

    def center_distances(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, self.dimension)
        if not self.centers:
            return np.full((len(points), 0), np.inf)
        return torus_distance(points[:, None, :], self._center_array[None, :, :])

    def factor(self, points: np.ndarray) -> np.ndarray:
        """Φ(x) для массива точек формы (N, n)."""
        d = self.center_distances(points)
        if d.shape[1] == 0:
            return np.ones(d.shape[0])
        return np.prod(self.phi(d), axis=1)

    def velocity(self, y: np.ndarray) -> np.ndarray:
        """V(y) для одной точки, координаты y могут быть не свёрнуты."""
        return self.factor(np.asarray(y, dtype=float).reshape(1, -1))[0] * self.gamma

    def eval_field(self, x) -> Displacement:
        arr = x.as_array() if isinstance(x, TorusPoint) else np.asarray(x, dtype=float)
        if arr.shape != (self.dimension,):
            raise ValueError(f"Размерность точки {arr.shape} не совпадает с размерностью поля {self.dimension}")
        return Displacement(tuple(self.velocity(arr)))

    def min_center_distance(self, x: np.ndarray) -> float:
        d = self.center_distances(x)
        return float(d.min()) if d.size else float("inf")

    def balls_cover_torus(self, samples_per_axis: Optional[int] = None) -> bool:
        '''
        Проверка на сетке: лежит ли каждая точка выборки внутри какого-нибудь шара.
        '''
        m = samples_per_axis or (64 if self.dimension <= 2 else 24 if self.dimension == 3 else 8)
        axes = [(np.arange(m) + 0.5) / m] * self.dimension
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dimension)
        covered = np.zeros(len(grid), dtype=bool)
        for c in self._center_array:
            covered |= torus_distance(grid, c) < self.bump_radius
        return bool(covered.all())

    def center_lifts(self) -> np.ndarray:
        """Сдвиги центров на целые векторы из {-1, 0, 1, 2}^n."""
        if not self.centers:
            return np.zeros((0, self.dimension))
        shifts = np.array(list(product((-1, 0, 1, 2), repeat=self.dimension)), dtype=float)
        return (self._center_array[:, None, :] + shifts[None, :, :]).reshape(-1, self.dimension)

    def segment_clear(self, p: np.ndarray, t: float) -> bool:
        '''
        Отрезок p + τγ, τ между 0 и t (p в [0,1)^n, |tγ_i| <= 1/2) целиком
        лежит вне открытых шаров: на нём V = γ и поток есть точный сдвиг.
        '''
        if not self.centers:
            return True
        lifts = self.center_lifts()
        g = self.gamma
        lo, hi = min(0.0, t), max(0.0, t)
        tau = np.clip((lifts - p) @ g / (g @ g), lo, hi)
        nearest = p[None, :] + tau[:, None] * g[None, :]
        dist = np.sqrt(np.sum((nearest - lifts) ** 2, axis=1))
        return bool(np.all(dist >= self.bump_radius))

    def describe(self) -> Dict[str, Any]:
        return {
            "dimension": self.dimension,
            "frequencies": self.frequencies.to_strings(),
            "centers": [list(c.coords) for c in self.centers],
            "bump_radius": self.bump_radius,
            "profile_id": self.profile,
            "profile": PROFILE_FORMULAS[self.profile],
        }
