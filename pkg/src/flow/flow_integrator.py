from dataclasses import asdict, dataclass
from itertools import product
from typing import Any, Dict, Iterator, List, Optional, Tuple
import logging

import numpy as np
import sympy
from scipy.integrate import DOP853

from ..config import Config
from ..systems.system_descriptor import SystemDescriptor, check_direction
from ..torus.torus_geometry import TorusPoint, torus_distance, wrap_array
from .slowed_field import SlowedLinearField

logger = logging.getLogger(__name__)


class IntegrationError(RuntimeError):
    """Интегратор не смог выдержать заданную точность."""


class IntegrationStalled(RuntimeError):
    '''
    Исчерпан бюджет шагов интегратора; хранит прошедшее время и последнее состояние.
    '''
    def __init__(self, elapsed: float, state: np.ndarray, message: str = ""):
        self.elapsed = float(elapsed)
        self.state = np.asarray(state, dtype=float)
        super().__init__(message or f"Интегрирование остановлено после времени {self.elapsed:.6g}")


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = Config.RTOL
    atol: float = Config.ATOL
    max_step: float = Config.MAX_STEP
    min_step: float = Config.MIN_STEP
    max_wall_steps: int = Config.MAX_WALL_STEPS

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError(f"Допуски должны быть положительными: rtol={self.rtol}, atol={self.atol}")
        if self.min_step <= 0 or self.max_step <= 0 or self.min_step > self.max_step:
            raise ValueError(f"Некорректные границы шага: min={self.min_step}, max={self.max_step}")
        if self.max_wall_steps < 1:
            raise ValueError(f"Бюджет шагов должен быть положительным: {self.max_wall_steps}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _piece_duration(field: SlowedLinearField) -> float:
    # За один кусок каждая координата смещается не более чем на 1/2
    return 0.5 / float(np.max(np.abs(field.gamma)))


def _solve_piece(field: SlowedLinearField, p: np.ndarray, h: float, cfg: IntegratorConfig,
                 budget: List[int], elapsed: float, samples: Optional[List[np.ndarray]] = None) -> np.ndarray:
    '''
    Численное интегрирование x' = V(x) на длительность h из точки p (без свёртки).
    budget: изменяемый счётчик оставшихся шагов на весь вызов integrate.
    '''
    solver = DOP853(lambda _t, y: field.velocity(y), 0.0, p.copy(), h,
                    rtol=cfg.rtol, atol=cfg.atol, max_step=cfg.max_step)
    while solver.status == "running":
        message = solver.step()
        budget[0] -= 1
        if solver.status == "failed":
            raise IntegrationError(f"Ошибка интегратора при t={elapsed + solver.t:.6g}: {message}")
        if samples is not None:
            samples.append(np.concatenate([[elapsed + solver.t], wrap_array(solver.y)]))
        if solver.status == "running":
            if solver.step_size is not None and solver.step_size < cfg.min_step:
                raise IntegrationError(
                    f"Шаг {solver.step_size:.3g} меньше минимального {cfg.min_step:.3g} при t={elapsed + solver.t:.6g}"
                )
            if budget[0] <= 0:
                logger.warning(f"Интегрирование остановлено: исчерпан бюджет {cfg.max_wall_steps} шагов")
                raise IntegrationStalled(elapsed + solver.t, wrap_array(solver.y))
    return solver.y


def integrate(field: SlowedLinearField, x0, t: float, cfg: Optional[IntegratorConfig] = None) -> np.ndarray:
    '''
    Решение x' = V(x) на время t (любого знака), свёрнутое на тор.
    Отрезки траектории вне шаров проходятся точным сдвигом на τγ,
    численный шаг DOP853 нужен только вблизи центров.
    '''
    cfg = cfg or IntegratorConfig()
    t = float(t)
    if not np.isfinite(t):
        raise ValueError(f"Время интегрирования должно быть конечным: {t}")
    x = wrap_array(np.asarray(x0.coords if isinstance(x0, TorusPoint) else x0, dtype=float))
    if x.shape != (field.dimension,):
        raise ValueError(f"Размерность точки {x.shape} не совпадает с размерностью поля {field.dimension}")
    if t == 0.0:
        return x
    piece = _piece_duration(field)
    sign = 1.0 if t > 0 else -1.0
    remaining = abs(t)
    elapsed = 0.0
    budget = [cfg.max_wall_steps]
    while remaining > 0.0:
        h = min(piece, remaining)
        if field.segment_clear(x, sign * h):
            x = wrap_array(x + sign * h * field.gamma)
        else:
            speed = float(np.linalg.norm(field.velocity(x)))
            if h * speed < cfg.atol:
                # глубоко в плоской части шапочки смещение ниже абсолютного допуска
                x = wrap_array(x + sign * h * field.velocity(x))
            else:
                x = wrap_array(_solve_piece(field, x, sign * h, cfg, budget, sign * elapsed))
        remaining -= h
        elapsed += h
    return x


def trajectory(field: SlowedLinearField, x0, t: float, cfg: Optional[IntegratorConfig] = None) -> np.ndarray:
    """Строки (t, x_1, …, x_n) по шагам интегратора для выгрузки в CSV."""
    cfg = cfg or IntegratorConfig()
    x = wrap_array(np.asarray(x0.coords if isinstance(x0, TorusPoint) else x0, dtype=float))
    samples = [np.concatenate([[0.0], x])]
    if t != 0.0:
        budget = [cfg.max_wall_steps]
        _solve_piece(field, x, float(t), cfg, budget, 0.0, samples)
    return np.array(samples)


@dataclass(frozen=True)
class FlowboxResult:
    ok: bool
    s: float
    rectangle: Optional[Tuple[Tuple[float, float], ...]] = None
    crossing_time: Optional[float] = None
    message: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ok": self.ok,
            "s": self.s,
            "rectangle": [list(side) for side in self.rectangle] if self.rectangle else None,
            "crossing_time": self.crossing_time,
            "message": self.message,
        }


def _find_rectangle(field: SlowedLinearField, s: float, crossing: float) -> Optional[np.ndarray]:
    '''
    Ищет на грубой сетке стартов прямоугольник R со сторонами w_i = crossing·|γ_i|,
    который вместе с заметаемой областью R + [0, s]γ не пересекает шаров.
    Возвращает нижний угол R или None.
    '''
    g = field.gamma
    widths = crossing * np.abs(g)
    sweep = s * g
    if np.any(widths + np.abs(sweep) >= 1.0):
        return None
    n = field.dimension
    m = 32 if n <= 3 else 8
    starts = np.array(list(product(range(m), repeat=n)), dtype=float) / m
    lo = starts + np.minimum(sweep, 0.0)
    hi = starts + widths + np.maximum(sweep, 0.0)
    ok = np.ones(len(starts), dtype=bool)
    for q in field.center_lifts():
        nearest = np.clip(q, lo, hi)
        ok &= np.sqrt(np.sum((nearest - q) ** 2, axis=1)) >= field.bump_radius
        if not ok.any():
            return None
    return starts[np.flatnonzero(ok)[0]]


def flowbox_check(field: SlowedLinearField, s: float) -> FlowboxResult:
    '''
    Достаточный критерий выбора s: существует прямоугольник R, в котором V = γ
    и время пересечения траекторией min_i w_i/|γ_i| больше s.
    '''
    if not field.centers:
        raise ValueError("flowbox_check требует поле хотя бы с одним центром")
    s = float(s)
    if s <= 0:
        raise ValueError(f"Время s должно быть положительным: {s}")
    best = None
    best_crossing = None
    for factor in (1.01, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0):
        crossing = s * factor
        corner = _find_rectangle(field, s, crossing)
        if corner is None:
            break
        best, best_crossing = corner, crossing
    if best is None:
        message = f"Нет прямоугольника с временем пересечения больше s={s}; уменьшите s"
        logger.info(message)
        return FlowboxResult(False, s, message=message)
    widths = best_crossing * np.abs(field.gamma)
    rectangle = tuple((float(a), float(a + w)) for a, w in zip(best, widths))
    crossing_time = float(np.min(widths / np.abs(field.gamma)))
    logger.debug(f"Найден прямоугольник {rectangle} с временем пересечения {crossing_time:.4g}")
    return FlowboxResult(True, s, rectangle, crossing_time)


class TimeSMap(SystemDescriptor):
    '''
    Отображение сдвига на время s вдоль потока замедленного поля: f(x) = ρ(x, s).
    '''
    kind = "TimeSMap"

    def __init__(self, field: SlowedLinearField, s, cfg: Optional[IntegratorConfig] = None,
                 flowbox: Optional[FlowboxResult] = None, metadata: Optional[Dict[str, Any]] = None):
        s = sympy.Rational(s)
        if s <= 0:
            raise ValueError(f"Время s должно быть положительным: {s}")
        super().__init__(field.dimension, metadata)
        self.field = field
        self.s = s
        self.cfg = cfg or IntegratorConfig()
        self.flowbox = flowbox
        self._s = float(s)
        self._step = self._s * field.gamma
        self._safe = field.bump_radius + float(np.linalg.norm(self._step))

    def apply(self, x):
        return integrate(self.field, self.check_state(x), self._s, self.cfg)

    def apply_inverse(self, x):
        return integrate(self.field, self.check_state(x), -self._s, self.cfg)

    def orbit(self, x0, steps: int, direction: str = "forward", chunk_size: int = 4096) -> Iterator[np.ndarray]:
        # Вдали от центров f есть сдвиг на sγ: такие серии шагов считаются пакетно
        check_direction(direction)
        if steps < 0:
            raise ValueError(f"Число шагов должно быть неотрицательным: {steps}")
        x = self.check_state(x0)
        v = self._step if direction == "forward" else -self._step
        centers = self.field.center_array
        chunk = [x]
        done = 0
        probe = chunk_size
        while done < steps:
            batch = min(probe, steps - done)
            starts = wrap_array(x + np.outer(np.arange(batch, dtype=float), v))
            if len(centers):
                d = torus_distance(starts[:, None, :], centers[None, :, :]).min(axis=1)
                near = np.flatnonzero(d < self._safe)
                free = int(near[0]) if len(near) else batch
            else:
                free = batch
            if free > 0:
                moved = wrap_array(x + np.outer(np.arange(1, free + 1, dtype=float), v))
                chunk.extend(moved)
                x = moved[-1]
                done += free
            if free < batch:
                x = self.step(x, direction)
                chunk.append(x)
                done += 1
                probe = 8
            else:
                probe = min(2 * probe, chunk_size)
            while len(chunk) >= chunk_size:
                yield np.array(chunk[:chunk_size])
                chunk = chunk[chunk_size:]
        if chunk:
            yield np.array(chunk)

    def known_fixed_points(self) -> List[np.ndarray]:
        return [c.as_array() for c in self.field.centers]

    def flow_speed(self, x) -> float:
        return float(np.linalg.norm(self.field.velocity(np.asarray(x, dtype=float))))

    def describe(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "dimension": self.dimension,
            "s": str(self.s),
            "field": self.field.describe(),
            "integrator": self.cfg.to_dict(),
            "flowbox": self.flowbox.to_dict() if self.flowbox else None,
        }

    def independence_declarations(self) -> Dict[str, str]:
        return self.field.frequencies.basis.declaration()


def time_s_map(field: SlowedLinearField, s, cfg: Optional[IntegratorConfig] = None) -> TimeSMap:
    s = sympy.Rational(s)
    if s <= 0:
        raise ValueError(f"Время s должно быть положительным: {s}")
    flowbox = flowbox_check(field, float(s)) if field.centers else None
    if flowbox is not None and not flowbox.ok:
        logger.warning(f"Для s={s} не найден прямоугольник потока: {flowbox.message}")
    return TimeSMap(field, s, cfg, flowbox)
