from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple
import logging

import numpy as np
import sympy

from ..config import Config
from ..flow.flow_integrator import IntegrationStalled, IntegratorConfig, time_s_map
from ..flow.slowed_field import SlowedLinearField
from ..systems.system_descriptor import ProductSystem, SystemDescriptor, check_direction
from ..torus.coverage_grid import CoverageGrid
from ..torus.torus_geometry import torus_distance

logger = logging.getLogger(__name__)

EMPIRICALLY_DENSE = "EmpiricallyDense"
PERIODIC = "Periodic"
ASYMPTOTIC = "AsymptoticToFixedPoint"
NON_DENSE_OTHER = "NonDenseOther"
INCONCLUSIVE = "Inconclusive"


class AnalysisInvariantError(RuntimeError):
    """Нарушен инвариант, который должен выполняться по построению."""


@dataclass(frozen=True)
class ClassificationTolerances:
    dense_threshold: float = Config.DENSE_THRESHOLD
    period_tolerance: float = Config.PERIOD_TOLERANCE
    period_confirmations: int = Config.PERIOD_CONFIRMATIONS
    stall_window: float = Config.STALL_WINDOW
    asymptotic_distance: float = Config.ASYMPTOTIC_DISTANCE
    field_zero_tolerance: float = Config.FIELD_ZERO_TOLERANCE

    def __post_init__(self):
        if not 0.0 < self.dense_threshold <= 1.0:
            raise ValueError(f"Порог плотности должен лежать в (0, 1]: {self.dense_threshold}")
        if not 0.0 < self.stall_window < 1.0:
            raise ValueError(f"Окно остановки должно лежать в (0, 1): {self.stall_window}")
        if self.period_confirmations < 1:
            raise ValueError("Нужна хотя бы одна проверка периода")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class CoverageRun:
    '''
    Результат прогона покрытия: кривая (шаг, доля), итоговая сетка и флаги.
    '''
    direction: str
    curve: List[Tuple[int, float]]
    grid: CoverageGrid
    steps_done: int
    last_new_cell_step: int = 0
    complete_at: Optional[int] = None
    stalled: bool = False
    stall_time: Optional[float] = None

    @property
    def fraction(self) -> float:
        return self.grid.fraction

    def to_dict(self) -> Dict[str, Any]:
        return {
            "direction": self.direction,
            "steps_done": self.steps_done,
            "complete_at": self.complete_at,
            "last_new_cell_step": self.last_new_cell_step,
            "integration_stalled": self.stalled,
            "stall_time": self.stall_time,
            "grid": self.grid.to_dict(),
        }


def _check_resolution(resolution: int):
    if resolution < 1 or resolution & (resolution - 1):
        raise ValueError(f"Разрешение сетки должно быть степенью двойки: {resolution}")


def _chunks(sys: SystemDescriptor, x0, steps: int, direction: str, status: Dict[str, Any]) -> Iterator[Tuple[int, Any]]:
    """Куски орбиты с индексом первого состояния; остановка интегратора записывается в status."""
    index = 0
    try:
        for chunk in sys.orbit(x0, steps, direction):
            yield index, chunk
            index += len(chunk)
    except IntegrationStalled as e:
        logger.warning(f"Орбита усечена на шаге {index}: интегратор остановился (t={e.elapsed:.4g})")
        status["stalled"] = True
        status["stall_time"] = e.elapsed


def _record_chunk(grid: CoverageGrid, points: np.ndarray, start: int) -> Optional[int]:
    """Записывает точки в сетку; возвращает индекс последнего шага, открывшего новую ячейку."""
    cells = grid._cells(points)
    flat = np.ravel_multi_index(tuple(cells.T), grid.shape)
    uniq, first = np.unique(flat, return_index=True)
    fresh = ~grid.occupancy[uniq]
    grid.record_many(points)
    if not fresh.any():
        return None
    return start + int(first[fresh].max())


def coverage_experiment(sys: SystemDescriptor, x0, steps: int, resolution: int = Config.DEFAULT_RESOLUTION,
                        direction: str = "forward", threshold: float = Config.DENSE_THRESHOLD,
                        stop_when_complete: bool = True) -> CoverageRun:
    '''
    Итерирует систему и отмечает посещённые ячейки ε-сетки.
    Точки подсдвига вкладываются в [0,1) чередованием координат.
    '''
    check_direction(direction)
    if steps < 1:
        raise ValueError(f"Число шагов должно быть не меньше 1: {steps}")
    if steps > Config.MAX_STEPS:
        raise ValueError(f"Число шагов {steps} превышает предел {Config.MAX_STEPS}")
    _check_resolution(resolution)
    grid = CoverageGrid(resolution, sys.embedding_dimension)
    curve: List[Tuple[int, float]] = []
    status: Dict[str, Any] = {"stalled": False, "stall_time": None}
    last_new = 0
    complete_at = None
    done = 0
    for start, chunk in _chunks(sys, x0, steps, direction, status):
        new = _record_chunk(grid, sys.embed(chunk), start)
        if new is not None:
            last_new = new
        done = start + len(chunk) - 1
        curve.append((done, grid.fraction))
        if complete_at is None and grid.is_complete(threshold):
            complete_at = last_new
            if stop_when_complete:
                break
    logger.debug(f"Покрытие ({direction}): {grid.fraction:.4f} за {done} шагов")
    return CoverageRun(direction, curve, grid, done, last_new, complete_at, status["stalled"], status["stall_time"])


def omega_limit_approx(sys: SystemDescriptor, x0, burn_in: int, window: int,
                       resolution: int = Config.DEFAULT_RESOLUTION, direction: str = "forward") -> CoverageGrid:
    """Занятость отрезка орбиты [burn_in, burn_in + window] как приближение ω- (α-) предельного множества."""
    if burn_in < 0 or window < 1:
        raise ValueError(f"Некорректные burn_in={burn_in}, window={window}")
    if burn_in + window > Config.MAX_STEPS:
        raise ValueError(f"burn_in + window превышает предел {Config.MAX_STEPS}")
    _check_resolution(resolution)
    grid = CoverageGrid(resolution, sys.embedding_dimension)
    status: Dict[str, Any] = {"stalled": False, "stall_time": None}
    for start, chunk in _chunks(sys, x0, burn_in + window, direction, status):
        stop = start + len(chunk)
        if stop <= burn_in:
            continue
        offset = max(0, burn_in - start)
        grid.record_many(sys.embed(chunk[offset:]))
    return grid


@dataclass
class OrbitReport:
    classification: str
    forward_verdict: str
    backward_verdict: str
    forward_curve: List[Tuple[int, float]]
    backward_curve: List[Tuple[int, float]]
    in_script_A: bool
    in_script_W: bool
    period: Optional[int] = None
    target: Optional[List[float]] = None
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "classification": self.classification,
            "period": self.period,
            "target": self.target,
            "forward_verdict": self.forward_verdict,
            "backward_verdict": self.backward_verdict,
            "in_script_A": self.in_script_A,
            "in_script_W": self.in_script_W,
            "forward_final_fraction": self.forward_curve[-1][1] if self.forward_curve else 0.0,
            "backward_final_fraction": self.backward_curve[-1][1] if self.backward_curve else 0.0,
            "details": self.details,
        }


def _confirmed_targets(sys: SystemDescriptor, tol: ClassificationTolerances) -> List[np.ndarray]:
    '''
    Известные неподвижные точки, подтверждённые как нули поля (для отображений
    потока) либо как неподвижные точки самого отображения.
    '''
    targets = []
    field_ = getattr(sys, "field", None)
    for p in sys.known_fixed_points():
        if field_ is not None:
            if np.linalg.norm(field_.velocity(p)) < tol.field_zero_tolerance:
                targets.append(p)
        elif sys.state_distance(sys.apply(p), p) < tol.period_tolerance:
            targets.append(p)
    return targets


def _distances(sys: SystemDescriptor, chunk, x) -> np.ndarray:
    if isinstance(chunk, np.ndarray):
        return torus_distance(chunk, np.asarray(x, dtype=float))
    return np.array([sys.state_distance(y, x) for y in chunk])


class _DirectionScan:
    '''
    Один проход орбиты в заданном направлении: покрытие, поиск периода и
    монотонность расстояния до целей на последнем окне бюджета.
    '''
    def __init__(self, sys: SystemDescriptor, x0, budget: int, resolution: int, direction: str,
                 tol: ClassificationTolerances, targets: List[np.ndarray], find_period: bool):
        self.sys = sys
        self.x0 = x0
        self.budget = budget
        self.direction = direction
        self.tol = tol
        self.targets = targets
        self.find_period = find_period
        self.grid = CoverageGrid(resolution, sys.embedding_dimension)
        self.window_start = int(np.floor(budget * (1.0 - tol.stall_window)))
        self.recurrences: List[int] = []
        self.period: Optional[int] = None
        self.curve: List[Tuple[int, float]] = []
        self.last_new = 0
        self.done = 0
        self.status: Dict[str, Any] = {"stalled": False, "stall_time": None}
        self.monotone = [True] * len(targets)
        self.previous = [None] * len(targets)
        self.final_distance = [None] * len(targets)
        self.final_displacement: Optional[float] = None
        self._last_state = None
        self._origin = None

    def _check_period(self):
        # наименьший p, для которого повторяются x_p, x_2p, …, x_{kp}
        found = set(self.recurrences)
        for p in self.recurrences:
            confirmations = range(1, self.tol.period_confirmations + 1)
            if p * self.tol.period_confirmations > self.done:
                return
            if all(k * p in found for k in confirmations):
                self.period = p
                return

    def run(self) -> "_DirectionScan":
        for start, chunk in _chunks(self.sys, self.x0, self.budget, self.direction, self.status):
            new = _record_chunk(self.grid, self.sys.embed(chunk), start)
            if new is not None:
                self.last_new = new
            self.done = start + len(chunk) - 1
            self.curve.append((self.done, self.grid.fraction))
            if start == 0:
                self._origin = chunk[0]
            if self.find_period:
                d0 = _distances(self.sys, chunk, self._origin)
                hits = np.flatnonzero(d0 < self.tol.period_tolerance)
                self.recurrences.extend(int(start + h) for h in hits if start + h > 0)
                if self.recurrences:
                    self._check_period()
                if self.period is not None:
                    break
            self._track_targets(start, chunk)
            # периодичность проверяется только до заполнения сетки
            if self.complete:
                break
        return self

    def _track_targets(self, start: int, chunk):
        n = len(chunk)
        if self.done >= self.window_start and n:
            offset = max(0, self.window_start - start)
            window = chunk[offset:]
            if isinstance(chunk, np.ndarray):
                previous = self._last_state if offset == 0 and self._last_state is not None else None
                if len(window) >= 2:
                    self.final_displacement = float(torus_distance(window[-1], window[-2]))
                elif previous is not None and len(window) == 1:
                    self.final_displacement = float(torus_distance(window[-1], previous))
            for i, t in enumerate(self.targets):
                d = _distances(self.sys, window, t)
                if self.previous[i] is not None:
                    d = np.concatenate([[self.previous[i]], d])
                if np.any(np.diff(d) > 1e-15):
                    self.monotone[i] = False
                self.previous[i] = float(d[-1])
                self.final_distance[i] = float(d[-1])
        if n:
            self._last_state = chunk[-1]

    @property
    def complete(self) -> bool:
        return self.grid.is_complete(self.tol.dense_threshold)

    def asymptotic_target(self) -> Optional[int]:
        if self.done < self.window_start or self.status["stalled"]:
            return None
        field_ = getattr(self.sys, "field", None)
        radius = field_.bump_radius if field_ is not None else None
        for i in range(len(self.targets)):
            d = self.final_distance[i]
            if d is None or not self.monotone[i]:
                continue
            if d < self.tol.asymptotic_distance:
                return i
            slow = self.final_displacement is not None and self.final_displacement < self.tol.asymptotic_distance
            if radius is not None and slow and d < radius:
                return i
        return None

    def coverage_stalled(self) -> bool:
        return self.done >= self.window_start and self.last_new < self.window_start

    def verdict(self) -> str:
        if self.complete:
            return EMPIRICALLY_DENSE
        if self.asymptotic_target() is not None:
            return ASYMPTOTIC
        if self.coverage_stalled():
            return NON_DENSE_OTHER
        return INCONCLUSIVE


def classify_orbit(sys: SystemDescriptor, x0, budget: int, resolution: int = Config.DEFAULT_RESOLUTION,
                   tolerances: Optional[ClassificationTolerances] = None) -> OrbitReport:
    '''
    Эмпирическая классификация орбиты x0 по прямому и обратному прогонам
    с бюджетом budget шагов в каждую сторону.
    '''
    tol = tolerances or ClassificationTolerances()
    if budget < 1 or budget > Config.MAX_STEPS:
        raise ValueError(f"Бюджет шагов должен лежать в [1, {Config.MAX_STEPS}]: {budget}")
    _check_resolution(resolution)
    targets = _confirmed_targets(sys, tol)
    forward = _DirectionScan(sys, x0, budget, resolution, "forward", tol, targets, True).run()
    details: Dict[str, Any] = {
        "budget": budget,
        "resolution": resolution,
        "tolerances": tol.to_dict(),
        "forward": {"steps_done": forward.done, "integration_stalled": forward.status["stalled"]},
    }
    if forward.period is not None:
        logger.info(f"Орбита периодична с периодом {forward.period}")
        return OrbitReport(
            PERIODIC, PERIODIC, PERIODIC, forward.curve, forward.curve,
            in_script_A=not forward.complete, in_script_W=not forward.complete,
            period=forward.period, details=details,
        )
    backward = _DirectionScan(sys, x0, budget, resolution, "backward", tol, targets, False).run()
    details["backward"] = {"steps_done": backward.done, "integration_stalled": backward.status["stalled"]}
    fv, bv = forward.verdict(), backward.verdict()
    target = None
    if fv == EMPIRICALLY_DENSE and bv == EMPIRICALLY_DENSE:
        classification = EMPIRICALLY_DENSE
    elif ASYMPTOTIC in (fv, bv):
        classification = ASYMPTOTIC
        scan = forward if fv == ASYMPTOTIC else backward
        target = [float(v) for v in np.asarray(targets[scan.asymptotic_target()], dtype=float)]
        details["asymptotic_direction"] = scan.direction
    elif NON_DENSE_OTHER in (fv, bv):
        classification = NON_DENSE_OTHER
    else:
        classification = INCONCLUSIVE
    logger.info(f"Классификация орбиты: {classification} (вперёд {fv}, назад {bv})")
    return OrbitReport(
        classification, fv, bv, forward.curve, backward.curve,
        in_script_A=not backward.complete, in_script_W=not forward.complete,
        target=target, details=details,
    )


@dataclass
class ResidueLimitProfile:
    prime: int
    forward: List[CoverageGrid]
    backward: List[CoverageGrid]
    forward_full: CoverageGrid
    backward_full: CoverageGrid

    def to_dict(self) -> Dict[str, Any]:
        return {
            "prime": self.prime,
            "forward": [g.fraction for g in self.forward],
            "backward": [g.fraction for g in self.backward],
            "forward_full": self.forward_full.fraction,
            "backward_full": self.backward_full.fraction,
        }


def residue_limit_sets(sys: SystemDescriptor, x0, p: int, steps: int,
                       resolution: int = Config.DEFAULT_RESOLUTION) -> ResidueLimitProfile:
    '''
    Занятость итераций с индексом ≡ i (mod p) отдельно для прямой и обратной орбит.
    Объединение по классам обязано совпасть с занятостью всей орбиты.
    '''
    if not sympy.isprime(p):
        raise ValueError(f"p должно быть простым: {p}")
    if steps < 1 or steps > Config.MAX_STEPS:
        raise ValueError(f"Число шагов должно лежать в [1, {Config.MAX_STEPS}]: {steps}")
    _check_resolution(resolution)
    dim = sys.embedding_dimension
    grids = {d: [CoverageGrid(resolution, dim) for _ in range(p)] for d in ("forward", "backward")}
    full = {d: CoverageGrid(resolution, dim) for d in ("forward", "backward")}
    for direction in ("forward", "backward"):
        sign = 1 if direction == "forward" else -1
        status: Dict[str, Any] = {"stalled": False, "stall_time": None}
        for start, chunk in _chunks(sys, x0, steps, direction, status):
            points = sys.embed(chunk)
            full[direction].record_many(points)
            classes = np.mod(sign * (start + np.arange(len(points))), p)
            for i in range(p):
                grids[direction][i].record_many(points[classes == i])
        union = grids[direction][0].copy()
        for g in grids[direction][1:]:
            union = union.merge(g)
        if not union.same_occupancy(full[direction]):
            raise AnalysisInvariantError(f"Объединение классов вычетов не совпало с орбитой ({direction})")
    return ResidueLimitProfile(p, grids["forward"], grids["backward"], full["forward"], full["backward"])


@dataclass
class PowerScanEntry:
    prime: int
    run: CoverageRun

    def to_dict(self) -> Dict[str, Any]:
        return {"prime": self.prime, "fraction": self.run.fraction, **self.run.to_dict()}


class _PowerMap(SystemDescriptor):
    """f^p, вычисляемая прореживанием орбиты f."""
    kind = "Power"

    def __init__(self, base: SystemDescriptor, p: int):
        super().__init__(base.dimension)
        self.base = base
        self.p = p

    def apply(self, x):
        for _ in range(self.p):
            x = self.base.apply(x)
        return x

    def apply_inverse(self, x):
        for _ in range(self.p):
            x = self.base.apply_inverse(x)
        return x

    def orbit(self, x0, steps: int, direction: str = "forward", chunk_size: int = 4096):
        buffer = []
        offset = 0
        for chunk in self.base.orbit(x0, steps * self.p, direction, chunk_size):
            picked = [chunk[i] for i in range((-offset) % self.p, len(chunk), self.p)]
            offset += len(chunk)
            buffer.extend(picked)
            if len(buffer) >= chunk_size:
                yield np.array(buffer) if isinstance(chunk, np.ndarray) else buffer
                buffer = []
        if buffer:
            yield np.array(buffer) if isinstance(buffer[0], np.ndarray) else buffer

    def embed(self, states):
        return self.base.embed(states)

    @property
    def embedding_dimension(self) -> int:
        return self.base.embedding_dimension


def power_minimality_scan(sys: SystemDescriptor, x0, primes: Sequence[int], steps: int,
                          resolution: int = Config.DEFAULT_RESOLUTION,
                          threshold: float = Config.DENSE_THRESHOLD) -> List[PowerScanEntry]:
    """Кривые покрытия f^p для каждого простого p (steps итераций f^p)."""
    out = []
    for p in primes:
        if not sympy.isprime(p):
            raise ValueError(f"p должно быть простым: {p}")
        run = coverage_experiment(_PowerMap(sys, p), x0, steps, resolution, "forward", threshold)
        logger.info(f"f^{p}: покрытие {run.fraction:.4f}")
        out.append(PowerScanEntry(p, run))
    return out


@dataclass
class ProductProbeReport:
    resolution: int
    steps: int
    product_fractions: List[float]
    factor_fractions: List[float]

    @property
    def max_product_fraction(self) -> float:
        return max(self.product_fractions) if self.product_fractions else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "resolution": self.resolution,
            "steps": self.steps,
            "product_fractions": self.product_fractions,
            "factor_fractions": self.factor_fractions,
            "max_product_fraction": self.max_product_fraction,
            "stalled": self.max_product_fraction < 1.0,
        }


def product_pm_probe(f: SystemDescriptor, steps: int, resolution: int = 8, seeds: int = 10,
                     rng_seed: int = Config.DEFAULT_RNG_SEED) -> ProductProbeReport:
    '''
    Покрытие f×f из случайных начальных точек: для нетривиальной f доля
    остаётся меньше 1 (замыкание орбиты в произведении является собственным подмножеством).
    '''
    product = ProductSystem(f, f)
    rng = np.random.default_rng(rng_seed)
    product_fractions, factor_fractions = [], []
    for _ in range(seeds):
        seed = rng.random(product.dimension)
        run = coverage_experiment(product, seed, steps, resolution)
        factor = coverage_experiment(f, seed[: f.dimension], steps, resolution)
        product_fractions.append(run.fraction)
        factor_fractions.append(factor.fraction)
    report = ProductProbeReport(resolution, steps, product_fractions, factor_fractions)
    logger.info(f"Проба f×f: максимальное покрытие {report.max_product_fraction:.4f}")
    return report


def time_s_scan(field_: SlowedLinearField, s_values: Sequence, seed, steps: int,
                resolution: int = 16, cfg: Optional[IntegratorConfig] = None) -> List[Dict[str, Any]]:
    """Покрытие отображения за время s из одной общей точки для набора значений s."""
    out = []
    for s in s_values:
        system = time_s_map(field_, s, cfg)
        run = coverage_experiment(system, seed, steps, resolution)
        out.append({
            "s": str(system.s),
            "fraction": run.fraction,
            "complete_at": run.complete_at,
            "flowbox_ok": system.flowbox.ok if system.flowbox else None,
            "integration_stalled": run.stalled,
        })
    return out
