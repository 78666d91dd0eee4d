from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional
import logging

import numpy as np

from ..config import Config
from ..systems.system_descriptor import SystemDescriptor, check_direction
from ..torus.torus_geometry import minimal_displacement, torus_distance, wrap_array

logger = logging.getLogger(__name__)

# Порог для вывода "обнаружено растяжение" по оценке показателя Ляпунова
EXPANSION_RATE_THRESHOLD = 1e-2
SEPARATION_SCALE = 1e-8


@dataclass
class EquicontinuityEstimate:
    '''
    Эмпирическая оценка равностепенной непрерывности: наибольшее δ лестницы
    ε/2^k, при котором все выбранные пары остаются ε-близкими на горизонте,
    и оценка показателя растяжения.
    '''
    epsilon: float
    horizon: int
    delta: float
    ladder: List[Dict[str, float]]
    expansion_rate: Optional[float]
    rate_method: str
    sample_pairs: int
    notes: List[str] = field(default_factory=list)

    @property
    def expansion_detected(self) -> bool:
        return self.delta == 0.0 or (self.expansion_rate is not None and self.expansion_rate > EXPANSION_RATE_THRESHOLD)

    @property
    def verdict(self) -> str:
        return "expansion detected" if self.expansion_detected else "no expansion detected"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "horizon": self.horizon,
            "delta": self.delta,
            "ladder": self.ladder,
            "expansion_rate": self.expansion_rate,
            "rate_method": self.rate_method,
            "sample_pairs": self.sample_pairs,
            "verdict": self.verdict,
            "notes": self.notes,
        }


def _check_torus_system(sys: SystemDescriptor):
    if sys.kind == "Subshift":
        raise ValueError("Для пространства сдвигов используйте проверку экспансивности")


def _max_separation(sys: SystemDescriptor, xs: np.ndarray, ys: np.ndarray, horizon: int,
                    direction: str = "forward") -> float:
    """Наибольшее расстояние между парами (x_i, y_i) по итерациям 0..horizon."""
    step = sys.apply_many if direction == "forward" else sys.apply_inverse_many
    worst = float(np.max(torus_distance(xs, ys)))
    for _ in range(horizon):
        xs, ys = step(xs), step(ys)
        worst = max(worst, float(np.max(torus_distance(xs, ys))))
    return worst


def _ladder(sys: SystemDescriptor, xs: np.ndarray, directions: np.ndarray, scales: np.ndarray,
            eps: float, horizon: int, depth: int, direction: str):
    ladder = []
    delta = 0.0
    for k in range(depth + 1):
        d = eps / 2 ** k
        ys = wrap_array(xs + (d * scales)[:, None] * directions)
        worst = _max_separation(sys, xs, ys, horizon, direction)
        passed = worst <= eps * (1.0 + 1e-9)
        ladder.append({"delta": d, "max_separation": worst, "passed": passed})
        if passed:
            delta = d
            break
    return delta, ladder


def _unit_vectors(rng: np.random.Generator, count: int, dimension: int) -> np.ndarray:
    v = rng.normal(size=(count, dimension))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _tangent_rate(sys: SystemDescriptor, xs: np.ndarray, vs: np.ndarray, horizon: int) -> float:
    # средний логарифм роста касательного вектора с перенормировкой
    total = 0.0
    for x, v in zip(xs, vs):
        acc = 0.0
        for _ in range(horizon):
            v = sys.tangent(x) @ v
            norm = float(np.linalg.norm(v))
            acc += np.log(norm)
            v = v / norm
            x = sys.apply(x)
        total += acc / horizon
    return total / len(xs)


def _separation_rate(sys: SystemDescriptor, xs: np.ndarray, vs: np.ndarray, horizon: int,
                     d0: float = SEPARATION_SCALE) -> float:
    ys = wrap_array(xs + d0 * vs)
    acc = np.zeros(len(xs))
    for _ in range(horizon):
        xs, ys = sys.apply_many(xs), sys.apply_many(ys)
        disp = minimal_displacement(xs, ys)
        norm = np.linalg.norm(disp, axis=1)
        norm = np.where(norm > 0.0, norm, d0)
        acc += np.log(norm / d0)
        ys = wrap_array(xs + d0 * disp / norm[:, None])
    return float(np.mean(acc / horizon))


def equicontinuity_modulus(sys: SystemDescriptor, eps: float, horizon: int,
                           sample_pairs: int = 1000, rng_seed: int = Config.DEFAULT_RNG_SEED,
                           ladder_depth: int = 8, rate_samples: int = 64) -> EquicontinuityEstimate:
    '''
    Ищет наибольшее δ = ε/2^k, при котором пары на расстоянии не больше δ не
    расходятся дальше ε за horizon шагов. Отдельно оценивает средний показатель
    растяжения: по точной матрице Якоби, если она известна, иначе по
    перенормированному разбеганию соседних орбит.
    '''
    _check_torus_system(sys)
    if not 0.0 < eps < 0.5:
        raise ValueError(f"ε должно лежать в (0, 1/2): {eps}")
    if horizon < 1 or sample_pairs < 1:
        raise ValueError(f"Горизонт и число пар должны быть положительными: {horizon}, {sample_pairs}")
    rng = np.random.default_rng(rng_seed)
    n = sys.dimension
    xs = rng.random((sample_pairs, n))
    directions = _unit_vectors(rng, sample_pairs, n)
    scales = rng.uniform(0.5, 1.0, size=sample_pairs)
    delta, ladder = _ladder(sys, xs, directions, scales, eps, horizon, ladder_depth, "forward")

    k = min(rate_samples, sample_pairs)
    notes = []
    if sys.tangent(xs[0]) is not None:
        rate = _tangent_rate(sys, xs[:k], directions[:k], horizon)
        method = "tangent"
    else:
        rate = _separation_rate(sys, xs[:k], directions[:k], horizon)
        method = "renormalized_separation"
    if delta == 0.0:
        notes.append(f"ни одно δ >= ε/2^{ladder_depth} не удержало пары в пределах ε")
    estimate = EquicontinuityEstimate(eps, horizon, delta, ladder, rate, method, sample_pairs, notes)
    logger.info(f"Равностепенная непрерывность: δ={delta:.3g}, показатель {rate:.4g} ({method}): {estimate.verdict}")
    return estimate


def pointwise_modulus(sys: SystemDescriptor, x, eps: float, horizon: int, direction: str = "forward",
                      samples: int = 64, rng_seed: int = Config.DEFAULT_RNG_SEED,
                      ladder_depth: int = 12) -> Dict[str, Any]:
    """δ(x, ε) в точке x: точки δ-окрестности остаются ε-близкими к орбите x."""
    _check_torus_system(sys)
    check_direction(direction)
    if not 0.0 < eps < 0.5:
        raise ValueError(f"ε должно лежать в (0, 1/2): {eps}")
    rng = np.random.default_rng(rng_seed)
    x = sys.check_state(x)
    xs = np.repeat(x[None, :], samples, axis=0)
    directions = _unit_vectors(rng, samples, sys.dimension)
    scales = rng.uniform(0.5, 1.0, size=samples)
    delta, ladder = _ladder(sys, xs, directions, scales, eps, horizon, ladder_depth, direction)
    return {
        "point": [float(v) for v in x],
        "epsilon": eps,
        "horizon": horizon,
        "direction": direction,
        "delta": delta,
        "ladder": ladder,
    }
