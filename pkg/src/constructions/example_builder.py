from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
import sympy

from ..config import Config
from ..decider.affine_decider import MinimalityVerdict, Verdict, decide_affine_minimality
from ..flow.flow_integrator import IntegratorConfig, TimeSMap, flowbox_check
from ..flow.slowed_field import SlowedLinearField
from ..systems.exact_vector import ExactVector
from ..systems.system_descriptor import ProductSystem, SystemDescriptor, Translation
from ..torus.torus_geometry import TorusPoint, torus_distance, wrap

logger = logging.getLogger(__name__)


class NotMinimalError(ValueError):
    '''
    Сдвиг-множитель произведения не минимален; хранит вердикт решателя.
    '''
    def __init__(self, verdict: MinimalityVerdict):
        self.verdict = verdict
        super().__init__(f"Сдвиг не является минимальным: {verdict.verdict.value}")


def generic_seeds(dimension: int, count: int, rng_seed: int = Config.DEFAULT_RNG_SEED) -> np.ndarray:
    """Равномерные случайные начальные точки с фиксированным зерном генератора."""
    rng = np.random.default_rng(rng_seed)
    return rng.random((count, dimension))


def special_orbit_seeds(field: SlowedLinearField, center, delta: float) -> Tuple[TorusPoint, TorusPoint]:
    '''
    Точки на двух особых орбитах центра: seed_in = c - δγ/|γ| стремится к центру
    вперёд по времени, seed_out = c + δγ/|γ| уходит назад.
    '''
    if not 0.0 < delta < field.bump_radius:
        raise ValueError(f"δ должно лежать в (0, r) = (0, {field.bump_radius}): {delta}")
    c = center.as_array() if isinstance(center, TorusPoint) else np.asarray(center, dtype=float)
    direction = field.gamma / np.linalg.norm(field.gamma)
    return wrap(c - delta * direction), wrap(c + delta * direction)


def _check_separation(centers: Sequence[TorusPoint], r: float):
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            d = torus_distance(centers[i], centers[j])
            if d <= 2 * r:
                raise ValueError(
                    f"Центры {centers[i].coords} и {centers[j].coords} ближе 2r = {2 * r}: шапочки перекрываются"
                )


def build_slowed_system(n: int, gamma: ExactVector, centers: Sequence, r: float, s,
                        profile: str = "exp_bump", cfg: Optional[IntegratorConfig] = None,
                        delta: Optional[float] = None) -> TimeSMap:
    '''
    Строго псевдоминимальный диффеоморфизм T^n: отображение за время s потока
    замедленного поля. В метаданных записано ожидаемое множество неплотных орбит:
    центры и по две особые орбиты на центр.
    '''
    if n < 2 or gamma.dimension != n:
        raise ValueError(f"Нужен вектор частот размерности n >= 2, получено n={n}, dim γ={gamma.dimension}")
    if gamma.rank_over_q() != n:
        raise ValueError(
            f"Частоты {gamma.to_strings()} рационально зависимы над объявленным базисом символов "
            f"(ранг {gamma.rank_over_q()} < {n}); объявите независимые символы"
        )
    s = sympy.Rational(s)
    if s <= 0:
        raise ValueError(f"Время s должно быть положительным: {s}")
    centers = [c if isinstance(c, TorusPoint) else wrap(np.asarray(c, dtype=float)) for c in centers]
    if not centers:
        raise ValueError("Нужен хотя бы один центр")
    _check_separation(centers, r)
    field = SlowedLinearField(gamma, centers, r, profile)
    flowbox = flowbox_check(field, float(s))
    if not flowbox.ok:
        raise ValueError(f"Проверка прямоугольника потока не пройдена для s={s}: {flowbox.message}")
    delta = delta if delta is not None else r / 2
    special = []
    for c in centers:
        seed_in, seed_out = special_orbit_seeds(field, c, delta)
        special.append({
            "center": list(c.coords),
            "delta": delta,
            "seed_in": list(seed_in.coords),
            "seed_out": list(seed_out.coords),
        })
    predicted = {
        "fixed_points": [list(c.coords) for c in centers],
        "special_orbits": special,
    }
    logger.info(f"Построена система на T^{n}: {len(centers)} центров, r={r}, s={s}")
    return TimeSMap(field, s, cfg, flowbox, metadata={"predicted_exceptional_set": predicted})


def build_product_pm_flow(n: int, gamma: ExactVector, centers: Sequence, r: float, s,
                          circle_speed: Union[ExactVector, str, int] = 1,
                          profile: str = "exp_bump", cfg: Optional[IntegratorConfig] = None) -> ProductSystem:
    '''
    Поток без неподвижных точек на T^{n-1} × S^1: замедленный поток на T^{n-1}
    и равномерное вращение окружности. Орбиты {центр} × S^1 замкнуты.
    '''
    if n < 3:
        raise ValueError(f"Произведение строится для n >= 3, получено n={n}")
    base = build_slowed_system(n - 1, gamma, centers, r, s, profile, cfg)
    if not isinstance(circle_speed, ExactVector):
        circle_speed = ExactVector.parse([circle_speed], gamma.basis)
    if circle_speed.dimension != 1 or circle_speed.is_zero():
        raise ValueError("Скорость вращения окружности должна быть ненулевым скаляром")
    s = sympy.Rational(s)
    rotation = Translation(circle_speed.scale(s), flow_time=s)
    period = None
    if rotation.a.is_rational():
        period = int(rotation.a.rational_part()[0].q)
    closed = [
        {"center": c, "circle_period_steps": period}
        for c in base.metadata()["predicted_exceptional_set"]["fixed_points"]
    ]
    logger.info(f"Построен поток-произведение на T^{n - 1} x S^1, скорость окружности {circle_speed.to_strings()[0]}")
    return ProductSystem(base, rotation, metadata={
        "predicted_exceptional_set": {"closed_orbits": closed},
        "circle_speed": circle_speed.to_strings()[0],
    })


def build_translation_factor_product(A: Translation, base: SystemDescriptor) -> ProductSystem:
    '''
    Произведение строго п.м. системы и минимального сдвига тора T^m:
    компоненты дополнения X_M имеют вид (неплотное множество базы) × T^m.
    '''
    m = A.dimension
    verdict = decide_affine_minimality(np.eye(m, dtype=int).tolist(), A.a)
    if verdict.verdict != Verdict.TOTALLY_MINIMAL:
        logger.info(f"Сдвиг {A.a.to_strings()} отклонён: {verdict.verdict.value}")
        raise NotMinimalError(verdict)
    predicted = base.metadata().get("predicted_exceptional_set")
    if predicted is None:
        raise ValueError("База должна быть строго п.м. системой с описанием неплотного множества")
    components = [{"base_point": p, "torus_factor_dimension": m} for p in predicted.get("fixed_points", [])]
    return ProductSystem(base, A, metadata={
        "predicted_exceptional_set": {
            "components": components,
            "base": predicted,
        },
        "factor_verdict": verdict.to_dict(),
    })
