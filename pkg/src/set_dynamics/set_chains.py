"""Цепочки множеств на растре: дихотомия пересечения прообразов и
конструкция Биркгофа для областей, содержащих связное множество A."""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional
import logging

from ..analysis.orbit_analyzer import AnalysisInvariantError
from .raster_set import RasterMap, RasterSet

logger = logging.getLogger(__name__)

CASE_INVARIANT_CLOSURE = "Case1"
CASE_BACKWARD_INVARIANT = "Case2"
INCONCLUSIVE = "Inconclusive"
STABILIZED = "Stabilized"


@dataclass
class DichotomyResult:
    '''
    Исход дихотомии: Case1: стабилизировавшееся E не лежит в U;
    Case2: найдено V с A ⊆ V ⊆ U и прообразом V внутри V.
    '''
    verdict: str
    E: RasterSet
    steps: int
    m: Optional[int] = None
    V: Optional[RasterSet] = None
    chain_sizes: List[int] = field(default_factory=list)
    message: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict,
            "steps": self.steps,
            "m": self.m,
            "E_cells": self.E.count,
            "V_cells": self.V.count if self.V is not None else None,
            "chain_sizes": self.chain_sizes,
            "message": self.message,
        }


def preimage_intersection_chain(f: RasterMap, U: RasterSet, A: Optional[RasterSet] = None,
                                n_max: int = 256) -> DichotomyResult:
    '''
    E_n = f^{-1}(Ū ∩ E_{n-1}), E_0 равно всей области, то есть пересечение
    прообразов Ū по k = 1..n. Цепочка строго не возрастает; стабилизация означает
    два одинаковых растра подряд.
    '''
    A = A if A is not None else RasterSet.empty(U.domain)
    if not A.issubset(U):
        raise ValueError("Нарушено условие A ⊆ U")
    if not A.issubset(f.preimage(A)):
        raise ValueError("Нарушено условие A ⊆ f^{-1}(A) на растре")
    if n_max < 1:
        raise ValueError(f"n_max должно быть положительным: {n_max}")
    U_bar = U.closure()
    E = RasterSet.full(U.domain)
    sizes = []
    m = None
    steps = 0
    stabilized = False
    for n in range(1, n_max + 1):
        nxt = f.preimage(U_bar & E)
        if not nxt.issubset(E):
            raise AnalysisInvariantError(f"Цепочка E_n не убывает на шаге {n}")
        steps = n
        sizes.append(nxt.count)
        if m is None and nxt.issubset(U):
            m = n
        if nxt == E:
            stabilized = True
            break
        E = nxt
    if not stabilized:
        logger.warning(f"Цепочка E_n не стабилизировалась за {n_max} шагов")
        return DichotomyResult(INCONCLUSIVE, E, steps, m, None, sizes, "no stabilization")
    if not E.issubset(U):
        logger.info(f"Дихотомия: Case1, |E| = {E.count} ячеек, шагов {steps}")
        return DichotomyResult(CASE_INVARIANT_CLOSURE, E, steps, None, None, sizes, "E not contained in U")

    # V = U ∩ f^{-1}(U) ∩ … ∩ f^{-m}(U)
    V = U
    for _ in range(m):
        V = U & f.preimage(V)
    if not A.issubset(V) or not f.preimage(V).issubset(V):
        logger.warning("Проверка f^{-1}(V) ⊆ V на растре не пройдена: артефакт растеризации")
        return DichotomyResult(INCONCLUSIVE, E, steps, m, V, sizes, "raster check of V failed")
    logger.info(f"Дихотомия: Case2, m = {m}, |V| = {V.count} ячеек")
    return DichotomyResult(CASE_BACKWARD_INVARIANT, E, steps, m, V, sizes, "E contained in U")


@dataclass
class BirkhoffResult:
    status: str
    K: RasterSet
    chain: List[RasterSet]
    checks: Dict[str, bool] = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.chain) - 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            "status": self.status,
            "steps": self.steps,
            "K_cells": self.K.count,
            "chain_sizes": [D.count for D in self.chain],
            "checks": self.checks,
        }


def birkhoff_chain(f: RasterMap, D0: RasterSet, A: RasterSet, n_max: int = 256) -> BirkhoffResult:
    '''
    D_{n+1} есть компонента связности A в f(D_n) ∩ D_0 (смежность по граням,
    склейка граней на торе). Результат K равен пересечению замыканий D_n.
    '''
    if A.is_empty() or not A.is_connected():
        raise ValueError("A должно быть непустым и связным на растре")
    if not A.issubset(D0):
        raise ValueError("Нарушено условие A ⊆ D_0")
    if not D0.is_connected():
        raise ValueError("D_0 должно быть связным на растре")
    chain = [D0]
    K = D0.closure()
    D = D0
    status = INCONCLUSIVE
    for n in range(n_max):
        nxt = (f.image(D) & D0).component_containing(A)
        if not A.issubset(nxt):
            logger.warning(f"A выпало из D_{n + 1}: артефакт растеризации")
            chain.append(nxt)
            break
        chain.append(nxt)
        K = K & nxt.closure()
        if nxt == D:
            status = STABILIZED
            break
        D = nxt
    if status != STABILIZED:
        logger.warning(f"Цепочка Биркгофа не стабилизировалась за {len(chain) - 1} шагов")
    checks = {
        "A_in_K": A.issubset(K),
        "K_in_image_of_K": K.issubset(f.image(K)),
    }
    if status == STABILIZED and not checks["A_in_K"]:
        raise AnalysisInvariantError("A не содержится в K")
    if not checks["K_in_image_of_K"]:
        logger.warning("K не содержится в растровом образе f(K): артефакт растеризации")
    logger.info(f"Цепочка Биркгофа: {status}, |K| = {K.count} ячеек за {len(chain) - 1} шагов")
    return BirkhoffResult(status, K, chain, checks)


def decreasing_chain_check(result: BirkhoffResult) -> bool:
    """Истина, если каждое D_{n+1} содержится в D_n."""
    for n, (prev, nxt) in enumerate(zip(result.chain, result.chain[1:])):
        if not nxt.issubset(prev):
            logger.warning(f"D_{n + 1} не содержится в D_{n}: артефакт растеризации")
            return False
    return True
