from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging
import math

import numpy as np
import sympy

from ..systems.exact_vector import ExactVector
from .smith_form import (
    as_object_matrix, identity, integer_kernel, lattice_basis, left_kernel, rational_to_integer_rows,
    saturated_column_basis, saturation_index, solve_integer,
)

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    TOTALLY_MINIMAL = "TotallyMinimal"
    MINIMAL = "Minimal"
    NOT_MINIMAL = "NotMinimal"
    TRIVIAL_GROUP_REQUIRED = "TrivialGroupRequired"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class ClosedSubgroup:
    '''
    Замкнутая подгруппа G = {x ∈ T^n : k·x ∈ Z для всех k ∈ Λ}, заданная
    базисом (строками) решётки-аннулятора Λ ⊂ Z^n. Связная компонента есть
    тор размерности n - rank Λ, число компонент равно индексу Λ в насыщении.
    '''
    dimension: int
    annihilator: Tuple[Tuple[int, ...], ...]
    span: Optional[Tuple[Tuple[int, ...], ...]] = None

    @classmethod
    def from_annihilator(cls, rows, n: int, span=None) -> "ClosedSubgroup":
        R = as_object_matrix(rows) if len(rows) else np.zeros((0, n), dtype=object)
        if R.shape[1] != n:
            raise ValueError(f"Аннулятор задан в Z^{R.shape[1]}, ожидалось Z^{n}")
        basis = lattice_basis(R) if R.shape[0] else R
        basis = tuple(tuple(int(v) for v in row) for row in basis)
        return cls(n, basis, span)

    @classmethod
    def full_torus(cls, n: int) -> "ClosedSubgroup":
        return cls(n, ())

    @classmethod
    def trivial(cls, n: int) -> "ClosedSubgroup":
        return cls.from_annihilator(identity(n), n)

    @property
    def annihilator_matrix(self) -> np.ndarray:
        if not self.annihilator:
            return np.zeros((0, self.dimension), dtype=object)
        return np.array(self.annihilator, dtype=object)

    @property
    def annihilator_rank(self) -> int:
        return len(self.annihilator)

    @property
    def torus_dimension(self) -> int:
        return self.dimension - self.annihilator_rank

    @property
    def component_count(self) -> int:
        return saturation_index(self.annihilator_matrix) if self.annihilator else 1

    def is_trivial(self) -> bool:
        return self.torus_dimension == 0 and self.component_count == 1

    def is_full(self) -> bool:
        return self.annihilator_rank == 0

    def contains(self, x: Sequence) -> bool:
        """Точная проверка принадлежности рациональной точки."""
        xs = [sympy.Rational(v) for v in x]
        return all(sum(k * v for k, v in zip(row, xs)).is_integer for row in self.annihilator)

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "dimension": self.dimension,
            "annihilator": [list(r) for r in self.annihilator],
            "torus_dimension": self.torus_dimension,
            "component_count": self.component_count,
        }
        if self.span is not None:
            out["span"] = [list(c) for c in self.span]
        return out


@dataclass(frozen=True)
class GenerationResult:
    generates: bool
    character: Optional[Tuple[int, ...]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"generates": self.generates, "character": list(self.character) if self.character else None}


@dataclass(frozen=True)
class NilpotencyResult:
    index: Optional[int]
    stable_image: ClosedSubgroup

    def to_dict(self) -> Dict[str, Any]:
        return {"index": self.index, "stable_image": self.stable_image.to_dict()}


@dataclass
class MinimalityVerdict:
    verdict: Verdict
    certificate: Dict[str, Any] = field(default_factory=dict)
    assumptions: Dict[str, str] = field(default_factory=dict)
    witness_seed: Optional[Tuple[float, ...]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "certificate": self.certificate,
            "independence_assumptions": self.assumptions,
            "witness_seed": list(self.witness_seed) if self.witness_seed is not None else None,
        }


def _square(tau) -> sympy.Matrix:
    m = sympy.Matrix(as_object_matrix(tau).tolist())
    if m.rows != m.cols or m.rows == 0:
        raise ValueError(f"Ожидалась квадратная непустая матрица, получена форма {m.shape}")
    return m


def _check_problem(tau, a: ExactVector) -> sympy.Matrix:
    m = _square(tau)
    if m.det() not in (1, -1):
        raise ValueError(f"Определитель τ должен быть ±1, получено {m.det()}")
    if a.dimension != m.rows:
        raise ValueError(f"Размерность a ({a.dimension}) не совпадает с τ ({m.rows})")
    return m


def _int_rows(m: sympy.Matrix) -> List[List[int]]:
    return [[int(v) for v in m.row(i)] for i in range(m.rows)]


def nilpotency_index(B) -> NilpotencyResult:
    '''
    Наименьшее k <= n с B^k = 0 (или None) и стабилизированный образ H = B^n(T^n).
    '''
    Bm = _square(B)
    n = Bm.rows
    power = sympy.eye(n)
    index = None
    for k in range(1, n + 1):
        power = power * Bm
        if power.is_zero_matrix:
            index = k
            break
    stable = Bm ** n
    return NilpotencyResult(index, image_subtorus(_int_rows(stable)))


def image_subtorus(B) -> ClosedSubgroup:
    '''
    Образ B(T^n) есть подтор, натянутый на насыщение решётки столбцов B.
    Его аннулятор равен левому ядру {k : k B = 0}.
    '''
    M = as_object_matrix(B)
    n = M.shape[0]
    annihilator = left_kernel(M)
    span = saturated_column_basis(M)
    span_cols = tuple(tuple(int(v) for v in span[:, j]) for j in range(span.shape[1]))
    return ClosedSubgroup.from_annihilator(annihilator, n, span_cols)


def translation_closure(a: ExactVector) -> ClosedSubgroup:
    '''
    Замыкание {k·a : k ∈ Z}: аннулятор {k ∈ Z^n : k·a ∈ Z}, вычисленный точно
    по коэффициентам a над базисом символов.
    '''
    n = a.dimension
    C = a.matrix()
    symbolic = C[:, 1:]
    if symbolic.cols:
        K = integer_kernel(rational_to_integer_rows(symbolic.T))
    else:
        K = identity(n)
    d = K.shape[1]
    if d == 0:
        return ClosedSubgroup.full_torus(n)
    Km = sympy.Matrix(K.tolist())
    v = Km.T * C[:, 0]
    q = math.lcm(*[int(sympy.Rational(x).q) for x in v])
    w = [int(x * q) for x in v]
    relations = integer_kernel(np.array([w + [-int(q)]], dtype=object))
    Z = relations[:d, :]
    annihilator = K.dot(Z).T
    return ClosedSubgroup.from_annihilator(annihilator, n)


def generation_check(G1: ClosedSubgroup, G2: ClosedSubgroup, n: Optional[int] = None) -> GenerationResult:
    '''
    G1 и G2 порождают T^n тогда и только тогда, когда ни один ненулевой характер k
    не аннулирует обе подгруппы (Λ1 ∩ Λ2 = 0). Иначе возвращается такой k.
    '''
    n = n or G1.dimension
    if G1.dimension != n or G2.dimension != n:
        raise ValueError("Подгруппы заданы на торах разной размерности")
    A1, A2 = G1.annihilator_matrix, G2.annihilator_matrix
    if A1.shape[0] == 0 or A2.shape[0] == 0:
        return GenerationResult(True)
    # z1·A1 = z2·A2 пробегает ровно Λ1 ∩ Λ2; делить на НОД нельзя, решётка может быть ненасыщенной
    Z = integer_kernel(np.hstack([A1.T, -A2.T]))
    if Z.shape[1] == 0:
        return GenerationResult(True)
    common = lattice_basis(Z[: A1.shape[0], :].T.dot(A1))
    if common.shape[0] == 0:
        return GenerationResult(True)
    k = [int(v) for v in common[0]]
    first = next(v for v in k if v != 0)
    if first < 0:
        k = [-v for v in k]
    return GenerationResult(False, tuple(k))


def conjugate_to_automorphism(tau, a: ExactVector) -> Optional[ExactVector]:
    '''
    Ищет b с (τ - I)·b ≡ -a (mod Z^n): тогда x ↦ x + b сопрягает T с τ.
    Символьные столбцы решаются над Q, постоянный решается с целым сдвигом z,
    который существует, если L·z = L·a0 разрешимо в целых (L есть левое ядро β).
    '''
    m = _square(tau)
    n = m.rows
    beta = m - sympy.eye(n)
    C = a.matrix()
    columns = []
    L = left_kernel(as_object_matrix(_int_rows(beta)))
    c0 = C[:, 0]
    if L.shape[0]:
        Lm = sympy.Matrix(L.tolist())
        z = solve_integer(L, list(Lm * c0))
        if z is None:
            return None
        target = -c0 + sympy.Matrix([int(v) for v in z])
    else:
        target = -c0
    for j in range(C.cols):
        rhs = target if j == 0 else -C[:, j]
        try:
            sol, params = beta.gauss_jordan_solve(rhs)
        except ValueError:
            return None
        if params.shape[0]:
            sol = sol.subs({p: 0 for p in params})
        columns.append(sol)
    b = ExactVector.from_matrix(sympy.Matrix.hstack(*columns), a.basis).reduce_mod_one()
    residual = b.transform(beta) + a
    if not residual.is_integral():
        logger.error("Найденный сопрягающий сдвиг не прошёл проверку (τ - I)b + a ∈ Z^n")
        return None
    return b


def affine_power(tau, a: ExactVector, k: int) -> Tuple[List[List[int]], ExactVector]:
    """T^k(x) = τ^k x + (τ^{k-1} + … + I) a для k >= 1."""
    if k < 1:
        raise ValueError(f"Степень должна быть положительной: {k}")
    m = _square(tau)
    total = sympy.zeros(m.rows)
    power = sympy.eye(m.rows)
    for _ in range(k):
        total += power
        power = power * m
    return _int_rows(power), a.transform(total)


def decide_automorphism(tau) -> MinimalityVerdict:
    '''
    Чистый автоморфизм фиксирует 0, поэтому псевдоминимальным может быть только
    на тривиальной группе.
    '''
    m = _square(tau)
    n = m.rows
    return MinimalityVerdict(
        Verdict.TRIVIAL_GROUP_REQUIRED,
        {"reason": "fixed point 0", "dimension": n, "matrix": _int_rows(m)},
        witness_seed=tuple(0.0 for _ in range(n)),
    )


def decide_affine_minimality(tau, a: ExactVector) -> MinimalityVerdict:
    m = _check_problem(tau, a)
    n = m.rows
    assumptions = a.basis.declaration()
    origin = tuple(0.0 for _ in range(n))
    if a.is_zero():
        logger.info("Сдвиг нулевой: отображение фиксирует 0")
        return MinimalityVerdict(
            Verdict.NOT_MINIMAL,
            {"reason": "fixed point 0", "automorphism": decide_automorphism(tau).to_dict()},
            assumptions,
            origin,
        )
    beta = m - sympy.eye(n)
    beta_rows = _int_rows(beta)
    nil = nilpotency_index(beta_rows)
    closure = translation_closure(a)
    image = image_subtorus(beta_rows)
    generation = generation_check(closure, image, n)
    base = {
        "nilpotency": nil.to_dict(),
        "translation_closure": closure.to_dict(),
        "beta_image": image.to_dict(),
    }
    if nil.index is not None:
        if generation.generates:
            return MinimalityVerdict(Verdict.TOTALLY_MINIMAL, {**base, "generation": generation.to_dict()}, assumptions)
        return MinimalityVerdict(
            Verdict.NOT_MINIMAL,
            {**base, "reason": "invariant character", "character": list(generation.character)},
            assumptions,
            origin,
        )
    if not generation.generates:
        return MinimalityVerdict(
            Verdict.NOT_MINIMAL,
            {**base, "reason": "invariant character", "character": list(generation.character)},
            assumptions,
            origin,
        )
    b = conjugate_to_automorphism(tau, a)
    if b is not None:
        seed = tuple(float(v) for v in b.numeric())
        return MinimalityVerdict(
            Verdict.NOT_MINIMAL,
            {**base, "reason": "conjugate to automorphism", "conjugator": b.to_strings()},
            assumptions,
            seed,
        )
    if not nil.stable_image.is_trivial():
        return MinimalityVerdict(
            Verdict.NOT_MINIMAL,
            {**base, "reason": "non-nilpotent beta", "stable_image": nil.stable_image.to_dict()},
            assumptions,
        )
    return MinimalityVerdict(Verdict.INCONCLUSIVE, base, assumptions)


def decide_power_minimality(tau, a: ExactVector, k: int) -> MinimalityVerdict:
    power, shift = affine_power(tau, a, k)
    verdict = decide_affine_minimality(power, shift)
    verdict.certificate["power"] = k
    return verdict


def verify_certificate(verdict: MinimalityVerdict, tau, a: ExactVector) -> bool:
    '''
    Машинная проверка сертификата: характер k с k·(τ - I) = 0 и k·a ∈ Z
    либо сопрягающий сдвиг b с (τ - I)b + a ∈ Z^n.
    '''
    m = _square(tau)
    beta = m - sympy.eye(m.rows)
    reason = verdict.certificate.get("reason")
    if reason == "invariant character":
        k = sympy.Matrix([verdict.certificate["character"]])
        return (k * beta).is_zero_matrix and a.dot(list(k)).is_integral()
    if reason == "conjugate to automorphism":
        b = ExactVector.parse(verdict.certificate["conjugator"], a.basis)
        return (b.transform(beta) + a).is_integral()
    return True
