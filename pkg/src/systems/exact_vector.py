from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union
import logging
import re

import numpy as np
import sympy

logger = logging.getLogger(__name__)

_SYMBOL_REF = re.compile(r"@([A-Za-z_][A-Za-z0-9_]*)")

RationalLike = Union[int, str, sympy.Rational]


@dataclass(frozen=True)
class SymbolBasis:
    '''
    Базис символов {1, θ_1, θ_2, …}, элементы которого объявлены рационально
    независимыми над Q. Объявление не проверяется (его нельзя удостоверить по
    числам с плавающей точкой) и записывается в каждый отчёт.
    '''
    names: Tuple[str, ...] = ()
    expressions: Tuple[str, ...] = ()
    values: Tuple[float, ...] = ()

    @classmethod
    def declare(cls, declarations: Optional[Mapping[str, str]] = None) -> "SymbolBasis":
        declarations = dict(declarations or {})
        names, expressions, values = [], [], []
        for name, expression in declarations.items():
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
                raise ValueError(f"Недопустимое имя символа: {name}")
            try:
                expr = sympy.sympify(str(expression))
            except (sympy.SympifyError, TypeError) as e:
                raise ValueError(f"Не удалось разобрать значение символа {name}: {expression}") from e
            if expr.free_symbols:
                raise ValueError(f"Значение символа {name} должно быть числом: {expression}")
            if expr.is_rational:
                raise ValueError(
                    f"Символ {name} = {expression} рационален и не может входить в независимый базис"
                )
            names.append(name)
            expressions.append(str(expression))
            values.append(float(sympy.N(expr, 30)))
        logger.debug(f"Объявлен базис символов: {names}")
        return cls(tuple(names), tuple(expressions), tuple(values))

    @property
    def size(self) -> int:
        """Число столбцов коэффициентов, включая константу 1."""
        return 1 + len(self.names)

    def numeric(self) -> np.ndarray:
        return np.array((1.0,) + self.values, dtype=float)

    def index_of(self, name: str) -> int:
        if name not in self.names:
            raise ValueError(f"Символ @{name} не объявлен")
        return 1 + self.names.index(name)

    def declaration(self) -> Dict[str, str]:
        return dict(zip(self.names, self.expressions))


def parse_exact(entry: RationalLike, basis: SymbolBasis) -> Tuple[sympy.Rational, ...]:
    """Разбирает запись вида "p/q", "@theta1" или "1/2 - 3*@theta1" в коэффициенты по базису."""
    if isinstance(entry, (int, sympy.Rational)):
        return (sympy.Rational(entry),) + (sympy.Integer(0),) * len(basis.names)
    text = str(entry)
    referenced = _SYMBOL_REF.findall(text)
    for name in referenced:
        basis.index_of(name)
    symbols = {name: sympy.Symbol(f"__sym_{name}") for name in basis.names}
    try:
        expr = sympy.sympify(_SYMBOL_REF.sub(lambda m: f"__sym_{m.group(1)}", text))
    except (sympy.SympifyError, TypeError) as e:
        raise ValueError(f"Не удалось разобрать точную запись: {text}") from e
    ordered = [symbols[name] for name in basis.names]
    unknown = expr.free_symbols - set(ordered)
    if unknown:
        raise ValueError(f"Запись {text} использует необъявленные символы: {unknown}")
    expr = sympy.expand(expr)
    coeffs = [sympy.Integer(0)] * basis.size
    if ordered:
        poly = sympy.Poly(expr, *ordered)
        if poly.total_degree() > 1:
            raise ValueError(f"Запись {text} не является линейной комбинацией символов")
        for monom, coeff in poly.terms():
            if sum(monom) == 0:
                position = 0
            else:
                position = 1 + monom.index(1)
            coeffs[position] = coeff
    else:
        coeffs[0] = expr
    for c in coeffs:
        if not (c.is_number and c.is_rational):
            raise ValueError(f"Коэффициенты записи {text} должны быть рациональными, получено {c}")
    return tuple(sympy.Rational(c) for c in coeffs)


@dataclass(frozen=True)
class ExactVector:
    '''
    Точный вектор: каждая координата есть рациональная линейная комбинация
    элементов базиса {1, θ_1, …}. Матрица коэффициентов имеет форму n × (1 + m).
    '''
    coefficients: Tuple[Tuple[sympy.Rational, ...], ...]
    basis: SymbolBasis = field(default_factory=SymbolBasis)

    def __post_init__(self):
        rows = tuple(tuple(sympy.Rational(c) for c in row) for row in self.coefficients)
        for row in rows:
            if len(row) != self.basis.size:
                raise ValueError(
                    f"Строка коэффициентов длины {len(row)} не соответствует базису размера {self.basis.size}"
                )
        object.__setattr__(self, "coefficients", rows)

    @classmethod
    def parse(cls, entries: Sequence[RationalLike], basis: Optional[SymbolBasis] = None) -> "ExactVector":
        basis = basis or SymbolBasis()
        return cls(tuple(parse_exact(e, basis) for e in entries), basis)

    @classmethod
    def zeros(cls, n: int, basis: Optional[SymbolBasis] = None) -> "ExactVector":
        basis = basis or SymbolBasis()
        return cls(tuple((sympy.Integer(0),) * basis.size for _ in range(n)), basis)

    @classmethod
    def from_matrix(cls, matrix: sympy.Matrix, basis: SymbolBasis) -> "ExactVector":
        return cls(tuple(tuple(matrix[i, j] for j in range(matrix.cols)) for i in range(matrix.rows)), basis)

    @property
    def dimension(self) -> int:
        return len(self.coefficients)

    def matrix(self) -> sympy.Matrix:
        return sympy.Matrix(self.coefficients) if self.coefficients else sympy.zeros(0, self.basis.size)

    def numeric(self) -> np.ndarray:
        if not self.coefficients:
            return np.zeros(0)
        coeffs = np.array([[float(c) for c in row] for row in self.coefficients], dtype=float)
        return coeffs @ self.basis.numeric()

    def is_zero(self) -> bool:
        return all(c == 0 for row in self.coefficients for c in row)

    def is_rational(self) -> bool:
        return all(c == 0 for row in self.coefficients for c in row[1:])

    def is_integral(self) -> bool:
        """Все координаты являются целыми числами (точно, относительно объявленной независимости)."""
        return self.is_rational() and all(row[0].is_integer for row in self.coefficients)

    def rational_part(self) -> Tuple[sympy.Rational, ...]:
        return tuple(row[0] for row in self.coefficients)

    def reduce_mod_one(self) -> "ExactVector":
        rows = []
        for row in self.coefficients:
            rows.append((row[0] - sympy.floor(row[0]),) + row[1:])
        return ExactVector(tuple(rows), self.basis)

    def _check_basis(self, other: "ExactVector"):
        if other.basis.names != self.basis.names:
            raise ValueError("Точные векторы заданы над разными базисами символов")

    def __add__(self, other: "ExactVector") -> "ExactVector":
        self._check_basis(other)
        return ExactVector.from_matrix(self.matrix() + other.matrix(), self.basis)

    def __neg__(self) -> "ExactVector":
        return ExactVector.from_matrix(-self.matrix(), self.basis)

    def __sub__(self, other: "ExactVector") -> "ExactVector":
        return self + (-other)

    def scale(self, factor: RationalLike) -> "ExactVector":
        return ExactVector.from_matrix(self.matrix() * sympy.Rational(factor), self.basis)

    def transform(self, matrix) -> "ExactVector":
        """Образ под целочисленной (или рациональной) матрицей: M·a покоэффициентно."""
        m = sympy.Matrix(matrix)
        if m.cols != self.dimension:
            raise ValueError(f"Матрица {m.shape} не действует на вектор размерности {self.dimension}")
        return ExactVector.from_matrix(m * self.matrix(), self.basis)

    def dot(self, k: Sequence[int]) -> "ExactVector":
        """Скалярное произведение k·a как точный вектор размерности 1."""
        return self.transform(sympy.Matrix([list(k)]))

    def concat(self, other: "ExactVector") -> "ExactVector":
        self._check_basis(other)
        return ExactVector(self.coefficients + other.coefficients, self.basis)

    def rank_over_q(self) -> int:
        return self.matrix().rank() if self.coefficients else 0

    def to_strings(self) -> List[str]:
        labels = ["1"] + [f"@{name}" for name in self.basis.names]
        out = []
        for row in self.coefficients:
            terms = []
            for label, c in zip(labels, row):
                if c == 0:
                    continue
                terms.append(str(c) if label == "1" else f"{c}*{label}")
            out.append(" + ".join(terms) if terms else "0")
        return out
