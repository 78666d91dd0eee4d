"""Нормальная форма Смита и решётки Z^n в точной целочисленной арифметике.

Матрицы хранятся как numpy-массивы с dtype=object (целые Python произвольной
длины). Для разложения поддерживаются соотношения U @ A @ V == D,
U @ U_inv == I и V_inv @ V == I.
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple
import logging
import math

import numpy as np
import sympy

logger = logging.getLogger(__name__)


def as_object_matrix(A) -> np.ndarray:
    arr = np.array(A, dtype=object)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size else arr.reshape(0, 0)
    if arr.ndim != 2:
        raise ValueError(f"Ожидалась двумерная матрица, получена форма {arr.shape}")
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        if isinstance(v, (sympy.Basic,)):
            if not v.is_integer:
                raise ValueError(f"Элемент {v} не является целым числом")
            out[idx] = int(v)
        else:
            if int(v) != v:
                raise ValueError(f"Элемент {v} не является целым числом")
            out[idx] = int(v)
    return out


def identity(n: int) -> np.ndarray:
    out = np.zeros((n, n), dtype=object)
    for i in range(n):
        out[i, i] = 1
    return out


@dataclass(frozen=True)
class SNFDecomposition:
    U: np.ndarray
    D: np.ndarray
    V: np.ndarray
    U_inv: np.ndarray
    V_inv: np.ndarray

    @property
    def diagonal(self) -> List[int]:
        return [int(self.D[i, i]) for i in range(min(self.D.shape))]

    @property
    def rank(self) -> int:
        return sum(1 for d in self.diagonal if d != 0)

    def verify(self, A) -> bool:
        A = as_object_matrix(A)
        m, n = A.shape
        if not np.array_equal(self.U.dot(A).dot(self.V), self.D):
            return False
        if not np.array_equal(self.U.dot(self.U_inv), identity(m)):
            return False
        if not np.array_equal(self.V_inv.dot(self.V), identity(n)):
            return False
        off = self.D.copy()
        for i in range(min(m, n)):
            off[i, i] = 0
        if np.any(off != 0):
            return False
        diag = self.diagonal
        if any(d < 0 for d in diag):
            return False
        for d1, d2 in zip(diag, diag[1:]):
            if d1 == 0 and d2 != 0:
                return False
            if d1 != 0 and d2 % d1 != 0:
                return False
        return True


def smith_normal_form(A) -> SNFDecomposition:
    '''
    Нормальная форма Смита U·A·V = D прямоугольной целочисленной матрицы.
    Ведущим берётся ненулевой элемент наименьшего модуля в оставшемся блоке.
    '''
    D = as_object_matrix(A).copy()
    m, n = D.shape
    U, U_inv = identity(m), identity(m)
    V, V_inv = identity(n), identity(n)

    def swap_rows(i, k):
        if i != k:
            D[[i, k]] = D[[k, i]]
            U[[i, k]] = U[[k, i]]
            U_inv[:, [i, k]] = U_inv[:, [k, i]]

    def swap_cols(j, k):
        if j != k:
            D[:, [j, k]] = D[:, [k, j]]
            V[:, [j, k]] = V[:, [k, j]]
            V_inv[[j, k]] = V_inv[[k, j]]

    def add_row(target, source, q):
        # row_target += q·row_source
        D[target] = D[target] + q * D[source]
        U[target] = U[target] + q * U[source]
        U_inv[:, source] = U_inv[:, source] - q * U_inv[:, target]

    def add_col(target, source, q):
        # col_target += q·col_source
        D[:, target] = D[:, target] + q * D[:, source]
        V[:, target] = V[:, target] + q * V[:, source]
        V_inv[source] = V_inv[source] - q * V_inv[target]

    def smallest(entries):
        best = None
        for (i, j) in entries:
            v = D[i, j]
            if v != 0 and (best is None or abs(v) < abs(D[best])):
                best = (i, j)
        return best

    for t in range(min(m, n)):
        pivot = smallest((i, j) for i in range(t, m) for j in range(t, n))
        if pivot is None:
            break
        swap_rows(t, pivot[0])
        swap_cols(t, pivot[1])
        while True:
            p = D[t, t]
            for k in range(t + 1, m):
                if D[k, t] != 0:
                    add_row(k, t, -(D[k, t] // p))
            for k in range(t + 1, n):
                if D[t, k] != 0:
                    add_col(k, t, -(D[t, k] // p))
            rest = smallest([(k, t) for k in range(t + 1, m)] + [(t, k) for k in range(t + 1, n)])
            if rest is not None:
                swap_rows(t, rest[0])
                swap_cols(t, rest[1])
                continue
            bad = next(((k, l) for k in range(t + 1, m) for l in range(t + 1, n) if D[k, l] % p != 0), None)
            if bad is None:
                break
            add_row(t, bad[0], 1)
        if D[t, t] < 0:
            D[t] = -D[t]
            U[t] = -U[t]
            U_inv[:, t] = -U_inv[:, t]
    return SNFDecomposition(U, D, V, U_inv, V_inv)


def integer_kernel(A) -> np.ndarray:
    """Столбцы образуют базис решётки {x ∈ Z^n : A x = 0}."""
    A = as_object_matrix(A)
    snf = smith_normal_form(A)
    return snf.V[:, snf.rank:]


def left_kernel(A) -> np.ndarray:
    """Строки образуют базис решётки {k ∈ Z^m : k A = 0}."""
    A = as_object_matrix(A)
    snf = smith_normal_form(A)
    return snf.U[snf.rank:, :]


def saturated_column_basis(A) -> np.ndarray:
    """Столбцы образуют базис насыщения решётки, порождённой столбцами A."""
    A = as_object_matrix(A)
    snf = smith_normal_form(A)
    return snf.U_inv[:, : snf.rank]


def lattice_basis(rows) -> np.ndarray:
    """Строки образуют линейно независимый базис решётки, порождённой строками."""
    R = as_object_matrix(rows)
    if R.size == 0:
        return np.zeros((0, R.shape[1] if R.ndim == 2 else 0), dtype=object)
    snf = smith_normal_form(R)
    r = snf.rank
    return np.array([snf.D[i, i] * snf.V_inv[i] for i in range(r)], dtype=object).reshape(r, R.shape[1])


def saturation_index(rows) -> int:
    """Индекс решётки (по строкам) в её насыщении: произведение инвариантных множителей."""
    R = as_object_matrix(rows)
    if R.size == 0:
        return 1
    index = 1
    for d in smith_normal_form(R).diagonal:
        if d != 0:
            index *= d
    return index


def solve_integer(A, y: Sequence) -> Optional[np.ndarray]:
    '''
    Целочисленное решение A z = y или None. Свободные переменные равны нулю.
    '''
    A = as_object_matrix(A)
    m, n = A.shape
    y = [sympy.Rational(v) for v in y]
    if len(y) != m:
        raise ValueError(f"Правая часть длины {len(y)} не согласована с матрицей {A.shape}")
    if any(not v.is_integer for v in y):
        return None
    snf = smith_normal_form(A)
    rhs = snf.U.dot(np.array([int(v) for v in y], dtype=object)) if m else np.zeros(0, dtype=object)
    w = np.zeros(n, dtype=object)
    for i in range(m):
        d = snf.D[i, i] if i < min(m, n) else 0
        if d == 0:
            if rhs[i] != 0:
                return None
            continue
        if rhs[i] % d != 0:
            return None
        w[i] = rhs[i] // d
    return snf.V.dot(w)


def rational_to_integer_rows(M: sympy.Matrix) -> np.ndarray:
    """Домножает каждую строку рациональной матрицы на общий знаменатель."""
    rows = []
    for i in range(M.rows):
        row = [sympy.Rational(v) for v in M.row(i)]
        den = math.lcm(*[int(v.q) for v in row])
        rows.append([int(v * den) for v in row])
    return np.array(rows, dtype=object).reshape(M.rows, M.cols)
