import numpy as np
import pytest
import sympy

from src.systems.exact_vector import ExactVector, SymbolBasis
from src.systems.system_descriptor import AffineMap, Automorphism, ProductSystem, Translation

CAT = [[2, 1], [1, 1]]


@pytest.fixture
def theta_basis():
    return SymbolBasis.declare({"theta": "sqrt(2) - 1", "phi": "sqrt(3) - 1"})


def test_symbol_basis_rejects_rational_and_bad_names():
    with pytest.raises(ValueError):
        SymbolBasis.declare({"q": "1/2"})
    with pytest.raises(ValueError):
        SymbolBasis.declare({"1bad": "sqrt(2)"})
    with pytest.raises(ValueError):
        SymbolBasis.declare({"x": "sqrt(y)"})


def test_exact_vector_parse_and_arithmetic(theta_basis):
    a = ExactVector.parse(["1/2 - 3*@theta", "@phi"], theta_basis)
    assert a.coefficients[0] == (sympy.Rational(1, 2), -3, 0)
    assert a.coefficients[1] == (0, 0, 1)
    assert not a.is_rational()
    assert a.numeric() == pytest.approx([0.5 - 3 * (np.sqrt(2) - 1), np.sqrt(3) - 1])
    assert (a - a).is_zero()
    assert a.rank_over_q() == 2
    assert ExactVector.parse(["3/2", "2"]).reduce_mod_one().rational_part() == (sympy.Rational(1, 2), 0)


def test_exact_vector_rejects_undeclared_and_nonlinear(theta_basis):
    with pytest.raises(ValueError):
        ExactVector.parse(["@psi"], theta_basis)
    with pytest.raises(ValueError):
        ExactVector.parse(["@theta**2"], theta_basis)
    with pytest.raises(ValueError):
        ExactVector.parse(["sqrt(2)"], theta_basis)


def test_exact_vector_dot_detects_integrality():
    a = ExactVector.parse(["1/2", "1/3"])
    assert a.dot([2, 3]).is_integral()
    assert not a.dot([1, 0]).is_integral()


def test_cat_map_apply_and_inverse():
    cat = Automorphism(CAT)
    assert cat.apply(np.array([0.5, 0.5])) == pytest.approx([0.5, 0.0])
    assert cat.apply_inverse(np.array([0.5, 0.0])) == pytest.approx([0.5, 0.5])
    assert cat.known_fixed_points()[0] == pytest.approx([0.0, 0.0])
    assert cat.tangent(np.zeros(2)) == pytest.approx(np.array(CAT, dtype=float))


def test_translation_apply_and_orbit_closed_form():
    t = Translation(ExactVector.parse(["1/10", "1/5"]))
    assert t.apply(np.zeros(2)) == pytest.approx([0.1, 0.2])
    chunks = list(t.orbit(np.zeros(2), 10, chunk_size=4))
    states = np.vstack(chunks)
    assert len(states) == 11
    assert states[10] == pytest.approx([0.0, 0.0])
    back = np.vstack(list(t.orbit(np.zeros(2), 3, "backward")))
    assert back[1] == pytest.approx([0.9, 0.8])


def test_zero_translation_reports_fixed_points():
    still = Translation(ExactVector.parse(["0", "0"]))
    assert still.known_fixed_points()[0] == pytest.approx([0.0, 0.0])
    assert still.apply(np.array([0.3, 0.7])) == pytest.approx([0.3, 0.7])
    assert still.describe()["fixes_every_point"] is True
    moving = Translation(ExactVector.parse(["1/2", "0"]))
    assert moving.known_fixed_points() == []
    assert "fixes_every_point" not in moving.describe()


def test_rational_translation_orbit_is_exactly_periodic():
    t = Translation(ExactVector.parse(["1/3", "1/7"]))
    states = np.vstack(list(t.orbit(np.array([0.05, 0.05]), 42)))
    assert np.array_equal(states[21], states[0])
    assert len({tuple(np.round(s, 12)) for s in states}) == 21


def test_skew_affine_image_of_origin(theta_basis):
    f = AffineMap([[1, 0], [1, 1]], ExactVector.parse(["@theta", "0"], theta_basis))
    assert f.apply(np.zeros(2)) == pytest.approx([np.sqrt(2) - 1, 0.0])
    x = np.array([0.3, 0.6])
    assert f.apply_inverse(f.apply(x)) == pytest.approx(x)
    assert f.independence_declarations() == {"theta": "sqrt(2) - 1", "phi": "sqrt(3) - 1"}


def test_affine_map_rejects_non_unimodular():
    with pytest.raises(ValueError):
        AffineMap([[2, 0], [0, 1]], ExactVector.parse(["0", "0"]))
    with pytest.raises(ValueError):
        AffineMap([[1, 0], [0, 1]], ExactVector.parse(["0"]))


def test_state_shape_is_checked():
    t = Translation(ExactVector.parse(["1/2"]))
    with pytest.raises(ValueError):
        t.apply(np.array([0.1, 0.2]))
    with pytest.raises(ValueError):
        next(t.orbit(np.array([0.1]), 5, "sideways"))


def test_product_system_acts_componentwise():
    left = Translation(ExactVector.parse(["1/4"]))
    right = Automorphism(CAT)
    prod = ProductSystem(left, right)
    x = np.array([0.1, 0.5, 0.5])
    assert prod.apply(x) == pytest.approx([0.35, 0.5, 0.0])
    assert prod.apply_inverse(prod.apply(x)) == pytest.approx(x)
    xs = np.array([x, [0.2, 0.1, 0.3]])
    assert prod.apply_many(xs) == pytest.approx(np.array([prod.apply(v) for v in xs]))
    assert prod.tangent(x).shape == (3, 3)
    orbit = np.vstack(list(prod.orbit(x, 5)))
    assert orbit.shape == (6, 3)
    assert orbit[5] == pytest.approx(prod.apply(prod.apply(prod.apply(prod.apply(prod.apply(x))))))
