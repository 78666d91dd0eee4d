import numpy as np
import pytest

from src.analysis.stability_estimator import equicontinuity_modulus, pointwise_modulus
from src.systems.exact_vector import ExactVector, SymbolBasis
from src.systems.subshift import Subshift, SubshiftDescriptor
from src.systems.system_descriptor import AffineMap, Automorphism, Translation

LOG_CAT_EIGENVALUE = float(np.log((3 + np.sqrt(5)) / 2))


@pytest.fixture
def translation():
    basis = SymbolBasis.declare({"theta1": "sqrt(2) - 1", "theta2": "sqrt(3) - 1"})
    return Translation(ExactVector.parse(["@theta1", "@theta2"], basis))


def test_translation_is_equicontinuous(translation):
    estimate = equicontinuity_modulus(translation, 0.05, 30, sample_pairs=1000)
    assert estimate.delta == pytest.approx(0.05)
    assert abs(estimate.expansion_rate) < 1e-12
    assert estimate.rate_method == "tangent"
    assert estimate.verdict == "no expansion detected"


def test_cat_map_expansion_rate():
    estimate = equicontinuity_modulus(Automorphism([[2, 1], [1, 1]]), 0.05, 30, sample_pairs=1000)
    assert estimate.expansion_rate == pytest.approx(LOG_CAT_EIGENVALUE, rel=0.05)
    assert estimate.delta == 0.0
    assert estimate.expansion_detected
    assert estimate.to_dict()["verdict"] == "expansion detected"
    assert all(not rung["passed"] for rung in estimate.ladder)


def test_skew_product_has_no_exponential_expansion():
    basis = SymbolBasis.declare({"theta": "sqrt(2) - 1"})
    skew = AffineMap([[1, 0], [1, 1]], ExactVector.parse(["@theta", "0"], basis))
    estimate = equicontinuity_modulus(skew, 0.05, 30, sample_pairs=200)
    assert estimate.expansion_rate < 0.2


def test_pointwise_modulus_of_translation(translation):
    result = pointwise_modulus(translation, np.array([0.3, 0.3]), 0.1, 20, direction="backward")
    assert result["delta"] == pytest.approx(0.1)
    assert result["direction"] == "backward"


def test_stability_rejects_subshift_and_bad_epsilon(translation):
    with pytest.raises(ValueError):
        equicontinuity_modulus(Subshift(SubshiftDescriptor.full_shift(2)), 0.1, 10)
    with pytest.raises(ValueError):
        equicontinuity_modulus(translation, 0.7, 10)
    with pytest.raises(ValueError):
        pointwise_modulus(translation, np.zeros(2), 0.1, 10, direction="up")
