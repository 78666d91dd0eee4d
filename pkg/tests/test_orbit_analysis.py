import numpy as np
import pytest

from src.analysis.orbit_analyzer import (
    ASYMPTOTIC, EMPIRICALLY_DENSE, INCONCLUSIVE, PERIODIC, ClassificationTolerances, classify_orbit,
    coverage_experiment, omega_limit_approx, power_minimality_scan, product_pm_probe, residue_limit_sets,
    time_s_scan,
)
from src.constructions.example_builder import build_product_pm_flow, build_slowed_system, generic_seeds
from src.flow.flow_integrator import IntegratorConfig, TimeSMap
from src.flow.slowed_field import SlowedLinearField
from src.systems.exact_vector import ExactVector, SymbolBasis
from src.systems.subshift import Subshift, SubshiftDescriptor, SymbolicPoint
from src.systems.system_descriptor import Automorphism, Translation


@pytest.fixture(scope="module")
def basis():
    return SymbolBasis.declare({"theta1": "sqrt(2) - 1", "theta2": "sqrt(3) - 1", "phi": "(1 + sqrt(5))/2"})


@pytest.fixture(scope="module")
def minimal_translation(basis):
    return Translation(ExactVector.parse(["@theta1", "@theta2"], basis))


@pytest.fixture(scope="module")
def slowed(basis):
    gamma = ExactVector.parse(["1", "@theta1 + 1"], basis)
    return build_slowed_system(2, gamma, [[0.5, 0.5]], 0.1, "1/20")


def test_minimal_translation_covers_grid(minimal_translation):
    run = coverage_experiment(minimal_translation, np.array([0.1, 0.2]), 10**6, resolution=32)
    assert run.fraction == 1.0
    assert run.complete_at is not None
    assert run.steps_done < 10**6
    fractions = [f for _, f in run.curve]
    assert fractions == sorted(fractions)


def test_rational_translation_stalls_at_21_cells():
    t = Translation(ExactVector.parse(["1/3", "1/7"]))
    run = coverage_experiment(t, np.array([0.01, 0.01]), 5000, resolution=32)
    assert run.grid.visited_cell_count == 21
    assert run.last_new_cell_step <= 20
    assert run.complete_at is None


def test_coverage_rejects_bad_parameters(minimal_translation):
    with pytest.raises(ValueError):
        coverage_experiment(minimal_translation, np.zeros(2), 100, resolution=12)
    with pytest.raises(ValueError):
        coverage_experiment(minimal_translation, np.zeros(2), 10**12)
    with pytest.raises(ValueError):
        coverage_experiment(minimal_translation, np.zeros(2), 0)


def test_coverage_flags_integration_stall(basis):
    field = SlowedLinearField(ExactVector.parse(["1", "@theta1 + 1"], basis), [[0.5, 0.5]], 0.1)
    f = TimeSMap(field, "1/2", IntegratorConfig(max_wall_steps=1))
    run = coverage_experiment(f, np.array([0.45, 0.45]), 100, resolution=8)
    assert run.stalled
    assert run.stall_time is not None
    assert run.to_dict()["integration_stalled"] is True


def test_classify_rational_translation_is_periodic_21():
    t = Translation(ExactVector.parse(["1/3", "1/7"]))
    report = classify_orbit(t, np.array([0.2, 0.3]), 10**5, resolution=32)
    assert report.classification == PERIODIC
    assert report.period == 21
    assert report.in_script_A and report.in_script_W


def test_classify_cat_map_fixed_point():
    report = classify_orbit(Automorphism([[2, 1], [1, 1]]), np.zeros(2), 1000, resolution=16)
    assert report.classification == PERIODIC
    assert report.period == 1


def test_classify_minimal_translation_dense(minimal_translation):
    report = classify_orbit(minimal_translation, np.array([0.3, 0.6]), 10**5, resolution=16)
    assert report.classification == EMPIRICALLY_DENSE
    assert report.forward_verdict == EMPIRICALLY_DENSE
    assert report.backward_verdict == EMPIRICALLY_DENSE
    assert not report.in_script_A and not report.in_script_W


def test_classify_small_budget_is_inconclusive(minimal_translation):
    report = classify_orbit(minimal_translation, np.array([0.3, 0.6]), 20, resolution=32)
    assert report.classification == INCONCLUSIVE


def test_classify_subshift_periodic_point():
    system = Subshift(SubshiftDescriptor.golden_mean())
    report = classify_orbit(system, SymbolicPoint((0, 1), (), (0, 1)), 100, resolution=8)
    assert report.classification == PERIODIC
    assert report.period == 2


def test_classify_center_is_fixed(slowed):
    report = classify_orbit(slowed, np.array([0.5, 0.5]), 1000, resolution=16)
    assert report.classification == PERIODIC
    assert report.period == 1


def test_classify_special_orbit_is_asymptotic(slowed):
    seed_in = slowed.metadata()["predicted_exceptional_set"]["special_orbits"][0]["seed_in"]
    report = classify_orbit(slowed, np.array(seed_in), 3000, resolution=16)
    assert report.classification == ASYMPTOTIC
    assert report.forward_verdict == ASYMPTOTIC
    assert report.target == pytest.approx([0.5, 0.5])
    assert report.details["asymptotic_direction"] == "forward"


def test_tolerances_validation():
    with pytest.raises(ValueError):
        ClassificationTolerances(dense_threshold=0.0)
    with pytest.raises(ValueError):
        ClassificationTolerances(stall_window=1.0)
    with pytest.raises(ValueError):
        ClassificationTolerances(period_confirmations=0)


def test_omega_limit_of_minimal_translation(minimal_translation):
    grid = omega_limit_approx(minimal_translation, np.array([0.1, 0.1]), 1000, 20000, resolution=8)
    assert grid.fraction == 1.0
    with pytest.raises(ValueError):
        omega_limit_approx(minimal_translation, np.zeros(2), -1, 10)


def test_residue_classes_of_minimal_translation(minimal_translation):
    profile = residue_limit_sets(minimal_translation, np.array([0.4, 0.1]), 2, 20000, resolution=8)
    assert profile.forward_full.fraction == 1.0
    assert [g.fraction for g in profile.forward] == [1.0, 1.0]
    assert [g.fraction for g in profile.backward] == [1.0, 1.0]
    with pytest.raises(ValueError):
        residue_limit_sets(minimal_translation, np.zeros(2), 4, 100)


def test_residue_classes_of_half_rotation_split():
    t = Translation(ExactVector.parse(["1/2"]))
    profile = residue_limit_sets(t, np.array([0.1]), 2, 100, resolution=4)
    assert [g.visited_cell_count for g in profile.forward] == [1, 1]
    assert profile.forward_full.visited_cell_count == 2
    assert not profile.forward[0].same_occupancy(profile.forward[1])


def test_power_scan_of_minimal_translation(minimal_translation):
    entries = power_minimality_scan(minimal_translation, np.array([0.2, 0.9]), [2, 3, 5], 20000, resolution=8)
    assert [e.prime for e in entries] == [2, 3, 5]
    assert all(e.run.fraction == 1.0 for e in entries)
    with pytest.raises(ValueError):
        power_minimality_scan(minimal_translation, np.zeros(2), [4], 100)


def test_power_scan_detects_rational_power():
    t = Translation(ExactVector.parse(["1/2", "1/3"]))
    entries = power_minimality_scan(t, np.array([0.05, 0.05]), [2, 3], 1000, resolution=8)
    assert entries[0].run.grid.visited_cell_count == 3
    assert entries[1].run.grid.visited_cell_count == 2


def test_product_probe_stalls_for_translation(minimal_translation):
    report = product_pm_probe(minimal_translation, 20000, resolution=8, seeds=3, rng_seed=11)
    assert report.max_product_fraction <= 0.5
    assert report.factor_fractions == [1.0, 1.0, 1.0]
    assert report.to_dict()["stalled"]


def test_time_s_scan_rows(slowed):
    rows = time_s_scan(slowed.field, ["1/20", "1/10"], np.array([0.13, 0.71]), 500, resolution=8)
    assert [r["s"] for r in rows] == ["1/20", "1/10"]
    assert all(r["flowbox_ok"] for r in rows)
    assert all(0.0 < r["fraction"] <= 1.0 for r in rows)


@pytest.mark.slow
def test_slowed_system_generic_seeds_dense(slowed):
    for seed in generic_seeds(2, 20, rng_seed=5):
        report = classify_orbit(slowed, seed, 10**6, resolution=16)
        assert report.classification == EMPIRICALLY_DENSE


@pytest.mark.slow
def test_slowed_system_special_orbit_dense_backward(slowed):
    seed_in = slowed.metadata()["predicted_exceptional_set"]["special_orbits"][0]["seed_in"]
    report = classify_orbit(slowed, np.array(seed_in), 10**6, resolution=16)
    assert report.forward_verdict == ASYMPTOTIC
    assert report.backward_verdict == EMPIRICALLY_DENSE


@pytest.mark.slow
def test_slowed_system_powers_dense(slowed):
    entries = power_minimality_scan(slowed, np.array([0.21, 0.83]), [2, 3, 5], 10**5, resolution=16, threshold=0.99)
    assert all(e.run.fraction >= 0.99 for e in entries)


@pytest.mark.slow
def test_product_flow_orbits(basis):
    # поворот окружности на 1/400 за шаг: замкнутые орбиты периодичны,
    # а остатки по модулю периода проходят все ячейки окружности при разрешении 16
    gamma = ExactVector.parse(["1", "@theta1 + 1"], basis)
    flow = build_product_pm_flow(3, gamma, [[0.5, 0.5]], 0.1, "1/20", circle_speed="1/20")
    assert flow.metadata()["predicted_exceptional_set"]["closed_orbits"][0]["circle_period_steps"] == 400
    for height in (0.0, 0.37, 0.81):
        report = classify_orbit(flow, np.array([0.5, 0.5, height]), 5000, resolution=16)
        assert report.classification == PERIODIC
        assert report.period == 400
    for seed in generic_seeds(3, 10, rng_seed=9):
        assert classify_orbit(flow, seed, 10**6, resolution=16).classification == EMPIRICALLY_DENSE
