import numpy as np
import pytest

from src.torus.coverage_grid import CoverageGrid
from src.torus.torus_geometry import TorusPoint, minimal_displacement, torus_distance, wrap


def test_wrap_reduces_mod_one():
    assert wrap([1.25, -0.5]).coords == pytest.approx((0.25, 0.5))
    assert wrap([0.0, 0.0]).coords == (0.0, 0.0)
    assert wrap([2.0, 3.0]).coords == (0.0, 0.0)


def test_wrap_tiny_negative_lands_in_unit_interval():
    p = wrap([-1e-17, 0.5])
    assert 0.0 <= p.coords[0] < 1.0


def test_wrap_rejects_non_finite():
    with pytest.raises(ValueError):
        wrap([np.inf, 0.0])
    with pytest.raises(ValueError):
        wrap([np.nan])


def test_torus_point_validates_range():
    with pytest.raises(ValueError):
        TorusPoint((1.0, 0.2))
    with pytest.raises(ValueError):
        TorusPoint(())


def test_torus_distance_examples():
    assert torus_distance([0.1, 0.0], [0.9, 0.0]) == pytest.approx(0.2)
    assert torus_distance([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert torus_distance([0.25, 0.25], [0.75, 0.75]) == pytest.approx(np.sqrt(0.5))


def _check_metric_axioms(count, seed, dimension=3):
    rng = np.random.default_rng(seed)
    xs, ys, zs = (rng.random((count, dimension)) for _ in range(3))
    for metric, bound in (("euclidean", np.sqrt(dimension) / 2), ("max", 0.5)):
        d_xy = torus_distance(xs, ys, metric=metric)
        assert d_xy.shape == (count,)
        assert np.all(torus_distance(xs, xs, metric=metric) == 0.0)
        assert np.allclose(d_xy, torus_distance(ys, xs, metric=metric))
        assert np.all(d_xy <= bound + 1e-12)
        via = d_xy + torus_distance(ys, zs, metric=metric)
        assert np.all(torus_distance(xs, zs, metric=metric) <= via + 1e-12)


def test_torus_distance_metric_axioms():
    _check_metric_axioms(50, 0)


@pytest.mark.slow
def test_torus_distance_metric_axioms_many_samples():
    _check_metric_axioms(10**4, 1)
    _check_metric_axioms(10**4, 2, dimension=1)


def test_torus_distance_max_metric_and_errors():
    assert torus_distance([0.1, 0.0], [0.9, 0.3], metric="max") == pytest.approx(0.3)
    with pytest.raises(ValueError):
        torus_distance([0.1, 0.2], [0.1, 0.2, 0.3])
    with pytest.raises(ValueError):
        torus_distance([0.1], [0.2], metric="taxicab")


def test_minimal_displacement_range():
    d = minimal_displacement([0.9, 0.1], [0.1, 0.9])
    assert d == pytest.approx([0.2, -0.2])
    assert np.all((d >= -0.5) & (d < 0.5))


def test_coverage_grid_cell_arithmetic():
    grid = CoverageGrid(4, 2)
    assert grid.fraction == 0.0
    grid.record(np.array([0.26, 0.74]))
    assert grid.occupied_cells() == [(1, 2)]
    assert grid.cell_of(TorusPoint((0.26, 0.74))) == (1, 2)


def test_coverage_grid_complete_after_all_cells():
    grid = CoverageGrid(4, 2)
    centers = (np.arange(4) + 0.5) / 4
    pts = np.array([[x, y] for x in centers for y in centers])
    grid.record_many(pts)
    assert grid.fraction == 1.0
    assert grid.is_complete()


def test_coverage_grid_is_monotone_and_merge_commutes():
    rng = np.random.default_rng(1)
    a, b = CoverageGrid(8, 2), CoverageGrid(8, 2)
    last = 0.0
    for chunk in rng.random((10, 5, 2)):
        a.record_many(chunk)
        assert a.fraction >= last
        last = a.fraction
    b.record_many(rng.random((30, 2)))
    assert a.merge(b).same_occupancy(b.merge(a))
    with pytest.raises(ValueError):
        a.merge(CoverageGrid(4, 2))


def test_coverage_grid_rejects_bad_parameters():
    with pytest.raises(ValueError):
        CoverageGrid(0, 2)
    with pytest.raises(ValueError):
        CoverageGrid(4, 2).record(np.array([0.1, 0.2, 0.3]))
