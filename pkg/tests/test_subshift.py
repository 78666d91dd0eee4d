from itertools import product

import numpy as np
import pytest

from src.systems.subshift import (
    Subshift, SubshiftDescriptor, SymbolicPoint, expansivity_check, local_stable_set,
    local_unstable_set, shift_distance, stable_inequality_holds,
)

ZERO = SymbolicPoint((0,), (), (0,))


def _perturbations(max_core: int, start: int):
    for length in range(1, max_core + 1):
        for core in product((0, 1), repeat=length):
            yield SymbolicPoint((0,), core, (0,), start)


def test_symbolic_point_canonical_form():
    p = SymbolicPoint.parse("0", "0010", "00", start=-2)
    assert p.core == (1,)
    assert p.start == 0
    assert p == SymbolicPoint((0,), (1,), (0,), 0)
    assert hash(p) == hash(SymbolicPoint((0,), (1,), (0,), 0))
    assert SymbolicPoint.parse("01", "", "0101") == SymbolicPoint.parse("10", "", "10", start=1)


def test_shift_moves_indices():
    p = SymbolicPoint((0,), (1,), (0,), 3)
    assert p.symbol(3) == 1
    assert p.shift(1).symbol(2) == 1
    assert p.shift(-2).symbol(5) == 1


def test_shift_distance():
    assert shift_distance(ZERO, ZERO) == 0.0
    assert shift_distance(ZERO, SymbolicPoint((0,), (1,), (0,), 0)) == 1.0
    assert shift_distance(ZERO, SymbolicPoint((0,), (1,), (0,), -3)) == 2.0 ** -3


@pytest.mark.parametrize("sub", [SubshiftDescriptor.full_shift(2), SubshiftDescriptor.golden_mean()])
@pytest.mark.parametrize("m", [1, 2, 3])
def test_local_stable_set_matches_defining_inequality(sub, m):
    cylinder = local_stable_set(sub, ZERO, m)
    checked = 0
    for y in _perturbations(6, -4):
        if not sub.is_allowed(y):
            continue
        checked += 1
        assert cylinder.contains(y) == stable_inequality_holds(ZERO, y, m, "forward")
    assert checked > 10


@pytest.mark.parametrize("m", [1, 2])
def test_local_unstable_set_matches_defining_inequality(m):
    sub = SubshiftDescriptor.full_shift(2)
    cylinder = local_unstable_set(sub, ZERO, m)
    for y in _perturbations(5, -2):
        assert (y in cylinder) == stable_inequality_holds(ZERO, y, m, "backward")


def test_local_stable_set_shrinks_to_point():
    sub = SubshiftDescriptor.full_shift(2)
    y = SymbolicPoint((0,), (1,), (0,), -20)
    assert y in local_stable_set(sub, ZERO, 5)
    assert y not in local_stable_set(sub, ZERO, 30)


def test_local_stable_set_rejects_disallowed_point():
    with pytest.raises(ValueError):
        local_stable_set(SubshiftDescriptor.golden_mean(), SymbolicPoint((1,), (), (1,)), 2)


def test_expansivity_check_statuses():
    sub = SubshiftDescriptor.full_shift(2)
    far = SymbolicPoint((0,), (1,), (0,), 5)
    report = expansivity_check(sub, 0.5, 10, [(ZERO, far), (ZERO, ZERO)])
    assert report.separations[0] == {"pair": 0, "status": "separated", "n": 5}
    assert report.separations[1]["status"] == "invalid"
    assert report.all_separated
    short = expansivity_check(sub, 0.5, 2, [(ZERO, far)])
    assert short.counterexample_candidates == [0]
    with pytest.raises(ValueError):
        expansivity_check(sub, 1.5, 2, [])


def test_subshift_descriptor_validation():
    with pytest.raises(ValueError):
        SubshiftDescriptor(2, ((1, 1),))
    with pytest.raises(ValueError):
        SubshiftDescriptor(2, ((1, 2), (1, 1)))
    assert SubshiftDescriptor.golden_mean().cycles(2) == [(0,), (0, 1), (1, 0)]


def test_sample_points_are_allowed():
    sub = SubshiftDescriptor.golden_mean()
    points = sub.sample_points(np.random.default_rng(3), 25)
    assert len(points) == 25
    assert all(sub.is_allowed(p) for p in points)


def test_subshift_system_orbit_and_embedding():
    system = Subshift(SubshiftDescriptor.full_shift(2))
    p = SymbolicPoint((0,), (1,), (0,), 2)
    states = [s for chunk in system.orbit(p, 4) for s in chunk]
    assert len(states) == 5
    assert states[2].symbol(0) == 1
    emb = system.embed(states)
    assert emb.shape == (5, 1)
    assert emb[2, 0] == pytest.approx(0.5)
    assert system.embed([ZERO])[0, 0] == 0.0
    assert system.apply_inverse(system.apply(p)) == p
