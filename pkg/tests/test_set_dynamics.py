import numpy as np
import pytest

from src.analysis.orbit_analyzer import AnalysisInvariantError
from src.set_dynamics.raster_set import RasterDomain, RasterMap, RasterSet
from src.set_dynamics.set_chains import (
    CASE_BACKWARD_INVARIANT, CASE_INVARIANT_CLOSURE, STABILIZED, birkhoff_chain, decreasing_chain_check,
    preimage_intersection_chain,
)


def _cells(raster):
    return sorted(int(i) for i in np.flatnonzero(raster.flat))


@pytest.fixture
def circle():
    return RasterDomain.torus(1, 8)


def test_interval_and_algebra(circle):
    S = RasterSet.interval(circle, 0.25, 0.5)
    assert _cells(S) == [2, 3, 4]
    T = RasterSet.interval(circle, 0.45, 0.7)
    assert _cells(S | T) == [2, 3, 4, 5]
    assert _cells(S & T) == [3, 4]
    assert _cells(S - T) == [2]
    assert (~S).count == 5
    assert (S & T) <= S
    assert not S <= T
    assert RasterSet.empty(circle).is_empty()
    assert RasterSet.full(circle).count == 8


def test_closure_and_interior_wrap_on_torus(circle):
    point = RasterSet.points(circle, [[0.01]])
    assert _cells(point.closure()) == [0, 1, 7]
    block = RasterSet(circle, [True, True, True, True, False, False, False, False])
    assert _cells(block.interior()) == [1, 2]
    segment = RasterDomain.box(1, 8)
    assert _cells(RasterSet.points(segment, [[0.01]]).closure()) == [0, 1]


def test_components_respect_gluing():
    ends = [True] + [False] * 6 + [True]
    assert RasterSet(RasterDomain.torus(1, 8), ends).components()[1] == 1
    assert RasterSet(RasterDomain.box(1, 8), ends).components()[1] == 2
    plane = RasterDomain.torus(2, 4)
    corners = RasterSet.points(plane, [[0.1, 0.1], [0.9, 0.1]])
    assert corners.is_connected()
    far = RasterSet.points(plane, [[0.1, 0.1], [0.6, 0.6]])
    assert not far.is_connected()
    seed = RasterSet.points(plane, [[0.1, 0.1]])
    assert far.component_containing(seed) == seed


def test_disk_wraps_around_origin():
    domain = RasterDomain.torus(2, 8)
    disk = RasterSet.disk(domain, [0.0, 0.0], 0.1)
    assert disk.count == 4
    assert disk.is_connected()
    with pytest.raises(ValueError):
        RasterSet.disk(domain, [0.0, 0.0], 0.0)


def test_builders_reject_bad_input():
    box = RasterDomain.box(2, 8, -1.0, 1.0)
    with pytest.raises(ValueError):
        RasterSet.points(box, [[2.0, 0.0]])
    with pytest.raises(ValueError):
        RasterSet.box(box, [0.5, 0.5], [0.1, 0.1])
    with pytest.raises(ValueError):
        RasterSet.interval(box, 0.1, 0.2)
    with pytest.raises(ValueError):
        RasterSet(box, np.zeros(10, dtype=bool))
    with pytest.raises(ValueError):
        RasterSet.full(box) | RasterSet.full(RasterDomain.torus(2, 8))


def test_save_and_load(tmp_path):
    domain = RasterDomain.box(2, 16, -1.0, 1.0)
    disk = RasterSet.disk(domain, [0.0, 0.0], 0.5)
    path = disk.save(tmp_path / "disk.pmr")
    assert path.read_bytes()[:4] == b"PMRS"
    assert RasterSet.load(path, -1.0, 1.0) == disk
    torus = RasterSet.full(RasterDomain.torus(1, 8))
    assert RasterSet.load(torus.save(tmp_path / "full.pmr")) == torus
    bad = tmp_path / "bad.pmr"
    bad.write_bytes(b"XXXX" + bytes(12))
    with pytest.raises(ValueError):
        RasterSet.load(bad)


def test_named_maps():
    circle = RasterDomain.torus(1, 8)
    identity = RasterMap.named("identity", circle)
    point = RasterSet.points(circle, [[0.3]])
    assert identity.image(point) == point.closure()
    assert identity.preimage(point) == point.closure()
    assert identity.describe()["name"] == "identity"
    with pytest.raises(ValueError):
        RasterMap.named("doubling", RasterDomain.box(1, 8))
    with pytest.raises(ValueError):
        RasterMap.named("rotation90", circle)
    with pytest.raises(ValueError):
        RasterMap.named("tent", circle)
    with pytest.raises(ValueError):
        identity.image(RasterSet.full(RasterDomain.torus(1, 16)))


def test_dense_sampling_keeps_every_transition():
    circle = RasterDomain.torus(1, 8)
    identity = RasterMap.named("identity", circle, samples_per_axis=256)
    point = RasterSet.points(circle, [[0.3]])
    assert identity.image(point) == point.closure()
    assert identity.preimage(point) == point.closure()
    assert identity.transitions.nnz == 3 * circle.cell_count
    plane = RasterDomain.torus(2, 4)
    assert RasterMap.named("identity", plane, samples_per_axis=20).transitions.nnz == 5 * plane.cell_count


def test_dichotomy_identity_is_invariant_closure():
    circle = RasterDomain.torus(1, 16)
    U = RasterSet.interval(circle, 0.25, 0.5)
    result = preimage_intersection_chain(RasterMap.named("identity", circle), U)
    assert result.verdict == CASE_INVARIANT_CLOSURE
    assert U.closure() <= result.E
    assert result.to_dict()["verdict"] == "Case1"


def test_dichotomy_doubling_keeps_boundary_point():
    circle = RasterDomain.torus(1, 64)
    U = ~RasterSet.interval(circle, 0.4, 0.5)
    result = preimage_intersection_chain(RasterMap.named("doubling", circle), U, n_max=128)
    assert result.verdict == CASE_INVARIANT_CLOSURE
    assert result.E.flat[0] and result.E.flat[32]
    assert all(a >= b for a, b in zip(result.chain_sizes, result.chain_sizes[1:]))


def test_dichotomy_rotation_finds_empty_backward_invariant_set():
    circle = RasterDomain.torus(1, 64)
    U = RasterSet.interval(circle, 0.1, 0.2)
    result = preimage_intersection_chain(RasterMap.named("rotation", circle), U)
    assert result.verdict == CASE_BACKWARD_INVARIANT
    assert result.m == 2
    assert result.E.is_empty()
    assert result.V.is_empty()
    assert result.to_dict()["V_cells"] == 0


def test_dichotomy_preconditions():
    circle = RasterDomain.torus(1, 64)
    rotation = RasterMap.named("rotation", circle)
    U = RasterSet.interval(circle, 0.1, 0.2)
    with pytest.raises(ValueError):
        preimage_intersection_chain(rotation, U, RasterSet.points(circle, [[0.7]]))
    with pytest.raises(ValueError):
        preimage_intersection_chain(rotation, U, RasterSet.points(circle, [[0.15]]))
    with pytest.raises(ValueError):
        preimage_intersection_chain(rotation, U, n_max=0)


def test_birkhoff_scaling_shrinks_to_origin():
    plane = RasterDomain.box(2, 16, -1.0, 1.0)
    D0 = RasterSet.disk(plane, [0.0, 0.0], 0.9)
    A = RasterSet.points(plane, [[0.0, 0.0]])
    result = birkhoff_chain(RasterMap.named("scaling", plane), D0, A)
    assert result.status == STABILIZED
    assert result.checks["A_in_K"]
    assert A <= result.K
    assert result.K.count < D0.count
    assert decreasing_chain_check(result)


def test_birkhoff_rotation90_keeps_symmetric_disk():
    plane = RasterDomain.box(2, 16, -1.0, 1.0)
    D0 = RasterSet.disk(plane, [0.0, 0.0], 0.6)
    A = RasterSet.points(plane, [[0.05, 0.05]])
    result = birkhoff_chain(RasterMap.named("rotation90", plane), D0, A)
    assert result.status == STABILIZED
    assert result.steps == 1
    assert result.K == D0.closure()


def test_birkhoff_identity():
    domain = RasterDomain.torus(2, 8)
    D0 = RasterSet.box(domain, [0.2, 0.2], [0.6, 0.6])
    A = RasterSet.points(domain, [[0.4, 0.4]])
    result = birkhoff_chain(RasterMap.named("identity", domain), D0, A)
    assert result.status == STABILIZED
    assert result.K == D0.closure()
    assert result.to_dict()["chain_sizes"] == [D0.count, D0.count]


def test_birkhoff_preconditions():
    domain = RasterDomain.torus(2, 8)
    identity = RasterMap.named("identity", domain)
    D0 = RasterSet.box(domain, [0.2, 0.2], [0.4, 0.4])
    with pytest.raises(ValueError):
        birkhoff_chain(identity, D0, RasterSet.empty(domain))
    with pytest.raises(ValueError):
        birkhoff_chain(identity, D0, RasterSet.points(domain, [[0.8, 0.8]]))
    split = D0 | RasterSet.box(domain, [0.7, 0.7], [0.8, 0.8])
    with pytest.raises(ValueError):
        birkhoff_chain(identity, split, RasterSet.points(domain, [[0.3, 0.3]]))


def test_analysis_invariant_error_is_runtime_error():
    assert issubclass(AnalysisInvariantError, RuntimeError)
