import numpy as np
import pytest
from helpers import SQUARE

from cuthho.agglomerate import (
    AgglomerationError,
    CutPartition,
    default_delta,
    delta_star,
    partition_cut_cells,
    run_agglomeration,
    select_neighbors,
)
from cuthho.geometry import (
    BallCheck,
    build_subcells,
    check_assumption_ball,
    classify_cells,
)
from cuthho.levelset import CircleLevelSet, LineLevelSet
from cuthho.mesh import compute_meta, estimate_rho, generate_cartesian


def _topo(mesh, ls, n_sub=8):
    return build_subcells(mesh, ls, classify_cells(mesh, ls), n_sub)


def test_default_thresholds():
    assert np.isclose(default_delta(0.3), 0.00675)
    assert np.isclose(delta_star(0.3, 0.00675), 0.3 * 0.00675 / 3)


def test_sliver_column_is_ko1_and_merges_left():
    mesh = generate_cartesian(4, 4, SQUARE)
    topo = _topo(mesh, LineLevelSet(1, 0, -1e-6 * 0.5))
    part = partition_cut_cells(topo, default_delta(estimate_rho(mesh)))
    assert len(part.ko1) == 4 and not part.ko2 and not part.ok
    agg, _, choice = run_agglomeration(topo)
    for c, nb in choice.n1.items():
        # the face neighbour on the left lies entirely in side 1
        assert nb in mesh.face_neighbors(c) and mesh.cell_polygon(nb)[:, 0].max() <= 0.0
    assert len(agg.merged()) == 4 and agg.n_cells == 12
    for c in agg.topology.cut_cells():
        res = check_assumption_ball(agg.topology.cells[c], agg.delta_star)
        assert res[1].passed and res[2].passed


def test_well_cut_cells_are_ok_and_untouched():
    mesh = generate_cartesian(2, 2)
    topo = _topo(mesh, LineLevelSet(1, 0, -0.25))
    agg, part, choice = run_agglomeration(topo)
    assert set(part.ok) == set(topo.cut_cells()) and not part.ko1 and not part.ko2
    assert len(choice) == 0 and not agg.merged()
    assert agg.groups == tuple((c,) for c in range(mesh.n_cells))


def test_no_cut_cells_gives_empty_choice():
    topo = _topo(generate_cartesian(3, 3), LineLevelSet(1, 0, -5))
    part = partition_cut_cells(topo, 0.01)
    assert len(select_neighbors(part, topo)) == 0


def test_ko1_may_choose_a_ko2_cell():
    mesh = generate_cartesian(2, 1, ((0.0, 2.0), (0.0, 1.0)))
    topo = _topo(mesh, LineLevelSet(0, 1, -0.5))
    thin, fat = BallCheck(None, 0.0, False), BallCheck(None, 0.5, True)
    part = CutPartition(ok=(), ko1=(0,), ko2=(1,), delta=0.01, balls={0: {1: thin, 2: fat}, 1: {1: fat, 2: thin}})
    choice = select_neighbors(part, topo, compute_meta(mesh))
    assert choice.n1 == {0: 1} and choice.ko2_hat == {1} and choice.n2 == {}


def test_partition_rejects_bad_delta():
    topo = _topo(generate_cartesian(2, 2), LineLevelSet(1, 0, -0.25))
    with pytest.raises(ValueError):
        partition_cut_cells(topo, 1.5)


def test_circle_shift_sweep_always_admissible():
    mesh = generate_cartesian(16, 16, SQUARE)
    h = float(mesh.face_lengths().max())
    for eps in (1e-2, 1e-4, 1e-6, 1e-8):
        for d in ((1.0, 0.0), (1.0, 1.0)):
            ls = CircleLevelSet(eps * h * d[0], eps * h * d[1], 0.5)
            try:
                agg, part, _ = run_agglomeration(_topo(mesh, ls))
            except AgglomerationError as exc:  # pragma: no cover
                pytest.fail(str(exc))
            for c in agg.topology.cut_cells():
                assert all(r.passed for r in check_assumption_ball(agg.topology.cells[c], agg.delta_star).values())
            assert abs(sum(mesh.cell_area(p) for g in agg.groups for p in g) - 4.0) < 1e-12
