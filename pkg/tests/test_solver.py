import math

import numpy as np
import pytest

from hcgibbs import boundary_laws as bl
from hcgibbs.hc_graphs import HINGE, WAND
from hcgibbs.solver import (
    TRANSLATION_INVARIANT,
    WEAKLY_PERIODIC,
    CriticalNotFound,
    System,
    classify,
    critical_lambda,
    grid_scan_count,
    merge_points,
    oracle_residual,
    solve,
    solve_I2,
    solve_I3,
    solve_I4,
    solve_invariant,
    solve_TI2,
    solve_TI3,
    sweep,
    ti3_box,
)

UNIT = (1e-9, 1e-9), (1 - 1e-9, 1 - 1e-9)


def test_classify():
    assert classify((0.3, 0.3, 0.3, 0.3)) == TRANSLATION_INVARIANT
    assert classify((0.2,) * 8) == TRANSLATION_INVARIANT
    assert classify((0.3, 0.3 + 1e-9)) == TRANSLATION_INVARIANT
    assert classify((0.3, 0.31)) == WEAKLY_PERIODIC


@pytest.mark.parametrize("lam, count", [(3.0, 1), (5.0, 3), (0.5, 1), (50.0, 3)])
def test_i2_counts(lam, count):
    recs = solve_I2(lam)
    assert len(recs) == count
    assert sum(r.symmetric for r in recs) == 1
    for r in recs:
        assert r.residual < 1e-10
        assert np.max(np.abs(bl.i2_system_residual(*r.coordinates, lam))) < 1e-10


def test_i2_asymmetric_pair_is_swapped_and_weakly_periodic():
    recs = [r for r in solve_I2(5.0) if not r.symmetric]
    (s1, t1), (s2, t2) = (r.coordinates for r in recs)
    assert s1 == pytest.approx(t2, abs=1e-10) and t1 == pytest.approx(s2, abs=1e-10)
    assert all(r.classification == WEAKLY_PERIODIC for r in recs)
    # on I2 the asymmetric roots satisfy s + t = 1 and s t = 1 / lam
    assert s1 + t1 == pytest.approx(1.0, abs=1e-12)
    assert s1 * t1 == pytest.approx(0.2, abs=1e-12)


def test_i2_at_fold_reports_tangency():
    recs = solve_I2(4.0)
    assert len(recs) == 2
    assert [r.tangency for r in recs] == [False, True]
    for r in recs:
        np.testing.assert_allclose(r.coordinates, (0.5, 0.5), atol=1e-9)


@pytest.mark.parametrize("lam", [1.0, 2.0, 100.0, 1e3])
def test_i3_unique_symmetric(lam):
    (r,) = solve_I3(lam)
    s, t = r.coordinates
    assert s == pytest.approx(t, abs=1e-9)
    assert (1 - t) / t**3 == pytest.approx(lam, rel=1e-9)


@pytest.mark.parametrize("k, lam, x", [(2, 4.0, 0.5), (3, 8.0, 0.5), (2, 1.0, 0.6823278038280193)])
def test_i4_examples(k, lam, x):
    (r,) = solve_I4(lam, k)
    np.testing.assert_allclose(r.coordinates, (x, x), atol=1e-9)


def test_i4_needs_k_at_least_two():
    with pytest.raises(ValueError):
        solve_I4(1.0, 1)


@pytest.mark.parametrize("graph, lam, count", [("hinge", 2.0, 1), ("hinge", 3.0, 3), ("wand", 2.0, 3), ("wand", 0.5, 1), ("wand", 0.05, 1)])
def test_ti3_counts(graph, lam, count):
    recs = solve_TI3(graph, 2, lam)
    assert len(recs) == count
    assert sum(r.symmetric for r in recs) == 1
    assert all(r.classification == TRANSLATION_INVARIANT for r in recs)


def test_ti3_wand_asymmetric_roots_are_reciprocal():
    # for k = 2 the asymmetric wand and hinge roots satisfy z1 z2 = 1
    for graph in ("wand", "hinge"):
        recs = [r for r in solve_TI3(graph, 2, 5.0) if not r.symmetric]
        assert len(recs) == 2
        for r in recs:
            assert r.coordinates[0] * r.coordinates[1] == pytest.approx(1.0, rel=1e-9)


@pytest.mark.parametrize("graph, lam", [("hinge", 2.25), ("wand", 1.0)])
def test_ti3_exact_threshold_counts_once(graph, lam):
    recs = solve_TI3(graph, 2, lam)
    assert len(recs) == 1
    np.testing.assert_allclose(recs[0].coordinates, (1.0, 1.0), atol=1e-6)


def test_ti3_rejects_two_state_graph():
    with pytest.raises(ValueError):
        solve_TI3("pipe", 2, 1.0)


def test_ti2_record():
    (r,) = solve_TI2(2, 1.0)
    assert r.coordinates[0] == pytest.approx(0.46557123187676, abs=1e-12)


@pytest.mark.parametrize("lam", [0.0, -1.0, math.inf, math.nan])
def test_bad_activity(lam):
    with pytest.raises(ValueError):
        solve_I2(lam)


def test_dispatch():
    assert len(solve("I2", 5.0)) == 3
    assert len(solve(System.TI3_WAND, 2.0)) == 3
    assert len(solve("i4", 4.0, k=3)) == 1
    with pytest.raises(ValueError):
        solve("I3", 1.0, k=3)
    with pytest.raises(ValueError):
        System.parse("I9")


def test_merge_points():
    pts = np.array([[0.1, 0.2], [0.1 + 1e-10, 0.2], [0.5, 0.5]])
    np.testing.assert_array_equal(merge_points(pts), pts[[0, 2]])


# -- independent grid-scan oracle -------------------------------------------

@pytest.mark.parametrize("lam", [1.0, 3.9, 4.1, 10.0])
def test_grid_scan_agrees_i2(lam):
    F = lambda s, t: bl.i2_system_residual(s, t, lam)
    assert grid_scan_count(F, *UNIT) == len(solve_I2(lam))


@pytest.mark.parametrize("lam", [0.1, 10.0, 1000.0])
def test_grid_scan_agrees_i3(lam):
    F = lambda s, t: bl.i3_system_residual(s, t, lam)
    assert grid_scan_count(F, *UNIT) == len(solve_I3(lam)) == 1


@pytest.mark.parametrize("k, lam", [(2, 0.5), (3, 20.0), (4, 4.0)])
def test_grid_scan_agrees_i4(k, lam):
    F = lambda x, y: bl.i4_system_residual(x, y, k, lam)
    assert grid_scan_count(F, *UNIT) == len(solve_I4(lam, k)) == 1


@pytest.mark.parametrize("graph, lam", [(HINGE, 2.0), (HINGE, 3.0), (WAND, 0.5), (WAND, 2.0)])
def test_grid_scan_agrees_ti3(graph, lam):
    top = math.log(ti3_box(graph, 2, lam))
    F = lambda a, b: bl.ti3_residual(np.exp(a), np.exp(b), graph, 2, lam)
    assert grid_scan_count(F, (top - 30,) * 2, (top,) * 2) == len(solve_TI3(graph, 2, lam))


# -- critical activities and sweeps ------------------------------------------

def test_critical_i2():
    c = critical_lambda("I2", 2, 2)
    assert abs(c.lam - 4.0) < 1e-10
    assert abs(c.argument - 0.5) < 1e-8


def test_critical_not_found():
    with pytest.raises(CriticalNotFound):
        critical_lambda("I3")
    with pytest.raises(CriticalNotFound):
        critical_lambda("ti3-hinge", lam_min=0.1, lam_max=2.0)


def test_sweep_i2():
    report = sweep("I2", 2, 2, 3.0, 5.0, 41)
    for lam, count in zip(report.lams, report.counts):
        if lam < 4 - 1e-9:
            assert count == 1
        elif lam > 4 + 1e-9:
            assert count == 3
    assert all(abs(c.lam - 4.0) < 0.05e-3 + 1e-9 for c in report.criticals)


def test_sweep_wand_transition_and_piecewise_constant():
    report = sweep("ti3-wand", 2, 2, 0.5, 2.0, 16, workers=4)
    (c,) = report.criticals
    assert c.counts == (1, 3)
    assert abs(c.lam - 1.0) < 0.1 * 1e-3
    fine = sweep("ti3-wand", 2, 2, 0.5, 2.0, 151)
    assert [n for lam, n in zip(fine.lams, fine.counts) if lam < c.lam] == [1] * sum(lam < c.lam for lam in fine.lams)
    assert all(n == 3 for lam, n in zip(fine.lams, fine.counts) if lam > c.lam)


def test_sweep_i3_constant():
    report = sweep("I3", 2, 2, 0.5, 50.0, 6)
    assert report.counts == [1] * 6 and report.criticals == []


def test_sweep_validation():
    with pytest.raises(ValueError):
        sweep("I2", 2, 2, 0.0, 1.0, 5)
    with pytest.raises(ValueError):
        sweep("I2", 2, 2, 1.0, 2.0, 1)


def test_sweep_records_errors_per_point():
    report = sweep("I3", 3, 3, 1.0, 2.0, 3)
    assert report.counts == [None] * 3
    assert all(p.error for p in report.points)


# -- general (k, i) on invariant sets and the oracle chain --------------------

@pytest.mark.parametrize("k, i, lam", [(2, 1, 2.0), (2, 1, 30.0), (3, 1, 2.0), (3, 1, 30.0), (3, 2, 20.0)])
def test_invariant_solutions_pass_oracle(k, i, lam):
    recs = solve_invariant("I2", k, i, lam)
    assert len(recs) % 2 == 1
    assert sum(r.classification == TRANSLATION_INVARIANT for r in recs) == 1
    for r in recs:
        assert oracle_residual(r) < 1e-8


def test_invariant_i2_matches_square_root_form():
    square_root = sorted((s * s, t * t) for s, t in (r.coordinates for r in solve_I2(6.0)))
    general = sorted(r.coordinates for r in solve_invariant("I2", 2, 2, 6.0))
    np.testing.assert_allclose(general, square_root, atol=1e-10)


def test_invariant_i1_is_the_ti_law():
    (r,) = solve_invariant("I1", 3, 2, 2.0)
    assert r.coordinates[0] == pytest.approx(bl.ti2_fixed_point(3, 2.0), abs=1e-12)


def test_oracle_chain_detects_perturbation():
    for r in solve_I2(5.0) + solve_TI3("hinge", 2, 3.0):
        assert oracle_residual(r) < 1e-8
        assert oracle_residual(r, scale=1.01) > 1e-4


def test_oracle_chain_k3_i4_records():
    (r,) = solve_I4(20.0, 3)
    assert oracle_residual(r) < 1e-8
