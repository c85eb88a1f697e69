import numpy as np
import pytest

from sgmca.linalg import DimensionError
from sgmca.procrustes import (
    FeasibilityError,
    FeasibleTuple,
    ProcrustesInstance,
    compute_h,
    objective,
    refine,
    solve_related,
)

from oracles import (
    envelope_2x2,
    o2_grid,
    nuclear_2x2,
    random_semi_orthogonal,
    trace_objective_loops,
)


def random_instance(rng, m, rows_l, rows_r, cols=None):
    cols = cols or [(2, 2)] * m
    ls = [rng.normal(size=(rows_l, c[0])) for c in cols]
    rs = [rng.normal(size=(rows_r, c[1])) for c in cols]
    w = rng.random(m)
    return ProcrustesInstance(ls, rs, w / w.sum())


def random_tuple(rng, inst):
    q0 = random_semi_orthogonal(rng, inst.rows_l, inst.rows_r)
    qi = [random_semi_orthogonal(rng, l.shape[1], r.shape[1]) for l, r in zip(inst.l, inst.r)]
    return FeasibleTuple(q0, qi)


def test_instance_validation():
    with pytest.raises(ValueError, match="sum to 1"):
        ProcrustesInstance([np.eye(1)], [np.eye(1)], [0.5])
    with pytest.raises(ValueError):
        ProcrustesInstance([np.eye(1)], [np.eye(1)], [-1.0])
    with pytest.raises(DimensionError):
        ProcrustesInstance([np.ones((3, 1))], [np.ones((2, 1))], [1.0])
    with pytest.raises(DimensionError):
        ProcrustesInstance([np.ones((1, 3))], [np.ones((2, 2))], [1.0])


def test_objective_examples(rng):
    one = np.eye(1)
    inst = ProcrustesInstance([one], [one], [1.0])
    assert objective(FeasibleTuple(one, [one]), inst) == 1.0
    inst = random_instance(rng, 2, 2, 2)
    zero = ProcrustesInstance([np.zeros((2, 2))] * 2, inst.r, inst.weights)
    assert objective(random_tuple(rng, zero), zero) == 0.0
    tup = random_tuple(rng, inst)
    ref = trace_objective_loops(tup.q0, tup.qi, inst.l, inst.r, inst.weights)
    assert objective(tup, inst) == pytest.approx(ref, abs=1e-12)


def test_compute_h_examples(rng):
    I2 = np.eye(2)
    inst = ProcrustesInstance([I2], [I2], [1.0])
    np.testing.assert_array_equal(compute_h(FeasibleTuple(I2, [I2]), inst), I2)
    L, R = rng.normal(size=(2, 2)), rng.normal(size=(3, 2))
    q = random_semi_orthogonal(rng, 2, 2)
    q0 = random_semi_orthogonal(rng, 2, 3)
    one = compute_h(FeasibleTuple(q0, [q]), ProcrustesInstance([L], [R], [1.0]))
    two = compute_h(FeasibleTuple(q0, [q, q]), ProcrustesInstance([L, L], [R, R], [0.5, 0.5]))
    np.testing.assert_allclose(two, one, atol=1e-15)
    inst = random_instance(rng, 2, 2, 3)
    tup = random_tuple(rng, inst)
    H = np.zeros((3, 2))
    for w, qi, li, ri in zip(inst.weights, tup.qi, inst.l, inst.r):
        for a in range(3):
            for b in range(2):
                H[a, b] += w * sum(ri[a, c] * qi[e, c] * li[b, e] for c in range(2) for e in range(2))
    np.testing.assert_allclose(compute_h(tup, inst), H, atol=1e-12)


def test_solve_related_scalar():
    inst = ProcrustesInstance([np.array([[2.0]])], [np.array([[3.0]])], [1.0])
    tup = solve_related(inst)
    np.testing.assert_array_equal(tup.q0, [[1.0]])
    np.testing.assert_array_equal(tup.qi[0], [[1.0]])
    np.testing.assert_array_equal(compute_h(tup, inst), [[6.0]])
    assert objective(tup, inst) == 6.0


def test_solve_related_diagonal_m1_matches_grid_search():
    inst = ProcrustesInstance([np.diag([2.0, 1.0])], [np.diag([3.0, 1.0])], [1.0])
    tup = solve_related(inst)
    assert objective(tup, inst) == pytest.approx(7.0, abs=1e-12)

    # dense grid over O(2) x O(2) at 1e-3 rad, both reflection bits on each factor
    _, rot, ref = o2_grid(1e-3)
    grid = np.concatenate([rot, ref])
    L, R = inst.l[0], inst.r[0]
    M = np.einsum("ji,tjk,kl->til", L, grid, R).reshape(len(grid), 4)
    Q1 = grid.reshape(len(grid), 4)
    best = -np.inf
    for start in range(0, len(M), 2000):
        best = max(best, (M[start : start + 2000] @ Q1.T).max())
    assert best == pytest.approx(7.0, abs=1e-5)
    assert best <= 7.0 + 1e-12


def test_solve_related_duplicate_terms(rng):
    L, R = rng.normal(size=(2, 3)), rng.normal(size=(4, 3))
    single = solve_related(ProcrustesInstance([L], [R], [1.0]))
    double = solve_related(ProcrustesInstance([L, L], [R, R], [0.3, 0.7]))
    np.testing.assert_allclose(double.q0, single.q0, atol=1e-12)
    for q in double.qi:
        np.testing.assert_allclose(q, single.qi[0], atol=1e-12)


def test_solve_related_rejects_infeasible_shapes():
    with pytest.raises(DimensionError):
        solve_related(ProcrustesInstance([np.ones((3, 2))], [np.ones((2, 2))], [1.0]))


@pytest.mark.parametrize("m", [1, 2, 3])
def test_solve_related_feasible_and_q0_optimal(rng, m):
    for _ in range(20):
        rows_l = int(rng.integers(1, 4))
        rows_r = rows_l + int(rng.integers(0, 3))
        cols = [(c, c + int(rng.integers(0, 3))) for c in rng.integers(1, 4, size=m)]
        inst = random_instance(rng, m, rows_l, rows_r, cols)
        tup = solve_related(inst).check(inst)
        # for fixed Q_i the Q_0 step attains the sum of singular values of H
        H = compute_h(tup, inst)
        assert objective(tup, inst) == pytest.approx(np.linalg.svd(H, compute_uv=False).sum(), abs=1e-10)


def test_m1_exactness(rng):
    for _ in range(30):
        rows_l = int(rng.integers(1, 5))
        rows_r = rows_l + int(rng.integers(0, 3))
        c = int(rng.integers(1, 5))
        L, R = rng.normal(size=(rows_l, c)), rng.normal(size=(rows_r, c + int(rng.integers(0, 3))))
        inst = ProcrustesInstance([L], [R], [1.0])
        sl, sr = np.linalg.svd(L, compute_uv=False), np.linalg.svd(R, compute_uv=False)
        j = min(len(sl), len(sr))
        bound = np.sum(sl[:j] * sr[:j])
        tup = solve_related(inst)
        assert objective(tup, inst) == pytest.approx(bound, abs=1e-10)
        res = refine(tup, inst)
        assert res.flips == 0
        assert res.tuple is tup


def test_refine_scalar_flip():
    one = np.eye(1)
    inst = ProcrustesInstance([one], [one], [1.0])
    res = refine(FeasibleTuple(one, [-one]), inst)
    np.testing.assert_array_equal(res.tuple.qi[0], [[1.0]])
    assert res.flips == 1
    assert res.objectives[0] == -1.0 and res.objectives[-1] == 1.0


def test_refine_rejects_infeasible():
    one = np.eye(1)
    inst = ProcrustesInstance([one], [one], [1.0])
    with pytest.raises(FeasibilityError):
        refine(FeasibleTuple(2 * one, [one]), inst)
    with pytest.raises(ValueError):
        refine(FeasibleTuple(one, [one]), inst, max_outer_iters=0)


def test_refine_monotone_and_bounded(rng):
    for _ in range(100):
        inst = random_instance(rng, 2, 2, 2)
        start = random_tuple(rng, inst)
        res = refine(start, inst)
        res.tuple.check(inst)
        hist = np.array(res.objectives)
        assert np.all(np.diff(hist) >= -1e-10)
        assert hist[-1] == pytest.approx(objective(res.tuple, inst), abs=1e-12)
        assert hist[-1] <= envelope_2x2(inst.l, inst.r, inst.weights) + 1e-6


def test_objective_upper_bound(rng):
    for _ in range(50):
        m = int(rng.integers(1, 4))
        inst = random_instance(rng, m, 2, 3, [(2, 3)] * m)
        bound = 0.0
        for w, l, r in zip(inst.weights, inst.l, inst.r):
            sl, sr = np.linalg.svd(l, compute_uv=False), np.linalg.svd(r, compute_uv=False)
            j = min(len(sl), len(sr))
            bound += w * np.sum(sl[:j] * sr[:j])
        for tup in (random_tuple(rng, inst), refine(solve_related(inst), inst).tuple):
            assert objective(tup, inst) <= bound + 1e-10


def test_nuclear_oracle_self_check(rng):
    M = rng.normal(size=(10, 2, 2))
    np.testing.assert_allclose(nuclear_2x2(M), np.linalg.svd(M, compute_uv=False).sum(axis=1), rtol=1e-12)
