import numpy as np
import pytest

from cohdesign.dmcm import pg_step
from cohdesign.dmcmp import (AmConfig, AmSchedule, Dictionary, am_solve, am_update_M, am_update_P,
                             dmcmp_continuation, initial_pair, objective_F)
from cohdesign.errors import RankDeficient, ShapeMismatch
from cohdesign.matcore import coherence_of, mutual_coherence, normalize_columns
from cohdesign.smoothing import SmoothingState, f_rho


def cfg(rho=0.5, beta=2.0, K=15):
    return AmConfig(beta, SmoothingState(rho), K)


def test_dictionary_validation():
    with pytest.raises(RankDeficient):
        Dictionary(np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]))
    with pytest.raises(ShapeMismatch):
        Dictionary(np.ones((3, 2)))


def test_dictionary_pinv(rng):
    D = Dictionary.gaussian(5, 9, rng)
    np.testing.assert_allclose(D.pinv, np.linalg.pinv(D.matrix), atol=1e-12)


def test_objective_zero_at_orthonormal_consistent_pair():
    D = Dictionary(np.array([[2.0, 0.0], [0.0, 1.0]]))
    M = np.eye(2)
    P = M @ np.linalg.inv(D.matrix)
    assert objective_F(M, P, D, cfg()) == pytest.approx(0.0, abs=1e-15)


def test_objective_with_zero_projection(rng):
    D = Dictionary.gaussian(4, 10, rng)
    M = normalize_columns(rng.standard_normal((3, 10)))
    P = np.zeros((3, 4))
    c = cfg(0.2, 0.7)
    assert objective_F(M, P, D, c) == pytest.approx(f_rho(M, 0.2) + 10 / (2 * 0.7), rel=1e-12)


def test_objective_doubling_beta_halves_coupling(rng):
    D = Dictionary.gaussian(4, 10, rng)
    M = normalize_columns(rng.standard_normal((3, 10)))
    P = rng.standard_normal((3, 4))
    base = f_rho(M, 0.3)
    c1 = objective_F(M, P, D, cfg(0.3, 1.0)) - base
    c2 = objective_F(M, P, D, cfg(0.3, 2.0)) - base
    assert c2 == pytest.approx(c1 / 2, rel=1e-12)


def test_objective_shape_mismatch(rng):
    D = Dictionary.gaussian(4, 10, rng)
    with pytest.raises(ShapeMismatch):
        objective_F(np.ones((3, 10)) / np.sqrt(3), np.zeros((3, 5)), D, cfg())


def test_update_M_fixed_point():
    D = Dictionary(np.array([[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.3, 2.0]]))
    M = np.eye(3)
    P = M @ np.linalg.inv(D.matrix)
    np.testing.assert_allclose(am_update_M(M, P, D, cfg()), M, atol=1e-15)


def test_update_M_large_beta_is_pg_step(rng):
    D = Dictionary.gaussian(6, 20, rng)
    M = normalize_columns(rng.standard_normal((4, 20)))
    P = rng.standard_normal((4, 6))
    out = am_update_M(M, P, D, cfg(0.3, 1e12))
    np.testing.assert_allclose(out, pg_step(M, SmoothingState(0.3)), atol=1e-9)


def test_update_M_scalar_example():
    D = Dictionary(np.array([[1.0, 0.5]]))
    M = np.array([[1.0, 1.0]])
    P = np.array([[1.0]])
    c = AmConfig(2.0, SmoothingState(1.0))
    a, b = 1 / 0.99, 0.5
    # gradient of f_rho at M is (1, 1): V* has off-diagonals 0.5
    anchor = (a * M + b * (P @ D.matrix) - np.array([[1.0, 1.0]])) / (a + b)
    assert np.all(anchor > 0)
    np.testing.assert_allclose(am_update_M(M, P, D, c), np.sign(anchor), atol=1e-15)


def test_update_P_recovers_exact_factor(rng):
    D = Dictionary.gaussian(8, 20, rng)
    P0 = rng.standard_normal((5, 8))
    np.testing.assert_allclose(am_update_P(P0 @ D.matrix, D), P0, atol=1e-10)


def test_update_P_orthonormal_rows(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((12, 12)))
    D = Dictionary(Q[:5])
    M = normalize_columns(rng.standard_normal((3, 12)))
    np.testing.assert_allclose(am_update_P(M, D), M @ D.matrix.T, atol=1e-12)


def test_update_P_normal_equations(rng):
    for _ in range(5):
        D = Dictionary.gaussian(10, 30, rng)
        M = normalize_columns(rng.standard_normal((6, 30)))
        P = am_update_P(M, D)
        assert np.abs((M - P @ D.matrix) @ D.matrix.T).max() <= 1e-8


def test_am_solve_fixed_point():
    D = Dictionary(np.array([[1.0, 0.2, 0.0], [0.0, 1.0, 0.4], [0.3, 0.0, 1.0]]))
    M0 = np.eye(3)
    P0 = M0 @ D.pinv
    M, P, trace = am_solve(M0, P0, D, cfg())
    np.testing.assert_allclose(M, M0, atol=1e-10)
    np.testing.assert_allclose(P, P0, atol=1e-12)
    assert len(trace) == 15


def test_am_solve_single_iteration(rng):
    D = Dictionary.gaussian(8, 20, rng)
    M0, P0 = initial_pair(D, 4, 1)
    M, P, trace = am_solve(M0, P0, D, cfg(K=1))
    assert len(trace) == 1
    P1 = am_update_P(M0, D)
    np.testing.assert_allclose(P, P1, atol=1e-14)
    np.testing.assert_allclose(M, am_update_M(M0, P1, D, cfg(K=1)), atol=1e-14)


@pytest.mark.parametrize("seed", range(3))
def test_am_solve_descent(seed):
    D = Dictionary.gaussian(30, 60, 100 + seed)
    M0, P0 = initial_pair(D, 6, seed)
    c = cfg(0.5, 2.0, 15)
    M, P, trace = am_solve(M0, P0, D, c)
    assert len(trace) == 15
    before, after = trace.column("objective_before"), trace.column("objective")
    assert np.all(after <= before + 1e-9)
    assert np.all(before - after >= trace.column("descent_bound") - 1e-9)
    # the chain links: each step starts where the previous ended
    np.testing.assert_array_equal(before[1:], after[:-1])
    assert after[-1] == pytest.approx(objective_F(M, P, D, c), rel=1e-12)
    assert trace.column("col_dev").max() <= 1e-12


def test_schedule_params():
    ps = AmSchedule(0.5, 2.0, 1.2, 3, 1e-6, 1e-6, 15).params()
    np.testing.assert_allclose(ps, [(0.5, 2.0), (0.41667, 1.66667), (0.34722, 1.38889)], atol=5e-6)


def test_continuation_single_round(rng):
    D = Dictionary.gaussian(10, 25, rng)
    sched = AmSchedule(0.5, 2.0, 1.2, 1, 1e-2, 1e-2, 15)
    M, P, trace = dmcmp_continuation(D, 5, sched, seed=3)
    M0, P0 = initial_pair(D, 5, 3)
    Mr, Pr, tr = am_solve(M0, P0, D, cfg(0.5, 2.0, 15))
    np.testing.assert_array_equal(M, Mr)
    np.testing.assert_array_equal(P, Pr)
    assert trace.records == tr.records


def test_continuation_determinism():
    D = Dictionary.gaussian(10, 25, 7)
    sched = AmSchedule(outer_iters=30)
    a = dmcmp_continuation(D, 5, sched, seed=3)
    b = dmcmp_continuation(D, 5, sched, seed=3)
    assert a[0].tobytes() == b[0].tobytes() and a[1].tobytes() == b[1].tobytes()
    assert a[2].records == b[2].records


def test_continuation_coupling_gap_10x120():
    D = Dictionary.gaussian(60, 120, 11)
    M, P, trace = dmcmp_continuation(D, 10, seed=5)
    mu_pd = coherence_of(P @ D.matrix)
    assert abs(mu_pd - mutual_coherence(M)) <= 0.02
    assert trace[-1].gap == pytest.approx(np.linalg.norm(M - P @ D.matrix), rel=1e-6)
    assert np.all(np.isfinite(trace.column("objective")))
