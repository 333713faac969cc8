import numpy as np
import pytest

from regid.errors import LengthMismatch
from regid.hankel import (
    AdmmSettings,
    GAMMA_GRID,
    fit_hankel_estimate,
    hankel,
    hankel_adjoint,
    hankel_multiplicities,
    nuclear_norm,
    solve_hankel_rels,
    svt,
    tune_gamma_cv,
    tune_gamma_oracle,
)
from regid.kernel_estimator import build_fir_regression


def _pole_mix_g(rng, m, lo=-0.9, hi=0.9, n_poles=3):
    poles = rng.uniform(lo, hi, n_poles)
    res = rng.standard_normal(n_poles)
    t = np.arange(1, m + 1)
    return sum(r * p ** (t - 1) for r, p in zip(res, poles))


def _noisy_problem(rng, N, m, noise=0.1):
    g = _pole_mix_g(rng, m)
    u = rng.standard_normal(N)
    prob = build_fir_regression(u, np.zeros(N), m)
    y0 = prob.Phi @ g
    prob.Y = y0 + noise * np.std(y0) * rng.standard_normal(N)
    return prob, g, u


def _objective(prob, g, gamma, p):
    r = prob.Y - prob.Phi @ g
    return float(r @ r) + gamma * nuclear_norm(hankel(g, p))


class TestHankelMap:
    def test_small_matrix(self):
        np.testing.assert_array_equal(
            hankel([1.0, 2.0, 3.0], 2), [[1.0, 2.0], [2.0, 3.0]]
        )

    def test_zero_response(self):
        assert not np.any(hankel(np.zeros(5), 3))

    def test_length_must_match_block(self):
        with pytest.raises(LengthMismatch):
            hankel([1.0, 2.0], 2)

    def test_adjoint_small_matrix(self):
        got = hankel_adjoint(np.array([[1.0, 2.0], [3.0, 4.0]]))
        np.testing.assert_array_equal(got, [1.0, 5.0, 4.0])

    def test_adjoint_pairing(self):
        rng = np.random.default_rng(21)
        p = 7
        for _ in range(100):
            g = rng.standard_normal(2 * p - 1)
            M = rng.standard_normal((p, p))
            lhs = float(np.sum(hankel(g, p) * M))
            rhs = float(g @ hankel_adjoint(M))
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_multiplicities_bathtub(self):
        np.testing.assert_array_equal(
            hankel_multiplicities(7), [1, 2, 3, 4, 3, 2, 1]
        )
        # anti-diagonal counts are exactly the adjoint applied to all-ones
        p = 13
        np.testing.assert_array_equal(
            hankel_multiplicities(2 * p - 1), hankel_adjoint(np.ones((p, p)))
        )


class TestNuclearNorm:
    def test_identity(self):
        assert nuclear_norm(np.eye(2)) == pytest.approx(2.0, rel=1e-14)

    def test_diagonal(self):
        assert nuclear_norm(np.diag([3.0, 4.0])) == pytest.approx(7.0, rel=1e-14)

    def test_reversal_invariance(self):
        # geometric response vs its reversal: same spectrum of the Hankel block
        a, m = 0.5, 3
        t = np.arange(1, m + 1)
        g = a ** (t - 1)
        h = a ** (m - 1) * (1 / a) ** (t - 1)
        lhs = nuclear_norm(hankel(g, 2))
        rhs = nuclear_norm(hankel(h, 2))
        assert lhs == pytest.approx(rhs, rel=1e-12)
        rng = np.random.default_rng(33)
        for _ in range(10):
            g = rng.standard_normal(9)
            assert nuclear_norm(hankel(g, 5)) == pytest.approx(
                nuclear_norm(hankel(g[::-1], 5)), rel=1e-12
            )


class TestSvt:
    def test_hand_diagonal(self):
        np.testing.assert_allclose(
            svt(np.diag([3.0, 1.0]), 2.0), np.diag([1.0, 0.0]), atol=1e-14
        )

    def test_zero_threshold_identity(self):
        M = np.arange(6.0).reshape(2, 3)
        np.testing.assert_allclose(svt(M, 0.0), M, atol=1e-14)

    def test_large_threshold_annihilates(self):
        M = np.array([[1.0, 2.0], [0.5, -1.0]])
        smax = np.linalg.svd(M, compute_uv=False)[0]
        assert not np.any(svt(M, smax))

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            svt(np.eye(2), -0.1)

    def test_prox_optimality_under_perturbations(self):
        rng = np.random.default_rng(41)
        tau = 0.7
        for _ in range(10):
            M = rng.standard_normal((5, 5))
            Z = svt(M, tau)
            f0 = 0.5 * np.sum((Z - M) ** 2) + tau * nuclear_norm(Z)
            for _ in range(1000):
                D = rng.standard_normal((5, 5))
                D *= rng.uniform(0, 1e-3) / np.linalg.norm(D)
                f = 0.5 * np.sum((Z + D - M) ** 2) + tau * nuclear_norm(Z + D)
                assert f >= f0 - 1e-12


class TestAdmmSolve:
    def test_zero_gamma_is_least_squares(self):
        rng = np.random.default_rng(55)
        prob, g_true, _ = _noisy_problem(rng, 80, 13)
        g = solve_hankel_rels(prob, 0.0, 7)
        ref = np.linalg.lstsq(prob.Phi, prob.Y, rcond=None)[0]
        np.testing.assert_allclose(g, ref, rtol=1e-8, atol=1e-10)

    def test_huge_gamma_shrinks_to_zero(self):
        rng = np.random.default_rng(56)
        prob, _, _ = _noisy_problem(rng, 80, 13)
        g = solve_hankel_rels(prob, 1e9, 7)
        ls = np.linalg.lstsq(prob.Phi, prob.Y, rcond=None)[0]
        assert np.linalg.norm(g) < 1e-6 * np.linalg.norm(ls)

    def test_geometry_mismatch(self):
        prob, _, _ = _noisy_problem(np.random.default_rng(0), 40, 13)
        with pytest.raises(LengthMismatch):
            solve_hankel_rels(prob, 1.0, 6)

    def test_negative_gamma_rejected(self):
        prob, _, _ = _noisy_problem(np.random.default_rng(0), 40, 13)
        with pytest.raises(ValueError):
            solve_hankel_rels(prob, -1.0, 7)

    def test_near_optimality_against_candidates(self):
        # convex objective: the solve must beat the truth, the LS solution,
        # and local perturbations of itself, up to a small data-scaled slack
        gamma, p = 5.0, 11
        for seed in range(10):
            rng = np.random.default_rng(100 + seed)
            prob, g_true, _ = _noisy_problem(rng, 100, 21)
            g_hat = solve_hankel_rels(prob, gamma, p)
            slack = 1e-6 * (1.0 + float(prob.Y @ prob.Y))
            f_hat = _objective(prob, g_hat, gamma, p)
            assert f_hat <= _objective(prob, g_true, gamma, p) + slack
            g_ls = np.linalg.lstsq(prob.Phi, prob.Y, rcond=None)[0]
            assert f_hat <= _objective(prob, g_ls, gamma, p) + slack
            for _ in range(100):
                d = rng.standard_normal(21)
                d *= rng.uniform(0, 1e-3) / np.linalg.norm(d)
                assert f_hat <= _objective(prob, g_hat + d, gamma, p) + slack

    def test_objective_monotone_after_burn_in(self):
        for seed in (200, 201, 202):
            rng = np.random.default_rng(seed)
            prob, _, _ = _noisy_problem(rng, 100, 21)
            _, info = solve_hankel_rels(
                prob, 5.0, 11, settings=AdmmSettings(max_iters=300),
                full_output=True, trace=True,
            )
            fs = info.objectives
            assert fs.size >= 50
            diffs = fs[6:] - fs[5:-1]
            assert np.max(diffs) <= 1e-10 * (1.0 + np.max(np.abs(fs)))

    def test_settings_validation(self):
        with pytest.raises(ValueError):
            AdmmSettings(rho=0.0)
        with pytest.raises(ValueError):
            AdmmSettings(tol_primal=-1.0)
        with pytest.raises(ValueError):
            AdmmSettings(tol_rel=0.0)


class TestGammaCv:
    def test_exact_grid_point_wins(self):
        # gamma = 0 reproduces least squares exactly; on noiseless data its
        # validation error is numerically zero and nothing can beat it
        rng = np.random.default_rng(61)
        m = 13
        g = _pole_mix_g(rng, m, lo=-0.5, hi=0.5)
        u = rng.standard_normal(200)
        prob = build_fir_regression(u, np.zeros(200), m)
        y = prob.Phi @ g
        res = tune_gamma_cv(u, y, 7, grid=[0.0, 1.0, 10.0])
        assert res.gamma == 0.0

    def test_all_tied_takes_smallest(self):
        res = tune_gamma_cv(np.zeros(40), np.zeros(40), 7)
        assert res.gamma == pytest.approx(GAMMA_GRID[0], rel=1e-12)
        assert np.all(res.scores == res.scores[0])

    def test_noiseless_selects_lowest_decade(self):
        picked = []
        for seed in range(10):
            rng = np.random.default_rng(300 + seed)
            m = 21
            g = _pole_mix_g(rng, m, lo=-0.5, hi=0.5)
            u = rng.standard_normal(400)
            prob = build_fir_regression(u, np.zeros(400), m)
            res = tune_gamma_cv(u, prob.Phi @ g, 11)
            picked.append(res.gamma)
        in_lowest = sum(g <= 1e-4 * (1 + 1e-9) for g in picked)
        assert in_lowest >= 9

    def test_too_short_to_split(self):
        with pytest.raises(LengthMismatch):
            tune_gamma_cv(np.ones(3), np.ones(3), 2)


class TestGammaOracle:
    def test_single_grid_point(self):
        rng = np.random.default_rng(71)
        prob, g_true, u = _noisy_problem(rng, 60, 9)
        res = tune_gamma_oracle(u, prob.Y, 5, g_true, grid=[0.5])
        assert res.gamma == 0.5

    def test_grid_permutation_invariant(self):
        rng = np.random.default_rng(72)
        prob, g_true, u = _noisy_problem(rng, 60, 9)
        grid = [1e-3, 0.1, 1.0, 10.0, 100.0]
        a = tune_gamma_oracle(u, prob.Y, 5, g_true, grid=grid)
        b = tune_gamma_oracle(u, prob.Y, 5, g_true, grid=grid[::-1])
        assert a.gamma == b.gamma
        np.testing.assert_array_equal(a.g_hat, b.g_hat)


class TestDriver:
    def test_fixed_gamma(self):
        rng = np.random.default_rng(81)
        prob, _, u = _noisy_problem(rng, 60, 9)
        res = fit_hankel_estimate(u, prob.Y, p=5, gamma=2.0)
        assert res.gamma == 2.0
        assert res.g_hat.shape == (9,)

    def test_oracle_requires_truth(self):
        with pytest.raises(ValueError):
            fit_hankel_estimate(np.ones(10), np.ones(10), p=3, gamma="oracle")
