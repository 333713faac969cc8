import itertools

import numpy as np
import pytest

import regid.atomic
from regid.atomic import (
    ATOM_GAMMA_GRID,
    assemble_impulse_response,
    atom_output_columns,
    atom_samples,
    build_dictionary,
    fit_atomic_estimate,
    solve_lasso,
    tune_gamma_kfold,
    tune_gamma_oracle,
)
from regid.errors import LengthMismatch


def _pole_mix_g(rng, m, lo=-0.9, hi=0.9, n_poles=3):
    poles = rng.uniform(lo, hi, n_poles)
    res = rng.standard_normal(n_poles)
    t = np.arange(1, m + 1)
    return sum(r * p ** (t - 1) for r, p in zip(res, poles))


def _benchmark_problem(seed=5, N=300, noise=0.3):
    rng = np.random.default_rng(seed)
    gt = _pole_mix_g(rng, 500)
    u = rng.standard_normal(N)
    y0 = np.convolve(u, gt)[:N]
    y = y0 + noise * np.std(y0) * rng.standard_normal(N)
    return u, y, gt


def _objective(H, Y, w, gamma, a):
    r = Y - H @ a
    return float(r @ r) + gamma * float(w @ np.abs(a))


def _enumerate_optimum(H, Y, gamma, w):
    # every sign pattern, solving the stationarity system where the signs
    # come out self-consistent; feasible on a handful of atoms only
    p = H.shape[1]
    best = (float(Y @ Y), np.zeros(p))
    for signs in itertools.product((-1, 0, 1), repeat=p):
        s = np.array(signs, dtype=float)
        A = np.flatnonzero(s)
        if A.size == 0:
            continue
        HA = H[:, A]
        try:
            aA = np.linalg.solve(
                HA.T @ HA, HA.T @ Y - 0.5 * gamma * (w[A] * s[A])
            )
        except np.linalg.LinAlgError:
            continue
        if np.any(np.sign(aA) != s[A]):
            continue
        a = np.zeros(p)
        a[A] = aA
        f = _objective(H, Y, w, gamma, a)
        if f < best[0]:
            best = (f, a)
    return best


class TestDictionary:
    def test_atom_count(self):
        d = build_dictionary(100)
        assert d.n_atoms == 51 * 51 == 2601
        assert d.samples.shape == (2601, 100)

    def test_weight_partition(self):
        d = build_dictionary(10)
        # both phase boundaries of the 51 magnitudes are plain real poles
        assert int(np.sum(d.weights == 1.0)) == 102
        assert int(np.sum(d.weights == 2.0)) == 2499
        assert set(np.unique(d.weights)) == {1.0, 2.0}

    def test_half_pole_atom(self):
        samples, weight = atom_samples(0.5, 0.0, 5)
        np.testing.assert_allclose(
            samples, [0.75, 0.375, 0.1875, 0.09375, 0.046875], rtol=0, atol=0
        )
        assert weight == 1.0

    def test_negative_real_pole_alternates(self):
        samples, _ = atom_samples(0.5, np.pi, 4)
        np.testing.assert_allclose(samples, [0.75, -0.375, 0.1875, -0.09375])

    def test_merged_pair_is_damped_cosine(self):
        alpha = 0.8
        samples, weight = atom_samples(alpha, np.pi / 2, 6)
        t = np.arange(6)
        expect = 2 * (1 - alpha**2) * alpha**t * np.cos(t * np.pi / 2)
        np.testing.assert_allclose(samples, expect, atol=1e-15)
        assert weight == 2.0

    def test_atoms_are_summable(self):
        d = build_dictionary(100)
        # every pole is strictly inside the unit circle, so tail sums stay
        # below the closed-form geometric bound
        mags = np.abs(d.samples).sum(axis=1)
        bound = (1 - d.alphas**2) * 2 / (1 - d.alphas)
        assert np.all(mags <= bound + 1e-12)

    def test_length_validated(self):
        with pytest.raises(LengthMismatch):
            build_dictionary(0)


class TestOutputColumns:
    def test_matches_direct_convolution(self):
        # columns are strictly causal: atom tap j acts on u delayed j+1 steps
        rng = np.random.default_rng(7)
        d = build_dictionary(12)
        u = rng.standard_normal(30)
        H = atom_output_columns(d, u)
        for k in (0, 137, 1300, 2600):
            full = np.concatenate([[0.0], np.convolve(u, d.samples[k])[:29]])
            np.testing.assert_allclose(H[:, k], full, atol=1e-12)

    def test_zero_input_gives_zero_columns(self):
        d = build_dictionary(8)
        assert not np.any(atom_output_columns(d, np.zeros(20)))


class TestSolver:
    def test_orthonormal_unpenalized_projection(self):
        rng = np.random.default_rng(2)
        Q, _ = np.linalg.qr(rng.standard_normal((30, 30)))
        Y = rng.standard_normal(30)
        sol = solve_lasso(Q, Y, 0.0)
        np.testing.assert_allclose(sol.coefficients, Q.T @ Y, atol=1e-12)
        assert sol.converged

    def test_everything_shrinks_to_zero_above_threshold(self):
        rng = np.random.default_rng(3)
        H = rng.standard_normal((40, 25))
        Y = rng.standard_normal(40)
        gamma = 2.0001 * np.max(np.abs(H.T @ Y))
        sol = solve_lasso(H, Y, gamma)
        assert not np.any(sol.coefficients)
        assert sol.support.size == 0
        assert sol.converged

    def test_matches_sign_enumeration_on_small_dictionaries(self):
        rng = np.random.default_rng(11)
        worst = 0.0
        for _ in range(20):
            p = int(rng.integers(2, 7))
            H = rng.standard_normal((20, p))
            Y = rng.standard_normal(20)
            w = np.where(rng.random(p) < 0.5, 1.0, 2.0)
            gamma = float(rng.uniform(0.5, 8))
            sol = solve_lasso(H, Y, gamma, w)
            assert sol.converged
            f_cd = _objective(H, Y, w, gamma, sol.coefficients)
            f_best, _ = _enumerate_optimum(H, Y, gamma, w)
            worst = max(worst, abs(f_cd - f_best) / (1 + abs(f_best)))
        assert worst < 1e-8

    def test_objective_never_increases_across_sweeps(self):
        rng = np.random.default_rng(17)
        shared = rng.standard_normal(60)
        H = shared[:, None] + 0.3 * rng.standard_normal((60, 35))
        Y = rng.standard_normal(60)
        sol = solve_lasso(H, Y, 0.05, track=True)
        objs = sol.objectives
        assert objs.shape == (sol.iterations,)
        assert np.all(np.diff(objs) <= 1e-9 * (1 + np.abs(objs[:-1])))

    def test_cold_and_warm_starts_agree_on_the_objective(self):
        u, y, _ = _benchmark_problem()
        d = build_dictionary(60)
        H = atom_output_columns(d, u)
        cold = solve_lasso(H, y, 0.5, d.weights)
        warm = solve_lasso(
            H, y, 0.5, d.weights,
            a0=solve_lasso(H, y, 5.0, d.weights).coefficients,
        )
        assert cold.converged and warm.converged
        f_c = _objective(H, y, d.weights, 0.5, cold.coefficients)
        f_w = _objective(H, y, d.weights, 0.5, warm.coefficients)
        assert abs(f_c - f_w) <= 1e-9 * (1 + abs(f_c))

    def test_sweep_cap_flags_instead_of_raising(self, monkeypatch):
        rng = np.random.default_rng(3)
        shared = rng.standard_normal(50)
        H = shared[:, None] + 0.05 * rng.standard_normal((50, 40))
        Y = rng.standard_normal(50)
        monkeypatch.setattr(regid.atomic, "MAX_SWEEPS", 2)
        sol = solve_lasso(H, Y, 1e-6)
        assert not sol.converged
        assert sol.iterations == 2

    def test_input_validation(self):
        with pytest.raises(LengthMismatch):
            solve_lasso(np.ones((5, 2)), np.ones(4), 1.0)
        with pytest.raises(LengthMismatch):
            solve_lasso(np.ones((5, 2)), np.ones(5), 1.0, weights=np.ones(3))
        with pytest.raises(ValueError):
            solve_lasso(np.ones((5, 2)), np.ones(5), -0.1)


class TestFullScalePath:
    def test_kkt_residuals_along_the_whole_grid(self):
        u, y, _ = _benchmark_problem()
        d = build_dictionary(100)
        H = atom_output_columns(d, u)
        HT = np.ascontiguousarray(H.T)
        colsq = np.einsum("ij,ij->i", HT, HT)
        a_warm = None
        worst = 0.0
        total_sweeps = 0
        penalties = []
        for gamma in np.sort(ATOM_GAMMA_GRID)[::-1]:
            sol = solve_lasso(H, y, gamma, d.weights, a0=a_warm)
            assert sol.converged
            a_warm = sol.coefficients
            total_sweeps += sol.iterations
            a = sol.coefficients
            penalties.append(float(d.weights @ np.abs(a)))
            r = y - H @ a
            c = HT @ r
            thr = 0.5 * gamma * d.weights
            viol = np.where(
                a != 0,
                np.abs(c - np.sign(a) * thr),
                np.maximum(0.0, np.abs(c) - thr),
            )
            worst = max(worst, float(np.max(viol / thr)))
        # subgradient violations, relative to the per-atom threshold
        assert worst < 1e-6
        # weighted l1 grows monotonically as the penalty relaxes
        diffs = np.diff(penalties)
        assert np.all(diffs >= -1e-10 * (1 + np.abs(penalties[:-1])))
        # the top of the grid kills every atom; descent stays cheap
        assert penalties[0] == 0.0
        assert total_sweeps < 5000


class TestTuning:
    def test_leave_one_out_is_the_fold_limit(self):
        rng = np.random.default_rng(23)
        H = rng.standard_normal((12, 4))
        Y = rng.standard_normal(12)
        grid = np.logspace(-2, 1, 8)
        g_loo, s_loo = tune_gamma_kfold(H, Y, folds=12, grid=grid)
        assert g_loo in grid
        assert s_loo.shape == (8,)
        assert np.all(s_loo > 0)

    def test_ties_resolve_to_heavier_regularization(self):
        # a zero regressor matrix scores every gamma identically
        H = np.zeros((20, 3))
        Y = np.ones(20)
        grid = np.logspace(-1, 2, 7)
        gamma, scores = tune_gamma_kfold(H, Y, folds=4, grid=grid)
        assert np.ptp(scores) == 0.0
        assert gamma == grid[-1]

    def test_fold_validation(self):
        H = np.ones((6, 2))
        Y = np.ones(6)
        with pytest.raises(ValueError):
            tune_gamma_kfold(H, Y, folds=1)
        with pytest.raises(LengthMismatch):
            tune_gamma_kfold(H, Y, folds=7)

    def test_cross_validation_picks_an_interior_gamma(self):
        # representative of the benchmark population: third-order truth,
        # moderate noise; the error curve should turn inside the grid
        rng = np.random.default_rng(400)
        gt = _pole_mix_g(rng, 500)
        u = rng.standard_normal(300)
        y0 = np.convolve(u, gt)[:300]
        snr = rng.uniform(1, 10)
        y = y0 + np.sqrt(np.var(y0) / snr) * rng.standard_normal(300)
        d = build_dictionary(100)
        H = atom_output_columns(d, u)
        gamma, scores = tune_gamma_kfold(H, y, weights=d.weights)
        assert ATOM_GAMMA_GRID[0] < gamma < ATOM_GAMMA_GRID[-1]
        assert int(np.argmin(scores)) not in (0, scores.size - 1)

    def test_oracle_tuning_beats_the_grid_ends(self):
        from regid.simgen import fit_score

        u, y, gt = _benchmark_problem(seed=401, N=200)
        d = build_dictionary(50)
        H = atom_output_columns(d, u)
        gamma, sol = tune_gamma_oracle(H, y, d, gt, weights=d.weights)
        assert gamma in ATOM_GAMMA_GRID
        best = fit_score(gt, assemble_impulse_response(d, sol.coefficients))
        for end_gamma in (ATOM_GAMMA_GRID[0], ATOM_GAMMA_GRID[-1]):
            end = solve_lasso(H, y, end_gamma, d.weights)
            end_score = fit_score(
                gt, assemble_impulse_response(d, end.coefficients)
            )
            assert best >= end_score


class TestAssembly:
    def test_unit_coefficient_reads_back_the_atom(self):
        d = build_dictionary(15)
        e = np.zeros(d.n_atoms)
        e[421] = 1.0
        np.testing.assert_array_equal(
            assemble_impulse_response(d, e), d.samples[421]
        )

    def test_linear_in_the_coefficients(self):
        rng = np.random.default_rng(31)
        d = build_dictionary(10)
        a = rng.standard_normal(d.n_atoms)
        b = rng.standard_normal(d.n_atoms)
        np.testing.assert_allclose(
            assemble_impulse_response(d, 2 * a - b),
            2 * assemble_impulse_response(d, a)
            - assemble_impulse_response(d, b),
            atol=1e-12,
        )

    def test_coefficient_count_checked(self):
        with pytest.raises(LengthMismatch):
            assemble_impulse_response(build_dictionary(10), np.ones(7))


class TestFitDriver:
    def test_fixed_gamma_passthrough(self):
        u, y, _ = _benchmark_problem(seed=9, N=120)
        res = fit_atomic_estimate(u, y, m=40, gamma=2.5)
        assert res.gamma == 2.5
        assert res.g_hat.shape == (40,)
        np.testing.assert_allclose(
            res.g_hat,
            assemble_impulse_response(res.dictionary, res.solution.coefficients),
        )

    def test_oracle_needs_the_truth(self):
        u, y, _ = _benchmark_problem(seed=9, N=120)
        with pytest.raises(ValueError):
            fit_atomic_estimate(u, y, m=40, gamma="oracle")

    def test_cross_validated_driver_runs_clean(self):
        u, y, _ = _benchmark_problem(seed=13, N=150)
        res = fit_atomic_estimate(u, y, m=30, gamma="auto", folds=4)
        assert res.gamma in ATOM_GAMMA_GRID
        assert res.solution.converged
        assert res.g_hat.shape == (30,)
        assert 0 < res.solution.support.size < 2601
