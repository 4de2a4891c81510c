import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from gsde import rng
from gsde.gshock import (
    ALL_POLICIES,
    ScenarioPolicy,
    TimeGrid,
    VolatilityBand,
    generate_path,
    generate_paths,
    ito_sum,
    make_grid,
    mean_and_stderr,
    refine_couple,
    sublinear_expect,
)

BAND = VolatilityBand(0.5, 1.0)


class TestGrid:
    @pytest.mark.parametrize(
        "t0, T, q, expected",
        [
            (0, 1, 2, [0, 0.5, 1]),
            (0, 0.75, 2, [0, 0.5, 0.75]),
            (0, 1, 1, [0, 1]),
            (1, 2.5, 1, [1, 2, 2.5]),
        ],
    )
    def test_points(self, t0, T, q, expected):
        assert make_grid(t0, T, q).times.tolist() == expected

    def test_last_point_is_T_exactly(self):
        for q in range(1, 200):
            g = make_grid(0.0, 1.0, q)
            assert g.times[-1] == 1.0
            assert g.n_steps == q

    def test_rounding_does_not_leave_sliver(self):
        g = make_grid(0.0, 0.3, 10)
        assert g.n_steps == 3
        assert np.all(g.dt > 0.09)

    @pytest.mark.parametrize("args", [(1, 1, 4), (2, 1, 4), (0, 1, 0), (0, 1, 1.5)])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            make_grid(*args)

    def test_grid_type_invariants(self):
        with pytest.raises(ValueError):
            TimeGrid(0.0, 1.0, np.array([0.0, 0.5, 0.5, 1.0]))
        with pytest.raises(ValueError):
            TimeGrid(0.0, 1.0, np.array([0.0, 0.5]))

    def test_index_of(self):
        g = make_grid(0, 1, 10)
        assert g.index_of(0.3) == 3
        with pytest.raises(ValueError):
            g.index_of(0.35)


def test_band_validation():
    with pytest.raises(ValueError):
        VolatilityBand(1.0, 0.5)
    with pytest.raises(ValueError):
        VolatilityBand(-0.1, 0.5)
    VolatilityBand(0.0, 0.0)


class TestRng:
    def test_uniforms_open_interval_and_uniform(self):
        keys = rng.path_keys(3, 0, np.arange(50))
        u = rng.uniforms(keys, 400, rng.STREAM_GAUSS).ravel()
        assert u.min() > 0 and u.max() < 1
        assert stats.kstest(u, "uniform").pvalue > 1e-3

    def test_normals_are_standard(self):
        keys = rng.path_keys(11, 1, np.arange(200))
        z = rng.normals(keys, 100).ravel()
        assert stats.kstest(z, "norm").pvalue > 1e-3

    def test_streams_and_scenarios_differ(self):
        k0 = rng.path_keys(1, 0, [0])
        k1 = rng.path_keys(1, 1, [0])
        assert not np.array_equal(rng.uniforms(k0, 8, 0), rng.uniforms(k1, 8, 0))
        assert not np.array_equal(rng.uniforms(k0, 8, 0), rng.uniforms(k0, 8, 1))

    def test_counter_based(self):
        # draws for a path do not depend on which other paths are in the batch
        a = rng.normals(rng.path_keys(5, 2, [7, 8, 9]), 16)
        b = rng.normals(rng.path_keys(5, 2, [9]), 16)
        assert np.array_equal(a[2], b[0])


class TestGeneratePath:
    def test_zero_band(self):
        grid = make_grid(0, 1, 16)
        for policy in ALL_POLICIES:
            p = generate_path(grid, VolatilityBand(0, 0), policy, 1, 0)
            assert np.all(p.W == 0) and np.all(p.QV == 0)

    def test_classical_brownian_qv(self):
        p = generate_path(make_grid(0, 1, 1), VolatilityBand(1, 1), "ConstantHi", 0, 0)
        assert p.QV[-1] == 1.0

    def test_deterministic(self):
        grid = make_grid(0, 1, 32)
        a = generate_path(grid, BAND, ScenarioPolicy.PerStepUniform, 42, 3)
        b = generate_path(grid, BAND, ScenarioPolicy.PerStepUniform, 42, 3)
        for name in ("W", "QV", "sigma"):
            assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_batch_rows_match_single_paths(self):
        grid = make_grid(0, 1, 20)
        batch = generate_paths(grid, BAND, "PerStepBangBang", 9, np.arange(6))
        for i in range(6):
            single = generate_path(grid, BAND, "PerStepBangBang", 9, i)
            assert np.array_equal(batch.W[i], single.W)
            assert np.array_equal(batch.QV[i], single.QV)

    @pytest.mark.parametrize("policy", ALL_POLICIES)
    def test_path_invariants(self, policy):
        grid = make_grid(0, 0.9, 8)
        batch = generate_paths(grid, BAND, policy, 1, np.arange(50))
        assert np.all(batch.W[:, 0] == 0) and np.all(batch.QV[:, 0] == 0)
        assert np.all(np.diff(batch.QV, axis=1) >= 0)
        assert np.all(batch.sigma >= BAND.sigma_lo) and np.all(batch.sigma <= BAND.sigma_hi)
        np.testing.assert_allclose(
            np.diff(batch.QV, axis=1), batch.sigma**2 * grid.dt, rtol=1e-14, atol=0
        )
        # QV(t) - QV(s) between lo^2 (t-s) and hi^2 (t-s) for every pair of grid points
        t = grid.times
        gap = t[None, :] - t[:, None]
        upper = np.triu(np.ones_like(gap, dtype=bool), 1)
        for qv in batch.QV:
            d = qv[None, :] - qv[:, None]
            slack = 1e-14 * np.abs(gap)
            assert np.all(d[upper] >= BAND.sigma_lo**2 * gap[upper] - slack[upper])
            assert np.all(d[upper] <= BAND.sigma_hi**2 * gap[upper] + slack[upper])

    def test_constant_policies(self):
        grid = make_grid(0, 1, 10)
        lo = generate_paths(grid, BAND, "ConstantLo", 0, range(5))
        hi = generate_paths(grid, BAND, "ConstantHi", 0, range(5))
        assert np.all(lo.sigma == 0.5) and np.all(hi.sigma == 1.0)

    def test_bang_bang_hits_both_ends(self):
        batch = generate_paths(make_grid(0, 1, 64), BAND, "PerStepBangBang", 0, range(20))
        frac_hi = np.mean(batch.sigma == 1.0)
        assert set(np.unique(batch.sigma)) == {0.5, 1.0}
        assert abs(frac_hi - 0.5) < 0.05

    def test_short_final_step_variance(self):
        # last step has length 0.05; W increments there have variance sigma^2 * 0.05
        grid = make_grid(0, 1.05, 1)
        batch = generate_paths(grid, VolatilityBand(1, 1), "ConstantHi", 4, np.arange(20000))
        last = np.diff(batch.W, axis=1)[:, -1]
        assert grid.dt[-1] == pytest.approx(0.05)
        assert batch.QV[0, -1] - batch.QV[0, -2] == pytest.approx(0.05)
        assert np.var(last) == pytest.approx(0.05, rel=0.05)

    def test_increment_variance_per_step(self):
        grid = make_grid(0, 1, 4)
        batch = generate_paths(grid, BAND, "ConstantMid", 2, np.arange(40000))
        dW = np.diff(batch.W, axis=1)
        var = 0.75**2 * 0.25
        np.testing.assert_allclose(dW.var(axis=0), var, rtol=0.03)
        assert abs(np.corrcoef(dW[:, 0], dW[:, 1])[0, 1]) < 0.02


class TestRefineCouple:
    def test_identity(self):
        grid = make_grid(0, 1, 8)
        p = generate_path(grid, BAND, "PerStepUniform", 1, 0)
        c = refine_couple(p, grid)
        assert np.array_equal(c.W, p.W) and np.array_equal(c.QV, p.QV)
        assert np.array_equal(c.sigma, p.sigma)

    def test_point_restriction(self):
        fine = generate_path(make_grid(0, 1, 4), BAND, "PerStepUniform", 1, 0)
        coarse = refine_couple(fine, make_grid(0, 1, 2))
        assert coarse.W[1] == fine.W[2]
        assert coarse.QV[-1] == fine.QV[-1]
        assert coarse.W[-1] == fine.W[-1]

    def test_coarse_sigma_reproduces_qv(self):
        fine = generate_paths(make_grid(0, 0.7, 40), BAND, "PerStepBangBang", 3, range(10))
        g = make_grid(0, 0.7, 5)
        coarse = refine_couple(fine, g)
        np.testing.assert_allclose(coarse.sigma**2 * g.dt, np.diff(coarse.QV, axis=1), rtol=1e-12)
        assert np.all(coarse.sigma >= 0.5 - 1e-12) and np.all(coarse.sigma <= 1 + 1e-12)

    def test_rejects_non_nested(self):
        fine = generate_path(make_grid(0, 1, 4), BAND, "ConstantHi", 1, 0)
        with pytest.raises(ValueError):
            refine_couple(fine, make_grid(0, 1, 3))
        with pytest.raises(ValueError):
            refine_couple(fine, make_grid(0, 2, 2))


class TestItoSum:
    def setup_method(self):
        self.path = generate_path(make_grid(0, 1, 16), BAND, "PerStepUniform", 5, 1)

    def test_zero_integrand(self):
        assert ito_sum(np.zeros(17), self.path) == 0.0

    def test_telescoping(self):
        assert ito_sum(np.ones(17), self.path) == pytest.approx(self.path.W[-1] - self.path.W[0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            ito_sum(np.ones(16), self.path)

    def test_matches_loop(self):
        f = np.sin(self.path.grid.times)
        loop = sum(f[n] * (self.path.W[n + 1] - self.path.W[n]) for n in range(16))
        assert ito_sum(f, self.path) == pytest.approx(loop, rel=1e-13)

    def test_qv_identity_residual_shrinks(self):
        # <W>_T = W_T^2 - 2 int W dW holds in the limit; the discrete residual
        # is |sum (dW^2 - sigma^2 dt)|, which shrinks like q^{-1/2}
        def mean_residual(q):
            b = generate_paths(make_grid(0, 1, q), BAND, "PerStepUniform", 17, np.arange(1000))
            res = np.abs(b.QV[:, -1] - (b.W[:, -1] ** 2 - 2 * ito_sum(b.W, b)))
            return res.mean()

        assert mean_residual(16) >= 2 * mean_residual(256)


class TestMeanAndStderr:
    def test_constant_exact(self):
        for c in (0.1, 1 / 3, -7.25, 1e300):
            m, se = mean_and_stderr(np.full(10007, c))
            assert m == c and se == 0.0

    def test_against_numpy(self):
        x = np.random.default_rng(0).normal(size=5000)
        m, se = mean_and_stderr(x)
        assert m == pytest.approx(x.mean(), rel=1e-12)
        assert se == pytest.approx(x.std(ddof=1) / math.sqrt(x.size), rel=1e-12)

    def test_order_independent(self):
        x = np.random.default_rng(1).lognormal(size=3000)
        assert mean_and_stderr(x)[0] == mean_and_stderr(np.concatenate([x[:1], x[1:][::-1]]))[0]


class TestSublinearExpect:
    grid = make_grid(0, 1, 16)

    def test_constant(self):
        est = sublinear_expect(lambda p: 2.5, BAND, self.grid, ALL_POLICIES, 50, 0)
        assert est.value == 2.5

    def test_errors(self):
        with pytest.raises(ValueError):
            sublinear_expect(lambda p: 0.0, BAND, self.grid, [], 10, 0)
        with pytest.raises(ValueError):
            sublinear_expect(lambda p: 0.0, BAND, self.grid, ALL_POLICIES, 1, 0)

    def test_terminal_value_centered(self):
        est = sublinear_expect(
            lambda b: b.W[:, -1], BAND, make_grid(0, 1, 8), ALL_POLICIES, 10_000, 3,
            vectorized=True,
        )
        assert abs(est.value) <= 3 * est.stderr

    def test_second_moment_hits_sigma_hi(self):
        est = sublinear_expect(
            lambda b: b.W[:, -1] ** 2, BAND, make_grid(0, 1, 8), ALL_POLICIES, 10_000, 3,
            vectorized=True,
        )
        # analytic per-scenario means: E[W_T^2] = E int sigma^2 dt
        analytic = {
            ScenarioPolicy.ConstantLo: 0.25,
            ScenarioPolicy.ConstantHi: 1.0,
            ScenarioPolicy.ConstantMid: 0.5625,
            ScenarioPolicy.PerStepUniform: (1.0**3 - 0.5**3) / (3 * 0.5),
            ScenarioPolicy.PerStepBangBang: 0.625,
        }
        for s in est.per_scenario_means:
            assert abs(s.mean - analytic[ScenarioPolicy(s.scenario_id)]) <= 4 * s.stderr
        assert abs(est.value - 1.0) <= 3 * est.stderr
        assert est.argmax_scenario == ScenarioPolicy.ConstantHi

    def test_scalar_and_vectorized_agree(self):
        g = make_grid(0, 1, 4)
        a = sublinear_expect(lambda p: p.W[-1] ** 2 + p.QV[-1], BAND, g, ALL_POLICIES, 40, 1)
        b = sublinear_expect(lambda b: b.W[:, -1] ** 2 + b.QV[:, -1], BAND, g, ALL_POLICIES,
                             40, 1, vectorized=True)
        assert a == b

    def test_value_is_max(self):
        est = sublinear_expect(lambda p: p.W[-1], BAND, self.grid, ALL_POLICIES, 30, 2)
        assert est.value == max(s.mean for s in est.per_scenario_means)


# Functionals built from a few path features; hypothesis draws the weights.
_FEATURES = (
    lambda b: b.W[:, -1],
    lambda b: b.W[:, -1] ** 2,
    lambda b: b.QV[:, -1],
    lambda b: np.max(np.abs(b.W), axis=1),
    lambda b: np.cos(b.W[:, 4]),
)
_weights = st.lists(st.floats(-3, 3, allow_nan=False), min_size=len(_FEATURES),
                    max_size=len(_FEATURES))


def _functional(weights):
    def f(b):
        return sum(w * feat(b) for w, feat in zip(weights, _FEATURES))
    return f


def _E(f, seed):
    return sublinear_expect(f, BAND, make_grid(0, 1, 8), ALL_POLICIES, 64, seed,
                            vectorized=True).value


def _tol(*vals):
    return 1e-12 * (1 + max(abs(v) for v in vals))


@settings(max_examples=120, deadline=None)
@given(_weights, _weights, st.integers(0, 2**32))
def test_axiom_subadditive(wx, wy, seed):
    X, Y = _functional(wx), _functional(wy)
    lhs = _E(lambda b: X(b) + Y(b), seed)
    ex, ey = _E(X, seed), _E(Y, seed)
    assert lhs <= ex + ey + _tol(lhs, ex, ey)


@settings(max_examples=120, deadline=None)
@given(_weights, st.floats(0, 50), st.integers(0, 2**32))
def test_axiom_positive_homogeneity(wx, lam, seed):
    X = _functional(wx)
    a = _E(lambda b: lam * X(b), seed)
    b_ = lam * _E(X, seed)
    assert a == pytest.approx(b_, rel=1e-12, abs=_tol(a, b_))


@settings(max_examples=120, deadline=None)
@given(st.floats(-1e6, 1e6, allow_nan=False), st.integers(0, 2**32))
def test_axiom_constant_preservation(c, seed):
    assert _E(lambda b: np.full(len(b), c), seed) == c


@settings(max_examples=120, deadline=None)
@given(_weights, _weights, st.integers(0, 2**32))
def test_axiom_monotone(wx, wd, seed):
    X, D = _functional(wx), _functional(wd)
    lo = _E(X, seed)
    hi = _E(lambda b: X(b) + np.abs(D(b)), seed)
    assert lo <= hi + _tol(lo, hi)
