import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from resin.gp import (GpModel, KernelParams, TrajectoryGaussian,
                      chol_with_jitter, fit_hyperparameters, gp_predict,
                      ingest, kernel_eval, local_trajectory_pdf,
                      log_marginal_likelihood, nominal_path)
from resin.world import Measurement


def naive_predict(model, query):
    """Direct-inversion reference for the posterior formulas."""
    pos, t = query
    p = model.params
    X = np.array([xy for (xy, _) in model.inputs], float).reshape(-1, 2)
    T = np.array([tt for (_, tt) in model.inputs], float)
    Z = np.array(model.outputs, float).reshape(-1, 2)
    n = len(T)
    K = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            K[a, b] = kernel_eval(((X[a]), T[a]), ((X[b]), T[b]), p)
    K += p.noise_std ** 2 * np.eye(n)
    kvec = np.array([kernel_eval((np.asarray(pos, float), t), (X[a], T[a]), p)
                     for a in range(n)])
    Kinv = np.linalg.inv(K)
    mean = kvec @ Kinv @ Z
    var = p.signal_std ** 2 - kvec @ Kinv @ kvec
    return mean, var


def model_with_points(rng, n, params=None, cap=150):
    params = params or KernelParams(1.0, 2.0, 4.0, 0.1)
    m = GpModel(0, 0, params, window_cap=cap)
    for k in range(n):
        meas = Measurement(0, 0, k, rng.uniform(0, 10, 2),
                           rng.normal(0, 1, 2))
        m = ingest(m, meas, 0.5)
    return m


class TestKernel:
    def test_identical_points(self):
        p = KernelParams(1.0, 2.0, 4.0, 0.1)
        assert kernel_eval((np.zeros(2), 0.0), (np.zeros(2), 0.0), p) == 1.0

    def test_spatial_scale(self):
        p = KernelParams(1.0, 2.0, 4.0, 0.1)
        x = np.array([math.sqrt(2) * 2.0, 0.0])
        v = kernel_eval((x, 0.0), (np.zeros(2), 0.0), p)
        assert v == pytest.approx(math.exp(-1), rel=1e-12)

    def test_temporal_scale(self):
        p = KernelParams(2.0, 2.0, 4.0, 0.1)
        v = kernel_eval((np.zeros(2), math.sqrt(2) * 4.0),
                        (np.zeros(2), 0.0), p)
        assert v == pytest.approx(4 * math.exp(-1), rel=1e-12)

    def test_symmetric_and_bounded(self, rng):
        p = KernelParams(1.5, 2.0, 4.0, 0.1)
        for _ in range(20):
            a = (rng.uniform(0, 10, 2), rng.uniform(0, 20))
            b = (rng.uniform(0, 10, 2), rng.uniform(0, 20))
            assert kernel_eval(a, b, p) == pytest.approx(
                kernel_eval(b, a, p), rel=1e-15)
            assert kernel_eval(a, b, p) <= p.signal_std ** 2 + 1e-15


class TestPredict:
    def test_empty_model_prior(self):
        m = GpModel(0, 0, KernelParams(1.0, 2.0, 4.0, 0.1))
        pred = gp_predict(m, (np.zeros(2), 0.0))
        assert np.array_equal(pred.mean, [0.0, 0.0])
        assert pred.variance == 1.0

    def test_single_point_closed_form(self):
        p = KernelParams(1.0, 2.0, 4.0, 0.1)
        m = GpModel(0, 0, p)
        z = np.array([1.0, -0.5])
        m = ingest(m, Measurement(0, 0, 0, np.zeros(2), z), 0.5)
        pred = gp_predict(m, (np.zeros(2), 0.0))
        s2, e2 = 1.0, 0.01
        assert np.allclose(pred.mean, s2 / (s2 + e2) * z, rtol=1e-12)
        assert pred.variance == pytest.approx(s2 - s2 ** 2 / (s2 + e2),
                                              rel=1e-10)

    def test_matches_direct_inversion_oracle(self, rng):
        for _ in range(15):
            m = model_with_points(rng, rng.integers(1, 51))
            q = (rng.uniform(0, 10, 2), rng.uniform(0, 30))
            pred = gp_predict(m, q)
            mean, var = naive_predict(m, q)
            assert np.allclose(pred.mean, mean, rtol=1e-8, atol=1e-10)
            assert pred.variance == pytest.approx(max(var, 0.0), rel=1e-8,
                                                  abs=1e-10)

    def test_variance_nonincreasing_with_data_at_query(self, rng):
        q = (np.array([3.0, 3.0]), 2.0)
        m = GpModel(0, 0, KernelParams(1.0, 2.0, 4.0, 0.1))
        last = gp_predict(m, q).variance
        for k in range(8):
            m = ingest(m, Measurement(0, 0, 4, np.array([3.0, 3.0]),
                                      rng.normal(0, 1, 2)), 0.5)
            var = gp_predict(m, q).variance
            assert var <= last + 1e-12
            last = var

    def test_gram_spd_after_jitter(self, rng):
        # duplicated rows make the raw kernel matrix singular at zero noise
        p = KernelParams(1.0, 2.0, 4.0, 1e-4)
        m = GpModel(0, 0, p)
        for _ in range(4):
            m = ingest(m, Measurement(0, 0, 2, np.array([1.0, 1.0]),
                                      np.array([0.3, 0.3])), 0.5)
        X, T, _ = m._arrays
        from resin.gp import _kernel_cross
        K = _kernel_cross(p, X, T, X, T)
        L, jit = chol_with_jitter(K)
        assert np.all(np.isfinite(L))


class TestFit:
    def test_underdetermined_returns_incumbent(self, rng):
        m = model_with_points(rng, 1)
        assert fit_hyperparameters(m) == m.params

    def test_recovers_known_hyperparameters(self):
        # inputs clustered within a couple of spatial length scales so the
        # temporal scale is identifiable from the sample
        rng = np.random.default_rng(7)
        true = KernelParams(1.0, 2.0, 4.0, 0.1)
        n = 40
        X = rng.uniform(0, 5, (n, 2))
        T = np.sort(rng.uniform(0, 24, n))
        from resin.gp import _kernel_cross
        K = _kernel_cross(true, X, T, X, T) + 1e-10 * np.eye(n)
        Lc = np.linalg.cholesky(K)
        Z = Lc @ rng.normal(0, 1, (n, 2)) + 0.1 * rng.normal(0, 1, (n, 2))
        inputs = tuple(((float(x[0]), float(x[1])), float(t))
                       for x, t in zip(X, T))
        outputs = tuple((float(z[0]), float(z[1])) for z in Z)
        m = GpModel(0, 0, KernelParams(0.6, 1.0, 2.0, 0.1), inputs, outputs,
                    150)
        fit = fit_hyperparameters(m, window_min=10)
        for got, want in [(fit.signal_std, 1.0), (fit.length_space, 2.0),
                          (fit.length_time, 4.0)]:
            assert abs(math.log(got) - math.log(want)) < 0.5

        # never worse than a dense grid reference
        grid_best = -np.inf
        for s in np.exp(np.linspace(-1.5, 1.5, 7)):
            for lx in np.exp(np.linspace(-0.5, 2.3, 7)):
                for lt in np.exp(np.linspace(0.0, 2.8, 7)):
                    val = log_marginal_likelihood(
                        m, KernelParams(s, lx, lt, 0.1))
                    grid_best = max(grid_best, val)
        assert log_marginal_likelihood(m, fit) >= grid_best - 1e-6

    def test_result_at_least_as_good_as_every_start(self, rng):
        m = model_with_points(rng, 25)
        fit = fit_hyperparameters(m, window_min=10)
        got = log_marginal_likelihood(m, fit)
        for start in [m.params, KernelParams(1.0, 2.0, 4.0, 0.1),
                      KernelParams(0.5, 1.0, 2.0, 0.1),
                      KernelParams(2.0, 6.0, 12.0, 0.1)]:
            assert got >= log_marginal_likelihood(m, start) - 1e-9

    def test_deterministic(self, rng):
        m = model_with_points(rng, 20)
        a = fit_hyperparameters(m)
        b = fit_hyperparameters(m)
        assert a == b


class TestNominalPath:
    def test_empty_model_stays_put(self):
        m = GpModel(0, 0, KernelParams())
        path = nominal_path(m, np.array([2.0, 3.0]), 0, 5, 0.5)
        assert np.allclose(path, [[2.0, 3.0]] * 5)

    def test_constant_field_rollout(self, rng):
        p = KernelParams(1.0, 3.0, 50.0, 0.05)
        m = GpModel(0, 0, p)
        for k in range(60):
            pos = rng.uniform(0, 6, 2)
            m = ingest(m, Measurement(0, 0, k % 10, pos,
                                      np.array([1.0, 0.0])), 0.5)
        x0 = np.array([3.0, 3.0])
        dt, H = 0.5, 5
        path = nominal_path(m, x0, 10, H, dt)
        for step, pt in enumerate(path, start=1):
            expect = x0 + np.array([step * dt, 0.0])
            assert np.linalg.norm(pt - expect) < 0.05 * dt * step

    def test_horizon_five(self):
        m = GpModel(0, 0, KernelParams())
        assert nominal_path(m, np.zeros(2), 0, 5, 0.5).shape == (5, 2)


class TestTrajectoryPdf:
    def test_empty_model_prior_blocks(self):
        p = KernelParams(1.3, 2.0, 4.0, 0.1)
        m = GpModel(0, 0, p)
        tg = local_trajectory_pdf(m, np.zeros(2), 0, 4, 0.5)
        want = (1.3 ** 2) * 0.25 * np.eye(2)
        for blk in tg.cov_blocks:
            assert np.allclose(blk, want, rtol=1e-12)

    def test_blocks_match_predict_along_path(self, rng):
        m = model_with_points(rng, 30)
        dt, H, k = 0.5, 5, 12
        x0 = np.array([4.0, 4.0])
        tg = local_trajectory_pdf(m, x0, k, H, dt)
        path = nominal_path(m, x0, k, H, dt)
        assert np.allclose(tg.mean_points, path, rtol=0, atol=0)
        for tau in range(H):
            var = gp_predict(m, (path[tau], (k + tau + 1) * dt)).variance
            assert tg.cov_blocks[tau][0, 0] == pytest.approx(
                max(var * dt * dt, 1e-12), rel=1e-12)
            assert tg.cov_blocks[tau][0, 1] == 0.0

    def test_single_step_reduces_to_prediction(self, rng):
        m = model_with_points(rng, 10)
        tg = local_trajectory_pdf(m, np.array([5.0, 5.0]), 3, 1, 0.5)
        assert tg.horizon == 1
        pred = gp_predict(m, (np.array([5.0, 5.0]), 1.5))
        assert np.allclose(tg.mean_points[0],
                           np.array([5.0, 5.0]) + pred.mean * 0.5)


class TestIngest:
    def test_append_to_empty(self):
        m = GpModel(0, 0, KernelParams())
        m2 = ingest(m, Measurement(0, 0, 0, np.zeros(2), np.ones(2)), 0.5)
        assert m2.n == 1 and m.n == 0

    def test_window_eviction(self):
        m = GpModel(0, 0, KernelParams(), window_cap=100)
        for k in range(101):
            m = ingest(m, Measurement(0, 0, k, np.array([float(k), 0.0]),
                                      np.zeros(2)), 0.5)
        assert m.n == 100
        assert m.inputs[0][0][0] == 1.0  # oldest point evicted

    def test_eviction_preserves_order(self):
        m = GpModel(0, 0, KernelParams(), window_cap=5)
        for k in range(9):
            m = ingest(m, Measurement(0, 0, k, np.array([float(k), 0.0]),
                                      np.zeros(2)), 0.5)
        times = [t for (_, t) in m.inputs]
        assert times == sorted(times)
        assert times[0] == 4 * 0.5

    def test_target_mismatch_rejected(self):
        m = GpModel(0, 3, KernelParams())
        with pytest.raises(ValueError):
            ingest(m, Measurement(0, 4, 0, np.zeros(2), np.zeros(2)), 0.5)


@given(n=st.integers(1, 12))
@settings(max_examples=20, deadline=None)
def test_trajectory_gaussian_shape_checks(n):
    blocks = np.stack([np.eye(2)] * n)
    tg = TrajectoryGaussian(0, np.zeros(2 * n), blocks)
    assert tg.horizon == n
    with pytest.raises(ValueError):
        TrajectoryGaussian(0, np.zeros(2 * n + 1), blocks)
