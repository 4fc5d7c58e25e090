import math

import numpy as np
import pytest

from fedmc.data import Dataset
from fedmc.errors import ShapeError
from fedmc.model import (Architecture, Gradient, LossKind, ModelParams,
                         Scaling, dropout_subnetwork, forward, forward_batch,
                         init_params, interpolate, loss, params_equal)
from fedmc.paths import (CurveFindConfig, Path, barrier, connectivity_error,
                         curve_find, dropout_error, first_half_keep,
                         function_dissimilarity, optimize_bend, path_point,
                         random_keep, segment_profile, seven_segment_path,
                         traverse, weight_distance)

from _oracles import quadratic_chain_optimum, random_params


def scalar_relu_model(w: float) -> ModelParams:
    """Mean-field net with one neuron and one input: f(x) = relu(w x)."""
    return ModelParams(Architecture(1, 1, 1, Scaling.MEAN_FIELD),
                       np.array([[w]]), np.ones((1, 1)))


ORIGIN_SAMPLE = Dataset(np.array([[1.0]]), np.array([0.0]))
# loss of scalar_relu_model(w) on ORIGIN_SAMPLE under MSE is relu(w)^2


class TestPathPoint:
    def test_linear_endpoints_exact(self, rng):
        p = random_params(rng, 3, 4, 2, Scaling.PLAIN)
        q = random_params(rng, 3, 4, 2, Scaling.PLAIN)
        path = Path.linear(p, q)
        assert params_equal(path_point(path, 0.0), p)
        assert params_equal(path_point(path, 1.0), q)

    def test_polychain_endpoints_and_bend_exact(self, rng):
        p, b, q = (random_params(rng, 3, 4, 2, Scaling.PLAIN) for _ in range(3))
        path = Path.polychain(p, b, q)
        assert params_equal(path_point(path, 0.0), p)
        assert params_equal(path_point(path, 0.5), b)
        assert params_equal(path_point(path, 1.0), q)

    def test_midpoint_bend_collapses_to_linear(self, rng):
        p = random_params(rng, 3, 4, 2, Scaling.PLAIN)
        q = random_params(rng, 3, 4, 2, Scaling.PLAIN)
        chain = Path.polychain(p, interpolate(p, q, 0.5), q)
        line = Path.linear(p, q)
        for nu in np.linspace(0.0, 1.0, 101):
            a = path_point(chain, float(nu))
            b = path_point(line, float(nu))
            assert np.allclose(a.hidden, b.hidden, rtol=0, atol=1e-15)
            assert np.allclose(a.readout, b.readout, rtol=0, atol=1e-15)

    def test_out_of_range(self, rng):
        p = random_params(rng, 2, 2, 1, Scaling.PLAIN)
        path = Path.linear(p, p)
        for nu in (-0.01, 1.01):
            with pytest.raises(ValueError):
                path_point(path, nu)


class TestTraverse:
    def test_profile_every_grid_point(self, rng):
        p = random_params(rng, 4, 5, 3, Scaling.PLAIN)
        q = random_params(rng, 4, 5, 3, Scaling.PLAIN)
        data = Dataset(rng.standard_normal((12, 4)), rng.integers(0, 3, 12))
        path = Path.linear(p, q)
        samples = traverse(path, data, LossKind.CROSS_ENTROPY, grid=7)
        assert len(samples) == 7
        assert samples[0].loss == loss(p, data, LossKind.CROSS_ENTROPY)
        assert samples[-1].loss == loss(q, data, LossKind.CROSS_ENTROPY)
        for s in samples:
            point = path_point(path, s.nu)
            assert s.loss == loss(point, data, LossKind.CROSS_ENTROPY)

    def test_grid_too_small(self, rng):
        p = random_params(rng, 2, 2, 1, Scaling.PLAIN)
        data = Dataset(np.zeros((1, 2)), np.zeros(1))
        with pytest.raises(ValueError):
            traverse(Path.linear(p, p), data, LossKind.MSE, grid=1)


class TestBarrier:
    def test_monotone_path_has_zero_barrier(self):
        # endpoint losses 1 and 2, loss rises monotonically along the path
        t1 = scalar_relu_model(1.0)
        t2 = scalar_relu_model(math.sqrt(2.0))
        res = barrier(t1, t2, Path.linear(t1, t2), ORIGIN_SAMPLE,
                      LossKind.MSE, grid=51)
        assert res.loss_start == pytest.approx(1.0, abs=1e-12)
        assert res.loss_end == pytest.approx(2.0, abs=1e-12)
        assert res.value == 0.0
        assert res.argmax == 1.0

    def test_midpoint_spike_matches_dense_grid_oracle(self):
        # endpoint losses 1 and 2 with a bend whose loss is 3: B = 2/1 - 1
        t1 = scalar_relu_model(1.0)
        t2 = scalar_relu_model(math.sqrt(2.0))
        bend = scalar_relu_model(math.sqrt(3.0))
        path = Path.polychain(t1, bend, t2)
        res = barrier(t1, t2, path, ORIGIN_SAMPLE, LossKind.MSE, grid=51)

        def w_at(nu):
            if nu <= 0.5:
                return 2 * ((0.5 - nu) * 1.0 + nu * math.sqrt(3.0))
            return 2 * ((nu - 0.5) * math.sqrt(2.0) + (1 - nu) * math.sqrt(3.0))

        dense = np.array([max(w_at(nu), 0.0) ** 2
                          for nu in np.linspace(0, 1, 100001)])
        expected = (dense.max() - min(1.0, 2.0)) / abs(1.0 - 2.0) - 1.0
        assert res.value == pytest.approx(expected, abs=1e-4)
        assert res.value == pytest.approx(1.0, abs=1e-12)
        assert res.absolute_barrier == pytest.approx(1.0, abs=1e-12)
        assert res.argmax == 0.5

    def test_degenerate_identical_endpoints(self, rng):
        t1 = scalar_relu_model(1.5)
        res = barrier(t1, t1, Path.linear(t1, t1), ORIGIN_SAMPLE,
                      LossKind.MSE, grid=21)
        assert res.value == 0.0
        assert res.absolute_barrier == 0.0

    def test_linear_barrier_symmetric(self, rng):
        t1 = random_params(rng, 3, 4, 2, Scaling.PLAIN)
        t2 = random_params(rng, 3, 4, 2, Scaling.PLAIN)
        data = Dataset(rng.standard_normal((10, 3)), rng.integers(0, 2, 10))
        fwd = barrier(t1, t2, Path.linear(t1, t2), data,
                      LossKind.CROSS_ENTROPY, grid=31)
        rev = barrier(t2, t1, Path.linear(t2, t1), data,
                      LossKind.CROSS_ENTROPY, grid=31)
        assert fwd.value == rev.value
        assert fwd.absolute_barrier == rev.absolute_barrier

    def test_endpoint_mismatch_rejected(self, rng):
        t1 = scalar_relu_model(1.0)
        t2 = scalar_relu_model(2.0)
        with pytest.raises(ValueError):
            barrier(t2, t1, Path.linear(t1, t2), ORIGIN_SAMPLE, LossKind.MSE)


class TestConnectivityError:
    def test_flat_path(self):
        t1 = scalar_relu_model(1.0)
        eps = connectivity_error(t1, t1, Path.linear(t1, t1), ORIGIN_SAMPLE,
                                 LossKind.MSE, grid=11)
        assert eps == 0.0

    def test_excess_matches_construction(self):
        # endpoints at losses 1 and 2, bend at 2.5: excess = 0.5
        t1 = scalar_relu_model(1.0)
        t2 = scalar_relu_model(math.sqrt(2.0))
        bend = scalar_relu_model(math.sqrt(2.5))
        path = Path.polychain(t1, bend, t2)
        eps = connectivity_error(t1, t2, path, ORIGIN_SAMPLE, LossKind.MSE,
                                 grid=51)
        assert eps == pytest.approx(0.5, abs=1e-12)


class TestCurveFind:
    def test_fixed_point_at_shared_minimizer(self, rng):
        params = random_params(rng, 3, 5, 1, Scaling.PLAIN)
        feats = rng.standard_normal((8, 3))
        data = Dataset(feats, forward_batch(params, feats)[:, 0])
        cfg = CurveFindConfig(steps=50, batch_size=8, lr=0.1, momentum=0.9,
                              bend_init="endpoint", seed=1)
        bend = curve_find(params, params, data, LossKind.MSE, cfg)
        assert params_equal(bend, params)

    def test_quadratic_analytic_optimum(self):
        rng = np.random.default_rng(0)
        arch = Architecture(3, 2, 1, Scaling.PLAIN)
        scale = 0.05
        t1 = ModelParams(arch, scale * rng.standard_normal((2, 3)),
                         scale * rng.standard_normal((1, 2)))
        t2 = ModelParams(arch, scale * rng.standard_normal((2, 3)),
                         scale * rng.standard_normal((1, 2)))
        opt = quadratic_chain_optimum(t1.flat(), t2.flat())

        def grad_at(point, _rng):
            return Gradient(2.0 * point.hidden, 2.0 * point.readout)

        cfg = CurveFindConfig(steps=150_000, batch_size=1, lr=0.15,
                              momentum=0.0, bend_init="endpoint", seed=0,
                              lr_decay=0.02, tail_average=0.5)
        bend = optimize_bend(t1, t2, grad_at, cfg)
        assert np.linalg.norm(bend.flat() - opt) < 1e-3
        assert np.linalg.norm(opt) > 0.02  # the target is far from both inits

    def test_bend_init_options(self, rng):
        t1 = random_params(rng, 2, 3, 1, Scaling.PLAIN)
        t2 = random_params(rng, 2, 3, 1, Scaling.PLAIN)
        data = Dataset(rng.standard_normal((4, 2)), rng.standard_normal(4))
        for init in ("midpoint", "endpoint", "random"):
            cfg = CurveFindConfig(steps=3, batch_size=2, lr=0.01,
                                  bend_init=init, seed=2)
            bend = curve_find(t1, t2, data, LossKind.MSE, cfg)
            assert bend.arch == t1.arch


class TestDropoutError:
    def test_full_keep_zero(self, rng):
        params = random_params(rng, 3, 6, 2, Scaling.PLAIN)
        data = Dataset(rng.standard_normal((9, 3)), rng.integers(0, 2, 9))
        res = dropout_error(params, np.arange(6), data, LossKind.CROSS_ENTROPY)
        assert res.error == 0.0
        assert res.full_loss == res.subnet_loss

    def test_identical_neurons_half_keep_zero(self):
        row = np.array([1.0, -2.0])
        params = ModelParams(Architecture(2, 4, 1, Scaling.MEAN_FIELD),
                             np.tile(row, (4, 1)), np.ones((1, 4)))
        data = Dataset(np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 1.0]]),
                       np.array([1.0, 0.0, 0.5]))
        res = dropout_error(params, first_half_keep(4), data, LossKind.MSE)
        assert res.error == 0.0

    def test_error_is_exact_absolute_difference(self, rng):
        params = random_params(rng, 4, 8, 3, Scaling.PLAIN)
        data = Dataset(rng.standard_normal((15, 4)), rng.integers(0, 3, 15))
        keep = random_keep(8, 4, seed=5)
        res = dropout_error(params, keep, data, LossKind.CROSS_ENTROPY)
        assert res.error == abs(res.full_loss - res.subnet_loss)

    def test_keep_helpers(self):
        assert first_half_keep(5).tolist() == [0, 1, 2]
        keep = random_keep(10, 4, seed=3)
        assert len(set(keep.tolist())) == 4
        assert np.array_equal(keep, random_keep(10, 4, seed=3))


def _loss_along_waypoints(waypoints, data, kind, pts=9):
    _, values = segment_profile(waypoints, data, kind, points_per_segment=pts)
    return values


class TestSevenSegmentPath:
    def test_waypoint_count_and_endpoints(self, rng):
        for n in (4, 5):
            t1 = random_params(rng, 3, n, 1, Scaling.MEAN_FIELD)
            t2 = random_params(rng, 3, n, 1, Scaling.MEAN_FIELD)
            way = seven_segment_path(t1, t2)
            assert len(way) == 8
            assert params_equal(way[0], t1)
            assert params_equal(way[-1], t2)

    def test_identical_halves_give_constant_loss(self, rng):
        rows = rng.standard_normal((2, 3))
        hidden = np.vstack([rows, rows])
        t = ModelParams(Architecture(3, 4, 1, Scaling.MEAN_FIELD), hidden,
                        np.ones((1, 4)))
        data = Dataset(rng.standard_normal((10, 3)), rng.standard_normal(10))
        values = _loss_along_waypoints(seven_segment_path(t, t), data,
                                       LossKind.MSE)
        assert np.max(np.abs(values - values[0])) < 1e-12

    @pytest.mark.parametrize("n", [4, 6, 7])
    def test_bound_by_endpoint_loss_plus_dropout_error(self, rng, n):
        """Max loss along the constructed path is bounded by the worse
        endpoint loss plus the worse half-dropout error (the construction's
        defining inequality, checked by direct evaluation)."""
        data = Dataset(rng.standard_normal((20, 3)), rng.standard_normal(20))
        for _ in range(5):
            t1 = random_params(rng, 3, n, 1, Scaling.MEAN_FIELD, scale=0.7)
            t2 = random_params(rng, 3, n, 1, Scaling.MEAN_FIELD, scale=0.7)
            t1 = ModelParams(t1.arch, t1.hidden, np.ones((1, n)))
            t2 = ModelParams(t2.arch, t2.hidden, np.ones((1, n)))
            keep = np.arange(n // 2)
            eps1 = dropout_error(t1, keep, data, LossKind.MSE).error
            eps2 = dropout_error(t2, keep, data, LossKind.MSE).error
            values = _loss_along_waypoints(seven_segment_path(t1, t2), data,
                                           LossKind.MSE, pts=15)
            bound = max(loss(t1, data, LossKind.MSE),
                        loss(t2, data, LossKind.MSE)) + max(eps1, eps2)
            assert values.max() <= bound + 1e-9

    def test_architecture_mismatch(self, rng):
        t1 = random_params(rng, 3, 4, 1, Scaling.MEAN_FIELD)
        t2 = random_params(rng, 3, 6, 1, Scaling.MEAN_FIELD)
        with pytest.raises(ShapeError):
            seven_segment_path(t1, t2)


class TestFunctionDissimilarity:
    def test_identity_is_zero(self, rng):
        params = random_params(rng, 4, 6, 3, Scaling.PLAIN)
        data = Dataset(rng.standard_normal((30, 4)), rng.integers(0, 3, 30))
        assert function_dissimilarity(params, params, data) == 0.0

    def test_permuted_model_is_zero(self, rng):
        params = random_params(rng, 4, 6, 3, Scaling.PLAIN)
        perm = rng.permutation(6)
        permuted = ModelParams(params.arch, params.hidden[perm],
                               params.readout[:, perm])
        data = Dataset(rng.standard_normal((50, 4)), rng.integers(0, 3, 50))
        assert function_dissimilarity(params, permuted, data) == 0.0

    def test_pseudometric_properties(self, rng):
        models = [random_params(rng, 3, 5, 4, Scaling.PLAIN) for _ in range(3)]
        data = Dataset(rng.standard_normal((40, 3)), rng.integers(0, 4, 40))
        d01 = function_dissimilarity(models[0], models[1], data)
        d10 = function_dissimilarity(models[1], models[0], data)
        d12 = function_dissimilarity(models[1], models[2], data)
        d02 = function_dissimilarity(models[0], models[2], data)
        assert d01 == d10
        assert d02 <= d01 + d12 + 1e-15
        assert 0.0 <= d01 <= 1.0


class TestWeightDistance:
    def test_identity_zero(self, rng):
        t = random_params(rng, 3, 4, 2, Scaling.PLAIN)
        ref = random_params(rng, 3, 4, 2, Scaling.PLAIN)
        assert weight_distance(t, t, ref) == 0.0

    def test_doubling_gives_one(self, rng):
        t0 = random_params(rng, 3, 4, 2, Scaling.PLAIN)
        t2 = ModelParams(t0.arch, 2.0 * t0.hidden, 2.0 * t0.readout)
        assert weight_distance(t0, t2, t0) == pytest.approx(1.0, abs=1e-12)

    def test_zero_norm_reference_rejected(self, rng):
        t = random_params(rng, 3, 4, 2, Scaling.PLAIN)
        zero = ModelParams(t.arch, np.zeros((4, 3)), np.zeros((2, 4)))
        with pytest.raises(ValueError):
            weight_distance(t, t, zero)
