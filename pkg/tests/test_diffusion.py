import math

import numpy as np
import pytest

from pgdmoo import diffusion as D
from pgdmoo import nn
from pgdmoo.errors import ConfigurationError

# exp(sum(log1p(-beta))) for the default linear schedule, computed independently
ALPHA_BAR_1000 = 4.035829765375687e-05


class TestSchedule:
    def test_two_step_hand_values(self):
        s = D.linear_schedule(2, 0.1, 0.2)
        np.testing.assert_allclose(s.betas, [0.1, 0.2], rtol=0, atol=1e-16)
        np.testing.assert_allclose(s.alphas, [0.9, 0.8], atol=1e-16)
        np.testing.assert_allclose(s.alpha_bars, [0.9, 0.72], atol=1e-15)

    def test_endpoints_exact(self):
        s = D.linear_schedule(1000, 1e-4, 0.02)
        assert s.betas[0] == 1e-4
        assert s.betas[-1] == 0.02

    def test_default_alpha_bar_tail(self):
        s = D.linear_schedule(1000, 1e-4, 0.02)
        assert s.alpha_bars[-1] < 1e-4
        assert s.alpha_bars[-1] == pytest.approx(ALPHA_BAR_1000, rel=1e-10)

    @pytest.mark.parametrize("T", [2, 50, 200, 1000])
    def test_monotone(self, T):
        s = D.linear_schedule(T)
        assert np.all(np.diff(s.betas) > 0)
        assert np.all((s.betas > 0) & (s.betas < 1))
        assert np.all(np.diff(s.alpha_bars) < 0)

    def test_reverse_order_product(self):
        # accumulate log-factors from t down to 1 with exact summation; a plain
        # float product over hundreds of factors drifts by ~1e-15 on its own
        s = D.linear_schedule(1000)
        logs = [math.log(a) for a in s.alphas]
        rev = np.array([math.exp(math.fsum(logs[:t][::-1])) for t in range(1, 1001)])
        np.testing.assert_allclose(s.alpha_bars, rev, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("args", [(1, 1e-4, 0.02), (10, 0.02, 1e-4), (10, 0.0, 0.02), (10, 1e-4, 1.0)])
    def test_invalid(self, args):
        with pytest.raises(ConfigurationError):
            D.linear_schedule(*args)


class TestForwardNoise:
    def test_zero_noise(self, rng):
        s = D.linear_schedule(100)
        x0 = rng.normal(size=5)
        np.testing.assert_array_equal(D.forward_noise(x0, 30, np.zeros(5), s), math.sqrt(s.alpha_bars[29]) * x0)

    def test_no_noise_limit(self, rng):
        # hypothetical schedule with abar = 1
        s = D.DiffusionSchedule(np.zeros(3), np.ones(3), np.ones(3))
        x0 = rng.normal(size=4)
        np.testing.assert_array_equal(D.forward_noise(x0, 2, rng.normal(size=4), s), x0)

    def test_out_of_range(self):
        s = D.linear_schedule(10)
        with pytest.raises(IndexError):
            D.forward_noise(np.zeros(2), 0, np.zeros(2), s)
        with pytest.raises(IndexError):
            D.forward_noise(np.zeros(2), 11, np.zeros(2), s)

    def test_per_row_timesteps(self, rng):
        s = D.linear_schedule(50)
        X = rng.normal(size=(4, 3))
        E = rng.normal(size=(4, 3))
        t = np.array([1, 10, 25, 50])
        out = D.forward_noise(X, t, E, s)
        for i in range(4):
            np.testing.assert_array_equal(out[i], D.forward_noise(X[i], t[i], E[i], s))


class TestReverseMean:
    def test_zero_eps(self, rng):
        s = D.linear_schedule(100)
        model = nn.init_mlp(3, (8,), 3, rng, emb_dim=4, zero_output=True)
        x = rng.normal(size=3)
        np.testing.assert_allclose(D.reverse_mean(model, x, 40, s), x / math.sqrt(s.alphas[39]), rtol=1e-15)

    def test_perfect_denoiser_t1(self, rng):
        # substituting x_1 = sqrt(a1) x0 + sqrt(1 - a1) eps into the mean formula
        # with eps_theta = eps collapses mu to x0 at t = 1
        s = D.linear_schedule(100)
        x0, eps = 0.7, -1.3
        a1 = s.alphas[0]
        x1 = math.sqrt(a1) * x0 + math.sqrt(1 - a1) * eps
        eps_hat = (x1 - math.sqrt(a1) * x0) / math.sqrt(1 - a1)
        mu = D.reverse_mean(None, np.array([x1]), 1, s, eps_hat=np.array([eps_hat]))
        assert mu[0] == pytest.approx(x0, abs=1e-12)

    def test_homogeneous_linearity(self, rng):
        s = D.linear_schedule(100)
        A = rng.normal(size=(3, 3))
        x = rng.normal(size=3)
        for a in (-2.0, 0.5, 3.0):
            lhs = D.reverse_mean(None, a * x, 17, s, eps_hat=A @ (a * x))
            rhs = a * D.reverse_mean(None, x, 17, s, eps_hat=A @ x)
            np.testing.assert_allclose(lhs, rhs, rtol=1e-13)


class TestDenoiserTraining:
    def test_zero_output_initial_loss(self):
        d = 10
        rng = np.random.default_rng(0)
        s = D.linear_schedule(200)
        model = nn.init_mlp(d, (16,), d, rng, emb_dim=8, zero_output=True)
        losses = []
        for _ in range(1000):
            x0 = rng.uniform(-1, 1, size=(256, d))
            t = rng.integers(1, 201, size=256)
            eps = rng.standard_normal((256, d))
            losses.append(D.denoising_loss(model, D.forward_noise(x0, t, eps, s), t, eps))
        assert np.mean(losses) == pytest.approx(d, rel=0.05)

    def test_loss_row_order_invariant(self, rng):
        s = D.linear_schedule(50)
        model = nn.init_mlp(4, (16,), 4, rng, emb_dim=8)
        X = rng.uniform(-1, 1, size=(64, 4))
        t = rng.integers(1, 51, size=64)
        E = rng.standard_normal((64, 4))
        xt = D.forward_noise(X, t, E, s)
        perm = rng.permutation(64)
        a = D.denoising_loss(model, xt, t, E)
        b = D.denoising_loss(model, xt[perm], t[perm], E[perm])
        assert a == pytest.approx(b, rel=1e-12)

    def test_same_seed_same_history(self, rng):
        s = D.linear_schedule(50)
        X = rng.uniform(-1, 1, size=(300, 3))
        cfg = D.DenoiserConfig(hidden=(16, 16), emb_dim=8, epochs=3, batch_size=64)
        r1 = D.train_denoiser(X, s, cfg, seed=3)
        r2 = D.train_denoiser(X, s, cfg, seed=3)
        assert r1.history == r2.history
        for k in r1.model.params:
            assert r1.model.params[k].tobytes() == r2.model.params[k].tobytes()

    def test_nonfinite_loss_aborts(self, rng):
        from pgdmoo.errors import NonFiniteError

        s = D.linear_schedule(20)
        X = np.full((50, 2), np.nan)
        with pytest.raises(NonFiniteError):
            D.train_denoiser(X, s, D.DenoiserConfig(hidden=(8,), emb_dim=4, epochs=1), seed=0)

    def test_keeps_best_validation_epoch(self, rng):
        s = D.linear_schedule(50)
        X = rng.uniform(-1, 1, size=(400, 3))
        cfg = D.DenoiserConfig(hidden=(16, 16), emb_dim=8, epochs=6, batch_size=64)
        res = D.train_denoiser(X, s, cfg, seed=1, train_idx=np.arange(360), val_idx=np.arange(360, 400))
        vals = [h["val_loss"] for h in res.history]
        assert res.best_epoch == int(np.argmin(vals))

    @pytest.mark.slow
    def test_degenerate_dataset_concentrates(self):
        p = np.array([0.3, -0.5, 0.1])
        X = np.tile(p, (512, 1))
        s = D.linear_schedule(100)
        cfg = D.DenoiserConfig(hidden=(64, 64), emb_dim=16, epochs=150, batch_size=128, lr=2e-3)
        res = D.train_denoiser(X, s, cfg, seed=0, train_idx=np.arange(460), val_idx=np.arange(460, 512))
        # irreducible optimum for a point mass: eps is recoverable exactly, loss -> 0
        assert res.history[res.best_epoch]["val_loss"] < 0.05 * res.history[0]["val_loss"]
        out = D.unconditional_sample(res.model, s, 256, seed=0, clamp=False)
        dist = np.linalg.norm(out - p, axis=1)
        assert np.median(dist) <= 0.1

    @pytest.mark.slow
    def test_gaussian_data_sample_mean(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((4000, 2))
        s = D.linear_schedule(200)
        cfg = D.DenoiserConfig(hidden=(64, 64), emb_dim=16, epochs=60, batch_size=256, lr=1e-3)
        res = D.train_denoiser(X, s, cfg, seed=0)
        n = 4096
        out = D.unconditional_sample(res.model, s, n, seed=11, clamp=False)
        assert np.all(np.abs(out.mean(axis=0)) <= 4 / math.sqrt(n))


def test_unconditional_sampling_deterministic(rng):
    s = D.linear_schedule(30)
    model = nn.init_mlp(3, (8,), 3, rng, emb_dim=4)
    a = D.unconditional_sample(model, s, 16, seed=9)
    b = D.unconditional_sample(model, s, 16, seed=9)
    assert a.tobytes() == b.tobytes()
    assert np.all(np.abs(a) <= 1.0)
