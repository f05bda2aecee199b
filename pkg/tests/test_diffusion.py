import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from lvgen.denoiser import DenoiserConfig
from lvgen.diffusion import (
    DiffusionSchedule,
    DivergenceError,
    TrainConfig,
    TrainingBatch,
    condition_names,
    corrupt,
    daily_stats,
    generate,
    linear_beta_schedule,
    load_checkpoint,
    network_conditioning,
    prepare_inputs,
    restore_conditions,
    reverse_step,
    sample,
    train,
    training_step,
)

from conftest import conditioned_splits


class Zeros(torch.nn.Module):
    def forward(self, x, cond, steps):
        return torch.zeros_like(x)


class Oracle(torch.nn.Module):
    """Returns the exact cumulative noise relative to a known x0."""

    def __init__(self, x0, schedule):
        super().__init__()
        self.x0, self.ab = x0, schedule.alpha_bar

    def forward(self, x, cond, steps):
        ab = torch.as_tensor(self.ab[steps.numpy() - 1], dtype=x.dtype).reshape(-1, 1, 1)
        return (x - ab.sqrt() * self.x0) / (1 - ab).sqrt()


# ---- schedule


def test_two_step_schedule():
    s = linear_beta_schedule(2, 0.1, 0.2)
    assert np.allclose(s.beta, [0.1, 0.2])
    assert np.allclose(s.alpha_bar, [0.9, 0.72])


def test_default_schedule_bounds():
    s = linear_beta_schedule()
    assert s.T == 200 and s.beta[0] == 1e-4 and np.isclose(s.beta[-1], 0.02)
    assert np.all(np.diff(s.alpha_bar) < 0)
    assert s.sigma[0] == 0.0 and np.all(s.sigma[1:] > 0)


@pytest.mark.parametrize("args", [(0, 1e-4, 0.02), (10, 0.0, 0.02), (10, 0.03, 0.02), (10, 1e-4, 1.0)])
def test_schedule_rejects_bad_arguments(args):
    with pytest.raises(ValueError):
        linear_beta_schedule(*args)


@given(st.integers(1, 400), st.floats(1e-5, 0.01), st.floats(0.0, 0.05))
def test_alpha_bar_strictly_decreasing(T, b0, extra):
    s = linear_beta_schedule(T, b0, min(b0 + extra, 0.5))
    assert np.all(np.diff(s.alpha_bar) < 0)
    assert 0 < s.alpha_bar[-1] < 1


def test_schedule_round_trip():
    s = linear_beta_schedule(7, 1e-3, 0.1)
    back = DiffusionSchedule.from_dict(s.to_dict())
    assert np.array_equal(back.beta, s.beta)


# ---- corruption


def test_corrupt_example():
    s = DiffusionSchedule(np.array([0.36]))
    out = corrupt(np.array([1.0, 1.0]), 1, np.array([0.5, -0.5]), s)
    assert np.allclose(out, [1.1, 0.5])


def test_corrupt_shape_and_step_errors():
    s = linear_beta_schedule(5)
    with pytest.raises(ValueError):
        corrupt(np.zeros(3), 1, np.zeros(4), s)
    with pytest.raises(ValueError):
        corrupt(np.zeros(3), 0, np.zeros(3), s)
    with pytest.raises(ValueError):
        corrupt(np.zeros(3), 6, np.zeros(3), s)


@pytest.mark.parametrize("t", [1, 50, 200])
def test_corruption_moments(t):
    s = linear_beta_schedule()
    rng = np.random.default_rng(t)
    n = 40_000
    x0 = np.linspace(-1, 1, 5)
    draws = corrupt(np.broadcast_to(x0, (n, 5)), t, rng.standard_normal((n, 5)), s)
    ab = s.alpha_bar[t - 1]
    se_mean = np.sqrt((1 - ab) / n)
    assert np.all(np.abs(draws.mean(0) - np.sqrt(ab) * x0) < 3 * se_mean)
    se_var = (1 - ab) * np.sqrt(2 / (n - 1))
    assert np.all(np.abs(draws.var(0, ddof=1) - (1 - ab)) < 3 * se_var)


def test_corrupt_per_row_steps_torch():
    s = linear_beta_schedule(10)
    x0 = torch.ones(3, 2, 4)
    z = torch.zeros(3, 2, 4)
    out = corrupt(x0, torch.tensor([1, 5, 10]), z, s)
    assert torch.allclose(out[:, 0, 0], torch.tensor(np.sqrt(s.alpha_bar[[0, 4, 9]]), dtype=torch.float32))


# ---- conditioning


def test_condition_layout():
    assert condition_names("U") == []
    assert len(condition_names("WC")) == 32
    assert len(condition_names("WCS")) == 38
    with pytest.raises(ValueError):
        condition_names("XYZ")


def test_daily_stats_order():
    x = np.zeros((1, 2, 48))
    x[0, 0] = np.linspace(-1, 1, 48)
    x[0, 1] = 0.25
    assert np.allclose(daily_stats(x)[0], [-1, 0, 1, 0.25, 0.25, 0.25])


def test_network_conditioning_layout():
    x0 = torch.arange(24.0).reshape(1, 3, 8)
    c = network_conditioning(x0, [0, 0, 1])
    assert c.shape == (1, 6, 8)
    assert torch.all(c[0, :2] == 0) and torch.all(c[0, 2] == x0[0, 2])
    assert torch.all(c[0, 5] == 1) and torch.all(c[0, 3:5] == 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 200), st.integers(0, 2**31 - 1))
def test_restoration_bit_exact_in_training(t, seed):
    s = linear_beta_schedule()
    g = torch.Generator().manual_seed(seed)
    x0 = torch.randn(4, 5, 48, generator=g)
    mask = np.array([0, 0, 1, 1, 1.0])
    batch = TrainingBatch(x0, mask, torch.randn(4, 5, 48, generator=g), torch.full((4,), t))
    x_bar, cond = prepare_inputs(batch, s)
    assert torch.equal(x_bar[:, 2:], x0[:, 2:])
    assert not torch.equal(x_bar[:, :2], x0[:, :2])
    assert torch.equal(cond[:, 2:5], x0[:, 2:])


def test_restoration_bit_exact_while_sampling():
    s = linear_beta_schedule(30)
    cond = torch.randn(3, 4, 48)
    mask = np.array([0, 0, 1, 1.0])
    seen = []

    def check(t, x):
        seen.append(t)
        assert torch.equal(x[:, 2:], cond[:, 2:])

    sample(Zeros(), cond, mask, s, seed=1, callback=check)
    assert seen == list(range(30, 0, -1))


def test_restore_numpy():
    xb = np.full((2, 3, 4), 7.0)
    x0 = np.arange(24.0).reshape(2, 3, 4)
    out = restore_conditions(xb, x0, [0, 1, 0])
    assert np.array_equal(out[:, 1], x0[:, 1]) and np.all(out[:, [0, 2]] == 7.0)


# ---- loss


def _batch(n=512, k=4, T=200, seed=0):
    g = torch.Generator().manual_seed(seed)
    return TrainingBatch.draw(torch.randn(n, k, 48, generator=g), np.array([0, 0, 1, 1.0]), T, g)


def test_loss_zero_for_exact_noise():
    s = linear_beta_schedule()
    batch = _batch()

    class Echo(torch.nn.Module):
        def forward(self, x, cond, steps):
            return batch.z.clone()

    assert float(training_step(batch, Echo(), s)) == 0.0


def test_loss_of_zero_net_is_unit():
    s = linear_beta_schedule()
    # 512 * 2 * 48 > 1e4 generation draws
    loss = float(training_step(_batch(), Zeros(), s))
    assert abs(loss - 1.0) < 0.05


def test_loss_ignores_condition_channels():
    s = linear_beta_schedule()
    batch = _batch(n=16)

    class Wrong(torch.nn.Module):
        def forward(self, x, cond, steps):
            out = batch.z.clone()
            out[:, 2:] += 100.0
            return out

    assert float(training_step(batch, Wrong(), s)) == 0.0


def test_all_condition_mask_rejected():
    s = linear_beta_schedule()
    b = _batch(n=2)
    b.mask = np.ones(4)
    with pytest.raises(ValueError):
        training_step(b, Zeros(), s)


def test_masked_x0_target_available():
    s = linear_beta_schedule()
    loss = training_step(_batch(n=8), Zeros(), s, target="masked-x0")
    assert float(loss) > 0
    with pytest.raises(ValueError):
        training_step(_batch(n=8), Zeros(), s, target="bogus")


# ---- reverse process


def test_single_step_inversion():
    s = DiffusionSchedule(np.array([0.3]))
    rng = np.random.default_rng(0)
    x0, z = rng.standard_normal(48), rng.standard_normal(48)
    x1 = corrupt(x0, 1, z, s)
    assert np.allclose(reverse_step(x1, 1, z, s, rng.standard_normal(48)), x0, atol=1e-9, rtol=0)


def test_reverse_step_noise_only_after_first_step():
    s = linear_beta_schedule(3, 0.1, 0.3)
    x = np.ones(4)
    a = reverse_step(x, 2, np.zeros(4), s, np.zeros(4))
    b = reverse_step(x, 2, np.zeros(4), s, np.ones(4))
    assert np.allclose(b - a, s.sigma[1])
    assert np.array_equal(reverse_step(x, 1, np.zeros(4), s, np.ones(4)), x / np.sqrt(0.9))
    with pytest.raises(ValueError):
        reverse_step(x, 0, x, s, x)


@pytest.mark.parametrize("T", [1, 25])
def test_oracle_net_recovers_fixture(T):
    s = linear_beta_schedule(T, 1e-3, 0.05) if T > 1 else DiffusionSchedule(np.array([0.02]))
    x0 = torch.sin(torch.linspace(0, 6, 48, dtype=torch.float64)).repeat(2, 2, 1)
    cond = torch.cat([x0, torch.ones(2, 1, 48, dtype=torch.float64)], dim=1)
    out = sample(Oracle(torch.cat([x0, cond[:, 2:]], 1), s), cond, [0, 0, 1], s, seed=4)
    assert torch.allclose(out, x0, atol=1e-6, rtol=0)


def test_sampling_is_seeded():
    s = linear_beta_schedule(10)
    cond = torch.randn(5, 3, 48)
    a = sample(Zeros(), cond, [0, 0, 1], s, seed=3)
    b = sample(Zeros(), cond, [0, 0, 1], s, seed=3)
    c = sample(Zeros(), cond, [0, 0, 1], s, seed=4)
    assert torch.equal(a, b) and not torch.equal(a, c)
    chunked = sample(Zeros(), cond, [0, 0, 1], s, seed=3, batch_size=2)
    assert chunked.shape == (5, 2, 48)


def test_divergence_names_step():
    s = linear_beta_schedule(10)

    class Blowup(torch.nn.Module):
        def forward(self, x, cond, steps):
            return torch.full_like(x, float("inf")) if int(steps[0]) == 7 else torch.zeros_like(x)

    with pytest.raises(DivergenceError) as err:
        sample(Blowup(), torch.zeros(1, 2, 48), [0, 0], s)
    assert err.value.step == 7


def test_sample_validates_mask():
    s = linear_beta_schedule(3)
    with pytest.raises(ValueError):
        sample(Zeros(), torch.zeros(1, 3, 48), [0, 0], s)
    with pytest.raises(ValueError):
        sample(Zeros(), torch.zeros(1, 3, 48), [1, 0, 0], s)


# ---- training


TINY = DenoiserConfig(residual_blocks=2, residual_channels=16, skip_channels=16, state_dim=16,
                      step_embedding_dim=32, step_hidden_dim=64)


@pytest.fixture(scope="module")
def wcs_splits(small_toy):
    return conditioned_splits(small_toy, "WCS")


def test_training_lowers_test_loss(wcs_splits, tmp_path):
    tr, te, scaler = wcs_splits
    cfg = TrainConfig(epochs=12, batch_size=16, lr=3e-3, T=50, patience=50, seed=0)
    res = train(tr, te, cfg, TINY, checkpoint_path=tmp_path / "ck.npz", scaler=scaler)
    # an untrained network predicts zeros, whose expected loss is 1
    assert min(res.test_losses) < 0.9
    assert res.checkpoint.exists()

    loaded = load_checkpoint(res.checkpoint)
    assert loaded.encoder.mode == "WCS" and loaded.schedule.T == 50
    assert np.array_equal(loaded.scaler.lo, scaler.lo)
    x = te.tensor()[:3]
    steps = torch.tensor([1, 20, 50])
    cond = network_conditioning(x, te.encoder.mask)
    with torch.no_grad():
        assert torch.equal(loaded.model(x, cond, steps), res.model(x, cond, steps))
    a = generate(loaded, te.subset([0, 1]), seed=9)
    assert a.shape == (2, 2, 48) and np.array_equal(a, generate(res, te.subset([0, 1]), seed=9))


def test_early_stop(wcs_splits):
    tr, te, _ = wcs_splits
    cfg = TrainConfig(epochs=40, batch_size=64, lr=1e-9, T=20, patience=2, min_delta=1.0)
    res = train(tr, te, cfg, TINY)
    assert res.stopped_early and len(res.history) == 3


def test_train_rejects_empty(wcs_splits):
    tr, _, _ = wcs_splits
    with pytest.raises(ValueError):
        train(tr.subset([]), None, TrainConfig(epochs=1))


def test_wrong_checkpoint_kind(tmp_path):
    from lvgen.container import save_container

    save_container(tmp_path / "x.npz", {}, {"kind": "gmm"})
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "x.npz")
