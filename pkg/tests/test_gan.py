import math
from dataclasses import replace

import numpy as np
import pytest

from restorlab import InvalidArgument
from restorlab import gan as gan_mod
from restorlab.adversarial import AttackConfig
from restorlab.distributions import UnitDisk, sample
from restorlab.estimators import DiskPosteriorSampler, SineEstimator
from restorlab.gan import (
    PAPER_PRESET,
    REDUCED_PRESET,
    ToyGAN,
    TrainConfig,
    TrainingDiverged,
    critic_loss,
    critic_loss_grad,
    evaluate,
    generate,
    generator_loss,
    softplus,
    train,
)
from restorlab.nn import MlpParams, mlp_init

TINY = TrainConfig(total_steps=30, batch_size=16, width=8, depth=2, gen_lr=1e-3, critic_lr=1e-3,
                   train_size=256, attack=AttackConfig(n_seeds=4), seed=5)


def test_presets():
    assert (PAPER_PRESET.total_steps, PAPER_PRESET.width, PAPER_PRESET.depth) == (20000, 512, 4)
    assert PAPER_PRESET.gen_lr == 1e-4 and PAPER_PRESET.adam_betas == (0.0, 0.9)
    assert PAPER_PRESET.r1_gamma == 10.0 and PAPER_PRESET.attack.epsilon == 1e-3
    assert (REDUCED_PRESET.total_steps, REDUCED_PRESET.width, REDUCED_PRESET.batch_size) == (4000, 128, 128)


@pytest.mark.parametrize("kw", [dict(lambda_R=-1.0), dict(total_steps=0), dict(stochastic=1),
                                dict(adam_betas=(0.9,)), dict(gen_lr=0.0), dict(seed=-3)])
def test_config_rejects(kw):
    with pytest.raises(InvalidArgument):
        replace(TINY, **kw)


def test_config_attack_from_dict():
    cfg = TrainConfig(attack={"epsilon": 0.002, "steps": 2})
    assert cfg.attack.epsilon == 0.002 and cfg.to_dict()["attack"]["steps"] == 2


def test_generator_loss_values():
    zero = mlp_init([2, 4, 1], 0).zeros_like()
    assert generator_loss(zero, np.zeros((5, 2))) == pytest.approx(math.log(2))
    big = MlpParams([(np.zeros((1, 2)), np.array([60.0]))])
    assert generator_loss(big, np.zeros((3, 2))) < 1e-25
    one = MlpParams([(np.zeros((1, 2)), np.array([1.0]))])
    assert generator_loss(one, np.zeros((1, 2))) == pytest.approx(math.log1p(math.exp(-1.0)))
    assert generator_loss(one, np.zeros((1, 2))) == pytest.approx(0.3133, abs=1e-4)
    assert softplus(np.array([-800.0]))[0] == 0.0 and softplus(np.array([800.0]))[0] == 800.0


def test_critic_loss_values():
    zero = mlp_init([2, 4, 1], 0).zeros_like()
    total, _, r1 = critic_loss_grad(zero, np.ones((4, 2)), np.zeros((3, 2)), 10.0)
    assert total == pytest.approx(2 * math.log(2)) and r1 == 0.0
    w = np.array([[0.3, -1.1]])
    lin = MlpParams([(w, np.array([0.2]))])
    rng = np.random.default_rng(0)
    for n in (1, 7):
        real = rng.normal(size=(n, 2))
        _, _, r1 = critic_loss_grad(lin, real, real, 4.0)
        assert r1 == pytest.approx(2.0 * float(np.sum(w * w)))


def test_critic_gradient_matches_fd():
    rng = np.random.default_rng(3)
    critic = mlp_init([2, 8, 1], 7)
    critic = MlpParams([(w, rng.normal(scale=0.2, size=b.shape)) for w, b in critic.layers])
    real, fake = rng.normal(size=(6, 2)), rng.normal(size=(5, 2))
    _, grads, _ = critic_loss_grad(critic, real, fake, 10.0)
    arrs = [a.copy() for a in critic.arrays()]
    h = 1e-5
    for a, g in zip(arrs, grads.arrays()):
        fd = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            old = a[idx]
            a[idx] = old + h
            up = critic_loss(MlpParams.from_arrays(arrs), real, fake, 10.0)
            a[idx] = old - h
            dn = critic_loss(MlpParams.from_arrays(arrs), real, fake, 10.0)
            a[idx] = old
            fd[idx] = (up - dn) / (2 * h)
        assert np.max(np.abs(fd - g)) / max(np.max(np.abs(fd)), 1e-6) < 1e-3


def _model(stochastic=False, gen=None):
    m = ToyGAN(width=8, depth=2, stochastic=stochastic)
    m.generator_ = gen if gen is not None else mlp_init([2, 8, 8, 1], 3)
    return m


def test_generate_consistency_and_pinning():
    m = _model()
    for y in (-0.7, 0.0, 0.25, 3.0):
        assert generate(m, y, 0.4)[0] == y
    assert np.array_equal(generate(m, 0.3, 0.1), generate(m, 0.3, 0.9))
    s = _model(stochastic=True)
    assert not np.array_equal(generate(s, 0.3, 0.1), generate(s, 0.3, 0.9))
    z = _model(gen=mlp_init([2, 8, 8, 1], 3).zeros_like())
    assert np.array_equal(generate(z, 0.6, 0.2), [0.6, 0.0])


def test_latent_gradient_exact():
    m = _model(stochastic=True)
    y = np.array([0.1, -0.3, 0.8])
    z = np.array([0.2, 0.5, 0.9])
    _, g = m.latent_and_grad(y, z)
    h = 1e-6
    fd = (m._latent(y + h, z) - m._latent(y - h, z)) / (2 * h)
    assert np.allclose(g, fd, rtol=1e-5, atol=1e-9)


def test_training_is_deterministic():
    a = train(TINY)
    b = train(TINY)
    assert a.generator_.array_equal(b.generator_)
    assert a.critic_.array_equal(b.critic_)
    c = train(replace(TINY, seed=6))
    assert not a.generator_.array_equal(c.generator_)


def test_robust_training_is_deterministic():
    cfg = replace(TINY, lambda_R=0.1, stochastic=True, total_steps=8)
    a, b = train(cfg), train(cfg)
    assert a.generator_.array_equal(b.generator_)
    assert np.all(a.history_["robust_loss"] > 0)
    assert np.all(np.isfinite(a.history_["gen_loss"]))


def test_robust_period():
    cfg = replace(TINY, lambda_R=0.1, total_steps=9, robust_loss_period=3)
    h = train(cfg).history_["robust_loss"]
    assert np.all(h[::3] > 0) and np.all(h[1::3] == 0) and np.all(h[2::3] == 0)


@pytest.mark.parametrize("stochastic", [False, True])
def test_robust_gradient_at_fixed_delta(monkeypatch, stochastic):
    cfg = replace(TINY, lambda_R=1.0, stochastic=stochastic, attack=AttackConfig(n_seeds=3))
    model = ToyGAN.from_config(cfg)
    X = sample(UnitDisk(), 64, 0).points
    tr = gan_mod._Trainer(model, cfg, X)
    y = np.array([0.1, -0.4, 0.5])
    fixed = np.array([8e-4, -5e-4, 1e-3])
    monkeypatch.setattr(gan_mod, "find_attack", lambda *a, **k: (fixed, None))
    state = tr.streams["attack"].bit_generator.state
    loss, grads = tr._robust_term(y, 0)
    arrs = [a.copy() for a in tr.gen.arrays()]
    h = 1e-6
    for i, (a, g) in enumerate(zip(arrs, grads.arrays())):
        fd = np.zeros_like(a)
        for idx in list(np.ndindex(a.shape))[:12]:
            vals = []
            for sgn in (1, -1):
                a[idx] += sgn * h
                tr.gen = MlpParams.from_arrays(arrs)
                tr.streams["attack"].bit_generator.state = state
                vals.append(tr._robust_term(y, 0)[0])
                a[idx] -= sgn * h
            fd[idx] = (vals[0] - vals[1]) / (2 * h)
            assert fd[idx] == pytest.approx(g[idx], rel=1e-4, abs=1e-6 * max(1.0, abs(loss)))


def test_divergence_guard(monkeypatch):
    def broken(*args, **kw):
        return math.nan, mlp_init([2, 8, 8, 1], 0).zeros_like(), 0.0

    monkeypatch.setattr(gan_mod, "critic_loss_grad", broken)
    with pytest.raises(TrainingDiverged) as info:
        train(TINY)
    assert info.value.state["step"] == 0
    assert "critic_loss" in info.value.state["losses"]


def test_fit_validates_data():
    with pytest.raises(InvalidArgument):
        ToyGAN.from_config(TINY).fit(np.zeros((4, 2)))


def test_history_and_checkpoints(tmp_path):
    m = train(TINY)
    text = m.history_csv()
    lines = text.splitlines()
    assert lines[0] == "step,gen_loss,critic_loss,r1,robust_loss"
    assert len(lines) == TINY.total_steps + 1
    m.save(tmp_path / "tiny")
    from restorlab.nn import load_params

    assert load_params(tmp_path / "tiny_generator.bin").array_equal(m.generator_)
    assert load_params(tmp_path / "tiny_critic.bin").array_equal(m.critic_)


def test_sklearn_params_roundtrip():
    m = ToyGAN.from_config(TINY)
    assert m.get_config() == TINY
    assert m.get_params()["width"] == 8


def test_evaluate_reference_estimators():
    rep, fake = evaluate(DiskPosteriorSampler(), data_seed=1)
    assert rep.precision >= 0.95 and rep.recall >= 0.95
    assert rep.consistency_error == 0.0
    assert fake.shape == (1000, 2)
    det, _ = evaluate(SineEstimator(50), data_seed=1, std_inputs=10)
    assert det.per_input_std == 0.0


def test_evaluate_trained_model_consistency():
    m = train(TINY)
    rep, _ = evaluate(m, data_seed=2, n=200, std_inputs=5)
    assert rep.consistency_error == 0.0
    assert rep.per_input_std == 0.0


@pytest.mark.slow
def test_lambda_monotonicity_small_nets():
    # Robustness should not increase with lambda_R in {0, 0.1, 1}; one
    # inverted seed out of ten is tolerated.
    base = TrainConfig(total_steps=600, width=32, depth=3, gen_lr=1e-3, critic_lr=1e-3, train_size=5000)
    X = sample(UnitDisk(), 5000, 1).points
    inverted = 0
    for s in range(10):
        robs = []
        for lam in (0.0, 0.1, 1.0):
            m = ToyGAN.from_config(replace(base, lambda_R=lam, seed=s)).fit(X)
            rep, _ = evaluate(m, data_seed=3, n=300, std_inputs=2)
            robs.append(rep.robustness_practical)
        inverted += any(b > a for a, b in zip(robs, robs[1:]))
    assert inverted <= 1
