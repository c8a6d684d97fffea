"""Consistent toy restoration GANs trained with manual backpropagation.

The generator sees ``(y, z)`` and outputs only the latent coordinate; the
final estimate is ``(y, G(y, z))`` so consistency is exact. The critic
judges 2-D points without separate access to ``y``. The generator
objective is the non-saturating GAN loss plus ``lambda_R`` times the
attacked shared-seed sensitivity; the critic uses the logistic loss with
an R1 penalty on real points.
"""

import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from scipy.special import expit

from . import nn
from ._validation import InvalidArgument, check_count, make_rng
from .adversarial import AttackConfig, find_attack, robustness_practical
from .distributions import UnitDisk, disk_marginal_inputs, sample
from .estimators import RestorationEstimator
from .metrics import MetricsReport, consistency_error, per_input_std, precision_recall, wasserstein2_exact

__all__ = [
    "TrainConfig",
    "PAPER_PRESET",
    "REDUCED_PRESET",
    "TrainingDiverged",
    "ToyGAN",
    "softplus",
    "generator_loss",
    "critic_loss",
    "critic_loss_grad",
    "generate",
    "train",
    "evaluate",
]

EVAL_ATTACK_SEEDS = 50

# "zero_bias": U(+-1/sqrt(fan_in)) weights, zero biases. "he": weights and
# biases U(+-sqrt(6/fan_in)); nonzero biases spread the ReLU kinks over the
# input range, so the initial generator is not a two-piece linear map.
INIT_SCHEMES = {"zero_bias": dict(gain=1.0, bias=False), "he": dict(gain=math.sqrt(6.0), bias=True)}


def softplus(x):
    return np.logaddexp(0.0, x)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one toy GAN run.

    ``width``/``depth`` give the hidden layers of both networks.
    ``robust_loss_period`` adds the robustness term on every k-th
    generator step. ``stochastic=False`` pins the seed input to 0.
    """

    total_steps: int = 20000
    batch_size: int = 128
    width: int = 512
    depth: int = 4
    gen_lr: float = 1e-4
    critic_lr: float = 1e-4
    adam_betas: tuple = (0.0, 0.9)
    r1_gamma: float = 10.0
    lambda_R: float = 0.0
    stochastic: bool = False
    seed_dim: int = 1
    attack: AttackConfig = field(default_factory=AttackConfig)
    robust_loss_period: int = 1
    normalize_robust: bool = True
    init: str = "he"
    train_size: int = 100000
    val_size: int = 10000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "adam_betas", tuple(float(b) for b in self.adam_betas))
        if isinstance(self.attack, dict):
            object.__setattr__(self, "attack", AttackConfig(**self.attack))
        for name in ("total_steps", "batch_size", "width", "depth", "seed_dim",
                     "robust_loss_period", "train_size", "val_size"):
            check_count(getattr(self, name), name)
        if not (self.lambda_R >= 0 and math.isfinite(self.lambda_R)):
            raise InvalidArgument(f"lambda_R must be >= 0, got {self.lambda_R}")
        if not self.r1_gamma >= 0:
            raise InvalidArgument("r1_gamma must be >= 0")
        if not (self.gen_lr > 0 and self.critic_lr > 0):
            raise InvalidArgument("learning rates must be positive")
        if len(self.adam_betas) != 2 or not all(0 <= b < 1 for b in self.adam_betas):
            raise InvalidArgument("adam_betas must be two values in [0, 1)")
        for name in ("stochastic", "normalize_robust"):
            if not isinstance(getattr(self, name), bool):
                raise InvalidArgument(f"{name} must be a boolean")
        if self.init not in INIT_SCHEMES:
            raise InvalidArgument(f"init must be one of {sorted(INIT_SCHEMES)}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidArgument("seed must be an unsigned 64-bit integer")

    def to_dict(self):
        d = asdict(self)
        d["adam_betas"] = list(self.adam_betas)
        d["attack"] = self.attack.to_dict()
        return d


PAPER_PRESET = TrainConfig()
# Laptop-scale runs: 5x fewer steps and narrower nets, so a larger step
# size; the training-time attack uses fewer seeds than evaluation.
REDUCED_PRESET = TrainConfig(
    total_steps=4000,
    width=128,
    gen_lr=1e-3,
    critic_lr=1e-3,
    attack=AttackConfig(n_seeds=8),
)


class TrainingDiverged(RuntimeError):
    """A loss became non-finite; ``state`` holds a diagnostic dump."""

    def __init__(self, message, state):
        super().__init__(message)
        self.state = state


def _critic_out(critic, points):
    out, trace = nn.forward(critic, points)
    return out[:, 0], trace


def generator_loss(critic, fake_points):
    """Non-saturating loss ``mean softplus(-D(fake))``."""
    d, _ = _critic_out(critic, np.asarray(fake_points, dtype=np.float64).reshape(-1, 2))
    return float(np.mean(softplus(-d)))


def critic_loss(critic, real_points, fake_points, r1_gamma):
    """Logistic critic loss plus ``(gamma/2) mean ||grad_x D(real)||^2``."""
    return critic_loss_grad(critic, real_points, fake_points, r1_gamma)[0]


def critic_loss_grad(critic, real_points, fake_points, r1_gamma):
    """Critic loss, its parameter gradient and the R1 term."""
    real = np.asarray(real_points, dtype=np.float64).reshape(-1, 2)
    fake = np.asarray(fake_points, dtype=np.float64).reshape(-1, 2)
    d_real, tr_real = _critic_out(critic, real)
    d_fake, tr_fake = _critic_out(critic, fake)
    loss = float(np.mean(softplus(-d_real)) + np.mean(softplus(d_fake)))
    g_real, _ = nn.backward(critic, tr_real, (-expit(-d_real) / real.shape[0])[:, None])
    g_fake, _ = nn.backward(critic, tr_fake, (expit(d_fake) / fake.shape[0])[:, None])
    grads = g_real + g_fake
    r1 = 0.0
    if r1_gamma > 0:
        # (gamma/2) mean ||grad||^2 == gamma * mean(0.5 ||grad||^2)
        pen, g_pen = nn.r1_penalty_grad(critic, real)
        r1 = r1_gamma * pen
        grads = grads + r1_gamma * g_pen
    return loss + r1, grads, r1


class ToyGAN(RestorationEstimator):
    """Consistent GAN restoration estimator for the unit-disk toy problem.

    Parameters mirror :class:`TrainConfig`. ``fit(X)`` trains on 2-D
    source samples ``X`` and stores ``generator_``, ``critic_`` and
    ``history_``.
    """

    domain = (-math.inf, math.inf)
    target = UnitDisk()

    def __init__(self, total_steps=4000, batch_size=128, width=128, depth=4, gen_lr=1e-4,
                 critic_lr=1e-4, adam_betas=(0.0, 0.9), r1_gamma=10.0, lambda_R=0.0,
                 stochastic=False, seed_dim=1, attack=None, robust_loss_period=1,
                 normalize_robust=True, init="he", train_size=100000, val_size=10000, seed=0):
        self.total_steps = total_steps
        self.batch_size = batch_size
        self.width = width
        self.depth = depth
        self.gen_lr = gen_lr
        self.critic_lr = critic_lr
        self.adam_betas = adam_betas
        self.r1_gamma = r1_gamma
        self.lambda_R = lambda_R
        self.stochastic = stochastic
        self.seed_dim = seed_dim
        self.attack = attack
        self.robust_loss_period = robust_loss_period
        self.normalize_robust = normalize_robust
        self.init = init
        self.train_size = train_size
        self.val_size = val_size
        self.seed = seed

    @classmethod
    def from_config(cls, cfg):
        return cls(**{f.name: getattr(cfg, f.name) for f in fields(cfg)})

    def get_config(self):
        params = self.get_params()
        if params["attack"] is None:
            params["attack"] = AttackConfig()
        return TrainConfig(**params)

    # -- estimator interface -------------------------------------------------

    def sample_noise(self, rng, n):
        if not self.stochastic:
            return np.zeros(n)
        return rng.random(n)

    def _gen_input(self, y, z):
        z = np.asarray(z, dtype=np.float64)
        if z.ndim == 1:
            z = np.repeat(z[:, None], self.seed_dim, axis=1)
        if not self.stochastic:
            z = np.zeros_like(z)
        return np.column_stack([y, z])

    def _latent(self, y, z):
        out, _ = nn.forward(self.generator_, self._gen_input(y, z))
        return out[:, 0]

    def latent_and_grad(self, y, z):
        """Latent output and its exact derivative in ``y``."""
        out, trace = nn.forward(self.generator_, self._gen_input(y, z))
        _, gin = nn._backward_preacts(self.generator_, trace, np.ones((out.shape[0], 1)))
        return out[:, 0], gin[:, 0]

    # -- training ------------------------------------------------------------

    def fit(self, X=None, y=None):
        """Train on source samples ``X`` (defaults to a fresh disk training set)."""
        cfg = self.get_config()
        if X is None:
            X = sample(UnitDisk(), cfg.train_size, cfg.seed).points
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != 2 or X.shape[0] < cfg.batch_size:
            raise InvalidArgument("X must be an (n, 2) array with n >= batch_size")
        _Trainer(self, cfg, X).run()
        return self

    def history_csv(self, path=None):
        """Per-step losses as CSV ``step,gen_loss,critic_loss,r1,robust_loss``."""
        h = self.history_
        lines = ["step,gen_loss,critic_loss,r1,robust_loss"]
        for i in range(h["gen_loss"].shape[0]):
            lines.append(
                f"{i},{h['gen_loss'][i]:.17g},{h['critic_loss'][i]:.17g},"
                f"{h['r1'][i]:.17g},{h['robust_loss'][i]:.17g}"
            )
        text = "\n".join(lines) + "\n"
        if path is None:
            return text
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        return None

    def save(self, prefix):
        nn.save_params(self.generator_, f"{prefix}_generator.bin")
        nn.save_params(self.critic_, f"{prefix}_critic.bin")


class _Trainer:
    def __init__(self, model, cfg, X):
        self.model = model
        self.cfg = cfg
        self.X = X
        hidden = [cfg.width] * cfg.depth
        scheme = INIT_SCHEMES[cfg.init]
        self.gen = nn.mlp_init([1 + cfg.seed_dim, *hidden, 1], _sub(cfg.seed, 1), **scheme)
        self.critic = nn.mlp_init([2, *hidden, 1], _sub(cfg.seed, 2), **scheme)
        self.gen_opt = nn.adam_init(self.gen, lr=cfg.gen_lr, betas=cfg.adam_betas)
        self.critic_opt = nn.adam_init(self.critic, lr=cfg.critic_lr, betas=cfg.adam_betas)
        self.streams = {name: make_rng(cfg.seed, 50 + i) for i, name in
                        enumerate(("real", "gen_y", "critic_y", "z", "attack"))}
        self.orders = {}

    def _batch(self, name):
        """Next minibatch of training rows for a named stream (shuffled epochs)."""
        order, pos = self.orders.get(name, (None, 0))
        b = self.cfg.batch_size
        if order is None or pos + b > order.shape[0]:
            order, pos = self.streams[name].permutation(self.X.shape[0]), 0
        self.orders[name] = (order, pos + b)
        return self.X[order[pos : pos + b]]

    def _noise(self, n):
        if not self.cfg.stochastic:
            return np.zeros((n, self.cfg.seed_dim))
        return self.streams["z"].random((n, self.cfg.seed_dim))

    def _fake(self, y, z):
        out, trace = nn.forward(self.gen, np.column_stack([y, z]))
        return np.column_stack([y, out[:, 0]]), trace

    def _dump(self, step, losses):
        return {
            "step": step,
            "losses": losses,
            "generator_finite": self.gen.is_finite(),
            "critic_finite": self.critic.is_finite(),
            "generator_max_abs": max(float(np.max(np.abs(a))) for a in self.gen.arrays()),
            "critic_max_abs": max(float(np.max(np.abs(a))) for a in self.critic.arrays()),
        }

    def _robust_term(self, y, step):
        """Robust loss and its generator gradient at a fixed attack ``delta*``."""
        cfg = self.cfg
        self.model.generator_ = self.gen
        s = cfg.attack.n_seeds if cfg.stochastic else 1
        if cfg.stochastic:
            zs = self.streams["attack"].random((y.shape[0], s))
        else:
            zs = np.zeros((y.shape[0], 1))
        delta, _ = find_attack(self.model, y, cfg.attack, seed=_sub(cfg.seed, 1000 + step), z=zs)
        yy = np.repeat(y, s)
        zz = np.repeat(zs.ravel()[:, None], cfg.seed_dim, axis=1)
        base, tr_base = nn.forward(self.gen, np.column_stack([yy, zz]))
        moved, tr_moved = nn.forward(self.gen, np.column_stack([yy + np.repeat(delta, s), zz]))
        diff = moved[:, 0] - base[:, 0]
        norm = cfg.attack.epsilon**2 if cfg.normalize_robust else 1.0
        loss = float(np.mean(np.repeat(delta, s) ** 2 + diff**2)) / norm
        scale = (2.0 * diff / (diff.shape[0] * norm))[:, None]
        g_moved, _ = nn.backward(self.gen, tr_moved, scale)
        g_base, _ = nn.backward(self.gen, tr_base, -scale)
        return loss, g_moved + g_base

    def run(self):
        cfg = self.cfg
        n = cfg.total_steps
        hist = {k: np.zeros(n) for k in ("gen_loss", "critic_loss", "r1", "robust_loss")}
        b = cfg.batch_size
        for step in range(n):
            # Critic step.
            real = self._batch("real")
            y_c = self._batch("critic_y")[:, 0]
            fake, _ = self._fake(y_c, self._noise(b))
            c_loss, c_grads, r1 = critic_loss_grad(self.critic, real, fake, cfg.r1_gamma)

            # Generator step.
            y_g = self._batch("gen_y")[:, 0]
            fake, g_trace = self._fake(y_g, self._noise(b))
            d, c_trace = _critic_out(self.critic, fake)
            g_loss = float(np.mean(softplus(-d)))
            _, gin = nn.backward(self.critic, c_trace, (-expit(-d) / b)[:, None])
            g_grads, _ = nn.backward(self.gen, g_trace, gin[:, 1:2])
            r_loss = 0.0
            if cfg.lambda_R > 0 and step % cfg.robust_loss_period == 0:
                r_loss, r_grads = self._robust_term(y_g, step)
                g_grads = g_grads + cfg.lambda_R * r_grads

            losses = {"gen_loss": g_loss, "critic_loss": c_loss, "r1": r1, "robust_loss": r_loss}
            if not all(math.isfinite(v) for v in losses.values()):
                raise TrainingDiverged(f"non-finite loss at step {step}", self._dump(step, losses))
            for k, v in losses.items():
                hist[k][step] = v

            self.critic_opt, self.critic = nn.adam_step(self.critic_opt, self.critic, c_grads)
            self.gen_opt, self.gen = nn.adam_step(self.gen_opt, self.gen, g_grads)

        self.model.generator_ = self.gen
        self.model.critic_ = self.critic
        self.model.history_ = hist


def _sub(seed, k):
    """Derive a child seed deterministically."""
    return int(make_rng(seed, 99, k).integers(0, 2**63))


def generate(model, y, seed_value=0.0):
    """``(y, G(y, z))`` for a trained model; ``z`` is pinned to 0 when deterministic."""
    return model.restore(np.array([float(y)]), np.array([float(seed_value)]))[0]


def train(cfg):
    """Train a generator/critic pair from a :class:`TrainConfig`."""
    return ToyGAN.from_config(cfg).fit()


def evaluate(est, attack=None, data_seed=0, n=1000, k=5, std_inputs=100, std_seeds=32,
             reference=None, inputs=None, with_w2=False):
    """Quality, robustness and consistency of an estimator on its toy problem.

    Draws ``n`` fresh inputs (unless ``inputs`` is given), one output per
    input, and compares against ``n`` fresh source samples unless
    ``reference`` is given. Robustness uses ``attack`` (default toy
    settings) with 50 seeds for stochastic estimators. ``with_w2`` adds the
    exact W2 between outputs and reference (equal sizes required).
    """
    if attack is None:
        attack = AttackConfig()
    attack = replace(attack, n_seeds=EVAL_ATTACK_SEEDS)
    target = est.target
    if reference is None:
        reference = sample(target, n, _sub(data_seed, 1)).points
    reference = np.asarray(getattr(reference, "points", reference), dtype=np.float64)
    if inputs is not None:
        y = np.asarray(inputs, dtype=np.float64).ravel()
    elif isinstance(target, UnitDisk):
        y = disk_marginal_inputs(n, _sub(data_seed, 2))
    else:
        y = sample(target, n, _sub(data_seed, 2)).points[:, 0]
    fake = est.predict(y, seed=_sub(data_seed, 3))
    precision, recall = precision_recall(reference, fake, k)
    rob = robustness_practical(est, y, attack, seed=_sub(data_seed, 4))
    stds = [per_input_std(est, yi, std_seeds, seed=_sub(data_seed, 5)) for yi in y[:std_inputs]]
    return MetricsReport(
        precision=precision,
        recall=recall,
        robustness_practical=rob,
        per_input_std=float(np.mean(stds)),
        consistency_error=consistency_error(est, y, seed=_sub(data_seed, 6)),
        w2=wasserstein2_exact(reference, fake) if with_w2 else None,
    ), fake
