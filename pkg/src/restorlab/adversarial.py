"""Inner maximization over input perturbations.

The attacked quantity is the shared-seed sensitivity
``E_z ||G(y, z) - G(y + delta, z)||^2`` maximized over ``|delta| <= eps``.
All routines are vectorized over a batch of scalar inputs; each input's
attack is independent (Adam acts element-wise), so batching does not
couple them.
"""

from dataclasses import asdict, dataclass

import numpy as np

from ._validation import InvalidArgument, as_inputs, check_count, make_rng
from .nn import adam_init, adam_step

__all__ = [
    "AttackConfig",
    "TOY_ATTACK",
    "IMAGE_ATTACK",
    "attack_objective",
    "objective_and_grad",
    "find_attack",
    "ifgsm_attack",
    "robustness_practical",
    "seed_values",
    "check_upper_bound",
]

FD_REL_STEP = 1e-7


@dataclass(frozen=True)
class AttackConfig:
    """Settings for the inner attack.

    ``method`` is ``"adam"`` (projected Adam ascent on the L2 ball) or
    ``"ifgsm"`` (sign steps of size ``alpha``). ``restarts`` random
    starting points are tried and the best kept.
    """

    epsilon: float = 1e-3
    steps: int = 4
    step_size: float = 1e-4
    adam_betas: tuple = (0.9, 0.999)
    n_seeds: int = 50
    method: str = "adam"
    alpha: float | None = None
    restarts: int = 1

    def __post_init__(self):
        object.__setattr__(self, "adam_betas", tuple(float(b) for b in self.adam_betas))
        if self.method not in ("adam", "ifgsm"):
            raise InvalidArgument(f"unknown attack method {self.method!r}")
        if self.method == "adam" and not self.epsilon > 0:
            raise InvalidArgument("epsilon must be positive")
        if self.method == "ifgsm" and not (self.alpha is not None and self.alpha >= 0):
            raise InvalidArgument("ifgsm needs a non-negative alpha")
        if not self.step_size > 0:
            raise InvalidArgument("step_size must be positive")
        if len(self.adam_betas) != 2 or not all(0 <= b < 1 for b in self.adam_betas):
            raise InvalidArgument("adam_betas must be two values in [0, 1)")
        check_count(self.steps, "steps")
        check_count(self.n_seeds, "n_seeds")
        check_count(self.restarts, "restarts")

    def to_dict(self):
        d = asdict(self)
        d["adam_betas"] = list(self.adam_betas)
        return d


TOY_ATTACK = AttackConfig()
# Kept as a named preset only; not used by the toy scenarios.
IMAGE_ATTACK = AttackConfig(epsilon=2.5, steps=5, step_size=1.0, n_seeds=10)


def seed_values(est, n, n_seeds, seed, stream=40):
    """Seed-channel matrix ``(n, S)``; deterministic estimators get one zero column."""
    if not est.stochastic:
        return np.zeros((n, 1))
    return make_rng(seed, stream).random((n, n_seeds))


def _latent_and_grad(est, u, z):
    """Latent output and its derivative in ``u`` for flat vectors."""
    if hasattr(est, "latent_and_grad"):
        return est.latent_and_grad(u, z)
    lo, hi = est.domain
    h = FD_REL_STEP * np.maximum(1.0, np.abs(u))
    up = np.minimum(u + h, hi)
    dn = np.maximum(u - h, lo)
    g = est.restore(u, z)[:, 1]
    d = (est.restore(up, z)[:, 1] - est.restore(dn, z)[:, 1]) / (up - dn)
    return g, d


def _base(est, y, z):
    return est.restore(np.repeat(y, z.shape[1]), z.ravel())[:, 1]


def _pairwise(est, y, delta, z, base=None):
    n, s = z.shape
    uu = np.repeat(y + delta, s)
    if base is None:
        base = _base(est, y, z)
    moved, slope = _latent_and_grad(est, uu, z.ravel())
    diff = (moved - base).reshape(n, s)
    return diff, slope.reshape(n, s)


def objective_and_grad(est, y, delta, z, squared=True, base=None):
    """Per-input objective and its derivative in ``delta``.

    ``squared=False`` uses the un-squared distance
    ``E_z ||G(y, z) - G(y + delta, z)||``. ``base`` may carry the
    precomputed latent outputs at ``y``.
    """
    diff, slope = _pairwise(est, y, delta, z, base)
    sq = delta[:, None] ** 2 + diff**2
    dsq = 2.0 * delta[:, None] + 2.0 * diff * slope
    if squared:
        return sq.mean(axis=1), dsq.mean(axis=1)
    norm = np.sqrt(sq)
    safe = np.where(norm > 0, norm, 1.0)
    return norm.mean(axis=1), np.where(norm > 0, dsq / (2.0 * safe), 0.0).mean(axis=1)


def attack_objective(est, y, delta, z=None, seed=0, n_seeds=50, return_se=False):
    """Mean over shared seeds of ``||G(y, z) - G(y + delta, z)||^2``.

    ``z`` is an ``(n, S)`` seed-value matrix; if omitted it is drawn from
    ``seed``. With ``return_se`` also returns the standard error of the
    mean over seeds.
    """
    y = as_inputs(y)
    delta = np.broadcast_to(as_inputs(delta), y.shape).astype(np.float64)
    if z is None:
        z = seed_values(est, y.shape[0], n_seeds, seed)
    z = np.asarray(z, dtype=np.float64).reshape(y.shape[0], -1)
    diff, _ = _pairwise(est, y, delta, z)
    per_seed = delta[:, None] ** 2 + diff**2
    obj = per_seed.mean(axis=1)
    if not return_se:
        return obj
    s = per_seed.shape[1]
    se = per_seed.std(axis=1, ddof=1) / np.sqrt(s) if s > 1 else np.zeros_like(obj)
    return obj, se


def _project(delta, y, eps, domain):
    lo, hi = domain
    delta = np.clip(delta, -eps, eps)
    return np.clip(delta, lo - y, hi - y)


def find_attack(est, y, cfg=TOY_ATTACK, seed=0, z=None):
    """Projected Adam ascent for the worst perturbation in the ``eps``-ball.

    The objective is stationary at ``delta = 0``, so the first start is
    the better of the antithetic boundary pair ``+-eps * u`` for a random
    unit direction ``u``; further restarts begin uniformly inside the
    ball. Each start takes ``cfg.steps`` Adam steps with a fresh optimizer,
    projecting after every step. Returns ``(delta_star, objective)``
    arrays, keeping the best iterate seen.
    """
    y = as_inputs(y)
    if y.size:
        est.check_inputs(y)
    n = y.shape[0]
    if z is None:
        z = seed_values(est, n, cfg.n_seeds, seed)
    eps = float(cfg.epsilon)
    rng = make_rng(seed, 41)
    best_d = np.zeros(n)
    best_obj = np.full(n, -np.inf)
    base = _base(est, y, z)
    for restart in range(cfg.restarts):
        if restart == 0:
            u = rng.choice(np.array([-1.0, 1.0]), size=n)
            plus = _project(eps * u, y, eps, est.domain)
            minus = _project(-eps * u, y, eps, est.domain)
            o_plus, _ = objective_and_grad(est, y, plus, z, base=base)
            o_minus, _ = objective_and_grad(est, y, minus, z, base=base)
            delta = np.where(o_plus >= o_minus, plus, minus)
        else:
            delta = _project(eps * rng.uniform(-1.0, 1.0, size=n), y, eps, est.domain)
        state = adam_init([delta], lr=cfg.step_size, betas=cfg.adam_betas)
        for step in range(cfg.steps + 1):
            obj, grad = objective_and_grad(est, y, delta, z, base=base)
            better = obj > best_obj
            best_obj = np.where(better, obj, best_obj)
            best_d = np.where(better, delta, best_d)
            if step == cfg.steps:
                break
            state, (delta,) = adam_step(state, [delta], [-grad])
            delta = _project(delta, y, eps, est.domain)
    return best_d, best_obj


def ifgsm_attack(est, y, alpha, steps, n_seeds=10, seed=0, squared=False):
    """Iterative sign-gradient ascent on the shared-seed distance.

    Starts at ``y`` with the seed matrix fixed across steps. The loss is
    the un-squared distance by default. An exactly zero gradient (as at
    the start) is resolved with a seeded random sign.
    """
    y = as_inputs(y)
    check_count(steps, "steps")
    if alpha < 0:
        raise InvalidArgument("alpha must be non-negative")
    est.check_inputs(y)
    n = y.shape[0]
    z = seed_values(est, n, n_seeds, seed)
    ties = make_rng(seed, 42).choice(np.array([-1.0, 1.0]), size=(steps, n))
    lo, hi = est.domain
    base = _base(est, y, z)
    y_t = y.copy()
    for i in range(steps):
        _, grad = objective_and_grad(est, y, y_t - y, z, squared=squared, base=base)
        direction = np.where(grad == 0.0, ties[i], np.sign(grad))
        y_t = np.clip(y_t + alpha * direction, lo, hi)
    return y_t


def robustness_practical(est, inputs, cfg=TOY_ATTACK, seed=0, return_all=False):
    """Mean attacked objective over ``inputs``."""
    y = as_inputs(inputs)
    if y.size == 0:
        raise InvalidArgument("inputs must be nonempty")
    delta, obj = find_attack(est, y, cfg, seed)
    if return_all:
        return float(np.mean(obj)), delta, obj
    return float(np.mean(obj))


def check_upper_bound(est, inputs, cfg=TOY_ATTACK, m=256, replicates=16, seed=0, n_sigma=3.0):
    """Compare the attacked shared-seed objective with the W2^2 sensitivity.

    For each input, ``delta*`` comes from :func:`find_attack`. The
    objective (with its standard error over seeds) should dominate the
    bias-corrected W2^2 estimate up to ``n_sigma`` combined standard
    errors. Returns a dict of per-input arrays and the pass mask; the raw
    (uncorrected) W2^2 is reported alongside.
    """
    from .metrics import w2_conditional_sensitivity, w2_sensitivity_debiased

    y = as_inputs(inputs)
    z = seed_values(est, y.shape[0], cfg.n_seeds, seed)
    delta, _ = find_attack(est, y, cfg, seed=seed, z=z)
    obj, obj_se = attack_objective(est, y, delta, z=z, return_se=True)
    w2 = np.empty_like(y)
    w2_se = np.empty_like(y)
    raw = np.empty_like(y)
    for i, (yi, di) in enumerate(zip(y, delta)):
        child = int(make_rng(seed, 43, i).integers(0, 2**63))
        w2[i], w2_se[i] = w2_sensitivity_debiased(est, yi, di, m, replicates, seed=child)
        raw[i] = w2_conditional_sensitivity(est, yi, di, m, seed=child)
    slack = n_sigma * np.sqrt(obj_se**2 + w2_se**2)
    return {
        "inputs": y,
        "delta": delta,
        "objective": obj,
        "objective_se": obj_se,
        "w2_sq": w2,
        "w2_sq_se": w2_se,
        "w2_sq_raw": raw,
        "passed": obj + slack >= w2,
        "raw_passed": obj + n_sigma * obj_se >= raw,
    }
