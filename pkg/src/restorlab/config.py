"""Scenario configuration files: JSON with strict keys and typed values."""

import json
from dataclasses import dataclass, field, fields, replace

from ._validation import InvalidArgument
from .gan import PAPER_PRESET, REDUCED_PRESET, TrainConfig

__all__ = ["ConfigError", "ScenarioOptions", "ScenarioConfig", "PRESETS", "SCENARIOS", "load_config",
           "parse_config"]

SCENARIOS = ("analytic-demo", "ellipse-demo", "zigzag-sweep", "bound-check", "posterior-check", "toy-gan")

# lambda_R applies to the robust members of the toy GAN grid; the erratic
# members always train with 0.
PRESETS = {
    "reduced": replace(REDUCED_PRESET, lambda_R=0.1),
    "paper": replace(PAPER_PRESET, lambda_R=0.1),
}


class ConfigError(InvalidArgument):
    pass


@dataclass(frozen=True)
class ScenarioOptions:
    """Evaluation knobs shared by the scenarios."""

    n_samples: int = 1000
    k: int = 5
    input_law: str = "marginal"
    reference: str = "fresh"
    frequencies: tuple = (1, 2, 4, 8, 16)
    zigzag_n: int = 2000
    transport_n: int = 10000
    ellipse: tuple = (1.0, 0.5, 0.6, 0.25)
    ellipse_alpha: float = 60.0
    bound_inputs: int = 100
    bound_m: int = 256
    bound_replicates: int = 16
    bound_min_pass: int = 97
    std_seeds: int = 32

    def __post_init__(self):
        if self.input_law not in ("marginal", "uniform"):
            raise InvalidArgument("input_law must be 'marginal' or 'uniform'")
        if self.reference not in ("fresh", "training"):
            raise InvalidArgument("reference must be 'fresh' or 'training'")
        if len(self.ellipse) != 4:
            raise InvalidArgument("ellipse needs four semi-axes")
        for name in ("n_samples", "k", "zigzag_n", "transport_n", "bound_inputs", "bound_m",
                     "bound_replicates", "std_seeds"):
            if getattr(self, name) < 1:
                raise InvalidArgument(f"{name} must be >= 1")
        if not self.frequencies or any(f < 1 for f in self.frequencies):
            raise InvalidArgument("frequencies must be positive integers")
        if not 0 <= self.bound_min_pass <= self.bound_inputs:
            raise InvalidArgument("bound_min_pass must lie in [0, bound_inputs]")

    def to_dict(self):
        return {f.name: list(v) if isinstance(v, tuple) else v
                for f in fields(self) for v in [getattr(self, f.name)]}


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "analytic-demo"
    out_dir: str = "."
    seed: int = 0
    preset: str = "reduced"
    train: TrainConfig = field(default_factory=lambda: PRESETS["reduced"])
    options: ScenarioOptions = field(default_factory=ScenarioOptions)

    def to_dict(self):
        """Everything that determines the results (the output path does not)."""
        return {
            "scenario": self.name,
            "seed": self.seed,
            "preset": self.preset,
            "train": self.train.to_dict(),
            "options": self.options.to_dict(),
        }


def _line_of(text, key):
    pos = text.find(f'"{key}"')
    return text.count("\n", 0, pos) + 1 if pos >= 0 else None


def _where(text, key, path):
    line = _line_of(text, key) if text is not None else None
    loc = f"line {line}: " if line else ""
    return f"{loc}key '{path}'"


def _coerce(value, default, path, where):
    def bad(kind):
        return ConfigError(f"{where}: expected {kind}, got {type(value).__name__}")

    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise bad("a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad("an integer")
        return value
    if isinstance(default, float) or default is None:
        if value is None and default is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad("a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise bad("a string")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise bad("a list")
        proto = default[0] if default else 0.0
        return tuple(_coerce(v, proto, f"{path}[{i}]", where) for i, v in enumerate(value))
    raise ConfigError(f"{where}: unsupported value")


def _apply(obj, data, prefix, text, skip=()):
    if not isinstance(data, dict):
        raise ConfigError(f"{_where(text, prefix, prefix or '<root>')}: expected an object")
    names = {f.name for f in fields(obj)} - set(skip)
    changes = {}
    for key, value in data.items():
        path = f"{prefix}.{key}" if prefix else key
        where = _where(text, key, path)
        if key not in names:
            raise ConfigError(f"{where}: unknown key")
        changes[key] = _coerce(value, getattr(obj, key), path, where)
    try:
        return replace(obj, **changes)
    except InvalidArgument as exc:
        keys = ", ".join(sorted(changes)) or "<defaults>"
        raise ConfigError(f"{prefix or 'config'} ({keys}): {exc}") from None


def parse_config(text, name="analytic-demo", out_dir=".", seed=None, source="<config>"):
    """Build a :class:`ScenarioConfig` from JSON text.

    Top-level keys are :class:`TrainConfig` fields plus ``"attack"``
    (an object of :class:`AttackConfig` fields), ``"options"`` (scenario
    knobs) and ``"preset"`` (``"reduced"`` or ``"paper"``). ``seed``
    overrides the config's master seed when given.
    """
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    data = dict(data)
    preset = data.pop("preset", "reduced")
    if preset not in PRESETS:
        raise ConfigError(f"{source}: {_where(text, 'preset', 'preset')}: unknown preset {preset!r}")
    attack = data.pop("attack", None)
    options = data.pop("options", None)
    try:
        train = _apply(PRESETS[preset], data, "", text, skip=("attack",))
        if attack is not None:
            train = replace(train, attack=_apply(train.attack, attack, "attack", text))
        opts = _apply(ScenarioOptions(), options, "options", text) if options is not None else ScenarioOptions()
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if seed is not None:
        try:
            train = replace(train, seed=seed)
        except InvalidArgument as exc:
            raise ConfigError(f"seed: {exc}") from None
    return ScenarioConfig(name=name, out_dir=str(out_dir), seed=train.seed, preset=preset,
                          train=train, options=opts)


def load_config(path, name="analytic-demo", out_dir=".", seed=None):
    """Read and validate a JSON config file; see :func:`parse_config`."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, name=name, out_dir=out_dir, seed=seed, source=str(path))

