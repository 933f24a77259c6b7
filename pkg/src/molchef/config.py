"""Run configuration: flat ``key = value`` text with typed validation.

An empty config file gives the reference architecture and schedule.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # architecture
    latent_dim: int = 25
    ggnn_steps: int = 4
    node_dim: int = 101
    embed_dim: int = 50
    encoder_hidden: int = 200
    gru_hidden: int = 50
    gru_layers: int = 2
    max_steps: int = 5
    decoder_hidden: int = 128
    property_hidden: int = 40
    # objective and schedule
    lambda_mmd: float = 10.0
    mmd_kernel: str = "imq"
    property_weight: float = 1.0
    lr: float = 0.001
    lr_decay: float = 0.1
    lr_decay_every: int = 40
    epochs: int = 100
    batch_size: int = 8
    # data
    min_count: int = 15
    seed: int = 0
    # retrosynthesis regressor
    retro_hidden: int = 64
    retro_epochs: int = 100
    retro_batch_size: int = 16
    # latent search
    opt_step_size: float = 0.1
    opt_max_steps: int = 1000
    opt_k: int = 10
    walk_sigma: float = 0.1

    def __post_init__(self):
        positive = [
            "latent_dim", "node_dim", "embed_dim", "encoder_hidden", "gru_hidden", "gru_layers",
            "max_steps", "decoder_hidden", "property_hidden", "epochs", "batch_size", "lr_decay_every",
            "min_count", "retro_hidden", "retro_epochs", "retro_batch_size", "opt_max_steps", "opt_k",
        ]
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.ggnn_steps < 0:
            raise ConfigError("ggnn_steps must be >= 0")
        if self.batch_size < 2 or self.retro_batch_size < 1:
            raise ConfigError("batch_size must be >= 2")
        if self.lambda_mmd < 0 or self.property_weight < 0:
            raise ConfigError("loss weights must be >= 0")
        if not (self.lr > 0 and 0 < self.lr_decay <= 1):
            raise ConfigError("lr must be > 0 and lr_decay in (0, 1]")
        if self.mmd_kernel not in ("imq", "rbf"):
            raise ConfigError("mmd_kernel must be 'imq' or 'rbf'")
        if self.opt_step_size < 0 or self.walk_sigma < 0:
            raise ConfigError("step sizes must be >= 0")

    def lr_at(self, epoch: int) -> float:
        return self.lr * self.lr_decay ** (epoch // self.lr_decay_every)

    def replace(self, **changes) -> "RunConfig":
        return RunConfig(**{**asdict(self), **changes})


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str):
    kind = _TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind}") from None


def parse_config(text: str) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw)
    return RunConfig(**values)


def render_config(config: RunConfig) -> str:
    return "".join(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n"
                   for k, v in asdict(config).items())


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
