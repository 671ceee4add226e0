"""Model and training configuration, plus the flat key=value config format."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

VARIANTS = ("full", "no_topic", "no_discourse", "no_memory")


@dataclass
class ModelConfig:
    """Everything needed to rebuild a model and reproduce a training run.

    Defaults are the full-scale settings; desk-scale runs override them.
    """

    vocab_size: int = 0  # filled in from the corpus vocabulary
    num_topics: int = 50
    num_discourse: int = 10
    hidden_size: int = 512  # token-level BiGRU output size (both directions)
    memory_embedding: int = 200  # memory slot width, also the predictor GRU size
    word_embedding: int = 200
    factor_hidden: int = 100  # hidden layer of the bag-of-words encoder
    max_len: int = 150  # tokens kept per turn
    dropout: float = 0.2
    mi_weight: float = 0.01
    gumbel_temperature: float = 0.67
    discourse_warmup: int = 0  # epochs with the discourse assignment held uniform
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 80
    patience: int = 5
    variant: str = "full"
    seed: int = 13

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.hidden_size % 2 != 0:
            raise ValueError("hidden_size must be even (split across two GRU directions)")
        for field in ("num_topics", "num_discourse", "hidden_size", "memory_embedding",
                      "word_embedding", "factor_hidden", "max_len"):
            if getattr(self, field) <= 0:
                raise ValueError(f"{field} must be positive")
        if self.discourse_warmup < 0:
            raise ValueError("discourse_warmup must be >= 0")

    @property
    def weight_size(self) -> int:
        """Length of the memory addressing weight (topic block + discourse block)."""
        return self.num_topics + self.num_discourse

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        return cls(**json.loads(text))

    def with_overrides(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)


_INT_FIELDS = {f.name for f in dataclasses.fields(ModelConfig) if f.type == "int"}
_FLOAT_FIELDS = {f.name for f in dataclasses.fields(ModelConfig) if f.type == "float"}


def _typed_value(key: str, value: str, where: str) -> object:
    """Coerce a raw config value to the field's type, or raise naming it."""
    try:
        if key in _INT_FIELDS:
            return int(value)
        if key in _FLOAT_FIELDS:
            return float(value)
    except ValueError:
        raise ValueError(f"{where}: bad value {value!r} for config key {key!r}") from None
    if key == "variant":
        return value
    raise ValueError(f"{where}: unknown config key {key!r}")


def parse_config_file(path: str | Path) -> dict:
    """Parse a flat ``key = value`` config file into a dict of typed values.

    Blank lines and lines starting with ``#`` are ignored. Unknown keys raise
    ValueError naming the key so typos fail loudly rather than silently.
    """
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = _typed_value(key.strip(), value.strip(), f"{path}:{lineno}")
    return values


def parse_override(item: str) -> tuple[str, object]:
    """Parse one command-line ``key=value`` config override."""
    if "=" not in item:
        raise ValueError(f"expected key=value, got {item!r}")
    key, _, value = item.partition("=")
    key = key.strip()
    return key, _typed_value(key, value.strip(), f"override {item!r}")


def write_config_file(path: str | Path, config: ModelConfig) -> None:
    lines = [f"{f.name} = {getattr(config, f.name)}" for f in dataclasses.fields(ModelConfig)]
    Path(path).write_text("\n".join(lines) + "\n")
