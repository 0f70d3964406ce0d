"""Architecture dimensions shared across encoder and password model."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict


@dataclass(frozen=True)
class ModelDims:
    """Width settings; desk-scale defaults, every value overridable.

    Full-scale deployments raise these (provider/domain/GRU widths to
    256, seed and attention width to 756, LSTM hidden to 1000, char
    embedding to 512); tests and the CLI default to desk scale.
    """

    username_char_emb: int = 16
    username_gru: int = 32
    provider_emb: int = 32
    domain_emb: int = 32
    attn_width: int = 96
    d_seed: int = 96
    char_emb: int = 32
    lstm_hidden: int = 128
    lstm_layers: int = 3
    max_len: int = 30
    max_username_len: int = 40
    extra_modalities: tuple[str, ...] = field(default_factory=tuple)

    @property
    def d_value(self) -> int:
        return self.username_gru + self.provider_emb + self.domain_emb

    def to_dict(self) -> dict:
        d = asdict(self)
        d["extra_modalities"] = list(self.extra_modalities)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelDims":
        d = dict(d)
        d["extra_modalities"] = tuple(d.get("extra_modalities", ()))
        return cls(**d)


def tiny_dims(**overrides) -> ModelDims:
    """Small widths for fast tests and the synthetic benchmark."""
    base = dict(
        username_char_emb=8,
        username_gru=16,
        provider_emb=16,
        domain_emb=16,
        attn_width=32,
        d_seed=32,
        char_emb=24,
        lstm_hidden=48,
        lstm_layers=3,
        max_len=16,
    )
    base.update(overrides)
    return ModelDims(**base)
