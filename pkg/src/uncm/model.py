"""Assembly of the full model: sub-encoder + mixing encoder + password
model, and the seed computation that configures a password model from a
set of accounts."""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass

import numpy as np

from . import attention as att
from . import autograd as ag
from . import dp as dp_mod
from . import emails, nn, passmodel
from .attention import ConfigSeed, DpSeedParams
from .autograd import Tensor
from .dims import ModelDims
from .emails import MalformedEmail, Vocabs
from .passmodel import CharVocab, SeededModel

SOFTMAX = "softmax"
SIGMOID = "sigmoid"  # the DP-deployable attention variant


class DpModelMismatch(ValueError):
    """Private seed requested from a model not trained for the DP path."""


@dataclass
class Uncm:
    """Pre-trainable conditional password model plus its configuration
    encoder; `attention` fixes which aggregation the model was trained
    with."""

    dims: ModelDims
    vocabs: Vocabs
    char_vocab: CharVocab
    params: nn.ParamSet
    attention: str = SOFTMAX
    clip_norm: float = 1.0

    @property
    def private_capable(self) -> bool:
        return self.attention == SIGMOID

    def baseline_model(self) -> SeededModel:
        return passmodel.baseline_model(self.params, self.dims, self.char_vocab)

    def seeded_model(self, seed: ConfigSeed) -> SeededModel:
        return passmodel.project_seed(
            seed.psi, self.params, self.dims, self.char_vocab,
            seed_id=seed.seed_id or "seeded",
        )


def build_uncm(
    dims: ModelDims,
    vocabs: Vocabs,
    char_vocab: CharVocab,
    rng,
    private: bool = False,
    clip_norm: float = 1.0,
) -> Uncm:
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    params = nn.ParamSet()
    emails.add_sub_encoder(params, rng, dims, vocabs)
    att.add_mix_encoder(params, rng, dims)
    passmodel.add_password_model(params, rng, dims, char_vocab, conditional=True)
    return Uncm(
        dims=dims,
        vocabs=vocabs,
        char_vocab=char_vocab,
        params=params,
        attention=SIGMOID if private else SOFTMAX,
        clip_norm=clip_norm,
    )


def seed_tensor(uncm: Uncm, accounts, noise_rng=None, z: float = 0.0) -> Tensor:
    """Differentiable seed for a batch of (parseable) accounts.

    The sigmoid variant always clips; noise (std z*s) is only added at
    release time, never during training.
    """
    values = emails.encode_accounts(uncm.params, uncm.vocabs, uncm.dims, accounts)
    if uncm.attention == SOFTMAX:
        return att.attend_softmax(uncm.params, values)
    rng = noise_rng if noise_rng is not None else np.random.default_rng(0)
    return att.attend_dp(uncm.params, values, uncm.clip_norm, z, rng)


def compute_seed(
    uncm: Uncm,
    accounts,
    k: int | None = None,
    rng=None,
    dp_params: DpSeedParams | None = None,
) -> ConfigSeed:
    """Uniformly subsample min(k, n) accounts, encode, and aggregate.

    Malformed accounts inside the subsample are skipped (counted, not
    resampled); the DP path additionally records the privacy account at
    sampling rate k_used / n.
    """
    if not accounts:
        raise ValueError("account list is empty")
    if dp_params is not None and not uncm.private_capable:
        raise DpModelMismatch(
            "private seed requested, but this model was trained with the "
            "softmax path; load the DP-trained variant"
        )
    if k is None:
        k = att.DEFAULT_K_PRIVATE if dp_params is not None else att.DEFAULT_K_STANDARD
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    rng_seed = rng if isinstance(rng, (int, np.integer)) else None
    gen = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    n = len(accounts)
    idx = gen.choice(n, size=min(k, n), replace=False)
    chosen = []
    skipped = 0
    for i in idx:
        account = accounts[int(i)]
        try:
            emails.parse_email(account.email)
        except MalformedEmail:
            skipped += 1
            continue
        chosen.append(account)
    if not chosen:
        raise MalformedEmail("every sampled account has an unparseable email")
    k_used = len(chosen)
    with ag.no_grad():
        values = emails.encode_accounts(uncm.params, uncm.vocabs, uncm.dims, chosen)
        if uncm.attention == SOFTMAX:
            psi = att.attend_softmax(uncm.params, values)
        else:
            z = dp_params.z if dp_params is not None else 0.0
            s = _dp_clip_norm(uncm, dp_params)
            psi = att.attend_dp(uncm.params, values, s, z, gen)
    account_record = None
    if dp_params is not None:
        account_record = dp_mod.account_for_seed(
            z=dp_params.z,
            s=_dp_clip_norm(uncm, dp_params),
            k_used=k_used,
            population=n,
            delta=dp_params.delta,
        )
    return ConfigSeed(
        psi=psi.data[0].copy(),
        k_used=k_used,
        dp=account_record,
        rng_seed=int(rng_seed) if rng_seed is not None else None,
        skipped_malformed=skipped,
        seed_id=new_seed_id(),
        created_at=time.time(),
    )


def _dp_clip_norm(uncm: Uncm, dp_params: DpSeedParams | None) -> float:
    if dp_params is not None and dp_params.s is not None:
        return dp_params.s
    return uncm.clip_norm


def new_seed_id() -> str:
    return uuid.uuid4().hex[:16]
