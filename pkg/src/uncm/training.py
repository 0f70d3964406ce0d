"""Training loops: leak-granularity joint training of encoder plus
password model, and password-granularity baseline training.

Each conditional step samples one leak, draws a k-subsample of its
accounts, computes the configuration seed from their emails, and
teacher-forces the same accounts' passwords with the loss averaged per
password. Gradients accumulate over a virtual batch of leaks (averaged)
before a single Adam step; encoder and password model train jointly
through one backward pass. Early stopping keeps the parameters of the
best validation epoch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from . import emails, nn, passmodel
from .dims import ModelDims
from .emails import MalformedEmail
from .model import Uncm, build_uncm, seed_tensor
from .passmodel import CharVocab, SeededModel, sequence_loss


@dataclass
class TrainConfig:
    k: int = 8192  # seed/loss subsample per leak
    virtual_batch: int = 16  # leaks per optimizer step
    baseline_batch: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    patience: int = 5
    max_epochs: int = 50
    vocab_cutoff: int = 300
    private: bool = False  # train the sigmoid-attention DP variant
    clip_norm: float = 1.0

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


@dataclass
class TrainResult:
    model: object
    log: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    skipped_passwords: int = 0


def _usable_accounts(leak, char_vocab: CharVocab, max_len: int):
    """Accounts with a parseable email and an in-keyspace password."""
    usable = []
    skipped = 0
    for account in leak.accounts:
        try:
            emails.parse_email(account.email)
        except MalformedEmail:
            skipped += 1
            continue
        if not char_vocab.supports(account.password, max_len):
            skipped += 1
            continue
        usable.append(account)
    return usable, skipped


def leak_loss(uncm: Uncm, accounts) -> tuple[ag.Tensor, int]:
    """Seed from the accounts' emails, then the teacher-forced loss of
    the same accounts' passwords under the seeded model."""
    psi = seed_tensor(uncm, accounts)
    states = passmodel.project_seed_tensors(uncm.params, uncm.dims, psi)
    passwords = [a.password for a in accounts]
    return sequence_loss(uncm.params, uncm.dims, uncm.char_vocab, passwords, states)


def leak_gradients(uncm: Uncm, accounts) -> tuple[float, dict[str, np.ndarray]]:
    """Loss value and per-parameter gradients for one leak subsample."""
    uncm.params.zero_grad()
    loss, _ = leak_loss(uncm, accounts)
    ag.check_finite(loss.data, "leak loss")
    loss.backward()
    grads = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in uncm.params.values.items()
    }
    return float(loss.data), grads


def train_uncm(
    train_collection,
    valid_collection,
    config: TrainConfig,
    dims: ModelDims,
    rng,
    char_vocab: CharVocab | None = None,
    checkpoint_dir=None,
) -> TrainResult:
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    char_vocab = char_vocab or CharVocab.printable_ascii()
    if not train_collection.leaks or not valid_collection.leaks:
        raise ValueError("training and validation collections must be non-empty")
    vocabs = emails.build_vocabularies(train_collection, config.vocab_cutoff)
    uncm = build_uncm(
        dims, vocabs, char_vocab, rng,
        private=config.private, clip_norm=config.clip_norm,
    )

    skipped_total = 0
    train_leaks = []
    for leak in train_collection.leaks:
        usable, skipped = _usable_accounts(leak, char_vocab, dims.max_len)
        skipped_total += skipped
        if usable:
            train_leaks.append((leak.id, usable))
    if not train_leaks:
        raise ValueError("no usable training accounts")
    # fixed validation subsamples keep the early-stopping signal stable
    valid_leaks = []
    for leak in valid_collection.leaks:
        usable, _ = _usable_accounts(leak, char_vocab, dims.max_len)
        if usable:
            idx = rng.choice(len(usable), size=min(config.k, len(usable)), replace=False)
            valid_leaks.append([usable[int(i)] for i in idx])
    if not valid_leaks:
        raise ValueError("no usable validation accounts")

    log: list[dict] = []
    best_loss = np.inf
    best_params = None
    best_epoch = 0
    bad_epochs = 0
    step = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_leaks))
        for start in range(0, len(order), config.virtual_batch):
            batch_ids = order[start : start + config.virtual_batch]
            grad_sum: dict[str, np.ndarray] = {}
            losses = []
            for li in batch_ids:
                leak_id, usable = train_leaks[int(li)]
                idx = rng.choice(
                    len(usable), size=min(config.k, len(usable)), replace=False
                )
                subsample = [usable[int(i)] for i in idx]
                try:
                    loss_value, grads = leak_gradients(uncm, subsample)
                except ag.NonFiniteError as err:
                    raise ag.NonFiniteError(
                        f"{err} (leak {leak_id!r}, epoch {epoch}, step {step})"
                    ) from err
                losses.append(loss_value)
                for name, g in grads.items():
                    if name in grad_sum:
                        grad_sum[name] += g
                    else:
                        grad_sum[name] = g.copy()
            m = len(batch_ids)
            grad_avg = {name: g / m for name, g in grad_sum.items()}
            nn.adam_update(
                uncm.params, grad_avg,
                lr=config.lr, beta1=config.beta1,
                beta2=config.beta2, eps=config.adam_eps,
            )
            step += 1
            log.append(
                {"epoch": epoch, "step": step,
                 "train_loss": float(np.mean(losses)), "valid_loss": None}
            )
        valid_loss = _validate_uncm(uncm, valid_leaks)
        log.append(
            {"epoch": epoch, "step": step, "train_loss": None,
             "valid_loss": valid_loss}
        )
        if checkpoint_dir is not None:
            _write_checkpoint(checkpoint_dir, epoch, uncm)
        if valid_loss < best_loss:
            best_loss = valid_loss
            best_params = uncm.params.copy()
            best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break
    if best_params is not None:
        uncm.params = best_params
    return TrainResult(
        model=uncm, log=log, best_epoch=best_epoch, skipped_passwords=skipped_total
    )


def _validate_uncm(uncm: Uncm, valid_leaks) -> float:
    losses = []
    with ag.no_grad():
        for accounts in valid_leaks:
            loss, _ = leak_loss(uncm, accounts)
            losses.append(float(loss.data))
    return float(np.mean(losses))


def _write_checkpoint(checkpoint_dir, epoch: int, model) -> None:
    from pathlib import Path

    from . import checkpoint as cp
    from .model import Uncm as _Uncm

    path = Path(checkpoint_dir)
    path.mkdir(parents=True, exist_ok=True)
    if isinstance(model, _Uncm):
        cp.save_uncm(path / f"epoch{epoch:04d}.uncm", model)
    else:
        cp.save_seeded_bundle(path / f"epoch{epoch:04d}.uncm", model)


def train_baseline(
    password_multiset,
    valid_multiset,
    config: TrainConfig,
    dims: ModelDims,
    rng,
    char_vocab: CharVocab | None = None,
    checkpoint_dir=None,
) -> TrainResult:
    """Maximum-likelihood training of the unconditional model (all-zero
    initial states) on the union of training leaks."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    char_vocab = char_vocab or CharVocab.printable_ascii()
    train = [p for p in password_multiset if char_vocab.supports(p, dims.max_len)]
    valid = [p for p in valid_multiset if char_vocab.supports(p, dims.max_len)]
    skipped = len(list(password_multiset)) - len(train)
    if not train or not valid:
        raise ValueError("empty password multiset after filtering")
    params = nn.ParamSet()
    passmodel.add_password_model(params, rng, dims, char_vocab, conditional=False)

    log: list[dict] = []
    best_loss = np.inf
    best_params = None
    best_epoch = 0
    bad_epochs = 0
    step = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train))
        for start in range(0, len(order), config.baseline_batch):
            batch = [train[int(i)] for i in order[start : start + config.baseline_batch]]
            params.zero_grad()
            loss, _ = sequence_loss(params, dims, char_vocab, batch)
            ag.check_finite(loss.data, "baseline loss")
            loss.backward()
            grads = {
                name: (t.grad if t.grad is not None else np.zeros_like(t.data))
                for name, t in params.values.items()
            }
            nn.adam_update(
                params, grads, lr=config.lr, beta1=config.beta1,
                beta2=config.beta2, eps=config.adam_eps,
            )
            step += 1
            if step % 50 == 0:
                log.append(
                    {"epoch": epoch, "step": step,
                     "train_loss": float(loss.data), "valid_loss": None}
                )
        valid_loss = _validate_baseline(params, dims, char_vocab, valid)
        log.append(
            {"epoch": epoch, "step": step, "train_loss": None, "valid_loss": valid_loss}
        )
        if checkpoint_dir is not None:
            _write_checkpoint(
                checkpoint_dir, epoch, passmodel.baseline_model(params, dims, char_vocab)
            )
        if valid_loss < best_loss:
            best_loss = valid_loss
            best_params = params.copy()
            best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break
    if best_params is not None:
        params = best_params
    model = passmodel.baseline_model(params, dims, char_vocab)
    return TrainResult(model=model, log=log, best_epoch=best_epoch,
                       skipped_passwords=skipped)


def _validate_baseline(params, dims, char_vocab, valid, chunk: int = 512) -> float:
    total = 0.0
    with ag.no_grad():
        for start in range(0, len(valid), chunk):
            batch = valid[start : start + chunk]
            loss, _ = sequence_loss(params, dims, char_vocab, batch)
            total += float(loss.data) * len(batch)
    return total / len(valid)
