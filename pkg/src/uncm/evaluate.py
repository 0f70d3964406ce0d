"""Guessing-attack evaluation: curves, averages, gain ratios, the
adaptation experiment, and the membership-inference validation of the
private configuration path."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import attention as att
from . import autograd as ag
from . import dp as dp_mod
from . import emails, nn
from .attention import DpSeedParams
from .autograd import Tensor
from .guessing import MCEstimator, build_estimator
from .model import SOFTMAX, Uncm, compute_seed
from .passmodel import SeededModel, UnsupportedPassword


def default_budgets(max_exp: int = 12) -> np.ndarray:
    return np.array([10.0**e for e in range(max_exp + 1)])


@dataclass
class GuessingCurve:
    budgets: np.ndarray
    fractions: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.budgets, dtype=np.float64)
        f = np.asarray(self.fractions, dtype=np.float64)
        if np.any(np.diff(b) <= 0):
            raise ValueError("budgets must be ascending")
        if np.any(np.diff(f) < 0) or f.min() < 0 or f.max() > 1:
            raise ValueError("fractions must be nondecreasing within [0, 1]")
        self.budgets, self.fractions = b, f

    def at(self, budget: float) -> float:
        idx = np.nonzero(np.isclose(self.budgets, budget))[0]
        if len(idx) == 0:
            raise ValueError(f"budget {budget} not on this curve's grid")
        return float(self.fractions[int(idx[0])])


def guess_numbers(est: MCEstimator, probs: np.ndarray) -> np.ndarray:
    """Vectorized strict-inequality estimates for an array of
    probabilities (same tie band as guessing.guess_number)."""
    from .guessing import TIE_RTOL

    probs = np.asarray(probs, dtype=np.float64)
    if np.any(probs <= 0):
        raise ValueError("probabilities must be positive")
    asc = est.probs_desc[::-1]
    counts = est.n - np.searchsorted(asc, probs * (1.0 + TIE_RTOL), side="right")
    out = np.ones(len(probs))
    nonzero = counts > 0
    out[nonzero] += est.cum_weights[counts[nonzero] - 1]
    return out


def guessing_curve(
    est: MCEstimator, model: SeededModel, leak, budgets=None
) -> GuessingCurve:
    """Fraction of the leak's passwords guessed within each budget;
    passwords outside the modeled key space count as never guessed."""
    budgets = default_budgets() if budgets is None else np.asarray(budgets, float)
    if not leak.accounts:
        raise ValueError("empty leak")
    passwords = leak.passwords()
    supported = [p for p in passwords if model.vocab.supports(p, model.dims.max_len)]
    fractions = np.zeros(len(budgets))
    if supported:
        probs = np.exp(model.log_probs(supported))
        ranks = np.sort(guess_numbers(est, probs))
        fractions = np.searchsorted(ranks, budgets, side="right") / len(passwords)
    return GuessingCurve(budgets=budgets, fractions=fractions)


def average_curves(curves: list[GuessingCurve]) -> GuessingCurve:
    if not curves:
        raise ValueError("no curves to average")
    grid = curves[0].budgets
    for c in curves[1:]:
        if not np.array_equal(c.budgets, grid):
            raise ValueError("curves use different budget grids")
    return GuessingCurve(
        budgets=grid.copy(),
        fractions=np.mean([c.fractions for c in curves], axis=0),
    )


def gain_ratio(curve_a: GuessingCurve, curve_b: GuessingCurve, budget: float):
    """fraction_a / fraction_b at the budget; None when the denominator
    is zero (explicitly undefined, never infinity)."""
    if not np.array_equal(curve_a.budgets, curve_b.budgets):
        raise ValueError("curves use different budget grids")
    a, b = curve_a.at(budget), curve_b.at(budget)
    if b == 0.0:
        return None
    return a / b


def write_curve_csv(curve: GuessingCurve, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("budget,fraction\n")
        for b, fr in zip(curve.budgets, curve.fractions):
            f.write(f"{b:g},{fr:.6f}\n")


# -- adaptation experiment ----------------------------------------------


@dataclass
class AdaptationResult:
    budgets: np.ndarray
    seeded: GuessingCurve
    baseline: GuessingCurve
    seeded_control: GuessingCurve | None = None
    baseline_control: GuessingCurve | None = None
    dp_seeded: GuessingCurve | None = None
    per_leak: dict = field(default_factory=dict)


def adaptation_experiment(
    uncm: Uncm,
    baseline: SeededModel,
    test_collection,
    budgets=None,
    k: int = 512,
    mc_n: int = 20_000,
    rng=None,
    control_collection=None,
    dp_uncm: Uncm | None = None,
    dp_params: DpSeedParams | None = None,
    dp_k: int | None = None,
) -> AdaptationResult:
    """Seed the conditional model per test leak from its emails alone and
    compare guessing curves against the union-trained baseline (plus,
    optionally, the DP-seeded variant and signal-free control leaks).

    The sigmoid variant's seed is an unnormalized sum, so its scale
    depends on the subsample size; dp_k should therefore equal the k the
    DP variant was trained with (dp_k=k by default).
    """
    budgets = default_budgets() if budgets is None else np.asarray(budgets, float)
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    baseline_est = build_estimator(baseline, mc_n, rng)

    def seeded_curves(model_uncm, leaks, dp, seed_k):
        curves = []
        for leak in leaks:
            seed = compute_seed(model_uncm, leak.accounts, k=seed_k, rng=rng,
                                dp_params=dp)
            seeded = model_uncm.seeded_model(seed)
            est = build_estimator(seeded, mc_n, rng)
            curves.append(guessing_curve(est, seeded, leak, budgets))
        return curves

    seeded_avg = average_curves(seeded_curves(uncm, test_collection.leaks, None, k))
    baseline_avg = average_curves(
        [guessing_curve(baseline_est, baseline, leak, budgets)
         for leak in test_collection.leaks]
    )
    result = AdaptationResult(budgets=budgets, seeded=seeded_avg, baseline=baseline_avg)
    if control_collection is not None:
        result.seeded_control = average_curves(
            seeded_curves(uncm, control_collection.leaks, None, k)
        )
        result.baseline_control = average_curves(
            [guessing_curve(baseline_est, baseline, leak, budgets)
             for leak in control_collection.leaks]
        )
    if dp_uncm is not None:
        if dp_params is None:
            raise ValueError("dp_uncm given without dp_params")
        result.dp_seeded = average_curves(
            seeded_curves(dp_uncm, test_collection.leaks, dp_params,
                          dp_k if dp_k is not None else k)
        )
    return result


# -- membership inference -----------------------------------------------


@dataclass
class MiaResult:
    accuracies: list[float]
    mean: float
    std: float
    n_test: int
    bound: float | None = None  # accuracy cap implied by (epsilon, delta)
    epsilon: float | None = None


class Distinguisher:
    """Membership classifier over (seed, email-encoding) pairs: a dense
    stack 512-320-160-80-40-1 with batch normalization and ReLU between
    the inner layers and a sigmoid head."""

    WIDTHS = (512, 320, 160, 80, 40)

    def __init__(self, d_in: int, rng):
        self.params = nn.ParamSet()
        self.running: dict[str, np.ndarray] = {}
        nn.add_dense(self.params, rng, "d0", d_in, self.WIDTHS[0])
        for i in range(1, len(self.WIDTHS)):
            nn.add_dense(self.params, rng, f"d{i}", self.WIDTHS[i - 1], self.WIDTHS[i])
            nn.add_batchnorm(self.params, f"bn{i}", self.WIDTHS[i])
        nn.add_dense(self.params, rng, "head", self.WIDTHS[-1], 1)

    def forward(self, x: Tensor, training: bool) -> Tensor:
        h = nn.dense(self.params, "d0", x)
        for i in range(1, len(self.WIDTHS)):
            h = nn.dense(self.params, f"d{i}", h)
            h = nn.batchnorm(self.params, f"bn{i}", h, self.running, training)
            h = ag.relu(h)
        return ag.sigmoid(nn.dense(self.params, "head", h))

    def predict(self, x: np.ndarray) -> np.ndarray:
        with ag.no_grad():
            return self.forward(Tensor(x), training=False).data[:, 0]


def _bce(p: Tensor, labels: np.ndarray) -> Tensor:
    y = Tensor(labels.reshape(-1, 1))
    eps = 1e-9
    return ag.reduce_mean(
        -(y * ag.log(p + eps) + (1.0 - y) * ag.log(1.0 - p + eps))
    )


def _train_distinguisher(
    features: np.ndarray, labels: np.ndarray, rng, epochs: int = 20,
    batch: int = 256,
) -> Distinguisher:
    d = Distinguisher(features.shape[1], rng)
    n = len(features)
    n_val = max(1, n // 10)
    order = rng.permutation(n)
    val_idx, tr_idx = order[:n_val], order[n_val:]
    best = None
    best_acc = -1.0
    for _ in range(epochs):
        for start in range(0, len(tr_idx), batch):
            idx = tr_idx[start : start + batch]
            if len(idx) < 2:
                continue  # batch statistics need at least two rows
            d.params.zero_grad()
            p = d.forward(Tensor(features[idx]), training=True)
            loss = _bce(p, labels[idx])
            loss.backward()
            grads = {
                name: (t.grad if t.grad is not None else np.zeros_like(t.data))
                for name, t in d.params.values.items()
            }
            nn.adam_update(d.params, grads)
        val_acc = float(
            np.mean((d.predict(features[val_idx]) > 0.5) == (labels[val_idx] > 0.5))
        )
        if val_acc > best_acc:
            best_acc = val_acc
            best = (d.params.copy(), dict(self_copy(d.running)))
    if best is not None:
        d.params, d.running = best
    return d


def self_copy(running: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: v.copy() for k, v in running.items()}


def _mia_examples(
    uncm: Uncm, leaks, k: int, seeds_per_leak: int, rng,
    dp_params: DpSeedParams | None, noise_seeds: bool,
):
    """Balanced (seed || email-encoding, membership) rows; one positive
    and one negative per member slot, emails drawn within the leak."""
    rows = []
    labels = []
    for leak in leaks:
        usable = []
        for account in leak.accounts:
            try:
                emails.parse_email(account.email)
                usable.append(account)
            except emails.MalformedEmail:
                continue
        if len(usable) < 2 * k:
            continue
        with ag.no_grad():
            values = emails.encode_accounts(
                uncm.params, uncm.vocabs, uncm.dims, usable
            ).data
        for _ in range(seeds_per_leak):
            idx = rng.choice(len(usable), size=k, replace=False)
            member_rows = values[idx]
            if noise_seeds:
                psi = rng.normal(size=uncm.dims.d_seed)
            else:
                with ag.no_grad():
                    v = Tensor(member_rows)
                    if uncm.attention == SOFTMAX:
                        psi_t = att.attend_softmax(uncm.params, v)
                    else:
                        z = dp_params.z if dp_params is not None else 0.0
                        s = dp_params.s if dp_params and dp_params.s else uncm.clip_norm
                        psi_t = att.attend_dp(uncm.params, v, s, z, rng)
                psi = psi_t.data[0]
            outside = np.setdiff1d(np.arange(len(usable)), idx)
            neg_idx = rng.choice(outside, size=k, replace=False)
            for row in idx:
                rows.append(np.concatenate([psi, values[row]]))
                labels.append(1.0)
            for row in neg_idx:
                rows.append(np.concatenate([psi, values[row]]))
                labels.append(0.0)
    return np.array(rows), np.array(labels)


def mia_experiment(
    uncm: Uncm,
    collection,
    k: int = 10,
    dp_params: DpSeedParams | None = None,
    rng=None,
    n_runs: int = 3,
    seeds_per_leak: int = 10,
    train_fraction: float = 0.8,
    epochs: int = 20,
    noise_seeds: bool = False,
) -> MiaResult:
    """Train the distinguisher on seeds from held-in leaks and report
    held-out accuracy; labels are balanced by construction."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    leaks = list(collection.leaks)
    if len(leaks) < 20:
        raise ValueError(f"need at least 20 leaks, got {len(leaks)}")
    accuracies = []
    n_test = 0
    for _ in range(n_runs):
        order = rng.permutation(len(leaks))
        n_train = int(len(leaks) * train_fraction)
        train_leaks = [leaks[int(i)] for i in order[:n_train]]
        test_leaks = [leaks[int(i)] for i in order[n_train:]]
        x_train, y_train = _mia_examples(
            uncm, train_leaks, k, seeds_per_leak, rng, dp_params, noise_seeds
        )
        x_test, y_test = _mia_examples(
            uncm, test_leaks, k, seeds_per_leak, rng, dp_params, noise_seeds
        )
        if len(x_train) == 0 or len(x_test) == 0:
            raise ValueError("insufficient data for membership experiment")
        d = _train_distinguisher(x_train, y_train, rng, epochs=epochs)
        acc = float(np.mean((d.predict(x_test) > 0.5) == (y_test > 0.5)))
        accuracies.append(acc)
        n_test = len(x_test)
    bound = None
    epsilon = None
    if dp_params is not None and not noise_seeds:
        # worst case over the evaluated leaks: the largest sampling rate
        q = max(min(1.0, k / len(l.accounts)) for l in leaks)
        epsilon = dp_mod.epsilon_subsampled(dp_params.z, q, dp_params.delta)
        bound = dp_mod.mia_accuracy_bound(epsilon, dp_params.delta)
    return MiaResult(
        accuracies=accuracies,
        mean=float(np.mean(accuracies)),
        std=float(np.std(accuracies)),
        n_test=n_test,
        bound=bound,
        epsilon=epsilon,
    )


def mia_bound_violated(result: MiaResult, confidence: float = 0.99) -> bool:
    """One-sided check: does measured accuracy exceed the DP-implied cap
    beyond sampling noise at the given confidence?"""
    if result.bound is None:
        raise ValueError("result carries no DP bound")
    # normal approximation to the binomial null at the bound
    z = {0.99: 2.326, 0.95: 1.645}.get(confidence)
    if z is None:
        z = math.sqrt(2) * _erfinv(2 * confidence - 1)
    margin = z * math.sqrt(result.bound * (1 - result.bound) / max(result.n_test, 1))
    return result.mean > result.bound + margin


def _erfinv(y: float) -> float:
    # Winitzki approximation; adequate for test thresholds
    a = 0.147
    ln1my2 = math.log(1 - y * y)
    term = 2 / (math.pi * a) + ln1my2 / 2
    return math.copysign(math.sqrt(math.sqrt(term**2 - ln1my2 / a) - term), y)
