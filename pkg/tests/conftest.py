"""Session fixtures: tiny trained models and the two-community benchmark.

The trained fixtures are expensive and shared across test modules;
everything derives from fixed seeds so reruns are reproducible.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from uncm import evaluate, training
from uncm.attention import DpSeedParams
from uncm.dims import ModelDims, tiny_dims
from uncm.leaks import Account, CredentialLeak, LeakCollection, split_train_test
from uncm.model import Uncm
from uncm.passmodel import CharVocab, SeededModel
from uncm.synth import benchmark_spec, control_spec, synth_generate


def _string_sampler(rng: np.random.Generator, chars: str, length_probs):
    lengths = np.arange(len(length_probs))
    char_w = np.linspace(1.0, 0.35, len(chars))
    char_w /= char_w.sum()

    def draw() -> str:
        n = int(rng.choice(lengths, p=length_probs))
        return "".join(chars[int(rng.choice(len(chars), p=char_w))] for _ in range(n))

    return draw


def train_tiny_model(
    chars: str, max_len: int, n_train: int = 3000, epochs: int = 6, seed: int = 5
) -> SeededModel:
    """Small unconditional model fitted to a skewed string distribution;
    probabilities end up well spread, which the rank oracles rely on."""
    rng = np.random.default_rng(seed)
    length_probs = np.linspace(2.0, 1.0, max_len + 1)
    length_probs /= length_probs.sum()
    draw = _string_sampler(rng, chars, length_probs)
    train = [draw() for _ in range(n_train)]
    valid = [draw() for _ in range(400)]
    dims = tiny_dims(lstm_hidden=24, char_emb=12, d_seed=12, max_len=max_len,
                     lstm_layers=3)
    config = training.TrainConfig(
        baseline_batch=64, max_epochs=epochs, patience=3, vocab_cutoff=1
    )
    result = training.train_baseline(
        train, valid, config, dims, rng, CharVocab(chars)
    )
    return result.model


@pytest.fixture(scope="session")
def tiny_abc_model() -> SeededModel:
    """Trained model over alphabet {a, b, c}, max_len 3 (40 strings)."""
    return train_tiny_model("abc", 3)


@pytest.fixture(scope="session")
def tiny_rank_model() -> SeededModel:
    """Trained model over 5 characters, max_len 4 (781 strings)."""
    return train_tiny_model("abcde", 4)


@dataclass
class Benchmark:
    dims: ModelDims
    train: LeakCollection
    test: LeakCollection
    control: LeakCollection
    uncm: Uncm
    baseline: SeededModel
    dp_uncm: Uncm
    dp_params: DpSeedParams


BENCHMARK_LEAK_SIZE = 500
BENCHMARK_LEAKS = 50
TRAIN_K = 64  # seed/loss subsample; DP seeds must reuse it (sum scale)
DP_CLIP_NORM = 1.0
DP_Z = 3.0


def build_benchmark() -> Benchmark:
    spec = benchmark_spec(n_leaks=BENCHMARK_LEAKS,
                          leak_size=(BENCHMARK_LEAK_SIZE, BENCHMARK_LEAK_SIZE))
    collection = synth_generate(spec, np.random.default_rng(1))
    train, test = split_train_test(collection, 0.1, 2)
    control = synth_generate(control_spec(spec, n_leaks=6), np.random.default_rng(3))
    dims = tiny_dims()
    config = training.TrainConfig(
        k=TRAIN_K, virtual_batch=1, max_epochs=120, patience=8, vocab_cutoff=1
    )
    uncm = training.train_uncm(train, test, config, dims, 10).model
    dp_config = training.TrainConfig(
        k=TRAIN_K, virtual_batch=1, max_epochs=120, patience=8, vocab_cutoff=1,
        private=True, clip_norm=DP_CLIP_NORM,
    )
    dp_uncm = training.train_uncm(train, test, dp_config, dims, 12).model
    baseline_config = training.TrainConfig(
        baseline_batch=64, max_epochs=60, patience=5
    )
    baseline = training.train_baseline(
        train.all_passwords(), test.all_passwords(), baseline_config, dims, 11
    ).model
    delta = 1e-2 / BENCHMARK_LEAK_SIZE
    return Benchmark(
        dims=dims, train=train, test=test, control=control,
        uncm=uncm, baseline=baseline, dp_uncm=dp_uncm,
        dp_params=DpSeedParams(z=DP_Z, delta=delta),
    )


@pytest.fixture(scope="session")
def benchmark() -> Benchmark:
    return build_benchmark()


@pytest.fixture(scope="session")
def adaptation_result(benchmark: Benchmark):
    budgets = np.array([1e0, 1e1, 1e2, 1e3, 1e4, 1e6])
    return evaluate.adaptation_experiment(
        benchmark.uncm,
        benchmark.baseline,
        benchmark.test,
        budgets=budgets,
        k=512,
        mc_n=20_000,
        rng=42,
        control_collection=benchmark.control,
        dp_uncm=benchmark.dp_uncm,
        dp_params=benchmark.dp_params,
        dp_k=TRAIN_K,
    )
