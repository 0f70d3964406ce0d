"""Command-line entry points: data tooling, training, seeding,
estimation, attacks, the membership-inference check, and the service."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import checkpoint, evaluate, leaks, synth, training
from .attention import DpSeedParams
from .dims import ModelDims, tiny_dims
from .guessing import build_estimator
from .leaks import Account
from .model import compute_seed
from .service import ServiceConfig, run as run_service


def _rng_arg(parser):
    parser.add_argument("--rng-seed", type=int, default=0,
                        help="seed for every randomized step")


def _load_model_any(path):
    arrays, meta = checkpoint.load_container(path)
    kind = meta.get("kind")
    if kind == "uncm":
        return checkpoint.load_uncm(path)
    if kind == "seeded-bundle":
        return checkpoint.load_seeded_bundle(path)
    raise SystemExit(f"{path}: unsupported container kind {kind!r}")


def _resolve_model(args):
    """UNCM container plus (optional) seed file or 'baseline' marker."""
    loaded = _load_model_any(args.model)
    seed_arg = getattr(args, "seed", None)
    if seed_arg is None or seed_arg == "baseline":
        if hasattr(loaded, "baseline_model"):
            return loaded.baseline_model()
        return loaded
    if not hasattr(loaded, "seeded_model"):
        raise SystemExit("--seed requires a full uncm container, not a bundle")
    return loaded.seeded_model(checkpoint.load_seed(seed_arg))


def cmd_synth(args):
    spec = synth.benchmark_spec(n_leaks=args.leaks, leak_size=(args.size, args.size))
    if args.control:
        spec.communities.extend(
            synth.control_spec(spec, n_leaks=args.control,
                               leak_size=(args.size, args.size)).communities
        )
    collection = synth.synth_generate(spec, np.random.default_rng(args.rng_seed))
    leaks.save_collection(collection, args.out, args.format)
    print(f"wrote {len(collection.leaks)} leaks "
          f"({collection.n_accounts()} accounts) to {args.out}")


def cmd_clean(args):
    collection = leaks.load_collection(args.input, args.format)
    result = leaks.clean(collection)
    leaks.save_collection(result.collection, args.out, args.format)
    if args.report:
        Path(args.report).write_text(json.dumps(result.report, indent=2))
    print(json.dumps(result.report, indent=2))


def cmd_split(args):
    collection = leaks.load_collection(args.input, args.format)
    train, test = leaks.split_train_test(collection, args.fraction, args.rng_seed)
    leaks.save_collection(train, args.out_train, args.format)
    leaks.save_collection(test, args.out_test, args.format)
    print(f"train: {len(train.leaks)} leaks, test: {len(test.leaks)} leaks")


def _dims_from_args(args) -> ModelDims:
    return tiny_dims() if args.tiny else ModelDims()


def cmd_train(args):
    config = training.TrainConfig(
        k=args.k,
        virtual_batch=args.virtual_batch,
        max_epochs=args.epochs,
        vocab_cutoff=args.cutoff,
        private=args.private,
    )
    train = leaks.load_collection(args.train, args.format)
    valid = leaks.load_collection(args.valid, args.format)
    result = training.train_uncm(
        train, valid, config, _dims_from_args(args), args.rng_seed,
        checkpoint_dir=args.checkpoint_dir,
    )
    checkpoint.save_uncm(args.out, result.model)
    if args.log:
        with open(args.log, "w") as f:
            for entry in result.log:
                f.write(json.dumps(entry) + "\n")
    print(f"saved model to {args.out} (best epoch {result.best_epoch})")


def cmd_train_baseline(args):
    config = training.TrainConfig(
        baseline_batch=args.batch, max_epochs=args.epochs
    )
    train = leaks.load_collection(args.train, args.format)
    valid = leaks.load_collection(args.valid, args.format)
    result = training.train_baseline(
        train.all_passwords(), valid.all_passwords(), config,
        _dims_from_args(args), args.rng_seed,
        checkpoint_dir=args.checkpoint_dir,
    )
    checkpoint.save_seeded_bundle(args.out, result.model)
    if args.log:
        with open(args.log, "w") as f:
            for entry in result.log:
                f.write(json.dumps(entry) + "\n")
    print(f"saved baseline to {args.out} (best epoch {result.best_epoch})")


def cmd_seed(args):
    uncm = checkpoint.load_uncm(args.model)
    emails_list = [
        line.strip()
        for line in Path(args.emails).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    accounts = [Account(email=e, password="") for e in emails_list]
    dp_params = None
    if args.dp_z is not None:
        if args.dp_delta is None:
            raise SystemExit("--dp-z requires --dp-delta")
        dp_params = DpSeedParams(z=args.dp_z, delta=args.dp_delta)
    seed = compute_seed(uncm, accounts, k=args.k, rng=args.rng_seed,
                        dp_params=dp_params)
    checkpoint.save_seed(args.out, seed)
    print(f"seed {seed.seed_id}: k_used={seed.k_used}")
    if seed.dp is not None:
        print(f"epsilon={seed.dp.epsilon:.4f} (z={seed.dp.z}, "
              f"delta={seed.dp.delta:g}, q={seed.dp.q_rate:.4g})")


def cmd_estimate(args):
    model = _resolve_model(args)
    rng = np.random.default_rng(args.rng_seed)
    est = build_estimator(model, args.mc_n, rng)
    passwords = args.password or [line.rstrip("\n") for line in sys.stdin]
    from .service import strength_label

    for pwd in passwords:
        if not model.vocab.supports(pwd, model.dims.max_len):
            print(f"<outside key space>\tvery strong")
            continue
        logp = model.log_prob(pwd)
        g = est.guess_number(math.exp(logp))
        print(f"log10_guesses={math.log10(g):.2f}\t{strength_label(math.log10(g))}")


def cmd_attack(args):
    model = _resolve_model(args)
    rng = np.random.default_rng(args.rng_seed)
    est = build_estimator(model, args.mc_n, rng)
    collection = leaks.load_collection(args.leak, args.format)
    budgets = evaluate.default_budgets(args.max_exp)
    curves = [
        evaluate.guessing_curve(est, model, leak, budgets)
        for leak in collection.leaks
    ]
    curve = evaluate.average_curves(curves)
    evaluate.write_curve_csv(curve, args.csv)
    print(f"wrote {args.csv}")
    if args.svg:
        import matplotlib

        matplotlib.use("svg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots()
        ax.semilogx(curve.budgets, curve.fractions, marker="o")
        ax.set_xlabel("guesses")
        ax.set_ylabel("guessed fraction")
        fig.savefig(args.svg)
        print(f"wrote {args.svg}")


def cmd_mia(args):
    uncm = checkpoint.load_uncm(args.model)
    collection = leaks.load_collection(args.collection, args.format)
    dp_params = None
    if args.dp_z is not None:
        dp_params = DpSeedParams(z=args.dp_z, delta=args.dp_delta)
    result = evaluate.mia_experiment(
        uncm, collection, k=args.k, dp_params=dp_params,
        rng=args.rng_seed, n_runs=args.runs,
    )
    print(f"accuracy = {result.mean * 100:.2f}% +- {result.std * 100:.2f} "
          f"({result.n_test} held-out examples)")
    if result.bound is not None:
        print(f"dp bound: accuracy <= {result.bound * 100:.2f}% "
              f"(epsilon={result.epsilon:.3f})")


def cmd_serve(args):
    if args.config:
        config = ServiceConfig.load(args.config)
    else:
        if not args.model or not args.data_dir:
            raise SystemExit("serve requires --config or --model plus --data-dir")
        config = ServiceConfig(model_path=args.model, data_dir=args.data_dir,
                               host=args.host, port=args.port)
    run_service(config)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="uncm")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic leak collection")
    p.add_argument("--out", required=True)
    p.add_argument("--leaks", type=int, default=50, help="leaks per community")
    p.add_argument("--size", type=int, default=500, help="accounts per leak")
    p.add_argument("--control", type=int, default=0, help="signal-free leaks")
    p.add_argument("--format", default="colon-lines")
    _rng_arg(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("clean", help="apply the cleaning rules")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--format", default="colon-lines")
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("split", help="leak-level train/test split")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.add_argument("--fraction", type=float, default=0.1)
    p.add_argument("--format", default="colon-lines")
    _rng_arg(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train the conditional model")
    p.add_argument("--train", required=True)
    p.add_argument("--valid", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log")
    p.add_argument("--checkpoint-dir", help="save a checkpoint every epoch")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--k", type=int, default=128)
    p.add_argument("--virtual-batch", type=int, default=16)
    p.add_argument("--cutoff", type=int, default=1)
    p.add_argument("--private", action="store_true",
                   help="train the DP-deployable sigmoid-attention variant")
    p.add_argument("--tiny", action="store_true", help="tiny architecture")
    p.add_argument("--format", default="colon-lines")
    _rng_arg(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("train-baseline", help="train the unconditional baseline")
    p.add_argument("--train", required=True)
    p.add_argument("--valid", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log")
    p.add_argument("--checkpoint-dir", help="save a checkpoint every epoch")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--tiny", action="store_true")
    p.add_argument("--format", default="colon-lines")
    _rng_arg(p)
    p.set_defaults(func=cmd_train_baseline)

    p = sub.add_parser("seed", help="compute a configuration seed")
    p.add_argument("--model", required=True)
    p.add_argument("--emails", required=True, help="file with one address per line")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--dp-z", type=float, default=None)
    p.add_argument("--dp-delta", type=float, default=None)
    _rng_arg(p)
    p.set_defaults(func=cmd_seed)

    p = sub.add_parser("estimate", help="strength-estimate passwords")
    p.add_argument("--model", required=True)
    p.add_argument("--seed", default=None, help="seed file or 'baseline'")
    p.add_argument("--mc-n", type=int, default=20_000)
    p.add_argument("--password", action="append")
    _rng_arg(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("attack", help="guessing curves for a leak collection")
    p.add_argument("--model", required=True)
    p.add_argument("--seed", default=None)
    p.add_argument("--leak", required=True)
    p.add_argument("--csv", required=True)
    p.add_argument("--svg")
    p.add_argument("--mc-n", type=int, default=20_000)
    p.add_argument("--max-exp", type=int, default=12)
    p.add_argument("--format", default="colon-lines")
    _rng_arg(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("mia", help="membership-inference validation")
    p.add_argument("--model", required=True)
    p.add_argument("--collection", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--dp-z", type=float, default=None)
    p.add_argument("--dp-delta", type=float, default=1e-5)
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--format", default="colon-lines")
    _rng_arg(p)
    p.set_defaults(func=cmd_mia)

    p = sub.add_parser("serve", help="run the strength-meter service")
    p.add_argument("--config")
    p.add_argument("--model")
    p.add_argument("--data-dir")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
