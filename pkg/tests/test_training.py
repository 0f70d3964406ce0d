import numpy as np
import pytest

from uncm import nn, training
from uncm.dims import tiny_dims
from uncm.leaks import Account, CredentialLeak, LeakCollection
from uncm.passmodel import CharVocab
from uncm.synth import benchmark_spec, synth_generate
from uncm.training import TrainConfig, leak_gradients, train_baseline, train_uncm


def micro_collection(n_leaks=6, size=60, seed=0):
    spec = benchmark_spec(n_leaks=n_leaks, leak_size=(size, size))
    return synth_generate(spec, np.random.default_rng(seed))


def micro_dims():
    return tiny_dims(lstm_hidden=24, char_emb=12, d_seed=16, attn_width=16,
                     username_gru=8, provider_emb=8, domain_emb=8,
                     username_char_emb=6)


def split_collection(coll, n_valid=2):
    return (LeakCollection(coll.leaks[:-n_valid]), LeakCollection(coll.leaks[-n_valid:]))


def test_overfit_single_leak_under_point_two_nats_per_char():
    # one tiny leak of 20 repeated passwords: at desk-scale width the
    # conditional model compresses it below 0.2 nats per character
    # within 200 optimizer steps
    accounts = [Account(f"user{i}@mail.com", "dragon77") for i in range(20)]
    leak = CredentialLeak("only.com", accounts, {"tld": "com"})
    coll = LeakCollection([leak])
    dims = tiny_dims(lstm_hidden=128, char_emb=32)
    config = TrainConfig(k=20, virtual_batch=1, max_epochs=200, patience=200,
                         vocab_cutoff=1)
    result = train_uncm(coll, coll, config, dims, 0)
    uncm = result.model
    from uncm.model import compute_seed

    seed = compute_seed(uncm, accounts, k=20, rng=1)
    seeded = uncm.seeded_model(seed)
    per_char = -seeded.log_prob("dragon77") / len("dragon77" + "$")
    assert per_char < 0.2
    assert len([e for e in result.log if e["train_loss"] is not None]) <= 200


def test_patience_stops_after_consecutive_bad_epochs(monkeypatch):
    coll = micro_collection(n_leaks=2, size=40)
    train, valid = split_collection(coll, 1)
    # scripted validation losses: best at epoch 2, then 5 bad epochs
    script = iter([1.0, 0.9, 0.95, 0.96, 0.97, 0.98, 0.99, 0.5, 0.4])
    seen = []

    def fake_validate(uncm, valid_leaks):
        v = next(script)
        seen.append(v)
        return v

    monkeypatch.setattr(training, "_validate_uncm", fake_validate)
    config = TrainConfig(k=8, virtual_batch=1, max_epochs=50, patience=5,
                         vocab_cutoff=1)
    result = train_uncm(train, valid, config, micro_dims(), 0)
    assert len(seen) == 7  # stopped at epoch 2 + 5
    assert result.best_epoch == 2


def test_patience_returns_best_epoch_parameters(monkeypatch):
    coll = micro_collection(n_leaks=2, size=40)
    train, valid = split_collection(coll, 1)
    script = iter([1.0, 0.9, 0.95, 0.96, 0.97, 0.98, 0.99])
    snapshots = {}
    original = training._validate_uncm

    epoch_counter = {"n": 0}

    def fake_validate(uncm, valid_leaks):
        epoch_counter["n"] += 1
        snapshots[epoch_counter["n"]] = {
            k: t.data.copy() for k, t in uncm.params.values.items()
        }
        return next(script)

    monkeypatch.setattr(training, "_validate_uncm", fake_validate)
    config = TrainConfig(k=8, virtual_batch=1, max_epochs=50, patience=5,
                         vocab_cutoff=1)
    result = train_uncm(train, valid, config, micro_dims(), 0)
    best = snapshots[2]
    for name, tensor in result.model.params.values.items():
        np.testing.assert_array_equal(tensor.data, best[name])


def test_gradient_accumulation_equals_averaging():
    coll = micro_collection(n_leaks=2, size=50)
    dims = micro_dims()
    config = TrainConfig(k=16, virtual_batch=2, max_epochs=1, vocab_cutoff=1)
    from uncm import emails as em
    from uncm.model import build_uncm

    vocabs = em.build_vocabularies(coll, 1)
    rng = np.random.default_rng(0)
    uncm_a = build_uncm(dims, vocabs, CharVocab.printable_ascii(), np.random.default_rng(1))
    uncm_b = build_uncm(dims, vocabs, CharVocab.printable_ascii(), np.random.default_rng(1))
    subsample_1 = coll.leaks[0].accounts[:16]
    subsample_2 = coll.leaks[2].accounts[:16]

    # path A: accumulate then divide
    grad_sum = {}
    for sub in (subsample_1, subsample_2):
        _, grads = leak_gradients(uncm_a, sub)
        for name, g in grads.items():
            grad_sum[name] = grad_sum.get(name, 0) + g
    acc = {name: g / 2 for name, g in grad_sum.items()}
    nn.adam_update(uncm_a.params, acc)

    # path B: average the per-leak gradients, then one step
    g1 = leak_gradients(uncm_b, subsample_1)[1]
    g2 = leak_gradients(uncm_b, subsample_2)[1]
    avg = {name: (g1[name] + g2[name]) / 2 for name in g1}
    nn.adam_update(uncm_b.params, avg)

    for name in uncm_a.params.names():
        np.testing.assert_allclose(
            uncm_a.params[name].data, uncm_b.params[name].data, atol=1e-10
        )


def test_joint_training_reaches_encoder_parameters():
    coll = micro_collection(n_leaks=2, size=50)
    from uncm import emails as em
    from uncm.model import build_uncm

    vocabs = em.build_vocabularies(coll, 1)
    uncm = build_uncm(micro_dims(), vocabs, CharVocab.printable_ascii(),
                      np.random.default_rng(0))
    _, grads = leak_gradients(uncm, coll.leaks[0].accounts[:24])
    encoder_norm = sum(
        np.abs(grads[name]).sum()
        for name in grads
        if name.startswith("sub.") or name.startswith("mix.")
    )
    password_norm = sum(
        np.abs(grads[name]).sum() for name in grads if name.startswith("pm.")
    )
    assert encoder_norm > 0
    assert password_norm > 0


def test_training_reproducible_with_fixed_seed():
    coll = micro_collection(n_leaks=3, size=40)
    train, valid = split_collection(coll)
    config = TrainConfig(k=12, virtual_batch=2, max_epochs=2, vocab_cutoff=1)
    a = train_uncm(train, valid, config, micro_dims(), 7)
    b = train_uncm(train, valid, config, micro_dims(), 7)
    trace_a = [e["train_loss"] for e in a.log if e["train_loss"] is not None]
    trace_b = [e["train_loss"] for e in b.log if e["train_loss"] is not None]
    assert trace_a == trace_b


def test_training_loss_decreases_over_first_epochs():
    # 9 of 10 seeded runs must show strictly decreasing epoch-mean loss
    # over the first 3 epochs
    coll = micro_collection(n_leaks=15, size=150, seed=4)
    train, valid = split_collection(coll, n_valid=3)
    config = TrainConfig(k=32, virtual_batch=1, max_epochs=3, vocab_cutoff=1)
    wins = 0
    for seed in range(10):
        result = train_uncm(train, valid, config, micro_dims(), seed)
        per_epoch = {}
        for e in result.log:
            if e["train_loss"] is not None:
                per_epoch.setdefault(e["epoch"], []).append(e["train_loss"])
        means = [np.mean(per_epoch[ep]) for ep in sorted(per_epoch)]
        if means[0] > means[1] > means[2]:
            wins += 1
    assert wins >= 9


def test_empty_collections_rejected():
    coll = micro_collection(n_leaks=2, size=40)
    with pytest.raises(ValueError):
        train_uncm(LeakCollection([]), coll, TrainConfig(), micro_dims(), 0)


# -- baseline ----------------------------------------------------------------


def test_baseline_architecture_is_conditional_minus_projections():
    from uncm.passmodel import add_password_model

    dims = micro_dims()
    vocab = CharVocab.printable_ascii()
    conditional = nn.ParamSet()
    add_password_model(conditional, np.random.default_rng(0), dims, vocab, True)
    unconditional = nn.ParamSet()
    add_password_model(unconditional, np.random.default_rng(0), dims, vocab, False)
    seed_params = sum(
        t.data.size for n, t in conditional.values.items() if n.startswith("pm.seed_")
    )
    assert seed_params == dims.lstm_layers * 2 * (dims.d_seed * dims.lstm_hidden
                                                  + dims.lstm_hidden)
    assert conditional.n_params() - seed_params == unconditional.n_params()


def test_baseline_overfits_single_password():
    config = TrainConfig(baseline_batch=16, max_epochs=250, patience=250,
                         vocab_cutoff=1)
    result = train_baseline(
        ["sunshine1"] * 64, ["sunshine1"] * 8, config,
        tiny_dims(lstm_hidden=128, char_emb=32), 3,
    )
    prob = np.exp(result.model.log_prob("sunshine1"))
    assert prob > 0.9


def test_baseline_loss_decreases():
    coll = micro_collection(n_leaks=2, size=80, seed=9)
    passwords = coll.all_passwords()
    config = TrainConfig(baseline_batch=32, max_epochs=3, patience=3,
                         vocab_cutoff=1)
    wins = 0
    for seed in range(10):
        result = train_baseline(passwords[:300], passwords[300:360], config,
                                micro_dims(), seed)
        vl = [e["valid_loss"] for e in result.log if e["valid_loss"] is not None]
        if vl[0] > vl[1] > vl[2]:
            wins += 1
    assert wins >= 9


def test_baseline_model_is_zero_state():
    config = TrainConfig(baseline_batch=16, max_epochs=1, vocab_cutoff=1)
    result = train_baseline(["abc"] * 40, ["abc"] * 8, config, micro_dims(), 0)
    assert result.model.seed_id == "baseline"
    assert all(not h.any() and not c.any() for h, c in result.model.states)


def test_checkpoints_written_every_epoch(tmp_path):
    from uncm import checkpoint as cp

    coll = micro_collection(n_leaks=2, size=40)
    train, valid = split_collection(coll, 1)
    config = TrainConfig(k=8, virtual_batch=1, max_epochs=3, patience=10,
                         vocab_cutoff=1)
    ck_uncm = tmp_path / "uncm"
    train_uncm(train, valid, config, micro_dims(), 0, checkpoint_dir=ck_uncm)
    files = sorted(ck_uncm.glob("*.uncm"))
    assert [f.name for f in files] == [f"epoch{e:04d}.uncm" for e in (1, 2, 3)]
    assert cp.load_uncm(files[-1]).dims == micro_dims()

    ck_base = tmp_path / "base"
    bconfig = TrainConfig(baseline_batch=16, max_epochs=2, patience=10,
                          vocab_cutoff=1)
    train_baseline(["abc"] * 40, ["abc"] * 8, bconfig, micro_dims(), 0,
                   checkpoint_dir=ck_base)
    assert len(list(ck_base.glob("*.uncm"))) == 2
    assert cp.load_seeded_bundle(sorted(ck_base.glob("*.uncm"))[0]).seed_id == "baseline"
