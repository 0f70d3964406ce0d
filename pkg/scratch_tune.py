"""Scratch tuning run for trainer hyperparameters (not shipped)."""
import sys
import time

import numpy as np

from uncm import evaluate, training
from uncm.dims import tiny_dims
from uncm.leaks import split_train_test
from uncm.synth import benchmark_spec, control_spec, synth_generate

n_leaks = int(sys.argv[1]) if len(sys.argv) > 1 else 30
size = int(sys.argv[2]) if len(sys.argv) > 2 else 300
vb = int(sys.argv[3]) if len(sys.argv) > 3 else 2
epochs = int(sys.argv[4]) if len(sys.argv) > 4 else 120
k = int(sys.argv[5]) if len(sys.argv) > 5 else 48

t0 = time.time()
spec = benchmark_spec(n_leaks=n_leaks, leak_size=(size, size))
coll = synth_generate(spec, np.random.default_rng(1))
train, test = split_train_test(coll, 0.1, 2)
control = synth_generate(control_spec(spec, n_leaks=4, leak_size=(size, size)),
                         np.random.default_rng(3))
dims = tiny_dims()
config = training.TrainConfig(k=k, virtual_batch=vb, max_epochs=epochs,
                              patience=8, vocab_cutoff=1)
res = training.train_uncm(train, test, config, dims, 10)
uncm = res.model
vl = [e["valid_loss"] for e in res.log if e["valid_loss"] is not None]
print(f"[{time.time()-t0:6.1f}s] uncm best epoch {res.best_epoch}, "
      f"valid: {vl[0]:.2f} -> {min(vl):.2f}", flush=True)

bl_cfg = training.TrainConfig(baseline_batch=64, max_epochs=20, patience=3)
bl = training.train_baseline(train.all_passwords(), test.all_passwords(),
                             bl_cfg, dims, 11)
blv = [e["valid_loss"] for e in bl.log if e["valid_loss"] is not None]
print(f"[{time.time()-t0:6.1f}s] baseline best epoch {bl.best_epoch}, "
      f"valid: {blv[0]:.2f} -> {min(blv):.2f}", flush=True)

budgets = np.array([1e0, 1e1, 1e2, 1e3])
result = evaluate.adaptation_experiment(
    uncm, bl.model, test, budgets=budgets, k=512, mc_n=8000, rng=42,
    control_collection=control,
)
print(f"[{time.time()-t0:6.1f}s] budget  seeded  baseline  ctrl-s  ctrl-b", flush=True)
for i, b in enumerate(budgets):
    print(f"{b:8.0e} {result.seeded.fractions[i]:.4f}  "
          f"{result.baseline.fractions[i]:.4f}    "
          f"{result.seeded_control.fractions[i]:.4f}  "
          f"{result.baseline_control.fractions[i]:.4f}", flush=True)
small = budgets <= 1e3
print("factor:", result.seeded.fractions[small].mean()
      / max(result.baseline.fractions[small].mean(), 1e-12))
diff = np.abs(result.seeded_control.fractions - result.baseline_control.fractions)
print("control max diff pts:", 100 * diff.max())

# dp variant quick check when invoked with a 6th arg
if len(sys.argv) > 6 and sys.argv[6] == "dp":
    from uncm.attention import DpSeedParams

    dp_cfg = training.TrainConfig(k=k, virtual_batch=vb, max_epochs=epochs,
                                  patience=8, vocab_cutoff=1, private=True,
                                  clip_norm=1.0)
    dp_res = training.train_uncm(train, test, dp_cfg, dims, 12)
    dvl = [e["valid_loss"] for e in dp_res.log if e["valid_loss"] is not None]
    print(f"[{time.time()-t0:6.1f}s] dp uncm best {dp_res.best_epoch}, "
          f"valid {dvl[0]:.2f} -> {min(dvl):.2f}", flush=True)
    dp_params = DpSeedParams(z=3.0, delta=1e-2 / size)
    r2 = evaluate.adaptation_experiment(
        uncm, bl.model, test, budgets=budgets, k=512, mc_n=8000, rng=43,
        dp_uncm=dp_res.model, dp_params=dp_params, dp_k=k,
    )
    print("budget   seeded  baseline  dp")
    for i, b in enumerate(budgets):
        print(f"{b:8.0e} {r2.seeded.fractions[i]:.4f}  "
              f"{r2.baseline.fractions[i]:.4f}    {r2.dp_seeded.fractions[i]:.4f}")
    lo = r2.baseline.fractions[small] - 0.02
    hi = r2.seeded.fractions[small] + 0.02
    mid = r2.dp_seeded.fractions[small]
    print("dp ordering ok:", bool(np.all(mid >= lo) and np.all(mid <= hi)))
