"""Scratch full-scale benchmark validation (not shipped): mirrors what
tests/conftest.py builds, plus the DP path and the MIA checks."""
import sys
import time

import numpy as np

sys.path.insert(0, "tests")
from conftest import build_benchmark

from uncm import dp as dp_mod
from uncm import evaluate

t0 = time.time()
bench = build_benchmark()
print(f"[{time.time()-t0:7.1f}s] benchmark trained", flush=True)

budgets = np.array([1e0, 1e1, 1e2, 1e3, 1e4, 1e6])
result = evaluate.adaptation_experiment(
    bench.uncm, bench.baseline, bench.test, budgets=budgets, k=512,
    mc_n=20_000, rng=42, control_collection=bench.control,
    dp_uncm=bench.dp_uncm, dp_params=bench.dp_params,
)
print(f"[{time.time()-t0:7.1f}s] curves done", flush=True)
print("budget     seeded  baseline  dp-seed  ctrl-s  ctrl-b")
for i, b in enumerate(budgets):
    print(f"{b:8.0e}  {result.seeded.fractions[i]:.4f}  "
          f"{result.baseline.fractions[i]:.4f}    "
          f"{result.dp_seeded.fractions[i]:.4f}   "
          f"{result.seeded_control.fractions[i]:.4f}  "
          f"{result.baseline_control.fractions[i]:.4f}")
small = budgets <= 1e3
factor = (result.seeded.fractions[small].mean()
          / max(result.baseline.fractions[small].mean(), 1e-12))
print("adaptation factor:", round(factor, 3))
diff = np.abs(result.seeded_control.fractions[small]
              - result.baseline_control.fractions[small])
print("control diff pts (<=1e3):", np.round(100 * diff, 2))
dp_lo = result.baseline.fractions[small] - 0.02
dp_hi = result.seeded.fractions[small] + 0.02
dp_mid = result.dp_seeded.fractions[small]
print("dp ordering ok:", bool(np.all(dp_mid >= dp_lo) and np.all(dp_mid <= dp_hi)))

mia = evaluate.mia_experiment(bench.uncm, bench.train, k=10, rng=77, n_runs=3)
print(f"[{time.time()-t0:7.1f}s] MIA non-private: {mia.mean:.4f} +- {mia.std:.4f} "
      f"(n_test={mia.n_test})", flush=True)
mia_dp = evaluate.mia_experiment(bench.dp_uncm, bench.train, k=10,
                                 dp_params=bench.dp_params, rng=78, n_runs=3)
print(f"[{time.time()-t0:7.1f}s] MIA dp: {mia_dp.mean:.4f} +- {mia_dp.std:.4f} "
      f"bound={mia_dp.bound:.4f} eps={mia_dp.epsilon:.4f} "
      f"violated={evaluate.mia_bound_violated(mia_dp)}", flush=True)
mia_noise = evaluate.mia_experiment(bench.uncm, bench.train, k=10, rng=79,
                                    n_runs=5, noise_seeds=True)
print(f"[{time.time()-t0:7.1f}s] MIA noise control: {mia_noise.mean:.4f} "
      f"+- {mia_noise.std:.4f}", flush=True)
