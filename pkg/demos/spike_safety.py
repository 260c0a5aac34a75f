"""What a single huge target does to each optimizer.

Runs the binary-regression stream (uniform targets in [0, 1023] with a
65535 spike every 1000 steps) through plain SGD and through the adaptive
variants at a moderate step size, and prints the error around the first
spike. Plain SGD blows up; the normalized variants shrug it off.

Run:  python3 demos/spike_safety.py
"""


from popart.binreg import run_single

ALPHA = 1e-4
BETA = 1e-2

print(f"alpha={ALPHA:g}, beta={BETA:g}, error traces around the step-1000 spike\n")
print(f"{'step':>6} {'sgd':>12} {'art':>12} {'popart':>12}")

records = {m: run_single(m, ALPHA, BETA, seed=0, n_samples=1100) for m in ("sgd", "art", "popart")}
for step in (997, 998, 999, 1000, 1001, 1002, 1005, 1050):
    row = [f"{records[m].rmse[step - 1]:12.4g}" for m in ("sgd", "art", "popart")]
    print(f"{step:>6} " + " ".join(row))

print()
for m, rec in records.items():
    state = "DIVERGED" if rec.diverged else f"area under error curve = {rec.auc:,.0f}"
    print(f"{m:>8}: {state}")
