"""Generate the bundled synthetic credit-scoring dataset.

A deterministic stand-in with the same shape as the classic German credit
benchmark (1000 cases, 24 numeric covariates, binary response): a mix of
integer-coded categorical-style columns and skewed continuous amounts, with
the response drawn from a sparse logistic model. Regenerating this file
reproduces data/credit_synthetic.csv byte for byte.
"""

import csv
from pathlib import Path

import numpy as np

N, P = 1000, 24
SEED = 20240817


def main() -> None:
    rng = np.random.default_rng(SEED)
    cols = []
    names = []
    for j in range(P):
        kind = j % 4
        if kind == 0:  # ordinal code, small support
            cols.append(rng.integers(1, 5, size=N).astype(float))
            names.append(f"code_{j}")
        elif kind == 1:  # months / counts
            cols.append(rng.poisson(24, size=N).astype(float))
            names.append(f"months_{j}")
        elif kind == 2:  # skewed amounts
            cols.append(np.round(rng.lognormal(7.5, 1.0, size=N), 2))
            names.append(f"amount_{j}")
        else:  # binary indicator
            cols.append(rng.binomial(1, 0.35, size=N).astype(float))
            names.append(f"flag_{j}")
    X = np.column_stack(cols)
    Xs = (X - X.mean(axis=0)) / X.std(axis=0)
    coef = np.zeros(P)
    active = rng.choice(P, size=10, replace=False)
    coef[active] = rng.normal(0.0, 0.8, size=10)
    eta = Xs @ coef - 0.6
    y = (rng.random(N) < 1.0 / (1.0 + np.exp(-eta))).astype(int)

    out = Path(__file__).parent.parent / "data" / "credit_synthetic.csv"
    out.parent.mkdir(exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["response"])
        for i in range(N):
            w.writerow([f"{v:g}" for v in X[i]] + [int(y[i])])
    print(f"wrote {out}: {N} rows, {P} covariates, "
          f"{y.sum()} positive responses")


if __name__ == "__main__":
    main()
