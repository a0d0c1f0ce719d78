"""Rejection rate of the paired signed-rank test on exchangeable null accuracies."""
import argparse

import numpy as np

from manifold_ssl import synthetic
from manifold_ssl.kernels import KernelSpec
from manifold_ssl.learner import train_svm
from manifold_ssl.stats import paired_test


def null_pair(seed, splits=10):
    """Same learner on two disjoint halves of pure-noise features, over random holdout splits."""
    ds = synthetic.null_noise(seed=seed, n_samples=120, n_features=10)
    lab = ds.index("labeled")
    X, y = ds.modalities["noise"].values[lab], ds.labels[lab]
    rng = np.random.default_rng(seed)
    a, b = [], []
    for _ in range(splits):
        perm = rng.permutation(len(y))
        tr, te = perm[:40], perm[40:]
        for cols, out in ((slice(0, 5), a), (slice(5, 10), b)):
            m = train_svm(X[tr][:, cols], y[tr], KernelSpec("linear"), 1.0)
            out.append(float(np.mean(m.predict(X[te][:, cols]) == y[te])))
    return a, b


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--alpha", type=float, default=0.05)
    args = ap.parse_args()
    p = np.array([paired_test(*null_pair(1000 + t)) for t in range(args.trials)])
    print(f"rejection rate at alpha={args.alpha}: {np.mean(p < args.alpha):.3f} over {args.trials} trials")


if __name__ == "__main__":
    main()
