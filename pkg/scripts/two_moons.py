"""Transductive SVM / LapSVM / LapSVM_L comparison on two moons with one label per class.

    python scripts/two_moons.py --seeds 20 --gamma 4 --gamma-ambient 1e-3 --gamma-intrinsic 1
"""
import argparse

import numpy as np

from manifold_ssl import synthetic
from manifold_ssl.evaluation import MethodId, transductive_comparison
from manifold_ssl.kernels import KernelSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--first-seed", type=int, default=1)
    ap.add_argument("--gamma", type=float, default=4.0, help="rbf kernel width parameter")
    ap.add_argument("--gamma-ambient", type=float, default=1e-3)
    ap.add_argument("--gamma-intrinsic", type=float, default=1.0)
    ap.add_argument("--neighbors", type=int, default=5)
    args = ap.parse_args()

    spec = KernelSpec("rbf", gamma=args.gamma)
    rows = []
    for seed in range(args.first_seed, args.first_seed + args.seeds):
        ds = synthetic.two_moons(seed)
        X = ds.modalities["moons"].values
        lab, unl = ds.index("labeled"), ds.index("unlabeled")
        acc = transductive_comparison(X[lab], ds.labels[lab], X[unl], ds.labels[unl], spec,
                                      args.gamma_ambient, args.gamma_intrinsic, args.neighbors)
        rows.append([acc[m] for m in (MethodId.SVM, MethodId.LAPSVM, MethodId.LAPSVM_LABELED_ONLY)])
        print(f"seed {seed:3d}  svm {100 * rows[-1][0]:5.1f}  lapsvm {100 * rows[-1][1]:5.1f}  "
              f"lapsvm_L {100 * rows[-1][2]:5.1f}")
    med = np.median(np.array(rows), axis=0)
    print(f"median    svm {100 * med[0]:5.1f}  lapsvm {100 * med[1]:5.1f}  lapsvm_L {100 * med[2]:5.1f}")


if __name__ == "__main__":
    main()
