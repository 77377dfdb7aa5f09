"""Certified eta_n and zeta_n brackets and the trichotomy verdict at small budgets."""

import argparse

from fibwild.attractor import eta_lower, eta_upper, trichotomy, zeta_lower, zeta_upper
from fibwild.distortion import koebe_constant
from fibwild.fixpoint import certify_fixed_point


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--degree", type=float, default=5.1)
    ap.add_argument("--level", type=int, default=4)
    ap.add_argument("--pieces", type=int, default=4000)
    ap.add_argument("--budget", type=int, default=500)
    args = ap.parse_args()
    N = 100 if args.degree == 3.8 else 160
    E = certify_fixed_point(args.degree, N=N, K=N, delta=1e-10).element
    C = koebe_constant(E).C
    n, M, B = args.level, args.pieces, args.budget
    rep = eta_lower(E, n, M, B).combine(eta_upper(E, n, M, B))
    rep = rep.combine(zeta_lower(E, n, max(M // 10, 10), B, B)).combine(zeta_upper(E, n, 8, 5))
    print(rep.to_text(), end="")
    print(f"C = {C:.6f}")
    print(f"verdict: {trichotomy(rep, C).value}")


if __name__ == "__main__":
    main()
