"""Certify the renormalization fixed point at both degrees and print the Koebe constants."""

import time

from fibwild.distortion import koebe_constant, schwarzian_nonpositive
from fibwild.fixpoint import certify_fixed_point


def main():
    for d, N in ((3.8, 100), (5.1, 160)):
        t0 = time.time()
        run = certify_fixed_point(d, N=N, K=N, delta=1e-10)
        c = run.certificate
        E = run.element
        print(f"d={d}: valid={c.valid} eps={c.epsilon:.2e} D={c.Dbound:.2e} ({time.time() - t0:.1f} s)")
        print(f"  F(0) = {E.critical_value()}  t = {E.t}")
        print(f"  Schwarzian <= 0: {schwarzian_nonpositive(E)}  C = {koebe_constant(E).C:.10f}")


if __name__ == "__main__":
    main()
