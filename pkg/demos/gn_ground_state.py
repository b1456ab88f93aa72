"""Minimize the 1D quotient at s = 1 and compare with the sech^(1/2) closed form."""

from ltlab.solvers import QuotientProblem, sech_quotient, solve_gn


def main():
    exact = sech_quotient()
    for M in (128, 256, 512):
        res = solve_gn(QuotientProblem(1, 1.0, 24.0, M))
        print(f"M={M:4d}  value={res.value:.8f}  gap={res.value - exact:+.2e}  "
              f"preset={res.preset}  steps={len(res.trace) - 1}")
    print(f"closed form {exact:.8f}")


if __name__ == "__main__":
    main()
