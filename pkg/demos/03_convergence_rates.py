"""How fast the approximations approach the posterior as data accumulate.

On a one-dimensional exponential-rate family (y ~ Exponential(e^theta)), we
measure the total-variation distance to the exact posterior as the sample
size n grows, for three approximations:

  f1  first-order symmetric (Laplace)           -- expected O(1/sqrt(n))
  q1  skewed Laplace                            -- expected O(1/n)
  q2  skewed second-order base (Gaussian x      -- expected O(1/n^2)
      even polynomial correction)

The skew step buys a full factor of sqrt(n), and combining it with a
second-order symmetric base buys another factor of n.  We fit log-log slopes
over the median TV across replicates.

Run:  python3 demos/03_convergence_rates.py
"""

from skewfit.battery import exponential_rate_model
from skewfit.bench import rate_experiment


def main():
    n_list = [25, 50, 100, 200, 400, 800, 1600, 3200, 6400]
    print(f"running 20 replicates at each n in {n_list} ...\n")
    curves = rate_experiment(exponential_rate_model, n_list, n_replicates=20, seed=0)

    print(f"{'variant':>8s} {'fitted slope':>14s} {'expected':>10s}")
    expected = {"f1": "-0.5", "q1": "-1.0", "q2": "-2.0"}
    for name in ("f1", "q1", "q2"):
        c = curves[name]
        print(f"{name:>8s} {c.fitted_slope:14.3f} {expected[name]:>10s}")

    print("\nmedian TV by sample size:")
    print(f"{'n':>6s} " + " ".join(f"{v:>12s}" for v in ("f1", "q1", "q2")))
    for i, n in enumerate(curves["f1"].sample_sizes):
        row = " ".join(f"{curves[v].tv_values[i]:12.3e}" for v in ("f1", "q1", "q2"))
        print(f"{n:>6d} {row}")


if __name__ == "__main__":
    main()
