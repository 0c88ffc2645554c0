"""Why a density-based P-value needs correcting, in the discrete case first.

For a discrete statistic the P-value ``P(p(T) <= p(t0))`` only looks at
the probabilities, never at the labels, so renaming outcomes cannot change
it.  In the continuous case the density picks up a Jacobian when ``T`` is
transformed, and the same quantity stops being well defined.  Run with
``python demos/01_relabeling.py``.
"""

from scipy import stats

from invariant_pvalue import (FinitePmf, chisq_invariant_pvalue, chisq_measured_pvalue,
                              discrete_pvalue, pushforward)

# A fair die rolled twice, summarised by the total.
dice = FinitePmf.from_mapping({(i, j): 1 / 36 for i in range(1, 7) for j in range(1, 7)})
total = pushforward(dice, lambda ij: ij[0] + ij[1])
print("P-value of each total under p(T) <= p(t0):")
for t in total.support:
    print(f"  total {t:2d}: p = {discrete_pvalue(total, t):.4f}")

# Rename the totals with any injective map; every P-value survives.
cubed = pushforward(total, lambda t: (t - 7) ** 3)
same = all(discrete_pvalue(cubed, (t - 7) ** 3) == discrete_pvalue(total, t) for t in total.support)
print(f"\nunchanged after relabelling t -> (t - 7)^3: {same}")

# Continuous analogue.  For x ~ N_k(0, I) and T = x'x, comparing chi-square
# densities of T directly is a different question from comparing densities
# of x on the fibres of T.  The corrected comparison function is
# t^((k-1)/2) e^(-t/2) instead of t^(k/2 - 1) e^(-t/2).
print("\nT = x'x, x ~ N_k(0, I):")
print("  k   t0    corrected  measured   upper tail")
for k, t0 in [(1, 3.84), (3, 0.35), (3, 9.0), (5, 1.0)]:
    print(f"  {k}  {t0:5.2f}   {chisq_invariant_pvalue(k, t0):.4f}     "
          f"{chisq_measured_pvalue(k, t0):.4f}     {stats.chi2.sf(t0, k):.4f}")
print("\nOnly for k = 1 do all three agree; for k > 1 the corrected value is two-sided,")
print("so a suspiciously small x'x is flagged as well as a large one.")
