"""Exhaustive and closed-form random-grouping baselines.

The baseline is the mean population variance of size-k subsets drawn
without replacement from an annotator's history. Enumerating all C(n, k)
subsets gives it exactly; the finite-population identity
E[var_k] = (k - 1) / k * n / (n - 1) * var_n gives it in closed form.
"""
from fractions import Fraction as F
from itertools import combinations
import math

HISTORY = [12, 85, 40, 40, 97, 3, 66, 58, 21, 77, 50, 33]
K = 5


def pvar(v):
    m = F(sum(v), len(v))
    return sum((F(x) - m) ** 2 for x in v) / len(v)


subsets = list(combinations(HISTORY, K))
exhaustive = sum(pvar(s) for s in subsets) / len(subsets)
n = len(HISTORY)
closed = F(K - 1, K) * F(n, n - 1) * pvar(HISTORY)
assert exhaustive == closed
print("n_subsets =", len(subsets), "=", math.comb(n, K))
print("baseline_exact =", exhaustive, "=", float(exhaustive))
print("history_pvar =", float(pvar(HISTORY)))
