"""Independent reference computations used by the tests.

Nothing here calls into the recurrences or solvers under test: slice-chain
probabilities are found by enumerating every joint innovation outcome, and
stationary laws by a floating-point eigenvector.
"""

import itertools
from fractions import Fraction

import numpy as np


def brute_pb(spec, E, E_prime):
    """P(B_{t+1} = E' | B_t = E) by enumerating one target per member of E."""
    E = sorted(E)
    target = frozenset(E_prime)
    rows = [[(spec.states[j], p) for j, p in enumerate(spec.matrix[spec.index(y)]) if p] for y in E]
    total = Fraction(0)
    for combo in itertools.product(*rows):
        image = {spec.x_star} | {z for z, _ in combo}
        if image == target:
            prob = Fraction(1)
            for _, p in combo:
                prob *= p
            total += prob
    return total


def subsets_with(spec, max_size=None):
    """All subsets of S containing x*, optionally up to a size."""
    others = [s for s in spec.states if s != spec.x_star]
    top = len(others) if max_size is None else min(len(others), max_size - 1)
    out = []
    for k in range(top + 1):
        for c in itertools.combinations(others, k):
            out.append(tuple(sorted((spec.x_star,) + c)))
    return out


def float_stationary(spec):
    p = np.array([[float(v) for v in row] for row in spec.matrix])
    w, v = np.linalg.eig(p.T)
    k = int(np.argmin(np.abs(w - 1)))
    pi = np.real(v[:, k])
    return pi / pi.sum()


def fraction_inverse_cdf(row, k, bits=53):
    """Index of the state drawn by u = k / 2**bits, cutpoints compared exactly."""
    u = Fraction(k, 1 << bits)
    c = Fraction(0)
    for j, p in enumerate(row):
        c += p
        if u < c:
            return j
    return len(row) - 1
