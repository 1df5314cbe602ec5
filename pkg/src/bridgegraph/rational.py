"""Exact linear algebra over ``Fraction``.

Matrices here are tiny (a handful of states or subsets), so plain Gaussian
elimination over Python rationals is both exact and fast enough.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from .errors import NotApplicable

Matrix = Sequence[Sequence[Fraction]]


def solve(a: Matrix, rhs: Sequence[Fraction]) -> list[Fraction]:
    """Solve ``a x = rhs`` exactly; raises ``NotApplicable`` if ``a`` is singular."""
    n = len(a)
    m = [[Fraction(v) for v in row] + [Fraction(r)] for row, r in zip(a, rhs)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if m[r][col] != 0), None)
        if pivot is None:
            raise NotApplicable("singular system")
        m[col], m[pivot] = m[pivot], m[col]
        inv = 1 / m[col][col]
        m[col] = [v * inv for v in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [vr - f * vc for vr, vc in zip(m[r], m[col])]
    return [m[r][n] for r in range(n)]


def stationary(p: Matrix) -> list[Fraction]:
    """The unique ``pi`` with ``pi P = pi`` and ``sum(pi) = 1``.

    One balance equation is redundant; it is replaced by the normalisation.
    A chain with more than one closed class has no unique solution and raises
    ``NotApplicable``.
    """
    n = len(p)
    a = [[Fraction(p[j][i]) - (1 if i == j else 0) for j in range(n)] for i in range(n)]
    a[-1] = [Fraction(1)] * n
    rhs = [Fraction(0)] * (n - 1) + [Fraction(1)]
    return solve(a, rhs)


def stationary_of(spec) -> dict[int, Fraction]:
    """Stationary law of a finite chain spec, keyed by state id."""
    if not spec.is_finite:
        raise NotApplicable("exact stationary law needs a finite state space")
    return dict(zip(spec.states, stationary(spec.matrix)))
