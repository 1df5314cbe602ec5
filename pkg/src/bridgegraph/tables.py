"""Window-local lookup tables for the follow map.

Simulating many paths through the same time window would otherwise hash the
same ``(t, x)`` keys over and over.  :class:`FollowTable` evaluates the
generator once per key on the window, vectorised with numpy, and answers
``next(t, x)`` from a plain list afterwards.
"""

from __future__ import annotations

import numpy as np

from .driver import ChainSpec, NoiseOracle
from .errors import UsageError


class FollowTable:
    """``next(t, x) = h(x, innovation(t, x))`` for ``t`` in ``[t0, t1)``.

    For countable chains the table covers states ``0..width-1`` and widens
    itself on demand.
    """

    def __init__(self, spec: ChainSpec, oracle: NoiseOracle, t0: int, t1: int):
        if t1 < t0:
            raise UsageError(f"empty window [{t0}, {t1})")
        self.spec = spec
        self.oracle = oracle
        self.t0 = t0
        self.t1 = t1
        if spec.is_finite:
            self._index = spec._index
            self._cols = list(spec.states)
            self._rows = spec.transition_block(oracle, t0, t1, spec.states).tolist()
        else:
            self._index = None
            self._cols = []
            self._rows = [[] for _ in range(t1 - t0)]
            self._widen(8)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self._rows, dtype=np.int64)

    def _widen(self, width: int) -> None:
        start = len(self._cols)
        new = list(range(start, width))
        block = self.spec.transition_block(self.oracle, self.t0, self.t1, new).tolist()
        for row, extra in zip(self._rows, block):
            row.extend(extra)
        self._cols.extend(new)

    def next(self, t: int, x: int) -> int:
        i = t - self.t0
        if i < 0 or t >= self.t1:
            raise UsageError(f"time {t} outside table window [{self.t0}, {self.t1})")
        if self._index is not None:
            return self._rows[i][self._index[x]]
        if x >= len(self._cols):
            self._widen(max(2 * len(self._cols), x + 1))
        return self._rows[i][x]

    def row(self, t: int) -> list[int]:
        """Images of all tabulated states at time ``t`` (finite chains: in ``spec.states`` order)."""
        return self._rows[t - self.t0]
