"""Coupling from the past on finite state spaces."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .driver import ChainSpec, NoiseOracle, make_oracle
from .errors import CouplingFailure, NotApplicable, UsageError
from .rational import stationary_of

DEFAULT_CAP = 1 << 16


@dataclass
class CouplingResult:
    tau: int | None                 # None: cap exceeded
    sample: int | None
    depths_tried: list[int] = field(default_factory=list)

    @property
    def coupled(self) -> bool:
        return self.sample is not None


class _Steps:
    """Cached one-step maps ``i -> j`` on state indices, for negative times."""

    def __init__(self, spec: ChainSpec, oracle: NoiseOracle, trace: dict | None = None):
        if not spec.is_finite:
            raise NotApplicable("coupling from the past needs a finite state space")
        self.spec = spec
        self.oracle = oracle
        self.rows: dict[int, np.ndarray] = {}
        self.trace = trace
        states = np.asarray(spec.states, dtype=np.int64)
        self._order = np.argsort(states)
        self._sorted = states[self._order]

    def ensure(self, t0: int, t1: int) -> None:
        """Tabulate the maps for times in ``[t0, t1)`` not seen yet."""
        missing = [t for t in range(t0, t1) if t not in self.rows]
        if not missing:
            return
        lo, hi = missing[0], missing[-1] + 1
        block = self.spec.transition_block(self.oracle, lo, hi, self.spec.states)
        idx = self._order[np.searchsorted(self._sorted, block)]
        for i, t in enumerate(range(lo, hi)):
            if t not in self.rows:
                self.rows[t] = idx[i]
                if self.trace is not None:
                    self.trace.setdefault(t, idx[i].tolist())

    def compose(self, depth: int) -> np.ndarray:
        """Image at time 0 of every state started at time ``-depth``."""
        self.ensure(-depth, 0)
        m = np.arange(self.spec.n_states)
        for t in range(-depth, 0):
            m = self.rows[t][m]
            if self.trace is not None and self.trace.get(t) != self.rows[t].tolist():
                raise AssertionError(f"innovations at time {t} changed between depths")
        return m


def backward_coupling_time(spec: ChainSpec, oracle: NoiseOracle, cap: int = DEFAULT_CAP) -> int | None:
    """Smallest ``t <= cap`` for which the composed map from ``-t`` to ``0`` is constant, else ``None``."""
    if cap < 1:
        raise UsageError("cap must be >= 1")
    steps = _Steps(spec, oracle)
    # M_{t+1} = M_t o next_{-t-1}: prepend one step at a time, in chunks
    m = np.arange(spec.n_states)
    t = 0
    chunk = 16
    while t < cap:
        hi = min(cap, t + chunk)
        steps.ensure(-hi, -t)
        for s in range(t, hi):
            m = m[steps.rows[-s - 1]]
            if (m == m[0]).all():
                return s + 1
        t = hi
        chunk *= 2
    return None


def coupling(spec: ChainSpec, oracle: NoiseOracle, cap: int = DEFAULT_CAP, trace: dict | None = None) -> CouplingResult:
    """Doubling-depth CFTP; the result carries ``tau`` and the sample when coupled."""
    if cap < 1:
        raise UsageError("cap must be >= 1")
    steps = _Steps(spec, oracle, trace)
    tried = []
    d = 1
    while d <= cap:
        tried.append(d)
        m = steps.compose(d)
        if (m == m[0]).all():
            # a deeper start feeds the same constant map
            steps.ensure(-d - 1, -d)
            assert (m[steps.rows[-d - 1]] == m[0]).all()
            tau = backward_coupling_time(spec, oracle, d)
            return CouplingResult(tau, spec.states[int(m[0])], tried)
        d *= 2
    return CouplingResult(None, None, tried)


def cftp_sample(spec: ChainSpec, oracle: NoiseOracle, cap: int = DEFAULT_CAP, trace: dict | None = None) -> int:
    """Exact draw from the stationary law, or ``CouplingFailure`` if depth ``cap`` does not suffice."""
    res = coupling(spec, oracle, cap, trace)
    if not res.coupled:
        raise CouplingFailure(f"no coalescence up to depth {res.depths_tried[-1]}", res.depths_tried)
    return res.sample


@dataclass
class PiCheck:
    chi2: float
    p_value: float
    frequencies: dict[int, float]
    expected: dict[int, float]
    n_samples: int
    failures: int


def empirical_pi_check(
    spec: ChainSpec,
    n_samples: int,
    base_seed: int,
    master_seed: int = 0,
    cap: int = DEFAULT_CAP,
) -> PiCheck:
    """Chi-square goodness of fit of CFTP draws on streams ``base_seed ..`` against the exact law.

    Failed draws are tolerated (and excluded) while they stay under 0.1%.
    """
    if n_samples < 1:
        raise UsageError("n_samples must be >= 1")
    pi = stationary_of(spec)
    counts = {x: 0 for x in spec.states}
    failures = 0
    for i in range(n_samples):
        try:
            counts[cftp_sample(spec, make_oracle(master_seed, base_seed + i), cap)] += 1
        except CouplingFailure:
            failures += 1
    if failures and failures >= 0.001 * n_samples:
        raise CouplingFailure(f"{failures} of {n_samples} draws failed to couple")
    n_ok = n_samples - failures
    support = [x for x in spec.states if pi[x] > 0]
    freq = {x: counts[x] / n_ok for x in spec.states}
    if len(support) < 2:
        chi2, p = 0.0, 1.0
    else:
        obs = np.array([counts[x] for x in support], dtype=float)
        exp = np.array([float(pi[x]) * n_ok for x in support])
        chi2, p = stats.chisquare(obs, exp)
    return PiCheck(float(chi2), float(p), freq, {x: float(v) for x, v in pi.items()}, n_samples, failures)
