"""Follow map, state paths, return/merge times and component counts of the Doeblin graph."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from networkx.utils import UnionFind

from .driver import ChainSpec, NoiseMode, NoiseOracle, validate_spec
from .errors import NotApplicable, UsageError
from .tables import FollowTable


@dataclass(frozen=True)
class PathSample:
    """States of ``F^{(t,x)}`` at times ``t, t+1, ..., t+horizon``."""

    start: tuple[int, int]
    horizon: int
    states: tuple[int, ...]

    def at(self, s: int) -> int:
        return self.states[s - self.start[0]]


@dataclass
class ComponentReport:
    predicted_count: int | None
    observed_classes: list[list[tuple[int, int]]]
    converged: bool
    history: list[int] = field(default_factory=list, repr=False)

    @property
    def count(self) -> int:
        return len(self.observed_classes)


def follow(spec: ChainSpec, oracle: NoiseOracle, t: int, x: int) -> int:
    """State at ``t+1`` of the path through ``(t, x)``."""
    spec.check_state(x)
    return spec.next_state(oracle, t, x)


def state_path(spec: ChainSpec, oracle: NoiseOracle, t: int, x: int, horizon: int) -> PathSample:
    if horizon < 0:
        raise UsageError("horizon must be >= 0")
    spec.check_state(x)
    states = [x]
    for s in range(t, t + horizon):
        states.append(spec.next_state(oracle, s, states[-1]))
    return PathSample((t, x), horizon, tuple(states))


def return_time(spec: ChainSpec, oracle: NoiseOracle, t: int, x: int, y: int, cap: int) -> int | None:
    """Smallest ``k >= 1`` with ``F^{(t,x)}_{t+k} = y``; ``None`` if ``k`` would exceed ``cap``."""
    if cap < 1:
        raise UsageError("cap must be >= 1")
    spec.check_state(x)
    spec.check_state(y)
    cur = x
    for k in range(1, cap + 1):
        cur = spec.next_state(oracle, t + k - 1, cur)
        if cur == y:
            return k
    return None


def merge_time(spec: ChainSpec, oracle: NoiseOracle, t: int, x: int, y: int, cap: int) -> int | None:
    """First time ``s >= t`` at which the paths from ``(t, x)`` and ``(t, y)`` coincide.

    Returns ``None`` if they have not met by ``t + cap``.  After a meeting the
    two paths are advanced one more step to confirm they stay together.
    """
    if cap < 0:
        raise UsageError("cap must be >= 0")
    spec.check_state(x)
    spec.check_state(y)
    a, b = x, y
    for s in range(t, t + cap + 1):
        if a == b:
            # confirm permanence one step past the merge
            assert spec.next_state(oracle, s, a) == spec.next_state(oracle, s, b)
            return s
        if s == t + cap:
            break
        a = spec.next_state(oracle, s, a)
        b = spec.next_state(oracle, s, b)
    return None


def predict_components(spec: ChainSpec) -> int:
    """Number of components of the Doeblin graph under fully independent transitions.

    One component per cyclic subclass of each recurrent class: the sum of the
    periods of the closed classes.
    """
    if not spec.is_finite:
        raise NotApplicable("component prediction needs a finite state space")
    if spec.noise_mode is not NoiseMode.PER_STATE:
        raise NotApplicable("component prediction assumes per-state (independent) noise")
    if spec.rule is not None:
        raise NotApplicable("component prediction assumes inverse-CDF transitions")
    report = validate_spec(spec)
    if report.row_errors:
        raise NotApplicable("matrix is not stochastic")
    if not report.recurrent_attracting:
        raise NotApplicable("some transient state never reaches a recurrent class")
    return sum(c.period for c in report.recurrent_classes)


def estimate_graph_components(
    spec: ChainSpec,
    oracle: NoiseOracle,
    window: int,
    probes: Iterable[tuple[int, int]],
) -> ComponentReport:
    """Union-find over probe paths simulated for ``window`` steps past the latest probe start.

    Two probes share a class iff their paths met inside the window.  The
    estimate counts as converged when the class count did not change over the
    final half of the window.
    """
    probes = sorted(set((int(t), spec.check_state(x)) for t, x in probes))
    if not probes:
        raise UsageError("need at least one probe")
    if window < 1:
        raise UsageError("window must be >= 1")
    t_first = probes[0][0]
    t_end = probes[-1][0] + window
    table = FollowTable(spec, oracle, t_first, t_end)

    uf = UnionFind(probes)
    position: dict[tuple[int, int], int] = {}  # probe -> current state
    by_start: dict[int, list[tuple[int, int]]] = {}
    for p in probes:
        by_start.setdefault(p[0], []).append(p)

    history = []
    for s in range(t_first, t_end + 1):
        for p in by_start.get(s, ()):
            position[p] = p[1]
        occupied: dict[int, tuple[int, int]] = {}
        for p, y in position.items():
            if y in occupied:
                uf.union(occupied[y], p)
            else:
                occupied[y] = p
        # probes in one class ride together; keep one representative per state
        position = {p: y for y, p in occupied.items()}
        history.append(len(list(uf.to_sets())))
        if s < t_end:
            position = {p: table.next(s, y) for p, y in position.items()}

    tail = history[len(history) // 2:]
    classes = sorted(sorted(c) for c in uf.to_sets())
    try:
        predicted = predict_components(spec)
    except NotApplicable:
        predicted = None
    return ComponentReport(predicted, classes, converged=len(set(tail)) == 1, history=history)
