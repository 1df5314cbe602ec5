"""Finite windows of the bridge graph and what can be read off them.

A slab is built the way one simulates the bridge graph in practice: start a
path at ``(s, x*)`` for every ``s`` in the window ``[a, b]`` and run it to
``b``.  The union of these paths is the windowed graph; its time-``t`` slice
evolves as ``{x*} | {next(t-1, y) : y in slice(t-1)}``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .driver import ChainSpec, NoiseOracle
from .errors import NotReady, UsageError
from .tables import FollowTable

Vertex = tuple[int, int]


@dataclass(frozen=True)
class BridgeSlab:
    interval: tuple[int, int]
    base_state: int
    slices: tuple[tuple[int, ...], ...]
    successors: tuple[dict[int, int], ...]
    spine_included: bool = True

    @property
    def a(self) -> int:
        return self.interval[0]

    @property
    def b(self) -> int:
        return self.interval[1]

    def times(self) -> range:
        return range(self.a, self.b + 1)

    def slice(self, t: int) -> tuple[int, ...]:
        return self.slices[t - self.a]

    def next(self, t: int, y: int) -> int:
        return self.successors[t - self.a][y]

    def __contains__(self, v: Vertex) -> bool:
        t, y = v
        return self.a <= t <= self.b and y in self.slices[t - self.a]

    def vertices(self) -> Iterator[Vertex]:
        for t, sl in zip(self.times(), self.slices):
            for y in sl:
                yield (t, y)

    @property
    def n_vertices(self) -> int:
        return sum(len(s) for s in self.slices)

    def edges(self) -> Iterator[tuple[Vertex, Vertex]]:
        """Follow edges ``(t, y) -> (t+1, y')`` for ``t < b``."""
        for t, succ in zip(self.times(), self.successors):
            for y, z in succ.items():
                yield (t, y), (t + 1, z)

    def spine_edges(self) -> Iterator[tuple[Vertex, Vertex]]:
        if not self.spine_included:
            return
        x = self.base_state
        for t in range(self.a, self.b):
            yield (t, x), (t + 1, x)

    def predecessors(self) -> dict[Vertex, list[Vertex]]:
        preds: dict[Vertex, list[Vertex]] = {}
        for u, v in self.edges():
            preds.setdefault(v, []).append(u)
        return preds

    def to_dict(self, beta: "BiRecurrentEstimate | None" = None) -> dict:
        doc = {
            "interval": list(self.interval),
            "base_state": self.base_state,
            "spine_included": self.spine_included,
            "slices": {str(t): list(s) for t, s in zip(self.times(), self.slices)},
            "vertices": [list(v) for v in self.vertices()],
            "edges": [[list(u), list(v)] for u, v in self.edges()],
        }
        if self.spine_included:
            doc["spine_edges"] = [[list(u), list(v)] for u, v in self.spine_edges()]
        if beta is not None:
            doc["beta"] = {str(t): y for t, y in sorted(beta.beta.items()) if y is not None}
        return doc

    def to_json(self, beta=None) -> str:
        return json.dumps(self.to_dict(beta), sort_keys=True)


def build_slab(
    spec: ChainSpec,
    oracle: NoiseOracle,
    interval: tuple[int, int],
    with_spine: bool = True,
    base_state: int | None = None,
    table: FollowTable | None = None,
) -> BridgeSlab:
    """Simulate ``F^{(s, x)}`` for every ``s`` in ``[a, b]`` up to ``b`` (``x`` = base state)."""
    a, b = interval
    if a > b:
        raise UsageError(f"empty interval [{a}, {b}]")
    x = spec.x_star if base_state is None else spec.check_state(base_state)
    if table is None:
        table = FollowTable(spec, oracle, a, b)
    slices = []
    succs = []
    cur = {x}
    for t in range(a, b + 1):
        slices.append(tuple(sorted(cur)))
        if t == b:
            break
        succ = {y: table.next(t, y) for y in slices[-1]}
        succs.append(succ)
        cur = set(succ.values())
        cur.add(x)
    return BridgeSlab((a, b), x, tuple(slices), tuple(succs), with_spine)


@dataclass
class SlabComponents:
    labels: dict[Vertex, Vertex]
    count: int
    total: int
    inspect_time: int


def slab_components(slab: BridgeSlab, inspect_time: int | None = None) -> SlabComponents:
    """Connected components of the windowed bridge graph (spine edges ignored).

    Every component of the window ends at exactly one vertex at time ``b``, so
    a vertex is labelled by the end point of its path.  ``total`` counts all
    window components; ``count`` only those reaching back to ``inspect_time``
    or earlier (default: the middle of the window).  Paths started late have
    had no time to merge, so ``count`` is the meaningful, monotonically
    improving estimate.
    """
    a, b = slab.interval
    if inspect_time is None:
        inspect_time = a + (b - a) // 2
    labels: dict[Vertex, Vertex] = {(b, y): (b, y) for y in slab.slice(b)}
    for t in range(b - 1, a - 1, -1):
        for y in slab.slice(t):
            labels[(t, y)] = labels[(t + 1, slab.next(t, y))]
    early = {lab for (t, _), lab in labels.items() if t <= inspect_time}
    return SlabComponents(labels, len(early), len(slab.slice(b)), inspect_time)


# --------------------------------------------------------------------------
# bi-recurrent path

class Status(str, enum.Enum):
    CONVERGED = "Converged"
    PARTIAL = "Partial"
    FAILED = "Failed"


@dataclass
class BiRecurrentEstimate:
    t_range: tuple[int, int]
    beta: dict[int, int | None]
    stabilization_depth: dict[int, int | None]
    status: Status
    depths: list[int] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    def path(self) -> list[int]:
        if not self.converged:
            raise NotReady("bi-recurrent path has not converged on the whole range")
        return [self.beta[t] for t in range(self.t_range[0], self.t_range[1] + 1)]


def _depth_schedule(min_depth: int, max_depth: int) -> list[int]:
    out, d = [], min_depth
    while d <= max_depth:
        out.append(d)
        d *= 2
    return out


def estimate_birecurrent(
    spec: ChainSpec,
    oracle: NoiseOracle,
    t_range: tuple[int, int],
    max_depth: int = 4096,
    K: int = 3,
    min_depth: int = 1,
) -> BiRecurrentEstimate:
    """Approximate ``beta_t = lim_{s -> -inf} F^{(s, x*)}_t`` on ``t_range``.

    Paths are started at ``(t0 - d, x*)`` for doubling depths ``d`` (``t0`` the
    start of the range).  The value at ``t`` is declared once the last ``K``
    depths agree there; the reported ``beta`` is the deepest path, so it is a
    state path wherever it is defined.  ``stabilization_depth[t]`` is the
    smallest depth from which the values at ``t`` no longer changed.
    """
    if K < 2:
        raise UsageError("K must be >= 2")
    if max_depth < K or min_depth < 1:
        raise UsageError("need max_depth >= K and min_depth >= 1")
    t0, t1 = t_range
    if t1 < t0:
        raise UsageError("empty t_range")
    depths = _depth_schedule(min_depth, max_depth)
    if len(depths) < K:
        raise UsageError("depth schedule shorter than K")
    table = FollowTable(spec, oracle, t0 - depths[-1], t1)
    x_star = spec.x_star
    n = t1 - t0 + 1

    prev: list[int] | None = None   # values of the previous depth's path over [t0 - d_prev, t1]
    prev_start = None
    run = [0] * n                   # agreement run length ending at the current depth
    since = [None] * n              # depth at which the current run began
    used = []
    cur_vals: list[int] = []
    for d in depths:
        start = t0 - d
        full = [x_star]
        t = start
        # advance to where the previous path is known, then copy once they meet
        while t < t1:
            if prev is not None and t >= prev_start and full[-1] == prev[t - prev_start]:
                full.extend(prev[t - prev_start + 1:])
                break
            full.append(table.next(t, full[-1]))
            t += 1
        vals = full[t0 - start:]
        used.append(d)
        if not cur_vals:
            run = [1] * n
            since = [d] * n
        else:
            for i in range(n):
                if vals[i] == cur_vals[i]:
                    run[i] += 1
                else:
                    run[i] = 1
                    since[i] = d
        cur_vals = vals
        prev, prev_start = full, start
        if min(run) >= K:
            break

    beta = {}
    stab = {}
    for i in range(n):
        if run[i] >= K:
            beta[t0 + i] = cur_vals[i]
            stab[t0 + i] = since[i]
        else:
            beta[t0 + i] = None
            stab[t0 + i] = None
    determined = sum(v is not None for v in beta.values())
    status = Status.CONVERGED if determined == n else Status.PARTIAL if determined else Status.FAILED
    return BiRecurrentEstimate((t0, t1), beta, stab, status, used)


# --------------------------------------------------------------------------
# mortals and immortals

@dataclass
class MortalityDecomposition:
    immortal: set[Vertex]
    mortal: dict[Vertex, Vertex]            # mortal vertex -> immortal it hangs from
    unknown: set[Vertex]
    tree_sizes: dict[int, int]              # t -> number of mortals hanging at (t, beta_t)


def decompose_mortality(slab: BridgeSlab, beta: BiRecurrentEstimate, burn_in: int = 0) -> MortalityDecomposition:
    """Split slab vertices into immortals (on ``beta``), certified mortals and unknowns.

    A vertex is a certified mortal when it is off ``beta``, its forward path
    meets ``beta`` by time ``b - 1``, and its tree of descendants inside the
    slab stays clear of the first ``burn_in + 1`` time steps (where the window
    may be missing vertices).  ``tree_sizes`` lists ``#Q_t`` only for times
    whose whole hanging tree is certified.
    """
    a, b = slab.interval
    for t in slab.times():
        if beta.beta.get(t) is None:
            raise NotReady(f"beta undetermined at t={t}")
    bval = beta.beta

    meet: dict[Vertex, int | None] = {}
    for y in slab.slice(b):
        meet[(b, y)] = b if y == bval[b] else None
    for t in range(b - 1, a - 1, -1):
        for y in slab.slice(t):
            meet[(t, y)] = t if y == bval[t] else meet[(t + 1, slab.next(t, y))]

    # does the descendant tree reach the unreliable left edge?
    edge = a + burn_in
    touch: dict[Vertex, bool] = {}
    for t in slab.times():
        for y in slab.slice(t):
            touch.setdefault((t, y), t <= edge)
        if t < b:
            for y in slab.slice(t):
                v = (t + 1, slab.next(t, y))
                touch[v] = touch.get(v, False) or touch[(t, y)]

    immortal, mortal, unknown = set(), {}, set()
    for v in slab.vertices():
        t, y = v
        m = meet[v]
        if m == t:
            immortal.add(v)
        elif m is not None and m <= b - 1 and not touch[v]:
            mortal[v] = (m, bval[m])
        else:
            unknown.add(v)

    sizes: dict[int, int] = {}
    blocked = {meet[v] for v in unknown if meet[v] is not None}
    for v, (m, _) in mortal.items():
        sizes[m] = sizes.get(m, 0) + 1
    tree_sizes = {}
    for t in range(a, b):
        if t > edge and t not in blocked and (t, bval[t]) in immortal:
            tree_sizes[t] = sizes.get(t, 0)
    return MortalityDecomposition(immortal, mortal, unknown, tree_sizes)


# --------------------------------------------------------------------------
# several base states

def bridge_intersection(
    spec: ChainSpec,
    oracle: NoiseOracle,
    base_states: Iterable[int],
    interval: tuple[int, int],
) -> set[Vertex]:
    """Vertices common to the windowed bridge graphs of every base state."""
    base_states = sorted(set(base_states))
    if not base_states:
        raise UsageError("need at least one base state")
    a, b = interval
    table = FollowTable(spec, oracle, a, b)
    common: set[Vertex] | None = None
    for x in base_states:
        verts = set(build_slab(spec, oracle, interval, base_state=x, table=table).vertices())
        common = verts if common is None else common & verts
    return common
