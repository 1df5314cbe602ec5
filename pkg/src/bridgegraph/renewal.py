"""The slice process ``B_t`` as a Markov chain on finite subsets containing ``x*``.

Subsets are represented as sorted tuples of state ids.  Everything that
produces probabilities works over ``Fraction``.
"""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import networkx as nx
import numpy as np

from .driver import ChainSpec, NoiseMode, NoiseOracle
from .errors import NotApplicable, UsageError
from .rational import stationary
from .tables import FollowTable

SubsetState = tuple[int, ...]


def subset(members: Iterable[int]) -> SubsetState:
    return tuple(sorted(set(int(m) for m in members)))


def _order_key(e: SubsetState):
    return (len(e), e)


def _require_iid(spec: ChainSpec, what: str) -> None:
    if spec.noise_mode is not NoiseMode.PER_STATE:
        raise NotApplicable(f"{what} needs independent per-state noise")


def _require_matrix(spec: ChainSpec, what: str) -> None:
    _require_iid(spec, what)
    if not spec.is_finite or spec.rule is not None:
        raise NotApplicable(f"{what} needs a finite chain given by its matrix")


def evolve_slice(spec: ChainSpec, oracle: NoiseOracle, E: Iterable[int], t: int) -> SubsetState:
    """``{x*} | {next(t, y) : y in E}``."""
    _require_iid(spec, "slice evolution")
    return subset([spec.x_star] + [spec.next_state(oracle, t, spec.check_state(y)) for y in E])


# --------------------------------------------------------------------------
# support of the slice chain

@dataclass
class SBReport:
    subsets: list[SubsetState]               # the closed class reached from {x*}
    classes: list[list[SubsetState]]         # every closed class found
    reachable: list[SubsetState]
    x_star_recurrent: bool
    partial: bool

    def to_dict(self) -> dict:
        return {
            "subsets": [list(e) for e in self.subsets],
            "classes": [[list(e) for e in c] for c in self.classes],
            "reachable": [list(e) for e in self.reachable],
            "x_star_recurrent": self.x_star_recurrent,
            "partial": self.partial,
        }


def _successors(spec: ChainSpec, E: SubsetState) -> set[SubsetState]:
    supports = [spec.support(y) for y in E]
    return {subset((spec.x_star,) + combo) for combo in itertools.product(*supports)}


def enumerate_SB(spec: ChainSpec, cap: int = 10_000) -> SBReport:
    """Breadth-first closure of ``{x*}`` under positive-probability slice moves.

    ``S_B`` is the closed communicating class of the reachable subsets.  When
    ``{x*}`` itself is transient (no laziness at ``x*``, say) the class lies
    further out and is still found.  More than ``cap`` subsets marks the
    result partial.
    """
    _require_matrix(spec, "S_B enumeration")
    start = (spec.x_star,)
    g = nx.DiGraph()
    g.add_node(start)
    frontier = [start]
    partial = False
    while frontier and not partial:
        nxt = []
        for e in frontier:
            for f in sorted(_successors(spec, e), key=_order_key):
                if f not in g:
                    if g.number_of_nodes() >= cap:
                        partial = True
                        break
                    nxt.append(f)
                g.add_edge(e, f)
            if partial:
                break
        frontier = nxt
    reachable = sorted(g.nodes, key=_order_key)
    if partial:
        return SBReport([], [], reachable, False, True)
    classes = [sorted(c, key=_order_key) for c in nx.attracting_components(g)]
    classes.sort(key=lambda c: _order_key(c[0]))
    main = classes[0] if len(classes) == 1 else []
    return SBReport(main, classes, reachable, any(start in c for c in classes), False)


# --------------------------------------------------------------------------
# transition probabilities

_memo: dict = {}
_memo_lock = threading.Lock()


def _check_subset(spec: ChainSpec, E: Iterable[int], label: str) -> SubsetState:
    e = subset(E)
    if spec.x_star not in e:
        raise UsageError(f"{label} must contain x*={spec.x_star}")
    for y in e:
        spec.check_state(y)
    return e


def pb_entry(spec: ChainSpec, E: Iterable[int], E_prime: Iterable[int], order: str = "largest") -> Fraction:
    """``P(B_{t+1} = E' | B_t = E)`` by peeling one state of ``E`` at a time.

    With ``x`` the peeled state and ``y_i`` the members of ``E'`` other than
    ``x*``, the image of ``x`` either lands inside ``{x*} | E'`` while the
    rest of ``E`` already produces ``E'``, or it supplies some ``y_i`` that
    the rest does not.  ``order`` picks which state is peeled first
    (``"largest"`` or ``"smallest"``); the value does not depend on it.
    """
    _require_matrix(spec, "P_B")
    if order not in ("largest", "smallest"):
        raise UsageError("order must be 'largest' or 'smallest'")
    e = _check_subset(spec, E, "E")
    f = _check_subset(spec, E_prime, "E'")
    return _pb(spec, e, f, order)


def _pb(spec: ChainSpec, e: SubsetState, f: SubsetState, order: str) -> Fraction:
    key = (spec, e, f, order)
    with _memo_lock:
        hit = _memo.get(key)
    if hit is not None:
        return hit
    xs = spec.x_star
    p = spec.p
    if len(f) > len(e) + 1:
        val = Fraction(0)
    elif f == (xs,):
        val = math.prod((p(y, xs) for y in e), start=Fraction(1))
    elif e == (xs,):
        val = p(xs, f[0] if f[0] != xs else f[1]) if len(f) == 2 else Fraction(0)
    else:
        others = [y for y in e if y != xs]
        xn = others[-1] if order == "largest" else others[0]
        rest = tuple(y for y in e if y != xn)
        ys = [y for y in f if y != xs]
        stay = p(xn, xs) + sum((p(xn, y) for y in ys), Fraction(0))
        val = stay * _pb(spec, rest, f, order) if stay else Fraction(0)
        for y in ys:
            if p(xn, y):
                val += p(xn, y) * _pb(spec, rest, tuple(z for z in f if z != y), order)
    with _memo_lock:
        _memo[key] = val
    return val


def _fmt(v: Fraction) -> str:
    return f"{v.numerator}/{v.denominator}"


@dataclass
class PBMatrix:
    states: list[SubsetState]
    entries: list[list[Fraction]]
    pi: list[Fraction] = field(default_factory=list)

    def row_sums(self) -> list[Fraction]:
        return [sum(row, Fraction(0)) for row in self.entries]

    def pi_of(self, E: Iterable[int]) -> Fraction:
        return self.pi[self.states.index(subset(E))]

    def to_dict(self) -> dict:
        return {
            "states": [list(s) for s in self.states],
            "entries": [[_fmt(v) for v in row] for row in self.entries],
            "pi": [_fmt(v) for v in self.pi],
        }


def pb_matrix(spec: ChainSpec, states: list[SubsetState]) -> PBMatrix:
    return PBMatrix(list(states), [[pb_entry(spec, e, f) for f in states] for e in states])


def pb_stationary(spec: ChainSpec, cap: int = 10_000) -> PBMatrix:
    """``P_B`` on ``S_B`` and its exact stationary law."""
    sb = enumerate_SB(spec, cap)
    if sb.partial:
        raise NotApplicable(f"S_B enumeration stopped at cap={cap}; {len(sb.reachable)} subsets seen")
    if not sb.subsets:
        raise NotApplicable(f"slice chain has {len(sb.classes)} closed classes; no unique S_B")
    m = pb_matrix(spec, sb.subsets)
    m.pi = stationary(m.entries)
    return m


# --------------------------------------------------------------------------
# hit times

@dataclass
class HitTimes:
    times: list[int]
    intensity: float
    stderr: float
    interior: tuple[int, int]


def slice_hit_times(
    spec: ChainSpec,
    oracle: NoiseOracle,
    E: Iterable[int],
    window: int,
    burn_in: int | None = None,
    n_batches: int = 50,
) -> HitTimes:
    """Times ``t`` in ``[0, window)`` at which the windowed slice equals ``E``.

    Paths are started from ``x*`` at every time from ``-burn_in`` on, so the
    slices over ``[0, window)`` are those of a slab whose burn-in has been
    trimmed.  The standard error comes from batch means.
    """
    if window < 1:
        raise UsageError("window must be >= 1")
    if burn_in is None:
        burn_in = max(100, window // 100)
    target = subset(E)
    interior = (0, window - 1)
    if spec.x_star not in target or (spec.is_finite and not set(target) <= set(spec.states)):
        return HitTimes([], 0.0, 0.0, interior)
    table = FollowTable(spec, oracle, -burn_in, window)
    xs = spec.x_star
    cur = {xs}
    hits = np.zeros(window, dtype=bool)
    tset = set(target)
    for t in range(-burn_in, window):
        if t >= 0 and cur == tset:
            hits[t] = True
        if t < window - 1:
            cur = {table.next(t, y) for y in cur}
            cur.add(xs)
    n_batches = max(2, min(n_batches, window))
    batches = np.array_split(hits.astype(float), n_batches)
    means = np.array([b.mean() for b in batches])
    se = float(means.std(ddof=1) / math.sqrt(n_batches))
    return HitTimes(np.flatnonzero(hits).tolist(), float(hits.mean()), se, interior)
