"""Mass transports on Z, rooted balls, the size-biased root law and local weak convergence.

Every transport is evaluated on a slab ``[a, b]`` as two arrays indexed by
time: ``w_plus[t]`` (mass sent from ``t``) and ``w_minus[t]`` (mass received
at ``t``).  Only an interior stretch, away from both ends of the slab, is
averaged; the margins absorb the paths whose mass would leave the slab.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable

import numpy as np

from .bridge import BiRecurrentEstimate, BridgeSlab, build_slab, estimate_birecurrent
from .driver import ChainSpec, make_oracle
from .errors import BridgeGraphError, UsageError


class Censored(BridgeGraphError):
    """A ball reaches the edge of the slab, where its shape is not yet known."""


CENSORED = b"censored"

Vertex = tuple[int, int]


# --------------------------------------------------------------------------
# per-slab dynamic programs

class SlabContext:
    """A slab together with the path statistics the transports are built from.

    Everything is stored per time index ``i = t - a`` as ``{state: value}``.
    """

    def __init__(self, slab: BridgeSlab, beta: BiRecurrentEstimate | None = None):
        self.slab = slab
        self.beta = beta
        self.a, self.b = slab.interval
        self.x = slab.base_state
        self.T = self.b - self.a + 1

    def beta_at(self, t: int) -> int:
        if self.beta is None:
            raise UsageError("this transport needs the bi-recurrent path")
        return self.beta.beta[t]

    @cached_property
    def first_hit(self) -> list[dict[int, int | None]]:
        """Time of the first visit to ``x*`` strictly after ``t`` of the path through ``(t, y)``."""
        s = self.slab
        out: list[dict] = [None] * self.T
        out[-1] = {y: None for y in s.slice(self.b)}
        for i in range(self.T - 2, -1, -1):
            t = self.a + i
            nxt = out[i + 1]
            row = {}
            for y in s.slice(t):
                z = s.next(t, y)
                row[y] = t + 1 if z == self.x else nxt[z]
            out[i] = row
        return out

    @cached_property
    def multiplicity(self) -> list[dict[int, int]]:
        """Number of slab paths (started at ``x*``) passing through each vertex."""
        s = self.slab
        out = []
        for i in range(self.T):
            t = self.a + i
            row = {y: 0 for y in s.slice(t)}
            if i:
                prev = out[-1]
                for y, m in prev.items():
                    row[s.next(t - 1, y)] += m
            row[self.x] += 1
            out.append(row)
        return out

    @cached_property
    def younger_merge(self) -> np.ndarray:
        """``merge[s - a]``: first time minus ``a`` at which the path started at ``s`` meets a younger path (-1: not in slab)."""
        s = self.slab
        merge = np.full(self.T, -1, dtype=np.int64)
        label = {self.x: self.a}         # youngest start among paths at each vertex
        for i in range(1, self.T):
            t = self.a + i
            incoming: dict[int, list[int]] = {}
            for y, lab in label.items():
                incoming.setdefault(s.next(t - 1, y), []).append(lab)
            incoming.setdefault(self.x, []).append(t)
            label = {}
            for z, labs in incoming.items():
                top = max(labs)
                label[z] = top
                for lab in labs:
                    if lab != top:
                        merge[lab - self.a] = i
        return merge

    @cached_property
    def meet_beta(self) -> list[dict[int, int | None]]:
        """First time ``>= t`` at which the path through ``(t, y)`` is on the bi-recurrent path."""
        s = self.slab
        out: list[dict] = [None] * self.T
        bb = self.beta_at(self.b)
        out[-1] = {y: (self.b if y == bb else None) for y in s.slice(self.b)}
        for i in range(self.T - 2, -1, -1):
            t = self.a + i
            bt = self.beta_at(t)
            nxt = out[i + 1]
            out[i] = {y: (t if y == bt else nxt[s.next(t, y)]) for y in s.slice(t)}
        return out

    def visits_before_beta(self, y: int | None) -> list[dict[int, int]]:
        """Visits to ``y`` (any state if ``None``) before the path through ``(t, z)`` meets beta."""
        s = self.slab
        out: list[dict] = [None] * self.T
        bb = self.beta_at(self.b)
        out[-1] = {z: int(z != bb and (y is None or z == y)) for z in s.slice(self.b)}
        for i in range(self.T - 2, -1, -1):
            t = self.a + i
            bt = self.beta_at(t)
            nxt = out[i + 1]
            row = {}
            for z in s.slice(t):
                row[z] = 0 if z == bt else int(y is None or z == y) + nxt[s.next(t, z)]
            out[i] = row
        return out


# --------------------------------------------------------------------------
# the transports

Evaluator = Callable[[SlabContext], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class TransportSpec:
    id: str
    description: str
    evaluator: Evaluator = field(compare=False)
    needs_beta: bool = False

    def evaluate(self, ctx: SlabContext) -> tuple[np.ndarray, np.ndarray]:
        wp, wm = self.evaluator(ctx)
        return np.asarray(wp, dtype=float), np.asarray(wm, dtype=float)


def _zero(ctx):
    return np.zeros(ctx.T), np.zeros(ctx.T)


def _t1(ctx):
    """Mass 1 from ``s`` to every time strictly between ``s`` and the return of ``F^{(s,x*)}`` to ``x*``."""
    wp = np.zeros(ctx.T)
    diff = np.zeros(ctx.T + 1)
    for i in range(ctx.T):
        r = ctx.first_hit[i][ctx.x]
        end = (r if r is not None else ctx.b + 1) - ctx.a
        wp[i] = end - i - 1
        if end > i + 1:
            diff[i + 1] += 1
            diff[end] -= 1
    return wp, np.cumsum(diff)[: ctx.T]


def _t2(y):
    def ev(ctx):
        wp = np.zeros(ctx.T)
        wm = np.zeros(ctx.T)
        for i, row in enumerate(ctx.first_hit):
            for z, h in row.items():
                if y is None or z == y:
                    wp[i] += 1
                    if h is not None:
                        wm[h - ctx.a] += 1
        return wp, wm
    return ev


def _t3(ctx):
    merge = ctx.younger_merge
    wp = (merge >= 0).astype(float)
    wm = np.bincount(merge[merge >= 0], minlength=ctx.T).astype(float)
    return wp, wm


def _t4(y):
    def ev(ctx):
        visits = ctx.visits_before_beta(y)
        wp = np.array([visits[i][ctx.x] for i in range(ctx.T)], dtype=float)
        wm = np.zeros(ctx.T)
        for i, row in enumerate(ctx.multiplicity):
            bt = ctx.beta_at(ctx.a + i)
            wm[i] = sum(m for z, m in row.items() if z != bt and (y is None or z == y))
        return wp, wm
    return ev


def _t5(y):
    def ev(ctx):
        wp = np.zeros(ctx.T)
        wm = np.zeros(ctx.T)
        for i, row in enumerate(ctx.meet_beta):
            for z, d in row.items():
                if y is None or z == y:
                    wp[i] += 1
                    if d is not None:
                        wm[d - ctx.a] += 1
        return wp, wm
    return ev


def _t6(y):
    def ev(ctx):
        beta = [ctx.beta_at(ctx.a + i) for i in range(ctx.T)]
        wp = np.zeros(ctx.T)
        wm = np.zeros(ctx.T)
        last = None
        for i, v in enumerate(beta):
            if last is not None and (y is None or v == y):
                wp[last] += 1
                wm[i] = 1
            if v == ctx.x:
                last = i
        return wp, wm
    return ev


def _registry() -> dict[str, TransportSpec]:
    reg = {
        "zero": TransportSpec("zero", "no mass moves", _zero),
        "1": TransportSpec("1", "pre-return spread: s sends 1 to each t before F^(s,x*) returns to x*", _t1),
        "2": TransportSpec("2", "each (s,y) in B sends 1 to the first time its path hits x*", _t2(None)),
        "3": TransportSpec("3", "s sends 1 to the first time F^(s,x*) meets a younger path", _t3),
        "4": TransportSpec("4", "s sends 1 to each time F^(s,x*) is off beta", _t4(None), needs_beta=True),
        "5": TransportSpec("5", "each (s,y) in B sends 1 to the time its path meets beta", _t5(None), needs_beta=True),
        "6": TransportSpec("6", "each t sends 1 back to the last visit of beta to x*", _t6(None), needs_beta=True),
    }
    return reg


REGISTRY = _registry()
PAIRED = ("1", "2", "3", "4", "5", "6")


def get_transport(tid: str) -> TransportSpec:
    """Look up ``"1"``..``"6"``, ``"zero"``, or a per-state variant ``"<k>:<y>"`` for ``k`` in 2, 4, 5, 6."""
    if tid in REGISTRY:
        return REGISTRY[tid]
    if ":" in tid:
        k, _, ys = tid.partition(":")
        makers = {"2": _t2, "4": _t4, "5": _t5, "6": _t6}
        if k in makers:
            try:
                y = int(ys)
            except ValueError:
                raise UsageError(f"bad state in transport id {tid!r}") from None
            base = REGISTRY[k]
            return TransportSpec(tid, f"{base.description} (state {y} only)", makers[k](y), base.needs_beta)
    raise UsageError(f"unknown transport {tid!r}")


# --------------------------------------------------------------------------
# estimation over many windows

@dataclass
class TransportEstimate:
    transport_id: str
    w_plus: float
    w_minus: float
    se_plus: float
    se_minus: float
    se_diff: float
    n_used: int
    n_skipped: int

    @property
    def passed(self) -> bool:
        return abs(self.w_plus - self.w_minus) <= 3 * self.se_diff

    def row(self, spec_name: str) -> list:
        return [spec_name, self.transport_id, f"{self.w_plus:.6f}", f"{self.w_minus:.6f}",
                f"{self.se_diff:.6f}", "pass" if self.passed else "fail"]


@dataclass
class WindowPlan:
    window: int
    margin: int
    beta_min_depth: int = 64
    beta_max_depth: int = 1 << 14

    @property
    def interval(self) -> tuple[int, int]:
        return (0, self.window + 2 * self.margin - 1)

    @property
    def interior(self) -> slice:
        return slice(self.margin, self.margin + self.window)


def _plan(window: int, margin: int | None) -> WindowPlan:
    if window < 1:
        raise UsageError("window must be >= 1")
    if margin is None:
        margin = max(200, window // 20)
    return WindowPlan(window, margin)


def window_contexts(spec: ChainSpec, base_seed: int, n_windows: int, plan: WindowPlan,
                    need_beta: bool, master_seed: int = 0):
    """Yield ``(stream, SlabContext or None)``; ``None`` when beta was needed but did not converge."""
    for i in range(n_windows):
        oracle = make_oracle(master_seed, base_seed + i)
        slab = build_slab(spec, oracle, plan.interval)
        beta = None
        if need_beta:
            beta = estimate_birecurrent(spec, oracle, plan.interval, max_depth=plan.beta_max_depth,
                                        min_depth=plan.beta_min_depth)
            if not beta.converged:
                yield base_seed + i, None
                continue
        yield base_seed + i, SlabContext(slab, beta)


def _summarise(tid: str, plus: list[float], minus: list[float], skipped: int) -> TransportEstimate:
    p = np.asarray(plus)
    m = np.asarray(minus)
    n = len(p)
    if n == 0:
        nan = float("nan")
        return TransportEstimate(tid, nan, nan, nan, nan, nan, 0, skipped)
    if n == 1:
        se_p = se_m = se_d = 0.0
    else:
        se_p = float(p.std(ddof=1) / math.sqrt(n))
        se_m = float(m.std(ddof=1) / math.sqrt(n))
        se_d = float((p - m).std(ddof=1) / math.sqrt(n))
    return TransportEstimate(tid, float(p.mean()), float(m.mean()), se_p, se_m, se_d, n, skipped)


def estimate_transports(
    spec: ChainSpec,
    base_seed: int,
    transports: Iterable[TransportSpec | str],
    window: int,
    n_windows: int,
    margin: int | None = None,
    master_seed: int = 0,
) -> list[TransportEstimate]:
    """Interior means of ``w+`` and ``w-`` per window, then averaged across windows.

    The joint standard error is that of the per-window difference, so the
    check ``|w+ - w-| <= 3 se`` accounts for the strong correlation between
    the two sides.  Windows where beta did not converge are skipped (for the
    transports that need it) and counted in ``n_skipped``.
    """
    specs = [get_transport(t) if isinstance(t, str) else t for t in transports]
    plan = _plan(window, margin)
    need_beta = any(t.needs_beta for t in specs)
    plus = {t.id: [] for t in specs}
    minus = {t.id: [] for t in specs}
    skipped = 0
    for _, ctx in window_contexts(spec, base_seed, n_windows, plan, need_beta, master_seed):
        if ctx is None:
            skipped += 1
            continue
        for t in specs:
            wp, wm = t.evaluate(ctx)
            plus[t.id].append(float(wp[plan.interior].mean()))
            minus[t.id].append(float(wm[plan.interior].mean()))
    return [_summarise(t.id, plus[t.id], minus[t.id], skipped if t.needs_beta else 0) for t in specs]


def estimate_transport(spec, base_seed, transport, window, n_windows, margin=None, master_seed=0) -> TransportEstimate:
    return estimate_transports(spec, base_seed, [transport], window, n_windows, margin, master_seed)[0]


@dataclass
class CycleEstimate:
    state: int
    mean: float
    se: float


def cycle_visit_means(spec: ChainSpec, base_seed: int, window: int, n_windows: int,
                      margin: int | None = None, master_seed: int = 0) -> dict[int, CycleEstimate]:
    """Mean number of visits to each ``y`` per excursion of beta away from ``x*``.

    A ratio of the per-state transport-6 mass sent to the number of visits of
    beta to ``x*``, pooled over the interior of every window; the standard
    error comes from the spread of the per-window ratios.
    """
    if not spec.is_finite:
        raise UsageError("cycle estimates need a finite state space")
    plan = _plan(window, margin)
    evs = {y: get_transport(f"6:{y}") for y in spec.states}
    ratios = {y: [] for y in spec.states}
    num = {y: 0.0 for y in spec.states}
    den = 0.0
    for _, ctx in window_contexts(spec, base_seed, n_windows, plan, True, master_seed):
        if ctx is None:
            continue
        at_x = np.array([ctx.beta_at(ctx.a + i) == ctx.x for i in range(ctx.T)])[plan.interior]
        k = float(at_x.sum())
        den += k
        for y, ev in evs.items():
            wp, _ = ev.evaluate(ctx)
            s = float(wp[plan.interior].sum())
            num[y] += s
            if k:
                ratios[y].append(s / k)
    out = {}
    for y in spec.states:
        r = np.asarray(ratios[y])
        se = float(r.std(ddof=1) / math.sqrt(len(r))) if len(r) > 1 else float("nan")
        out[y] = CycleEstimate(y, num[y] / den if den else float("nan"), se)
    return out


def transports_csv(spec_name: str, estimates: Iterable[TransportEstimate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["spec", "transport_id", "estimate_plus", "estimate_minus", "stderr", "result"])
    for e in estimates:
        w.writerow(e.row(spec_name))
    return buf.getvalue()


# --------------------------------------------------------------------------
# rooted balls

def _neighbours(slab: BridgeSlab, preds: dict, v: Vertex):
    """Undirected neighbours with edge tags: ``("f", u, w)`` follow edges, ``("s", u, w)`` spine edges."""
    t, y = v
    if t < slab.b:
        yield ("f", v, (t + 1, slab.next(t, y)))
    for u in preds.get(v, ()):
        yield ("f", u, v)
    if slab.spine_included and y == slab.base_state:
        if t < slab.b:
            yield ("s", v, (t + 1, y))
        if t > slab.a:
            yield ("s", (t - 1, y), v)


def _preds(slab: BridgeSlab) -> dict:
    cache = slab.__dict__.get("_pred_cache")
    if cache is None:
        cache = slab.predecessors()
        object.__setattr__(slab, "_pred_cache", cache)
    return cache


def ball(slab: BridgeSlab, root: Vertex, radius: int):
    """Vertices within graph distance ``radius`` (edges taken undirected) and their distances."""
    if root not in slab:
        raise UsageError(f"{root} is not a slab vertex")
    preds = _preds(slab)
    dist = {root: 0}
    frontier = [root]
    for d in range(radius):
        nxt = []
        for v in frontier:
            for _, u, w in _neighbours(slab, preds, v):
                other = w if u == v else u
                if other not in dist:
                    dist[other] = d + 1
                    nxt.append(other)
        frontier = nxt
    return dist


def canonical_ball(slab: BridgeSlab, root: Vertex, radius: int, strict: bool = True) -> bytes:
    """Canonical key of the state-marked ball of ``radius`` around ``root``.

    Edges only join consecutive times and the ball is connected, so every
    vertex is pinned down by its time offset from the root and its state.
    Listing vertices and tagged edges in those coordinates is therefore a
    complete invariant for rooted, marked, directed isomorphism.  A ball
    whose inner vertices (distance ``< radius``) sit on the slab's first or
    last time is censored: ``Censored`` is raised, or ``CENSORED`` returned
    when ``strict`` is false.
    """
    if radius < 0:
        raise UsageError("radius must be >= 0")
    dist = ball(slab, root, radius)
    t0 = root[0]
    for (t, _), d in dist.items():
        if d < radius and (t == slab.a or t == slab.b):
            if strict:
                raise Censored(f"ball around {root} reaches the slab boundary")
            return CENSORED
    preds = _preds(slab)
    edges = set()
    for v, d in dist.items():
        if d < radius:
            for tag, u, w in _neighbours(slab, preds, v):
                edges.add((tag, u[0] - t0, u[1], w[0] - t0, w[1]))
    verts = sorted((t - t0, y) for t, y in dist)
    # a follow edge and a spine edge can join the same pair; keep both
    key = (radius, verts, sorted(edges))
    return repr(key).encode()


@dataclass
class BallLaw:
    counts: Counter
    slice_sizes: list[int] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def normalized(self) -> dict[bytes, float]:
        n = self.total
        return {k: c / n for k, c in sorted(self.counts.items())}


def sample_root_sizebiased(
    spec: ChainSpec,
    base_seed: int,
    n_windows: int,
    radius: int,
    half_width: int | None = None,
    times: Iterable[int] = (0,),
    master_seed: int = 0,
) -> BallLaw:
    """Ball keys of every vertex of the time-0 slice (or of each time in ``times``).

    Taking every vertex of a slice with weight one is what size-biases the
    root: a realisation contributes in proportion to its slice size.
    """
    times = list(times)
    if half_width is None:
        half_width = max(100, 4 * radius, max(abs(t) for t in times) + 4 * radius + 100)
    counts: Counter = Counter()
    sizes = []
    for i in range(n_windows):
        slab = build_slab(spec, make_oracle(master_seed, base_seed + i), (-half_width, half_width))
        for t in times:
            sl = slab.slice(t)
            sizes.append(len(sl))
            for y in sl:
                counts[canonical_ball(slab, (t, y), radius, strict=False)] += 1
    return BallLaw(counts, sizes)


def tv_distance(p: dict, q: dict) -> float:
    keys = sorted(set(p) | set(q))      # fixed summation order keeps output byte-stable
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


@dataclass
class LWCRow:
    n: int
    tv: float
    samples: int
    censored_fraction: float


def lwc_distance(
    spec: ChainSpec,
    base_seed: int,
    radius: int,
    n_list: Iterable[int],
    n_windows: int = 32,
    master_seed: int = 0,
    pad: int = 200,
) -> list[LWCRow]:
    """Total-variation distance between windowed and size-biased ball laws, per window size.

    For each ``n`` the slab ``[-n, n]`` is built on every stream and the roots
    are all its vertices at times ``0..n``, with balls read off the windowed
    graph.  The reference takes every vertex of the same streams at the same
    times, but with balls read off a slab wider by ``pad`` on both sides; by
    stationarity, pooling whole slices is a sample of the size-biased law.
    Using the same streams and times matches the two sample sizes and
    cancels most of the sampling noise, so what remains is the window
    effect.  Censored balls are kept as their own category.
    """
    n_list = list(n_list)
    if any(n < 1 for n in n_list) or n_list != sorted(set(n_list)):
        raise UsageError("n_list must be strictly increasing positive integers")
    if radius < 0:
        raise UsageError("radius must be >= 0")
    rows = []
    for n in n_list:
        windowed: Counter = Counter()
        for i in range(n_windows):
            slab = build_slab(spec, make_oracle(master_seed, base_seed + i), (-n, n))
            for t in range(0, n + 1):
                for y in slab.slice(t):
                    windowed[canonical_ball(slab, (t, y), radius, strict=False)] += 1
        ref = sample_root_sizebiased(spec, base_seed, n_windows, radius, half_width=n + max(pad, radius + 1),
                                     times=range(0, n + 1), master_seed=master_seed)
        tot = sum(windowed.values())
        law = {k: c / tot for k, c in windowed.items()}
        rows.append(LWCRow(n, tv_distance(law, ref.normalized()), tot, windowed.get(CENSORED, 0) / tot))
    return rows


def lwc_csv(spec_name: str, rows: Iterable[LWCRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["spec", "n", "tv", "samples", "censored_fraction"])
    for r in rows:
        w.writerow([spec_name, r.n, f"{r.tv:.6f}", r.samples, f"{r.censored_fraction:.6f}"])
    return buf.getvalue()
