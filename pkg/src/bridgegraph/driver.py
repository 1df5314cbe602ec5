"""Chain specifications, the keyed noise oracle and the pathwise transition generator.

A chain is described by a :class:`ChainSpec`: a (finite) row-stochastic rational
matrix, or a named deterministic rule ``(state, draw) -> state`` for countable
state spaces.  Randomness comes from a :class:`NoiseOracle`, a counter-based
keyed hash of ``(master_seed, stream_id, t[, x])`` so that the driving sequence
can be queried at any time index, past or future, and always gives the same
answer.

Draws are 53-bit integers ``k``; the unit-interval value is ``k / 2**53``.
Inverse-CDF sampling compares ``k`` against integer thresholds
``ceil(c * 2**53)`` of the exact cumulative row sums ``c``, which is the same
as comparing the float draw against the rational cutpoint, with no rounding.
"""

from __future__ import annotations

import enum
import json
import math
import re
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable, Sequence

import networkx as nx
import numpy as np

from .errors import SpecError, UsageError

DRAW_BITS = 53
DRAW_SCALE = 1 << DRAW_BITS
_M64 = (1 << 64) - 1
_MASK53 = DRAW_SCALE - 1

_GOLDEN = 0x9E3779B97F4A7C15
_STATE_MULT = 0xD1B54A32D192ED03
_SEED_SALT = 0x5851F42D4C957F2D
_SHARED_SALT = 0x2545F4914F6CDD1D
_STATE_SALT = 0x14057B7EF767814F


class NoiseMode(str, enum.Enum):
    """How innovations are indexed.

    ``SHARED``: one draw per time step, seen by every state (``draw(t)``).
    ``PER_STATE``: an independent draw for every ``(t, x)`` (``draw(t, x)``),
    i.e. fully independent transitions when the draws are i.i.d.
    """

    SHARED = "SharedPerTime"
    PER_STATE = "PerTimeState"


# --------------------------------------------------------------------------
# keyed hashing

def _mix(z: int) -> int:
    z &= _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_U11 = np.uint64(64 - DRAW_BITS)


def _mix_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U30)) * _C1
    z = (z ^ (z >> _U27)) * _C2
    return z ^ (z >> _U31)


def _as_u64(values) -> np.ndarray:
    return np.atleast_1d(np.asarray(values, dtype=np.int64)).view(np.uint64)


@dataclass(frozen=True)
class NoiseOracle:
    """Deterministic bi-infinite source of innovations.

    ``offset`` shifts the time axis: the oracle answers at ``t`` what the
    unshifted oracle answers at ``t + offset``.
    """

    master_seed: int
    stream_id: int
    offset: int = 0

    @cached_property
    def _key(self) -> int:
        return _mix(_mix(self.master_seed ^ _SEED_SALT) ^ _mix(self.stream_id + _GOLDEN))

    def _tcode(self, t: int) -> int:
        return _mix(((t + self.offset) * _GOLDEN + self._key) & _M64)

    def bits(self, t: int, x: int | None = None) -> int:
        """53-bit integer draw at ``t`` (shared) or ``(t, x)`` (per state)."""
        tc = self._tcode(t)
        if x is None:
            out = _mix(tc ^ _SHARED_SALT)
        else:
            out = _mix(tc ^ _mix((x * _STATE_MULT + _STATE_SALT) & _M64))
        return out >> (64 - DRAW_BITS)

    def draw(self, t: int, x: int | None = None) -> float:
        return self.bits(t, x) / DRAW_SCALE

    def _tcodes(self, times) -> np.ndarray:
        t = _as_u64(np.asarray(times, dtype=np.int64) + self.offset)
        return _mix_np(t * np.uint64(_GOLDEN) + np.uint64(self._key))

    def shared_bits(self, times) -> np.ndarray:
        """Vectorised :meth:`bits` over an array of times (shared mode)."""
        return _mix_np(self._tcodes(times) ^ np.uint64(_SHARED_SALT)) >> _U11

    def grid_bits(self, times, states) -> np.ndarray:
        """Per-state draws on the grid ``times x states``; shape ``(T, n)``."""
        tc = self._tcodes(times)[:, None]
        xs = _as_u64(states)
        xc = _mix_np(xs * np.uint64(_STATE_MULT) + np.uint64(_STATE_SALT))[None, :]
        return _mix_np(tc ^ xc) >> _U11

    def shifted(self, r: int) -> "NoiseOracle":
        return NoiseOracle(self.master_seed, self.stream_id, self.offset + r)


def make_oracle(master_seed: int, stream_id: int = 0) -> NoiseOracle:
    """Oracle for one Monte Carlo replication; distinct ``stream_id`` values are independent."""
    return NoiseOracle(int(master_seed) & _M64, int(stream_id) & _M64)


def draw(oracle: NoiseOracle, t: int, x: int | None = None, mode=None) -> float:
    """Unit-interval innovation at ``t`` (or ``(t, x)``).

    If ``mode`` (a :class:`NoiseMode` or a :class:`ChainSpec`) is given, the
    call is checked against it: per-state specs must pass ``x``, shared specs
    must not.
    """
    if isinstance(mode, ChainSpec):
        mode = mode.noise_mode
    if mode is not None:
        mode = NoiseMode(mode)
        if mode is NoiseMode.PER_STATE and x is None:
            raise UsageError("PerTimeState noise needs a state: draw(oracle, t, x)")
        if mode is NoiseMode.SHARED and x is not None:
            raise UsageError("SharedPerTime noise is indexed by time only")
    return oracle.draw(t, x)


# --------------------------------------------------------------------------
# named transition rules

@dataclass(frozen=True)
class Rule:
    """A deterministic generator ``h(x, k)`` vectorised over numpy arrays."""

    name: str
    step: Callable[[np.ndarray, np.ndarray], np.ndarray]
    description: str = ""


def _falling_step(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    # Geometric(1/2) on {1, 2, ...}: one plus the number of leading one-bits of k.
    inv = (~k) & np.uint64(_MASK53)
    _, exp = np.frexp(inv.astype(np.float64))
    ones = np.where(inv == 0, DRAW_BITS, DRAW_BITS - exp)
    return np.where(x == 0, ones + 1, x - 1).astype(np.int64)


def _flip_step(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    xi = (k >> np.uint64(DRAW_BITS - 1)).astype(np.int64)
    return np.where(x == 1, 1 + xi, 2 - xi).astype(np.int64)


RULES: dict[str, Rule] = {
    "falling": Rule(
        "falling", _falling_step,
        "from 0 jump to a Geometric(1/2) value on {1,2,...}; from n>0 go to n-1",
    ),
    "flip": Rule(
        "flip", _flip_step,
        "S={1,2}; with a fair bit b, 1 -> 1+b and 2 -> 2-b (paths never meet)",
    ),
}


# --------------------------------------------------------------------------
# chain specification

def _frac(value) -> Fraction:
    if isinstance(value, bool) or isinstance(value, float):
        raise SpecError(f"probabilities must be exact rationals, got {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise SpecError(f"cannot parse rational {value!r}") from exc
    raise SpecError(f"cannot parse rational {value!r}")


@dataclass(frozen=True)
class ChainSpec:
    """State space, transition law and distinguished state ``x_star``.

    Finite chains carry ``states`` and an exact ``matrix``; transitions are
    drawn by inverse CDF over each row unless ``rule`` names a custom
    generator.  Countable chains carry only a ``rule`` (states are the
    non-negative integers).
    """

    name: str
    x_star: int
    noise_mode: NoiseMode = NoiseMode.PER_STATE
    states: tuple[int, ...] | None = None
    matrix: tuple[tuple[Fraction, ...], ...] | None = None
    rule: str | None = None
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "noise_mode", NoiseMode(self.noise_mode))
        if self.states is None and self.rule is None:
            raise SpecError("a chain needs either a finite state list or a rule")
        if self.rule is not None and self.rule not in RULES:
            raise SpecError(f"unknown rule {self.rule!r}; known: {sorted(RULES)}")
        if self.states is not None:
            states = tuple(int(s) for s in self.states)
            if len(set(states)) != len(states):
                raise SpecError("duplicate state ids")
            object.__setattr__(self, "states", states)
            if self.matrix is None:
                raise SpecError("finite chains need a transition matrix")
            matrix = tuple(tuple(_frac(v) for v in row) for row in self.matrix)
            if len(matrix) != len(states) or any(len(r) != len(states) for r in matrix):
                raise SpecError("matrix shape does not match the state list")
            if any(v < 0 for row in matrix for v in row):
                raise SpecError("negative transition probability")
            object.__setattr__(self, "matrix", matrix)

    # -- structure ---------------------------------------------------------

    @property
    def is_finite(self) -> bool:
        return self.states is not None

    @property
    def n_states(self) -> int:
        if not self.is_finite:
            raise UsageError(f"{self.name}: countable state space")
        return len(self.states)

    @cached_property
    def _index(self) -> dict[int, int]:
        return {s: i for i, s in enumerate(self.states or ())}

    def index(self, x: int) -> int:
        try:
            return self._index[x]
        except KeyError:
            raise UsageError(f"{x!r} is not a state of {self.name}") from None

    def check_state(self, x) -> int:
        if self.is_finite:
            self.index(x)
            return x
        if isinstance(x, (bool, float)) or int(x) != x or x < 0:
            raise UsageError(f"{x!r} is not a state of {self.name}")
        return int(x)

    def p(self, x: int, y: int) -> Fraction:
        """Exact transition probability (finite chains only)."""
        if not self.is_finite:
            raise UsageError("exact probabilities need a finite matrix")
        return self.matrix[self.index(x)][self.index(y)]

    def support(self, x: int) -> list[int]:
        row = self.matrix[self.index(x)]
        return [y for y, v in zip(self.states, row) if v > 0]

    @cached_property
    def _thresholds(self) -> list[list[int]]:
        out = []
        for row in self.matrix:
            cum, cuts = Fraction(0), []
            for v in row[:-1]:
                cum += v
                # smallest integer k with k / 2**53 >= cum
                cuts.append(-((-cum.numerator * DRAW_SCALE) // cum.denominator))
            out.append(cuts)
        return out

    @cached_property
    def _threshold_array(self) -> np.ndarray:
        n = len(self.states)
        arr = np.asarray(self._thresholds, dtype=np.uint64).reshape(n, max(n - 1, 0))
        return arr

    @cached_property
    def _state_array(self) -> np.ndarray:
        return np.asarray(self.states, dtype=np.int64)

    # -- transitions -------------------------------------------------------

    def h(self, x: int, k: int) -> int:
        """Pathwise transition generator on a 53-bit draw ``k``."""
        if self.rule is not None:
            out = RULES[self.rule].step(np.array([x], dtype=np.int64), np.array([k], dtype=np.uint64))
            return int(out[0])
        i = self.index(x)
        # ties at a cutpoint go to the higher-index state
        return self.states[bisect_right(self._thresholds[i], k)]

    def step(self, xs: np.ndarray, ks: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`h` (``xs`` state ids, ``ks`` draws, same shape)."""
        xs = np.asarray(xs, dtype=np.int64)
        if self.rule is not None:
            return RULES[self.rule].step(xs, ks)
        idx = np.searchsorted(self._state_array, xs) if self._is_sorted else np.vectorize(self.index)(xs)
        thr = self._threshold_array[idx]
        nxt = (ks[..., None] >= thr).sum(axis=-1)
        return self._state_array[nxt]

    @cached_property
    def _is_sorted(self) -> bool:
        return list(self.states) == sorted(self.states)

    def innovation(self, oracle: NoiseOracle, t: int, x: int) -> int:
        if self.noise_mode is NoiseMode.SHARED:
            return oracle.bits(t)
        return oracle.bits(t, x)

    def next_state(self, oracle: NoiseOracle, t: int, x: int) -> int:
        return self.h(x, self.innovation(oracle, t, x))

    def transition_block(self, oracle: NoiseOracle, t0: int, t1: int, xs: Sequence[int]) -> np.ndarray:
        """Next states of every ``x`` in ``xs`` at every time in ``[t0, t1)``.

        Shape ``(t1 - t0, len(xs))``; row ``i`` is the image at time ``t0 + i``.
        """
        times = np.arange(t0, t1, dtype=np.int64)
        xs = np.asarray(xs, dtype=np.int64)
        if self.noise_mode is NoiseMode.SHARED:
            ks = np.broadcast_to(oracle.shared_bits(times)[:, None], (len(times), len(xs)))
        else:
            ks = oracle.grid_bits(times, xs)
        xg = np.broadcast_to(xs[None, :], ks.shape)
        return self.step(xg, np.ascontiguousarray(ks))

    # -- serialisation -----------------------------------------------------

    def to_dict(self) -> dict:
        d: dict = {"name": self.name, "x_star": self.x_star, "noise_mode": self.noise_mode.value}
        if self.states is not None:
            d["states"] = list(self.states)
            d["matrix"] = [[_fmt(v) for v in row] for row in self.matrix]
        if self.rule is not None:
            d["rule"] = self.rule
        return d

    def digest(self) -> str:
        import hashlib

        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _fmt(v: Fraction) -> str:
    return f"{v.numerator}/{v.denominator}"


_SPEC_KEYS = {"name", "states", "matrix", "x_star", "noise_mode", "rule"}


def spec_from_dict(doc: dict) -> ChainSpec:
    unknown = set(doc) - _SPEC_KEYS
    if unknown:
        raise SpecError(f"unknown chain-spec keys: {sorted(unknown)}")
    if "x_star" not in doc:
        raise SpecError("chain spec needs x_star")
    try:
        mode = NoiseMode(doc.get("noise_mode", NoiseMode.PER_STATE.value))
    except ValueError as exc:
        raise SpecError(f"bad noise_mode {doc.get('noise_mode')!r}") from exc
    matrix = doc.get("matrix")
    if matrix is not None:
        matrix = [[_frac(v) for v in row] for row in matrix]
    x_star = doc["x_star"]
    if isinstance(x_star, bool) or not isinstance(x_star, int):
        raise SpecError("x_star must be an integer state id")
    return ChainSpec(
        name=str(doc.get("name", "custom")),
        states=doc.get("states"),
        matrix=matrix,
        x_star=x_star,
        noise_mode=mode,
        rule=doc.get("rule"),
    )


def load_spec(source) -> ChainSpec:
    """Load a chain spec from a JSON path, a ``builtin:<name>`` string or a dict."""
    if isinstance(source, ChainSpec):
        return source
    if isinstance(source, dict):
        return spec_from_dict(source)
    source = str(source)
    if source.startswith("builtin:"):
        return builtin(source.split(":", 1)[1])
    try:
        with open(source, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{source}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise SpecError(f"{source}: top-level JSON value must be an object")
    return spec_from_dict(doc)


def dump_spec(spec: ChainSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec.to_dict(), fh, indent=2)
        fh.write("\n")


# --------------------------------------------------------------------------
# built-in benchmark chains

def _rows(rows: Iterable[Iterable]) -> tuple:
    return tuple(tuple(Fraction(v) for v in r) for r in rows)


def singleton() -> ChainSpec:
    return ChainSpec("singleton", x_star=0, states=(0,), matrix=_rows([[1]]))


def uniform(n: int = 3) -> ChainSpec:
    rows = [[Fraction(1, n)] * n for _ in range(n)]
    return ChainSpec(f"uniform{n}", x_star=0, states=tuple(range(n)), matrix=_rows(rows))


def cycle(n: int) -> ChainSpec:
    rows = [[int(j == (i + 1) % n) for j in range(n)] for i in range(n)]
    return ChainSpec(f"cycle{n}", x_star=0, states=tuple(range(n)), matrix=_rows(rows))


def lazy_cycle(n: int) -> ChainSpec:
    half = Fraction(1, 2)
    rows = []
    for i in range(n):
        row = [Fraction(0)] * n
        row[i] += half
        row[(i + 1) % n] += half
        rows.append(row)
    return ChainSpec(f"lazy-cycle{n}", x_star=0, states=tuple(range(n)), matrix=_rows(rows))


def star() -> ChainSpec:
    third = Fraction(1, 3)
    return ChainSpec("star", x_star=0, states=(0, 1, 2),
                     matrix=_rows([[third] * 3, [1, 0, 0], [1, 0, 0]]))


def coin2() -> ChainSpec:
    half = Fraction(1, 2)
    return ChainSpec("coin2", x_star=0, states=(0, 1), matrix=_rows([[half, half], [half, half]]))


def flip() -> ChainSpec:
    half = Fraction(1, 2)
    return ChainSpec("flip", x_star=1, states=(1, 2), matrix=_rows([[half, half], [half, half]]),
                     rule="flip", noise_mode=NoiseMode.SHARED)


def falling() -> ChainSpec:
    return ChainSpec("falling", x_star=0, rule="falling")


def two_class() -> ChainSpec:
    """Recurrent classes {0,1} (deterministic swap, period 2) and {2,3}
    (uniform, period 1); state 4 is transient and feeds both."""
    h = Fraction(1, 2)
    rows = [
        [0, 1, 0, 0, 0],
        [1, 0, 0, 0, 0],
        [0, 0, h, h, 0],
        [0, 0, h, h, 0],
        [h, 0, h, 0, 0],
    ]
    return ChainSpec("two-class", x_star=2, states=tuple(range(5)), matrix=_rows(rows))


_FIXED = {
    "singleton": singleton,
    "uniform3": lambda: uniform(3),
    "star": star,
    "coin2": coin2,
    "swap2": lambda: cycle(2),
    "flip": flip,
    "falling": falling,
    "two-class": two_class,
}


def builtin(name: str) -> ChainSpec:
    """Look up a built-in chain: the fixed names plus ``cycleN``, ``lazy-cycleN``, ``uniformN``."""
    if name in _FIXED:
        return _FIXED[name]()
    m = re.fullmatch(r"(lazy-cycle|cycle|uniform)(\d+)", name)
    if m and int(m.group(2)) >= 1:
        n = int(m.group(2))
        return {"lazy-cycle": lazy_cycle, "cycle": cycle, "uniform": uniform}[m.group(1)](n)
    raise SpecError(f"unknown builtin spec {name!r}")


BUILTIN_NAMES = tuple(_FIXED) + ("cycleN", "lazy-cycleN", "uniformN")


# --------------------------------------------------------------------------
# validation / class decomposition

@dataclass(frozen=True)
class ClassInfo:
    states: tuple[int, ...]
    closed: bool
    period: int


@dataclass
class SpecReport:
    valid: bool
    finite: bool
    row_errors: list[tuple[int, Fraction]] = field(default_factory=list)
    unreachable: list[int] = field(default_factory=list)
    classes: list[ClassInfo] = field(default_factory=list)
    transient: list[int] = field(default_factory=list)
    recurrent_attracting: bool | None = None
    x_star_recurrent: bool | None = None
    messages: list[str] = field(default_factory=list)

    @property
    def recurrent_classes(self) -> list[ClassInfo]:
        return [c for c in self.classes if c.closed]

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "finite": self.finite,
            "row_errors": [{"row": i, "sum": _fmt(s)} for i, s in self.row_errors],
            "unreachable_from_x_star": self.unreachable,
            "recurrent_classes": [
                {"states": list(c.states), "period": c.period} for c in self.recurrent_classes
            ],
            "transient": self.transient,
            "recurrent_attracting": self.recurrent_attracting,
            "x_star_recurrent": self.x_star_recurrent,
            "messages": self.messages,
        }


def transition_digraph(spec: ChainSpec) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(spec.states)
    for i, x in enumerate(spec.states):
        for j, y in enumerate(spec.states):
            if spec.matrix[i][j] > 0:
                g.add_edge(x, y)
    return g


def class_period(g: nx.DiGraph, members) -> int:
    """gcd of cycle lengths inside a strongly connected class, via BFS levels."""
    members = set(members)
    root = min(members)
    level = {root: 0}
    frontier = [root]
    d = 0
    while frontier:
        nxt = []
        for u in frontier:
            for v in g.successors(u):
                if v not in members:
                    continue
                if v not in level:
                    level[v] = level[u] + 1
                    nxt.append(v)
                else:
                    d = math.gcd(d, level[u] + 1 - level[v])
        frontier = nxt
    return abs(d) if d else 0


def cyclic_decomposition(spec: ChainSpec) -> list[ClassInfo]:
    g = transition_digraph(spec)
    out = []
    for comp in nx.strongly_connected_components(g):
        closed = all(v in comp for u in comp for v in g.successors(u))
        out.append(ClassInfo(tuple(sorted(comp)), closed, class_period(g, comp)))
    out.sort(key=lambda c: c.states)
    return out


def validate_spec(spec: ChainSpec) -> SpecReport:
    """Diagnose a chain spec; ``report.valid`` iff the ChainSpec invariants hold."""
    if not spec.is_finite:
        ok = spec.rule in RULES
        try:
            spec.check_state(spec.x_star)
        except UsageError:
            ok = False
        msgs = [f"countable rule {spec.rule!r}: " + RULES[spec.rule].description] if spec.rule in RULES else []
        if not ok:
            msgs.append("x_star is not a valid state")
        return SpecReport(valid=ok, finite=False, messages=msgs)

    report = SpecReport(valid=True, finite=True)
    for i, row in enumerate(spec.matrix):
        s = sum(row, Fraction(0))
        if s != 1:
            report.row_errors.append((i, s))
            report.messages.append(f"row {i} (state {spec.states[i]}) sums to {_fmt(s)}, not 1")
    if spec.x_star not in spec._index:
        report.valid = False
        report.messages.append(f"x_star={spec.x_star} is not a state")
        return report
    g = transition_digraph(spec)
    reach = nx.descendants(g, spec.x_star) | {spec.x_star}
    report.unreachable = [s for s in spec.states if s not in reach]
    report.classes = cyclic_decomposition(spec)
    recurrent = {s for c in report.classes if c.closed for s in c.states}
    report.transient = [s for s in spec.states if s not in recurrent]
    report.recurrent_attracting = all(
        (nx.descendants(g, s) & recurrent) for s in report.transient
    )
    report.x_star_recurrent = spec.x_star in recurrent
    if not report.x_star_recurrent:
        report.messages.append(f"x_star={spec.x_star} is not in a recurrent class")
    if report.row_errors or not report.x_star_recurrent:
        report.valid = False
    return report
