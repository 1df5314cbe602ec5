import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bridgegraph import (
    NotReady,
    Status,
    bridge_intersection,
    build_slab,
    builtin,
    decompose_mortality,
    estimate_birecurrent,
    make_oracle,
    slab_components,
)
from bridgegraph.driver import NoiseOracle

SPECS = ["singleton", "uniform3", "star", "lazy-cycle5", "cycle3", "two-class", "falling", "flip"]


class FutureScrambled:
    """Oracle equal to ``base`` before ``cutoff`` and to ``other`` from ``cutoff`` on."""

    def __init__(self, base: NoiseOracle, other: NoiseOracle, cutoff: int):
        self.base, self.other, self.cutoff = base, other, cutoff

    def bits(self, t, x=None):
        return (self.base if t < self.cutoff else self.other).bits(t, x)

    def shared_bits(self, times):
        times = np.asarray(times)
        return np.where(times < self.cutoff, self.base.shared_bits(times), self.other.shared_bits(times))

    def grid_bits(self, times, states):
        times = np.asarray(times)
        early = (times < self.cutoff)[:, None]
        return np.where(early, self.base.grid_bits(times, states), self.other.grid_bits(times, states))


def test_singleton_slab():
    slab = build_slab(builtin("singleton"), make_oracle(0), (-5, 5))
    assert set(slab.vertices()) == {(t, 0) for t in range(-5, 6)}
    assert slab_components(slab).count == 1


@given(st.sampled_from(SPECS), st.integers(0, 500), st.integers(-50, 50), st.integers(0, 60))
def test_slab_invariants(name, stream, a, length):
    spec = builtin(name)
    o = make_oracle(9, stream)
    slab = build_slab(spec, o, (a, a + length))
    for t in slab.times():
        assert spec.x_star in slab.slice(t)
    for t in range(a + 1, a + length + 1):
        image = {spec.next_state(o, t - 1, y) for y in slab.slice(t - 1)}
        assert set(slab.slice(t)) == image | {spec.x_star}
    out = {}
    for u, v in slab.edges():
        out[u] = out.get(u, 0) + 1
    assert all(out.get(v, 0) == (0 if v[0] == slab.b else 1) for v in slab.vertices())


def test_cycle_slab_unrolls():
    slab = build_slab(builtin("cycle3"), make_oracle(0), (0, 6))
    assert slab.slices == ((0,), (0, 1), (0, 1, 2), (0, 1, 2), (0, 1, 2), (0, 1, 2), (0, 1, 2))


@pytest.mark.parametrize("n", [2, 3, 5])
def test_cycle_components(n):
    slab = build_slab(builtin(f"cycle{n}"), make_oracle(0), (0, 40))
    assert slab_components(slab).count == n


def test_uniform_components_and_monotonicity():
    spec = builtin("uniform3")
    o = make_oracle(0, 3)
    counts = [slab_components(build_slab(spec, o, (0, b)), inspect_time=10).count for b in range(10, 80, 5)]
    assert all(x >= y for x, y in zip(counts, counts[1:]))
    assert counts[-1] == 1


def test_local_finiteness_in_mean():
    spec = builtin("uniform3")
    means = []
    for i in range(40):
        slab = build_slab(spec, make_oracle(0, i), (-200, 200))
        mid = [len(slab.slice(t)) for t in range(-66, 67)]
        means.append(np.mean(mid))
    se = np.std(means, ddof=1) / math.sqrt(len(means))
    assert np.mean(means) <= 3.0 + 3 * se
    assert abs(np.mean(means) - 305 / 143) < 4 * se + 0.01


def test_slab_json_export():
    o = make_oracle(0)
    spec = builtin("uniform3")
    slab = build_slab(spec, o, (0, 10))
    beta = estimate_birecurrent(spec, o, (0, 10), min_depth=8)
    doc = json.loads(slab.to_json(beta))
    assert len(doc["vertices"]) == slab.n_vertices
    assert len(doc["edges"]) == slab.n_vertices - len(slab.slice(10))
    assert len(doc["spine_edges"]) == 10
    assert doc["beta"]["0"] == beta.beta[0]


def test_singleton_beta():
    est = estimate_birecurrent(builtin("singleton"), make_oracle(0), (-3, 3))
    assert est.status is Status.CONVERGED
    assert set(est.beta.values()) == {0} and set(est.stabilization_depth.values()) == {1}


@given(st.sampled_from(["uniform3", "star", "lazy-cycle5", "falling"]), st.integers(0, 10_000))
def test_beta_is_a_state_path(name, stream):
    spec = builtin(name)
    o = make_oracle(4, stream)
    est = estimate_birecurrent(spec, o, (0, 30), min_depth=4)
    for t in range(0, 30):
        if est.beta[t] is not None and est.beta[t + 1] is not None:
            assert est.beta[t + 1] == spec.next_state(o, t, est.beta[t])
    if est.converged:
        assert None not in est.beta.values()


@given(st.integers(0, 10_000))
def test_beta_ignores_the_future(stream):
    spec = builtin("uniform3")
    o = make_oracle(0, stream)
    a = estimate_birecurrent(spec, o, (0, 40), min_depth=8)
    b = estimate_birecurrent(spec, FutureScrambled(o, make_oracle(99, stream), 40), (0, 40), min_depth=8)
    assert a.beta == b.beta


def test_beta_undetermined_when_no_coupling():
    # doubling depths alternate between phases 1 and 2 mod 3, so they never agree
    est = estimate_birecurrent(builtin("cycle3"), make_oracle(0), (0, 5), max_depth=64)
    assert est.status is Status.FAILED and set(est.beta.values()) == {None}
    with pytest.raises(NotReady):
        est.path()
    est = estimate_birecurrent(builtin("uniform3"), make_oracle(0), (0, 5), max_depth=4, K=3)
    assert est.depths == [1, 2, 4]


def test_beta_occupation_matches_pi():
    spec = builtin("uniform3")
    occ = np.zeros(3)
    for i in range(8):
        est = estimate_birecurrent(spec, make_oracle(1, i), (0, 3000), min_depth=16)
        occ += np.bincount(est.path(), minlength=3)
    freq = occ / occ.sum()
    assert np.allclose(freq, 1 / 3, atol=0.02)


def test_beta_revisits_x_star_at_both_ends():
    spec = builtin("lazy-cycle5")
    for i in range(10):
        path = estimate_birecurrent(spec, make_oracle(2, i), (0, 600), min_depth=32).path()
        assert 0 in path[:150] and 0 in path[-150:]


def test_mortality_singleton():
    spec = builtin("singleton")
    o = make_oracle(0)
    slab = build_slab(spec, o, (0, 20))
    dec = decompose_mortality(slab, estimate_birecurrent(spec, o, (0, 20)))
    assert dec.immortal == set(slab.vertices()) and not dec.mortal and not dec.unknown
    assert set(dec.tree_sizes.values()) == {0}


def test_mortality_partition_and_censoring():
    spec = builtin("uniform3")
    o = make_oracle(0, 7)
    slab = build_slab(spec, o, (0, 120))
    beta = estimate_birecurrent(spec, o, (0, 120), min_depth=32)
    dec = decompose_mortality(slab, beta, burn_in=20)
    verts = set(slab.vertices())
    assert dec.immortal | set(dec.mortal) | dec.unknown == verts
    assert not (dec.immortal & set(dec.mortal)) and not (dec.immortal & dec.unknown)
    assert not (set(dec.mortal) & dec.unknown)
    assert dec.immortal == {(t, beta.beta[t]) for t in slab.times() if (t, beta.beta[t]) in verts}
    for (t, y) in verts:
        if t == 119 and y != beta.beta[t]:
            assert (t, y) in dec.unknown
    for (t, y), (m, z) in dec.mortal.items():
        assert m > t and z == beta.beta[m]


def test_mortal_tree_sizes_match_slice_mean():
    spec = builtin("uniform3")
    sizes = []
    for i in range(12):
        o = make_oracle(3, i)
        slab = build_slab(spec, o, (-400, 400))
        beta = estimate_birecurrent(spec, o, (-400, 400), min_depth=64)
        dec = decompose_mortality(slab, beta, burn_in=100)
        sizes.append(np.mean([v for t, v in dec.tree_sizes.items() if -250 <= t <= 250]))
    mean = np.mean(sizes) + 1
    se = np.std(sizes, ddof=1) / math.sqrt(len(sizes))
    assert abs(mean - 305 / 143) < 3 * se + 0.02


def test_mortality_needs_beta():
    spec = builtin("uniform3")
    o = make_oracle(0)
    slab = build_slab(spec, o, (0, 10))
    beta = estimate_birecurrent(spec, o, (0, 10), max_depth=4)
    beta.beta[5] = None
    with pytest.raises(NotReady):
        decompose_mortality(slab, beta)


def test_intersection_singleton_is_beta():
    I = bridge_intersection(builtin("singleton"), make_oracle(0), [0], (0, 10))
    assert I == {(t, 0) for t in range(11)}


def test_intersection_contains_beta_and_more():
    spec = builtin("uniform3")
    strict = 0
    for i in range(100):
        o = make_oracle(0, i)
        I = bridge_intersection(spec, o, spec.states, (0, 60))
        beta = estimate_birecurrent(spec, o, (0, 60), min_depth=16)
        bv = {(t, y) for t, y in beta.beta.items() if 20 <= t <= 40}
        inner = {v for v in I if 20 <= v[0] <= 40}
        assert bv <= inner
        strict += inner > bv
    assert strict >= 1


def test_intersection_shrinks_with_more_bases():
    spec = builtin("falling")
    for i in range(4):
        o = make_oracle(0, i)
        sizes = [len(bridge_intersection(spec, o, range(K + 1), (0, 100))) for K in range(1, 6)]
        assert all(x >= y for x, y in zip(sizes, sizes[1:]))
