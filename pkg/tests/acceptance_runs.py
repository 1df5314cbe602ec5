"""The acceptance criteria as plain functions.

Each criterion returns ``(passed, record)`` where ``record`` is a JSON-ready
summary.  ``write_records`` runs them all and stores one JSON file per
criterion; running this file as a script does the same into a given
directory, which is how the determinism criterion reruns everything in a
fresh interpreter.
"""

from __future__ import annotations

import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))

from bridgegraph import (  # noqa: E402
    bridge_intersection,
    build_slab,
    builtin,
    cftp_sample,
    cycle_visit_means,
    enumerate_SB,
    estimate_birecurrent,
    estimate_graph_components,
    estimate_transports,
    lwc_distance,
    make_oracle,
    pb_entry,
    predict_components,
    slice_hit_times,
)
from bridgegraph import renewal  # noqa: E402
from bridgegraph.cftp import empirical_pi_check  # noqa: E402
from bridgegraph.cli import RunConfig, run  # noqa: E402
from bridgegraph.mtp import PAIRED  # noqa: E402
from bridgegraph.renewal import pb_matrix  # noqa: E402
from oracles import brute_pb, subsets_with  # noqa: E402

SEED = 2024
RUNTIME_LIMITS = {1: 1.0, 2: 10.0, 4: 60.0, 7: 120.0}   # criterion 4 runs two specs at < 30 s each


def c1():
    renewal._memo.clear()
    buf = io.StringIO()
    code = run(RunConfig(command="pb", spec_path="builtin:uniform3"), stdout=buf)
    doc = json.loads(buf.getvalue())["result"]
    want_states = [[0], [0, 1], [0, 2], [0, 1, 2]]
    want_pi = ["17/143", "45/143", "45/143", "36/143"]
    ok = code == 0 and doc["states"] == want_states and doc["pi"] == want_pi
    return ok, {"exit": code, "states": doc["states"], "pi": doc["pi"]}


def c2():
    renewal._memo.clear()
    checked, bad = 0, []
    for name in ("uniform3", "star", "lazy-cycle5"):
        spec = builtin(name)
        for e in subsets_with(spec, max_size=3):
            for f in subsets_with(spec):
                checked += 1
                if pb_entry(spec, e, f) != brute_pb(spec, e, f):
                    bad.append([name, list(e), list(f)])
    return not bad, {"pairs": checked, "mismatches": bad}


def c3():
    rows = {}
    for name in ("uniform3", "star", "lazy-cycle5", "coin2", "two-class", "uniform4"):
        spec = builtin(name)
        subs = subsets_with(spec)
        m = pb_matrix(spec, subs)
        rows[name] = sorted({str(s) for s in m.row_sums()})
    ok = all(v == ["1"] for v in rows.values())
    return ok, {"distinct_row_sums": rows}


def c4():
    out, ok = {}, True
    for i, name in enumerate(("uniform3", "star")):
        t0 = time.perf_counter()
        chk = empirical_pi_check(builtin(name), 10_000, base_seed=SEED + 10_000 * i)
        dt = time.perf_counter() - t0
        ok &= chk.p_value > 0.01 and dt < 30
        out[name] = {"p_value": round(chk.p_value, 6), "failures": chk.failures,
                     "frequencies": {str(k): v for k, v in chk.frequencies.items()}}
    return ok, out


def c5():
    out, ok = {}, True
    for name in ("uniform3", "star"):
        spec = builtin(name)
        agree = 0
        for i in range(100):
            o = make_oracle(SEED, i)
            x = cftp_sample(spec, o)
            beta = estimate_birecurrent(spec, o, (0, 0), min_depth=16).beta[0]
            agree += x == beta
        out[name] = agree
        ok &= agree == 100
    return ok, {"agreeing_streams": out}


def c6():
    cases = {"cycle2": None, "cycle3": None, "cycle5": None, "uniform3": None, "two-class": None, "flip": 2}
    out, ok = {}, True
    for name, fixed in cases.items():
        spec = builtin(name)
        predicted = predict_components(spec) if fixed is None else fixed
        rep = estimate_graph_components(spec, make_oracle(SEED, 1), 400, [(0, x) for x in spec.states])
        out[name] = {"predicted": predicted, "observed": rep.count, "converged": rep.converged}
        ok &= rep.converged and rep.count == predicted
    expect = {"cycle2": 2, "cycle3": 3, "cycle5": 5, "uniform3": 1, "two-class": 3, "flip": 2}
    ok &= all(out[k]["predicted"] == v for k, v in expect.items())
    return ok, out


def c7():
    out, ok = {}, True
    for name in ("uniform3", "lazy-cycle5"):
        ests = estimate_transports(builtin(name), SEED, list(PAIRED), 10_000, 64)
        out[name] = {e.transport_id: {"w_plus": e.w_plus, "w_minus": e.w_minus, "se": e.se_diff,
                                      "pass": e.passed} for e in ests}
        ok &= all(e.passed for e in ests)
        if name == "uniform3":
            c0 = next(e for e in ests if e.transport_id == "3").w_minus
            out["C0"] = c0
            ok &= abs(c0 - 1) <= 0.05
    cyc = cycle_visit_means(builtin("uniform3"), SEED + 1, 10_000, 64)
    out["cycle"] = {str(y): c.mean for y, c in cyc.items()}
    ok &= all(abs(c.mean - 1) <= 0.05 for c in cyc.values())
    return ok, out


def c8():
    spec = builtin("uniform3")
    means = []
    for i in range(32):
        slab = build_slab(spec, make_oracle(SEED, i), (0, 2200))
        means.append(np.mean([len(slab.slice(t)) for t in range(200, 2201)]))
    mean = float(np.mean(means))
    se = float(np.std(means, ddof=1) / math.sqrt(len(means)))
    return mean <= 3.0 + 3 * se, {"mean": mean, "se": se, "bound": 3.0}


def c9():
    star = {tuple(s) for s in enumerate_SB(builtin("star")).subsets}
    uni = {tuple(s) for s in enumerate_SB(builtin("uniform3")).subsets}
    ok = (0, 1, 2) not in star and uni == {(0,), (0, 1), (0, 2), (0, 1, 2)}
    return ok, {"star": sorted(map(list, star)), "uniform3": sorted(map(list, uni))}


def c10():
    hit = slice_hit_times(builtin("uniform3"), make_oracle(SEED, 0), {0}, 100_000)
    target = 17 / 143
    return abs(hit.intensity - target) <= 3 * hit.stderr, {
        "intensity": hit.intensity, "stderr": hit.stderr, "target": "17/143"}


def c11():
    rows = lwc_distance(builtin("uniform3"), SEED, 2, [50, 100, 200, 400], n_windows=32)
    tv = [r.tv for r in rows]
    ok = all(x > y for x, y in zip(tv, tv[1:]))
    return ok, {"rows": [[r.n, r.tv, r.samples, r.censored_fraction] for r in rows]}


def c12():
    spec = builtin("falling")
    converged, gap_failures = 0, 0
    for i in range(32):
        est = estimate_birecurrent(spec, make_oracle(SEED, i), (0, 100), min_depth=16)
        if not est.converged:
            continue
        converged += 1
        path = est.path()
        if any(0 not in path[s:s + 50] for s in range(10, 101 - 50)):
            gap_failures += 1
    sizes = [len(bridge_intersection(spec, make_oracle(SEED, 0), range(K + 1), (0, 100))) for K in range(1, 6)]
    monotone = all(x >= y for x, y in zip(sizes, sizes[1:]))
    ok = converged == 32 and gap_failures <= 1 and monotone
    return ok, {"converged": converged, "gap_failures": gap_failures, "intersection_sizes": sizes}


CRITERIA = {1: c1, 2: c2, 3: c3, 4: c4, 5: c5, 6: c6, 7: c7, 8: c8, 9: c9, 10: c10, 11: c11, 12: c12}

TITLES = {
    1: "exact pi_B on uniform3", 2: "P_B recurrence vs brute force", 3: "P_B row sums",
    4: "CFTP chi-square", 5: "CFTP sample equals beta_0", 6: "component counts",
    7: "mass-transport suite", 8: "E[#B_t] <= E[sigma]", 9: "S_B characterisation",
    10: "slice intensity of {0}", 11: "local weak convergence", 12: "falling chain",
    13: "byte-identical reruns",
}


def encode(record) -> bytes:
    return (json.dumps(record, sort_keys=True, indent=1, default=str) + "\n").encode()


def write_records(out_dir, criteria=CRITERIA) -> dict[int, tuple[bool, dict, float]]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = {}
    for k, fn in criteria.items():
        t0 = time.perf_counter()
        ok, record = fn()
        results[k] = (bool(ok), record, time.perf_counter() - t0)
        (out_dir / f"criterion_{k:02d}.json").write_bytes(encode({"criterion": k, "passed": bool(ok), **record}))
    return results


if __name__ == "__main__":
    write_records(sys.argv[1])
