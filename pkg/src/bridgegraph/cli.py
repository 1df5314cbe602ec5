"""Command-line entry point: ``bridgegraph <command> --spec ... [options]``.

Exit codes: 0 success, 1 invalid chain spec, 2 the computation ran but did
not succeed (no coalescence, beta not determined), 3 malformed request.

Every output document carries the tool version, the seed and a hash of the
chain spec.  Nothing time- or host-dependent is written, so reruns with the
same arguments produce identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

from . import __version__
from .bridge import build_slab, estimate_birecurrent
from .cftp import DEFAULT_CAP, coupling
from .doeblin import estimate_graph_components, state_path
from .driver import ChainSpec, load_spec, make_oracle, validate_spec
from .errors import BridgeGraphError, CouplingFailure, NotApplicable, NotReady, SpecError, UsageError
from .mtp import PAIRED, estimate_transports, lwc_distance
from .renewal import enumerate_SB, pb_stationary

COMMANDS = ("validate", "simulate", "bridge", "beta", "cftp", "pb", "sb", "mtp", "lwc", "components")
OUTPUT_DIR_ENV = "BRIDGEGRAPH_OUTPUT_DIR"
SCHEMA_VERSION = 1

EXIT_OK, EXIT_INVALID, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2, 3


@dataclass
class RunConfig:
    command: str
    spec_path: str
    seed: int = 0
    streams: int = 1
    window: int = 100
    radius: int = 2
    cap: int = DEFAULT_CAP
    format: str = "json"
    output_path: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.format not in ("json", "csv"):
            raise UsageError("format must be json or csv")
        for name in ("streams", "window", "cap", "workers"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise UsageError(f"{name} must be a positive integer")
        for name in ("seed", "radius"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise UsageError(f"{name} must be a non-negative integer")

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


@dataclass
class Outcome:
    status: int
    result: dict
    table: list[list] | None = None          # rows for CSV output, header first


# --------------------------------------------------------------------------
# commands

def _validate(spec: ChainSpec, cfg: RunConfig) -> Outcome:
    rep = validate_spec(spec)
    rows = [["field", "value"], ["valid", rep.valid]] + [["message", m] for m in rep.messages]
    return Outcome(EXIT_OK if rep.valid else EXIT_INVALID, rep.to_dict(), rows)


def _simulate(spec, cfg):
    paths = {}
    rows = [["stream", "t", "state"]]
    for i in range(cfg.streams):
        p = state_path(spec, make_oracle(cfg.seed, i), 0, spec.x_star, cfg.window)
        paths[str(i)] = list(p.states)
        rows += [[i, t, y] for t, y in enumerate(p.states)]
    return Outcome(EXIT_OK, {"start": [0, spec.x_star], "paths": paths}, rows)


def _bridge(spec, cfg):
    oracle = make_oracle(cfg.seed, 0)
    slab = build_slab(spec, oracle, (0, cfg.window))
    beta = estimate_birecurrent(spec, oracle, (0, cfg.window), max_depth=cfg.cap)
    doc = slab.to_dict(beta)
    doc["beta_status"] = beta.status.value
    rows = [["t", "state", "on_beta"]] + [[t, y, int(beta.beta.get(t) == y)] for t, y in slab.vertices()]
    return Outcome(EXIT_OK, doc, rows)


def _beta(spec, cfg):
    est = estimate_birecurrent(spec, make_oracle(cfg.seed, 0), (0, cfg.window), max_depth=cfg.cap)
    doc = {
        "status": est.status.value,
        "depths": est.depths,
        "beta": {str(t): v for t, v in sorted(est.beta.items())},
        "stabilization_depth": {str(t): v for t, v in sorted(est.stabilization_depth.items())},
    }
    rows = [["t", "beta", "stabilization_depth"]] + [
        [t, "" if est.beta[t] is None else est.beta[t], "" if est.stabilization_depth[t] is None else est.stabilization_depth[t]]
        for t in sorted(est.beta)
    ]
    return Outcome(EXIT_OK if est.converged else EXIT_FAILURE, doc, rows)


def _cftp_one(args):
    spec, seed, stream, cap = args
    r = coupling(spec, make_oracle(seed, stream), cap)
    return r.tau, r.sample, r.depths_tried


def _cftp(spec, cfg):
    if not spec.is_finite:
        raise NotApplicable("coupling from the past needs a finite state space")
    jobs = [(spec, cfg.seed, i, cfg.cap) for i in range(cfg.streams)]
    if cfg.workers > 1 and cfg.streams > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_cftp_one, jobs, chunksize=max(1, cfg.streams // (4 * cfg.workers))))
    else:
        results = [_cftp_one(j) for j in jobs]
    samples = []
    rows = [["stream", "tau", "sample"]]
    failures = 0
    for i, (tau, sample, depths) in enumerate(results):
        failures += sample is None
        samples.append({"stream": i, "tau": tau, "sample": sample, "depths_tried": depths})
        rows.append([i, "" if tau is None else tau, "" if sample is None else sample])
    freq = {str(x): sum(s["sample"] == x for s in samples) for x in spec.states}
    doc = {"samples": samples, "counts": freq, "failures": failures}
    if failures:
        doc["error"] = f"no coalescence within depth {cfg.cap} on {failures} stream(s)"
    return Outcome(EXIT_FAILURE if failures else EXIT_OK, doc, rows)


def _pb(spec, cfg):
    m = pb_stationary(spec)
    rows = [["subset", "pi"]] + [[" ".join(map(str, e)), f"{p.numerator}/{p.denominator}"] for e, p in zip(m.states, m.pi)]
    return Outcome(EXIT_OK, m.to_dict(), rows)


def _sb(spec, cfg):
    rep = enumerate_SB(spec, cfg.cap)
    rows = [["subset"]] + [[" ".join(map(str, e))] for e in rep.subsets]
    return Outcome(EXIT_FAILURE if rep.partial else EXIT_OK, rep.to_dict(), rows)


def _mtp(spec, cfg):
    ests = estimate_transports(spec, cfg.seed, list(PAIRED), cfg.window, cfg.streams)
    rows = [["spec", "transport_id", "estimate_plus", "estimate_minus", "stderr", "result"]] + [e.row(spec.name) for e in ests]
    doc = {"transports": [
        {**asdict(e), "passed": e.passed} for e in ests
    ]}
    return Outcome(EXIT_OK, doc, rows)


def _lwc(spec, cfg):
    n_list = sorted({max(1, cfg.window // 8), max(1, cfg.window // 4), max(1, cfg.window // 2), cfg.window})
    res = lwc_distance(spec, cfg.seed, cfg.radius, n_list, n_windows=cfg.streams)
    rows = [["spec", "n", "tv", "samples", "censored_fraction"]] + [
        [spec.name, r.n, f"{r.tv:.6f}", r.samples, f"{r.censored_fraction:.6f}"] for r in res
    ]
    return Outcome(EXIT_OK, {"radius": cfg.radius, "rows": [asdict(r) for r in res]}, rows)


def _components(spec, cfg):
    probes = [(0, x) for x in spec.states] if spec.is_finite else [(0, x) for x in range(8)]
    rep = estimate_graph_components(spec, make_oracle(cfg.seed, 0), cfg.window, probes)
    doc = {
        "predicted": rep.predicted_count,
        "observed": rep.count,
        "converged": rep.converged,
        "classes": [[list(p) for p in c] for c in rep.observed_classes],
    }
    rows = [["class", "t", "state"]] + [[k, t, x] for k, c in enumerate(rep.observed_classes) for t, x in c]
    return Outcome(EXIT_OK, doc, rows)


HANDLERS = {
    "validate": _validate, "simulate": _simulate, "bridge": _bridge, "beta": _beta, "cftp": _cftp,
    "pb": _pb, "sb": _sb, "mtp": _mtp, "lwc": _lwc, "components": _components,
}


# --------------------------------------------------------------------------
# plumbing

def _header(cfg: RunConfig, spec: ChainSpec | None) -> dict:
    return {
        "tool": "bridgegraph",
        "version": __version__,
        "schema": SCHEMA_VERSION,
        "command": cfg.command,
        "seed": cfg.seed,
        "spec": None if spec is None else spec.name,
        "spec_hash": None if spec is None else spec.digest(),
    }


def render(cfg: RunConfig, spec: ChainSpec | None, outcome: Outcome) -> str:
    head = _header(cfg, spec)
    if cfg.format == "json":
        doc = {**head, "exit_status": outcome.status, "result": outcome.result}
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    for k in ("tool", "version", "schema", "command", "seed", "spec", "spec_hash"):
        buf.write(f"# {k}={head[k]}\n")
    buf.write(f"# exit_status={outcome.status}\n")
    w = csv.writer(buf, lineterminator="\n")
    for row in outcome.table or [["result"], [json.dumps(outcome.result, sort_keys=True)]]:
        w.writerow(row)
    return buf.getvalue()


def _destination(cfg: RunConfig) -> str | None:
    if cfg.output_path:
        return cfg.output_path
    root = os.environ.get(OUTPUT_DIR_ENV)
    if root:
        return os.path.join(root, f"{cfg.command}.{cfg.format}")
    return None


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute one command; returns the exit status."""
    stdout = stdout or sys.stdout
    spec = None
    try:
        spec = load_spec(cfg.spec_path)
        if cfg.command != "validate":
            rep = validate_spec(spec)
            if not rep.valid:
                outcome = Outcome(EXIT_INVALID, {"error": "invalid chain spec", **rep.to_dict()})
            else:
                outcome = HANDLERS[cfg.command](spec, cfg)
        else:
            outcome = HANDLERS[cfg.command](spec, cfg)
    except SpecError as exc:
        outcome = Outcome(EXIT_INVALID, {"error": str(exc)})
    except (CouplingFailure, NotReady) as exc:
        outcome = Outcome(EXIT_FAILURE, {"error": str(exc)})
    except (UsageError, NotApplicable) as exc:
        outcome = Outcome(EXIT_USAGE, {"error": str(exc)})
    text = render(cfg, spec, outcome)
    dest = _destination(cfg)
    if dest is None:
        stdout.write(text)
    else:
        parent = os.path.dirname(dest)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    if outcome.status != EXIT_OK and "error" in outcome.result:
        print(f"bridgegraph: {outcome.result['error']}", file=sys.stderr)
    return outcome.status


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bridgegraph", description="Bridge-graph experiments on Markov chains.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--spec", required=True, help="chain spec JSON file or builtin:<name>")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--streams", type=int, default=1, help="number of independent noise streams")
    p.add_argument("--window", type=int, default=100, help="window length or horizon")
    p.add_argument("--radius", type=int, default=2, help="ball radius for lwc")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP, help="depth or size budget")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", default=None, help=f"output file (default: ${OUTPUT_DIR_ENV}/<command>.<format> or stdout)")
    p.add_argument("--workers", type=int, default=1, help="worker processes for per-stream work")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(
            command=args.command, spec_path=args.spec, seed=args.seed, streams=args.streams,
            window=args.window, radius=args.radius, cap=args.cap, format=args.format,
            output_path=args.output, workers=args.workers,
        )
    except BridgeGraphError as exc:
        print(f"bridgegraph: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
