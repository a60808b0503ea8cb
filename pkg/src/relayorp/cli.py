"""relayorp command line: place, rate, sweep, validate.

Powers are in watts, N0 in watts/Hz, rates in nats/sec.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import channel, oracle, placement
from .channel import Receiver, Topology
from .errors import RelayOrpError
from .geometry import Point2

JSON_SCHEMA_VERSION = 1
EXIT_INVALID = 2
EXIT_DEGENERATE = 3
EXIT_UNWRITABLE = 4

_number = {"type": "number"}
TOPOLOGY_SCHEMA = {
    "type": "object",
    "properties": {
        "alpha": {"type": "number", "minimum": 2},
        "n0": {"type": "number", "exclusiveMinimum": 0},
        "gamma": {"type": "number", "exclusiveMinimum": 0},
        "source": {
            "type": "object",
            "properties": {"x": _number, "y": _number, "power": {"type": "number", "exclusiveMinimum": 0}},
            "required": ["x", "y"],
            "additionalProperties": False,
        },
        "receivers": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {"id": {"type": ["string", "integer"]}, "x": _number, "y": _number},
                "required": ["id", "x", "y"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["source", "receivers"],
    "additionalProperties": False,
}


class CliError(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


def parse_topology(doc) -> Topology:
    """Validate a topology document and build the instance (defaults:
    gamma=1, alpha=2, n0=1, source power 1)."""
    try:
        jsonschema.validate(doc, TOPOLOGY_SCHEMA)
    except jsonschema.ValidationError as e:
        raise CliError(EXIT_INVALID, f"schema error: {e.message}") from None
    ids = [str(r["id"]) for r in doc["receivers"]]
    dup = sorted({i for i in ids if ids.count(i) > 1})
    if dup:
        raise CliError(EXIT_INVALID, f"schema error: duplicate receiver ids {dup}")
    src = doc["source"]
    try:
        return Topology(
            Point2(float(src["x"]), float(src["y"])),
            tuple(Receiver(i, Point2(float(r["x"]), float(r["y"]))) for i, r in zip(ids, doc["receivers"])),
            p_s=float(src.get("power", 1.0)),
            gamma=float(doc.get("gamma", 1.0)),
            alpha=float(doc.get("alpha", 2.0)),
            n0=float(doc.get("n0", 1.0)),
        )
    except RelayOrpError as e:
        raise CliError(EXIT_DEGENERATE, f"degenerate topology: {e}") from None


def load_topology(path: str) -> Topology:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as e:
        raise CliError(EXIT_INVALID, f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise CliError(EXIT_INVALID, f"invalid JSON in {path}: {e}") from None
    return parse_topology(doc)


def _relay_arg(text: str) -> Point2:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y, got {text!r}") from None
    return Point2(x, y)


def _seed() -> int:
    raw = os.environ.get("RELAYORP_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise CliError(EXIT_INVALID, f"RELAYORP_SEED must be an integer, got {raw!r}") from None


def _path_dict(p: channel.RelayPath | None):
    if p is None:
        return None
    return {"t1": sorted(p.t1), "t2": sorted(p.t2), "rho_s": p.rho_s, "rho_r": p.rho_r,
            "mincut_full_power": p.mincut_full_power}


def allocation_dict(a: channel.Allocation) -> dict:
    return {
        "lambda": a.lam,
        "relay_path": _path_dict(a.relay_path),
        "rate_relay_path": a.rate_relay_path,
        "rate_direct_path": a.rate_direct_path,
        "multicast_rate": a.multicast_rate,
        "relay_share": a.relay_share,
        "arbitrary_split": a.arbitrary_split,
        "second_path": _path_dict(a.second_path),
        "second_lambda": a.second_lam,
        "second_relay_share": a.second_relay_share,
        "rate_second_path": a.rate_second_path,
        "paths_used": a.paths_used,
    }


def placement_dict(res: placement.PlacementResult) -> dict:
    return {
        "schema": JSON_SCHEMA_VERSION,
        "relay": list(res.relay),
        "multicast_rate": res.multicast_rate,
        "orp_step": res.orp_step.value,
        "radii": {"pi_s": res.radii[0], "pi_r": res.radii[1]},
        "sets": {k: list(v) for k, v in res.sets.items()},
        "allocation": allocation_dict(res.allocation),
        "orp_relay": list(res.orp_relay),
        "orp_rate": res.orp_rate,
        "refined": res.refined,
        "stages": [{"label": s.label, "point": list(s.point), "rate": s.rate, "zeta": s.zeta} for s in res.stages],
    }


def _fmt_path(p: channel.RelayPath) -> str:
    return f"T1={{{', '.join(sorted(p.t1))}}} T2={{{', '.join(sorted(p.t2))}}}"


def cmd_place(args, out) -> int:
    topo = load_topology(args.topology)
    res = placement.orp(topo, n0_rule=args.n0_rule, seed=_seed())
    oracle_line = None
    doc = placement_dict(res)
    if args.oracle_check:
        gp, gr = oracle.grid_best_relay(topo, args.grid)
        bound = oracle.discretization_bound(topo, args.grid, gr)
        ok = res.multicast_rate >= gr - bound
        doc["oracle"] = {"grid": args.grid, "point": list(gp), "rate": gr, "bound": bound, "agree": ok}
        oracle_line = (f"oracle  grid {args.grid}: best {gr!r} at ({gp.x!r}, {gp.y!r}), "
                       f"bound {bound:.3g} -> {'agree' if ok else 'DISAGREE'}")
    in_cap = channel.c_cap_contains(topo, res.relay, center=args.ccap_center)
    doc["in_ccap"] = in_cap
    if args.json:
        json.dump(doc, out, indent=2)
        out.write("\n")
        return 0
    a = res.allocation
    print(f"relay        ({res.relay.x!r}, {res.relay.y!r})", file=out)
    print(f"step         {res.orp_step.value}" + ("  (refined)" if res.refined else ""), file=out)
    print(f"rate         {res.multicast_rate!r} nats/sec", file=out)
    print(f"lambda       {a.lam!r}", file=out)
    print(f"path         {_fmt_path(a.relay_path)}", file=out)
    if a.second_path is not None:
        print(f"second path  {_fmt_path(a.second_path)}  lambda {a.second_lam!r}", file=out)
    print(f"pi_s, pi_r   {res.radii[0]!r}, {res.radii[1]!r}", file=out)
    print("sets         " + "  ".join(f"{k}={{{', '.join(v)}}}" for k, v in res.sets.items()), file=out)
    if res.refined:
        print(f"orp point    ({res.orp_relay.x!r}, {res.orp_relay.y!r}) rate {res.orp_rate!r}", file=out)
    print(f"in C-cap     {in_cap} (center {args.ccap_center})", file=out)
    if oracle_line:
        print(oracle_line, file=out)
    return 0


def cmd_rate(args, out) -> int:
    topo = load_topology(args.topology)
    if args.relay is None:
        raise CliError(EXIT_INVALID, "rate needs --relay X,Y")
    try:
        alloc = channel.allocate(topo, args.relay)
        bound = channel.cutset_bound(topo, args.relay)
    except RelayOrpError as e:
        raise CliError(EXIT_DEGENERATE, str(e)) from None
    if args.json:
        doc = {"schema": JSON_SCHEMA_VERSION, "relay": list(args.relay), "allocation": allocation_dict(alloc),
               "cutset": bound, "gap": bound - alloc.multicast_rate,
               "in_ccap": channel.c_cap_contains(topo, args.relay, center=args.ccap_center)}
        json.dump(doc, out, indent=2)
        out.write("\n")
        return 0
    print(f"relay    ({args.relay.x!r}, {args.relay.y!r})", file=out)
    print(f"rate     {alloc.multicast_rate!r} nats/sec", file=out)
    print(f"lambda   {alloc.lam!r}", file=out)
    print(f"path     {_fmt_path(alloc.relay_path)}", file=out)
    print(f"cutset   {bound!r}", file=out)
    print(f"gap      {bound - alloc.multicast_rate!r}", file=out)
    return 0


def sweep_rows(topo: Topology, pts: np.ndarray) -> np.ndarray:
    """Columns x, y, rate, cutset, gap."""
    rate = channel.multicast_rates(topo, pts)
    cut = channel.cutset_bounds(topo, pts)
    return np.column_stack([pts, rate, cut, cut - rate])


def write_sweep(fh, rows: np.ndarray, orp_row: np.ndarray) -> None:
    fh.write("x,y,rate,cutset,gap\n")
    for row in rows:
        fh.write(",".join(repr(float(v)) for v in row) + "\n")
    fh.write("# orp\n")
    fh.write(",".join(repr(float(v)) for v in orp_row) + "\n")


def cmd_sweep(args, out) -> int:
    topo = load_topology(args.topology)
    pts = oracle.grid_points(topo, oracle.GridSpec(args.grid, boundary=False))
    rows = sweep_rows(topo, pts)
    res = placement.orp(topo, n0_rule=args.n0_rule, seed=_seed())
    orp_row = sweep_rows(topo, np.array([res.relay]))[0]
    if args.out is None:
        write_sweep(out, rows, orp_row)
        return 0
    try:
        with open(args.out, "w") as fh:
            write_sweep(fh, rows, orp_row)
    except OSError as e:
        raise CliError(EXIT_UNWRITABLE, f"cannot write {args.out}: {e.strerror}") from None
    return 0


def cmd_validate(args, out) -> int:
    topo = load_topology(args.topology)
    info = {"n": topo.n, "hull_area": topo.hull.area, "d_stn": topo.d_stn, "gamma": topo.gamma, "alpha": topo.alpha}
    if args.json:
        json.dump({"schema": JSON_SCHEMA_VERSION, "valid": True, **info}, out, indent=2)
        out.write("\n")
        return 0
    print(f"ok: {Path(args.topology).name}", file=out)
    for k, v in info.items():
        print(f"{k:10s} {v!r}", file=out)
    return 0


COMMANDS = {"place": cmd_place, "rate": cmd_rate, "sweep": cmd_sweep, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="relayorp",
        description="Single-relay placement for low-SNR multicast. Powers in watts, "
                    "N0 in watts/Hz, rates in nats/sec. RELAYORP_SEED fixes the multistart seed.",
    )
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("topology", help="topology JSON file")
    p.add_argument("--relay", type=_relay_arg, help="relay position X,Y (rate)")
    p.add_argument("--grid", type=int, default=21, help="grid points per axis (sweep, oracle check)")
    p.add_argument("--out", help="CSV output path (sweep); stdout if omitted")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--oracle-check", action="store_true", help="compare with a brute-force grid search")
    p.add_argument("--ccap-center", choices=("tn", "relay"), default="tn")
    p.add_argument("--n0-rule", choices=("sec4", "sec5"), default="sec4")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.grid < 2:
        print("error: --grid must be at least 2", file=sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](args, sys.stdout)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
