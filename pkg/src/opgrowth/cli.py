"""Command-line front door.

Each subcommand runs one experiment from a master seed, writes UTF-8
CSV/JSON artifacts into --out, and drops a manifest.json holding the
options and sha256 digests; `opgrowth replay` reruns a manifest and
verifies the outputs byte for byte.

Exit codes: 0 ok, 2 usage, 3 resource guard, 4 sampling failure, 1 other
errors (a machine-readable error JSON goes to stderr).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__, counting, dynamics, estimators, kernels, oracle
from . import hitting as hitting_mod
from .config import Box, LatticeParams, Site, split_seed
from .errors import OpgrowthError, ResourceLimitError, SamplingError
from .hitting import HittingCaps
from .manifest import RunManifest, digest_bytes, load_manifest, write_outputs


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode()


def _csv_bytes(header: list[str], rows: list[tuple]) -> bytes:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else str(v) for v in row))
    return ("\n".join(lines) + "\n").encode()


def _params(opts: dict) -> LatticeParams:
    return LatticeParams(opts["d"], opts["p"], opts["seed"])


def _ints(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip() != ""]


# ---------------------------------------------------------------------------
# subcommand handlers: opts dict in, {filename: bytes} out


def _cmd_simulate(opts: dict) -> dict[str, bytes]:
    params = _params(opts)
    clip = Box.cube(params.d, opts["window"]) if opts.get("window") else None
    trace = dynamics.run_cluster(params, [Site(tuple([0] * params.d), 0)],
                                 opts["n"], clip=clip)
    d = params.d
    header = ["t", "count"] + [f"min_z{i+1}" for i in range(d)] + [f"max_z{i+1}" for i in range(d)]
    rows = []
    for f in trace.fronts:
        b = f.bounds()
        if b is None:
            rows.append((f.t, 0) + (None,) * (2 * d))
        else:
            rows.append((f.t, f.count) + b[0] + b[1])
    files = {"trace.csv": _csv_bytes(header, rows)}
    if opts.get("bits"):
        with tempfile.NamedTemporaryFile(suffix=".bits") as tmp:
            dynamics.write_trace_bits(trace, tmp.name)
            with open(tmp.name, "rb") as fh:
                files["trace.bits"] = fh.read()
    files["report.json"] = _json_bytes({
        "params": params.to_dict(), "t_max": opts["n"], "tau": trace.tau,
        "survived_to_cap": trace.survived,
    })
    return files


def _region_from(opts: dict) -> counting.RegionSpec:
    kind = opts.get("region", "all")
    if kind == "all":
        return counting.RegionSpec.all()
    if kind == "point":
        return counting.RegionSpec.at(opts["region_point"])
    if kind == "box":
        return counting.RegionSpec.in_box(Box(tuple(opts["region_lo_int"]),
                                              tuple(opts["region_hi_int"])))
    if kind == "scaled":
        return counting.RegionSpec.scaled(opts["region_lo"], opts["region_hi"])
    raise OpgrowthError(f"unknown region kind {kind!r}")


def _cmd_count(opts: dict) -> dict[str, bytes]:
    params = _params(opts)
    region = _region_from(opts)
    n, mode = opts["n"], opts["mode"]
    m = opts.get("survival_m")
    if m:
        report = counting.surviving_count(params, n, m, region, mode=mode)
        layers = None
    else:
        layers = counting.count_forward(params, n, mode=mode)
        report = counting.count_region(layers, region, params)
    files = {"report.json": _json_bytes(report.to_dict())}
    if layers is not None:
        d = params.d
        rows = []
        for layer in layers:
            if layer.mode == "exact":
                for z in sorted(layer.support()):
                    rows.append((layer.t,) + z + (layer.values[z],))
            else:
                vals = np.asarray(layer.values)
                for idx in np.argwhere(np.isfinite(vals)):
                    z = tuple(int(c + lo) for c, lo in zip(idx, layer.box.lo))
                    rows.append((layer.t,) + z + (repr(float(vals[tuple(idx)])),))
        header = ["t"] + [f"z{i+1}" for i in range(d)] + ["count" if mode == "exact" else "log_count"]
        files["counts.csv"] = _csv_bytes(header, rows)
    return files


def _cmd_sigma(opts: dict) -> dict[str, bytes]:
    params = _params(opts)
    caps = HittingCaps(survival_horizon=opts["horizon"])
    x = tuple(opts["x"])
    records = []
    for slot in range(opts["replicas"]):
        sample = hitting_mod.conditioned_sample_for_slot(params, slot, caps.survival_horizon)
        child = params.with_seed(sample.seed)
        records.append(hitting_mod.essential_hitting(child, x, caps))
    ok = [r for r in records if r.status == "ok"]
    sigmas = [r.sigma for r in ok]
    summary = {
        "params": params.to_dict(), "x": list(x), "replicas": opts["replicas"],
        "ok": len(ok), "horizon": caps.survival_horizon,
        "sigma_mean": float(np.mean(sigmas)) if sigmas else None,
        "sigma_stderr": (float(np.std(sigmas, ddof=1) / math.sqrt(len(sigmas)))
                         if len(sigmas) > 1 else None),
        "k_gt_1_fraction": float(np.mean([r.K > 1 for r in ok])) if ok else None,
    }
    lines = "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in records)
    return {"records.jsonl": lines.encode(), "summary.json": _json_bytes(summary)}


def _cmd_alpha(opts: dict) -> dict[str, bytes]:
    params = _params(opts)
    est = estimators.estimate_alpha0(
        params, opts["n"], replicas=opts["replicas"], m=opts.get("survival_m"),
        surviving=not opts.get("plain", False), mode=opts["mode"],
        horizon=opts.get("horizon"), threads=opts["threads"])
    return {"estimate.json": _json_bytes(est.to_dict(params))}


def _cmd_profile(opts: dict) -> dict[str, bytes]:
    params = _params(opts)
    caps = HittingCaps(survival_horizon=opts["horizon"])
    shape = estimators.estimate_shape(params, n_list=opts["mu_n_list"],
                                      replicas=opts["mu_replicas"], caps=caps,
                                      threads=opts["threads"])
    grid, skipped = estimators.build_direction_grid(params, opts["resolution"], shape,
                                                    grid_scale=opts["grid_scale"])
    profile = estimators.estimate_profile(params, grid, n_links=opts["links"],
                                          replicas=opts["replicas"], caps=caps,
                                          mu_ref=shape, threads=opts["threads"])
    d = params.d
    header = [f"dir{i+1}" for i in range(d)] + ["value", "stderr"]
    files = {
        "profile.csv": _csv_bytes(header, profile.csv_rows()),
        "profile.json": _json_bytes({
            "params": params.to_dict(),
            "grid": [{"z": list(pt.z), "l": pt.l, "y": list(pt.y), "h": pt.h,
                      "target": list(pt.target)} for pt in profile.grid],
            "skipped": skipped,
            "estimates": [e.to_dict() if e else None for e in profile.estimates],
            "mu_ref": shape.to_dict(),
            "diagnostics": profile.diagnostics,
        }),
    }
    return files


def _cmd_subseq(opts: dict) -> dict[str, bytes]:
    params = _params(opts)
    est = estimators.directional_subsequence_estimate(
        params, tuple(opts["y"]), opts["h"], opts["n"],
        replicas=opts["replicas"], horizon=opts.get("horizon"),
        threads=opts["threads"])
    return {"estimate.json": _json_bytes(est.to_dict(params))}


def _cmd_mu(opts: dict) -> dict[str, bytes]:
    params = _params(opts)
    caps = HittingCaps(survival_horizon=opts["horizon"])
    if opts.get("hull"):
        shape = estimators.estimate_mu_hull(params, n=opts["n"],
                                            replicas=opts["replicas"],
                                            threads=opts["threads"])
        return {"mu.json": _json_bytes({"params": params.to_dict(), **shape.to_dict()})}
    est = estimators.estimate_mu(params, tuple(opts["x"]), opts["n_list"],
                                 replicas=opts["replicas"], caps=caps,
                                 threads=opts["threads"])
    return {"mu.json": _json_bytes({
        "params": params.to_dict(), "direction": list(est.direction),
        "mu": est.value, "stderr": est.stderr, "n_used": est.n_used,
        "table": {str(k): list(v) for k, v in est.table.items()},
        "excluded": est.excluded, "method": "sigma",
    })}


def _cmd_martingale(opts: dict) -> dict[str, bytes]:
    params = _params(opts)
    levels = opts.get("levels") or list(range(opts["n"] + 1))
    trace = estimators.track_martingale(params, max(levels), opts["replicas"],
                                        levels=levels, threads=opts["threads"])
    rows = []
    for r in range(trace.log_w.shape[0]):
        for j, lv in enumerate(trace.levels):
            rows.append((r, lv, repr(float(trace.log_w[r, j]))))
    return {
        "martingale.csv": _csv_bytes(["replica", "n", "log_w"], rows),
        "summary.json": _json_bytes({"params": params.to_dict(), **trace.summary()}),
    }


def _cmd_tau_tail(opts: dict) -> dict[str, bytes]:
    params = _params(opts)
    if opts.get("calibrate"):
        out = estimators.suggest_p(params.d, seed=params.seed,
                                   replicas=opts["replicas"], cap=opts["n"])
        return {"calibrate.json": _json_bytes(out)}
    est = estimators.estimate_tau_tail(params, replicas=opts["replicas"],
                                       t_max=opts["n"], threads=opts["threads"])
    rows = [(lv, c, repr(t)) for lv, c, t in zip(est.levels, est.counts, est.tail)]
    return {
        "tail.csv": _csv_bytes(["n", "count", "tail"], rows),
        "fit.json": _json_bytes({"params": params.to_dict(), **est.to_dict()}),
    }


def _cmd_oracle_check(opts: dict) -> dict[str, bytes]:
    params = _params(opts)
    n = opts["n"]
    mismatches = []
    for i in range(opts["seeds"]):
        child = params.with_seed(split_seed(params.seed, 0, i))
        res = oracle.enumerate_paths_count(child, n)
        layer = counting.count_final(child, n, mode="exact")
        dp = {z: c for z, c in layer.values.items() if c > 0}
        if dp != res.counts:
            mismatches.append(i)
    status = "all equal" if not mismatches else "mismatch"
    return {"check.json": _json_bytes({
        "params": params.to_dict(), "n": n, "seeds": opts["seeds"],
        "status": status, "mismatched_seeds": mismatches,
    })}


def _cmd_bench(opts: dict) -> dict[str, bytes]:
    from .kernels.bench import run_benchmark

    out = run_benchmark(d=opts["d"], p=opts["p"], n=opts["n"], seed=opts["seed"],
                        repeats=opts["repeats"])
    return {"bench.json": _json_bytes(out)}


HANDLERS = {
    "simulate": _cmd_simulate,
    "count": _cmd_count,
    "sigma": _cmd_sigma,
    "alpha": _cmd_alpha,
    "profile": _cmd_profile,
    "subseq": _cmd_subseq,
    "mu": _cmd_mu,
    "martingale": _cmd_martingale,
    "tau-tail": _cmd_tau_tail,
    "oracle-check": _cmd_oracle_check,
    "bench": _cmd_bench,
}


def run_command(command: str, opts: dict, out_dir: str) -> str:
    """Run a subcommand, write outputs plus manifest; returns manifest path."""
    files = HANDLERS[command](opts)
    manifest = RunManifest(command, opts, kernels.BACKEND, __version__)
    return write_outputs(out_dir, files, manifest)


def replay_manifest(path: str, out_dir: str | None = None) -> dict:
    """Rerun a manifest's command and diff the output digests."""
    data = load_manifest(path)
    out_dir = out_dir or tempfile.mkdtemp(prefix="opgrowth-replay-")
    os.makedirs(out_dir, exist_ok=True)
    files = HANDLERS[data["command"]](data["options"])
    got = {name: digest_bytes(body) for name, body in files.items()}
    same = got == data["outputs"]
    for name, body in files.items():
        with open(f"{out_dir}/{name}", "wb") as fh:
            fh.write(body)
    return {"manifest": path, "identical": same, "out": out_dir,
            "expected": data["outputs"], "got": got,
            "backend": {"manifest": data["backend"], "current": kernels.BACKEND}}


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(sp, *, n_default=None, n_help="depth / layer budget"):
    sp.add_argument("--d", type=int, default=1, help="spatial dimension (1..3)")
    sp.add_argument("--p", type=float, default=None,
                    help="edge probability (default: calibrated per d)")
    sp.add_argument("--seed", type=int, default=0, help="master seed")
    sp.add_argument("--n", type=int, default=n_default, help=n_help)
    sp.add_argument("--replicas", type=int, default=32)
    sp.add_argument("--horizon", type=int, default=None,
                    help="survival horizon proxy for percolation")
    sp.add_argument("--survival-m", dest="survival_m", type=int, default=None,
                    help="endpoint survival filter depth")
    sp.add_argument("--window", type=int, default=None, help="window radius clip")
    sp.add_argument("--mode", choices=["exact", "log"], default="log")
    sp.add_argument("--out", default=".", help="output directory")
    sp.add_argument("--threads", type=int, default=1, help="replica worker processes")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="opgrowth",
                                 description="Oriented-percolation path counting "
                                             "and growth estimation")
    ap.add_argument("--version", action="version", version=f"opgrowth {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="cluster trace from the origin")
    _add_common(sp, n_default=64, n_help="layers to evolve")
    sp.add_argument("--bits", action="store_true", help="also dump packed bitsets")

    sp = sub.add_parser("count", help="open-path counts to level n")
    _add_common(sp, n_default=16)
    sp.add_argument("--region", choices=["all", "point", "box", "scaled"], default="all")
    sp.add_argument("--region-point", type=_ints, default=None)
    sp.add_argument("--region-lo", type=lambda s: [float(x) for x in s.split(",")], default=None)
    sp.add_argument("--region-hi", type=lambda s: [float(x) for x in s.split(",")], default=None)

    sp = sub.add_parser("sigma", help="essential hitting records")
    _add_common(sp, n_default=0)
    sp.add_argument("--x", type=_ints, required=True, help="target, e.g. 1 or 1,0")

    sp = sub.add_parser("alpha", help="flat-direction growth estimate")
    _add_common(sp, n_default=256)
    sp.add_argument("--plain", action="store_true", help="skip survival filtering")

    sp = sub.add_parser("profile", help="directional growth profile")
    _add_common(sp, n_default=0)
    sp.add_argument("--resolution", type=int, default=3)
    sp.add_argument("--links", type=int, default=48, help="chain links per direction")
    sp.add_argument("--grid-scale", dest="grid_scale", type=int, default=2)
    sp.add_argument("--mu-replicas", dest="mu_replicas", type=int, default=48)
    sp.add_argument("--mu-n-list", dest="mu_n_list", type=_ints, default=[1, 2, 4])

    sp = sub.add_parser("subseq", help="reachable-subsequence growth estimate")
    _add_common(sp, n_default=128, n_help="max subsequence index")
    sp.add_argument("--y", type=_ints, default=None, help="spatial step (default 0)")
    sp.add_argument("--h", type=int, default=1, help="time step")

    sp = sub.add_parser("mu", help="shape constant estimate")
    _add_common(sp, n_default=64)
    sp.add_argument("--x", type=_ints, default=None, help="direction (default e1)")
    sp.add_argument("--n-list", dest="n_list", type=_ints, default=[1, 2, 4])
    sp.add_argument("--hull", action="store_true", help="hull-radius cross-check method")

    sp = sub.add_parser("martingale", help="normalized-count trace")
    _add_common(sp, n_default=20)
    sp.add_argument("--levels", type=_ints, default=None)

    sp = sub.add_parser("tau-tail", help="extinction-time tail fit")
    _add_common(sp, n_default=128, n_help="extinction cap")
    sp.add_argument("--calibrate", action="store_true",
                    help="scan p for the survival target instead of fitting")

    sp = sub.add_parser("oracle-check", help="exact DP vs brute-force enumeration")
    _add_common(sp, n_default=8)
    sp.add_argument("--seeds", type=int, default=50)

    sp = sub.add_parser("bench", help="compare compiled and python kernel backends")
    _add_common(sp, n_default=256)
    sp.add_argument("--repeats", type=int, default=3)

    sp = sub.add_parser("replay", help="rerun a manifest and verify digests")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", default=None)
    return ap


def _finalize_opts(args: argparse.Namespace) -> dict:
    opts = {k: v for k, v in vars(args).items() if k not in ("command", "out")}
    if opts.get("p") is None:
        opts["p"] = estimators.DEFAULT_P[opts["d"]]
    if args.command in ("sigma", "profile", "mu") and opts.get("horizon") is None:
        opts["horizon"] = dynamics.DEFAULT_HORIZON
    if args.command == "sigma" and not opts.get("x"):
        raise SystemExit(2)
    if args.command == "subseq" and opts.get("y") is None:
        opts["y"] = [0] * opts["d"]
    if args.command == "mu" and opts.get("x") is None:
        opts["x"] = [1] + [0] * (opts["d"] - 1)
    if args.command == "count":
        if opts.get("region") == "box":
            opts["region_lo_int"] = [int(v) for v in opts["region_lo"]]
            opts["region_hi_int"] = [int(v) for v in opts["region_hi"]]
    return opts


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "replay":
            result = replay_manifest(args.manifest, args.out)
            print(json.dumps(result, sort_keys=True, indent=2))
            return 0 if result["identical"] else 1
        opts = _finalize_opts(args)
        manifest_path = run_command(args.command, opts, args.out)
        print(manifest_path)
        return 0
    except ResourceLimitError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 3
    except SamplingError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 4
    except OpgrowthError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
