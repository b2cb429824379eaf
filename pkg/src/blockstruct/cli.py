"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 internal invariant violation
(including a failed equivalence check). Set ``BLOCKSTRUCT_LOG_LEVEL`` to
``DEBUG``/``INFO``/``WARNING`` to control log output on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import formats
from .annealing import InitDistribution, anneal
from .config import ConfigError, RunConfig, read_config_file, resolve
from .formats import FormatError
from .linalg import ChannelBundle
from .runtime import (
    InconsistentSystemError,
    build_system,
    infer,
    redistribute_update,
    reference_forward,
    verify_equivalence,
)
from .structure import CycleError, StructuralPredicate, analyze
from .training import build_co_occurrence, coupling_partition, generate_planted_system

log = logging.getLogger("blockstruct")

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2


class InvariantViolation(RuntimeError):
    pass


# helpers ----------------------------------------------------------------------

def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _ingest(path, cfg: RunConfig):
    """Read weights and apply the edge convention; outputs are always in the default convention."""
    w = formats.read_weights(path)
    if cfg.edge_convention == "transposed":
        w = w.map(lambda m: m.T.copy()) if isinstance(w, ChannelBundle) else w.T.copy()
    return w


def _single_vector(path, n: int, name: str) -> np.ndarray:
    v = formats.read_vectors(path)
    if v.shape[0] != 1:
        raise FormatError(f"{path}: expected exactly one {name} vector, found {v.shape[0]}")
    if v.shape[1] != n:
        raise FormatError(f"{path}: {name} has length {v.shape[1]}, system has n={n}")
    return v[0]


class _Timer:
    def __init__(self):
        self.marks: dict[str, float] = {}

    def time(self, key, fn, *args, **kw):
        t0 = time.perf_counter()
        out = fn(*args, **kw)
        self.marks[key] = time.perf_counter() - t0
        return out


def _finish_report(report: dict, timer: _Timer, args) -> dict:
    # timings vary run to run, so they only appear on request
    if getattr(args, "timings", False):
        report["timings_s"] = timer.marks
    return report


# commands ----------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ps = generate_planted_system(
        cfg.n, cfg.k_blocks, cfg.steps, cfg.eta, cfg.seed, cfg.init_sigma, cfg.p_active, cfg.bridge_prob
    )
    formats.write_mtx(out / "w0.mtx", ps.w0)
    formats.write_mtx(out / "w_final.mtx", ps.w_final)
    formats.write_trace(out / "trace.txt", ps.trace)
    part = coupling_partition(build_co_occurrence(ps.trace))
    _write_json(out / "truth.json", {
        "n": cfg.n,
        "k_blocks": cfg.k_blocks,
        "seed": cfg.seed,
        "steps": cfg.steps,
        "init_sigma": cfg.init_sigma,
        "classes": [[i + 1 for i in g] for g in ps.groups],
        "coupling_classes": [[i + 1 for i in c] for c in part.classes],
    })
    log.info("simulated n=%d blocks=%d steps=%d into %s", cfg.n, cfg.k_blocks, cfg.steps, out)
    return EXIT_OK


def cmd_anneal(cfg: RunConfig, args) -> int:
    timer = _Timer()
    w = _ingest(args.weights, cfg)
    if isinstance(w, ChannelBundle) and w.k != cfg.k_channels:
        raise FormatError(f"{args.weights}: bundle has k={w.k}, config says k_channels={cfg.k_channels}")
    f0 = InitDistribution(cfg.sigma) if cfg.sigma is not None else None
    result = timer.time("anneal", anneal, w, f0, cfg.test_config())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(result.weights, ChannelBundle):
        formats.write_bundle_dir(out / "annealed", result.weights)
    else:
        formats.write_mtx(out / "annealed.mtx", result.weights)
    _write_json(out / "report.json", _finish_report(dict(result.report), timer, args))
    log.info("kept %d of %d edges", result.report["kept"], result.kept.size)
    return EXIT_OK


def cmd_analyze(cfg: RunConfig, args) -> int:
    timer = _Timer()
    w = _ingest(args.input, cfg)
    kind = cfg.predicate
    if kind == "classification-based":
        raise ConfigError("the classification-based predicate is library-only; anneal first and use abs-threshold")
    if isinstance(w, ChannelBundle) and kind == "abs-threshold":
        kind = "channel-norm-threshold"
    try:
        a = timer.time("analyze", analyze, w, StructuralPredicate(kind, cfg.epsilon), cfg.isolated_last)
    except CycleError as exc:
        raise InvariantViolation(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    formats.write_node_table(out / "node_table.csv", a.table)
    formats.write_mtx(out / "condensation.mtx", a.condensation.m_c)
    formats.write_permutation(out / "permutation.csv", a.permutation)
    g_sizes = np.bincount(a.table.g_tag)[1:]
    _write_json(out / "analysis.json", _finish_report({
        "n": a.table.n,
        "k": a.condensation.k,
        "weak_components": int(g_sizes.size),
        "component_sizes": [int(s) for s in g_sizes],
        "isolated": int(np.count_nonzero(a.table.i_tag)),
        "layers": int(a.table.l_tag.max()),
        "predicate": kind,
        "epsilon": cfg.epsilon,
        "isolated_last": cfg.isolated_last,
    }, timer, args))
    log.info("n=%d k=%d", a.table.n, a.condensation.k)
    return EXIT_OK


def cmd_restructure(cfg: RunConfig, args) -> int:
    w = _ingest(args.annealed, cfg)
    adir = Path(args.analysis)
    table = formats.read_node_table(adir / "node_table.csv")
    p = formats.read_permutation(adir / "permutation.csv")
    system = build_system(w, table, p)
    system.meta.update({"nonlinearity": cfg.nonlinearity, "isolated_last": cfg.isolated_last, "updates": 0})
    formats.write_system(args.out, system)
    log.info("wrote %d blocks, %d dormant", len(system.blocks), system.dormant.k)
    return EXIT_OK


def _nonlinearity(cfg: RunConfig, system, explicit: set) -> str:
    if "nonlinearity" in explicit:
        return cfg.nonlinearity
    return system.meta.get("nonlinearity", cfg.nonlinearity)


def cmd_infer(cfg: RunConfig, args) -> int:
    timer = _Timer()
    system = formats.read_system(args.bundle)
    xs = formats.read_vectors(args.x)
    if xs.shape[1] != system.n:
        raise FormatError(f"{args.x}: vectors have length {xs.shape[1]}, bundle has n={system.n}")
    sigma = _nonlinearity(cfg, system, args.explicit)
    ys = timer.time("infer", lambda: np.array([infer(system, x, sigma) for x in xs]))
    formats.write_vectors(args.out, ys)
    report = {
        "n": system.n,
        "batch": int(xs.shape[0]),
        "block_sizes": [b.size for b in system.blocks],
        "dormant": int(system.dormant.k),
        "nonlinearity": sigma,
    }
    status = EXIT_OK
    if args.verify:
        w = _ingest(args.verify, cfg)
        ref = np.array([reference_forward(w, x, sigma) for x in xs])
        dev = np.abs(ys - ref)
        report["max_abs_deviation"] = float(dev.max(initial=0.0))
        report["mismatches"] = int(np.count_nonzero(dev > cfg.tolerance))
        if report["mismatches"]:
            status = EXIT_INVARIANT
    report = _finish_report(report, timer, args)
    if args.report:
        _write_json(Path(args.report), report)
    print(json.dumps(report, sort_keys=True))
    return status


def cmd_update(cfg: RunConfig, args) -> int:
    system = formats.read_system(args.bundle)
    x = _single_vector(args.x, system.n, "x")
    g = _single_vector(args.g, system.n, "g")
    updated = redistribute_update(system, x, g, cfg.eta)
    formats.write_system(args.out or args.bundle, updated)
    log.info("update %d applied", updated.meta["updates"])
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    timer = _Timer()
    system = formats.read_system(args.bundle)
    w = _ingest(args.weights, cfg)
    n_ref = w.n if isinstance(w, ChannelBundle) else w.shape[0]
    if n_ref != system.n:
        raise FormatError(f"{args.weights}: n={n_ref}, bundle has n={system.n}")
    sigma = _nonlinearity(cfg, system, args.explicit)
    rep = timer.time("verify", verify_equivalence, system, w, cfg.trials, cfg.seed, sigma, cfg.tolerance)
    report = _finish_report({
        "trials": rep.trials,
        "max_abs_deviation": rep.max_abs_deviation,
        "mismatches": rep.mismatches,
        "tolerance": rep.tolerance,
        "equivalent": rep.equivalent,
        "block_sizes": [b.size for b in system.blocks],
        "nonlinearity": sigma,
    }, timer, args)
    if args.report:
        _write_json(Path(args.report), report)
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK if rep.equivalent else EXIT_INVARIANT


# argument parsing ----------------------------------------------------------------

_COMMANDS = {
    "simulate": cmd_simulate,
    "anneal": cmd_anneal,
    "analyze": cmd_analyze,
    "restructure": cmd_restructure,
    "infer": cmd_infer,
    "update": cmd_update,
    "verify": cmd_verify,
}

# config keys exposed as flags on each subcommand
_FLAGS = {
    "simulate": ["n", "k_blocks", "steps", "eta", "seed", "init_sigma", "p_active", "bridge_prob"],
    "anneal": ["alpha", "delta0", "tau", "bins", "sigma", "k_channels", "retain_suppressed", "edge_convention"],
    "analyze": ["epsilon", "predicate", "isolated_last", "edge_convention"],
    "restructure": ["nonlinearity", "isolated_last", "edge_convention"],
    "infer": ["nonlinearity", "tolerance", "edge_convention"],
    "update": ["eta"],
    "verify": ["trials", "seed", "tolerance", "nonlinearity", "edge_convention"],
}

_CHOICES = {
    "edge_convention": ["standard", "transposed"],
    "predicate": list(StructuralPredicate.KINDS),
}


def _add_config_flags(p: argparse.ArgumentParser, keys) -> None:
    from .config import _TYPES

    for key in keys:
        flag = "--" + key.replace("_", "-")
        if _TYPES[key] is bool:
            p.add_argument(flag, dest=key, action="store_const", const=True, default=None)
        else:
            p.add_argument(flag, dest=key, type=_TYPES[key], default=None, choices=_CHOICES.get(key))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS keeps a subcommand's defaults from hiding a flag given before it
    common.add_argument("--config", default=argparse.SUPPRESS, help="flat key = value config file")
    common.add_argument("--print-config", action="store_true", default=argparse.SUPPRESS,
                        help="print the resolved config and exit")
    common.add_argument("--timings", action="store_true", default=argparse.SUPPRESS,
                        help="include wall-clock timings in reports")

    parser = argparse.ArgumentParser(
        prog="blockstruct", parents=[common],
        description="Anneal, analyze and restructure parameter matrices into independent blocks.",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("simulate", parents=[common], help="generate a planted local-update training run")
    p.add_argument("--out", required=True)

    p = sub.add_parser("anneal", parents=[common], help="zero statistically insignificant edges")
    p.add_argument("weights")
    p.add_argument("--out", required=True)

    p = sub.add_parser("analyze", parents=[common], help="node table, condensation and permutation")
    p.add_argument("input")
    p.add_argument("--out", required=True)

    p = sub.add_parser("restructure", parents=[common], help="build a block bundle from annealed weights")
    p.add_argument("annealed")
    p.add_argument("analysis", help="directory written by 'analyze'")
    p.add_argument("--out", required=True)

    p = sub.add_parser("infer", parents=[common], help="run a bundle on one or more input vectors")
    p.add_argument("bundle")
    p.add_argument("x")
    p.add_argument("--out", required=True, help="output vectors (.csv)")
    p.add_argument("--verify", metavar="WEIGHTS", help="compare with the dense operator")
    p.add_argument("--report")

    p = sub.add_parser("update", parents=[common], help="apply a gradient update blockwise")
    p.add_argument("bundle")
    p.add_argument("x")
    p.add_argument("g")
    p.add_argument("--out", help="write to a new bundle instead of in place")

    p = sub.add_parser("verify", parents=[common], help="random-input equivalence check")
    p.add_argument("bundle")
    p.add_argument("weights")
    p.add_argument("--report")

    for name, keys in _FLAGS.items():
        _add_config_flags(sub.choices[name], keys)
    return parser


def _configure_logging() -> None:
    level = os.environ.get("BLOCKSTRUCT_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("config", "print_config", "timings"):
        if not hasattr(args, name):
            setattr(args, name, None if name == "config" else False)
    try:
        file_values = read_config_file(args.config) if args.config else {}
        overrides = {k: getattr(args, k) for k in _FLAGS.get(args.command, []) if getattr(args, k) is not None}
        cfg = resolve(file_values, overrides)
        args.explicit = set(file_values) | set(overrides)
        if args.print_config:
            sys.stdout.write(cfg.dump())
            return EXIT_OK
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_INPUT
        return _COMMANDS[args.command](cfg, args)
    except (InvariantViolation, CycleError) as exc:
        print(f"error: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (FormatError, ConfigError, InconsistentSystemError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - last-resort guard
        log.exception("unexpected failure")
        print(f"error: internal failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
